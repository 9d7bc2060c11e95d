#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

namespace collapsim {

using cplx = std::complex<double>;

/// Fixed-particle-number fermionic occupation basis over M lattice modes,
/// bitmask-encoded, ordered by ascending mask value. Dimension C(M, N).
struct FockBasis {
    int n_modes = 0;
    int n_fermions = 0;
    std::vector<std::uint64_t> masks;
    std::unordered_map<std::uint64_t, int> index;

    int dim() const { return static_cast<int>(masks.size()); }

    /// Cached shared basis for (M, N). M <= 64.
    static std::shared_ptr<const FockBasis> get(int n_modes, int n_fermions);
};

struct FockVector {
    std::shared_ptr<const FockBasis> basis;
    std::vector<cplx> amp;

    static FockVector zero(int n_modes, int n_fermions);
    static FockVector vacuum(int n_modes);
};

double norm(const FockVector& v);
FockVector normalize(const FockVector& v);
cplx inner(const FockVector& a, const FockVector& b);

/// a^dag(site): canonical anticommutation with the sign from the ascending
/// site ordering. The zero vector is a valid result (Pauli exclusion).
FockVector creation_apply(const FockVector& v, int site);
FockVector annihilation_apply(const FockVector& v, int site);

/// Occupation count in the site interval [lo, hi), diagonal in this basis.
std::vector<double> number_diagonal(const FockBasis& basis, int lo, int hi);
FockVector apply_diagonal(const FockVector& v, const std::vector<double>& diag);

/// Product of `count` creation operators at sites
/// center - count*eps/2 + n*eps, n = 0..count-1 (each blob carries half of
/// the N fermions; on the vacuum the result is a single basis vector).
struct BlobOperator {
    std::vector<int> sites;
    FockVector apply(const FockVector& v) const;
};
BlobOperator blob_operator(int center, int count, int eps, int n_modes);

/// d, r, eps in lattice sites; alpha the collapse inverse-width-squared.
/// Scale separation N*eps/2 << r << d is enforced as
/// N*eps/2 <= r/2 and r <= d/2, and the collapse must resolve the
/// superposition: 1/sqrt(alpha) <= r/4.
struct BlobSpec {
    int d = 12;
    int r = 4;
    int eps = 1;
    double alpha = 1.0;
};

/// Throws naming the violated inequality.
void validate_blob_spec(const BlobSpec& spec, int n_fermions, int n_modes);

/// Minimum lattice size for the blob geometry: 2(d+r) + (N/2-1) eps + 1.
int required_modes(const BlobSpec& spec, int n_fermions);

struct MacroSystem {
    FockVector state;  // (A1 + A2)(B1 + B2)|0> / 2
    BlobSpec spec;
    int n_modes = 0;
    int n_fermions = 0;
    int origin = 0;  // site index of physical position x = 0
    BlobOperator a1, a2, b1, b2;

    double site_position(int site) const { return static_cast<double>(site - origin); }
};

/// The four-branch initial superposition of two spatially superposed
/// objects (amplitudes of modulus 1/2 on exactly four basis states).
MacroSystem initial_superposition(const BlobSpec& spec, int n_modes, int n_fermions);

/// Diagonal collapse operator sum_y f_alpha(x_c - y) n(y) with
/// f_alpha(x) = exp(-alpha x^2 / 2), positions in lattice units measured
/// from `origin`. Returns the normalized state and the Born weight.
std::pair<FockVector, double> collapse_J(const FockVector& v, double x_c, double alpha,
                                         int origin);

/// Schmidt coefficients across the site bipartition {site < split | rest}.
std::vector<double> schmidt_fock(const FockVector& v, int split);

struct MacroReport {
    BlobSpec spec;
    int n_modes = 0;
    int n_fermions = 0;
    int origin = 0;
    bool n_total_exact = false;   // N_T eigenvalue == N on every branch
    bool n_left_exact = false;    // N_A eigenvalue == N/2 on every branch
    double n_total_eigen = 0.0;
    double n_left_eigen = 0.0;
    double n_a1_residual = 0.0;   // || N_A1 psi - <N_A1> psi ||, not an eigenstate
    double collapse_weight = 0.0;
    double fidelity_after_collapse = 0.0;  // vs A2 (B1 + B2)|0> / sqrt(2)
    double suppressed_branch_amp = 0.0;    // |<A1 B1 | psi_after>|
    std::vector<double> object2_schmidt;   // expect (1/sqrt2, 1/sqrt2)
    double earliest_flash_near_branch = 0.0;  // light-cone bound seed -> B1: 2(d - r)
    double earliest_flash_far_branch = 0.0;   // seed -> B2: 2d
};

/// Full two-blob sequence: build, number-operator eigenvalue checks,
/// collapse at -d+r, fidelity and residual-superposition witnesses, and
/// the light-cone bounds for flashes reaching object 2.
MacroReport macro_failure_report(const BlobSpec& spec, int n_modes, int n_fermions);

}  // namespace collapsim
