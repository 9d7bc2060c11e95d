#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "collapsim/collapse.hpp"
#include "collapsim/rng.hpp"
#include "collapsim/state.hpp"

namespace collapsim {

/// N distinguishable particles on a common grid at a fixed lab foliation,
/// amplitudes dense over grid^N (particle 0 is the slowest index). Total
/// dimension is capped; the amplification experiment uses the exact
/// two-branch representation below instead of a dense N=8 array.
struct ProductState {
    SpatialGrid grid;
    HyperplaneLabel hyperplane;
    int n_particles = 1;
    std::vector<cplx> amp;
    bool separable = false;
    double mass = 1.0;
    Dispersion dispersion = Dispersion::Nonrelativistic;

    std::size_t dim() const { return amp.size(); }
    std::size_t stride(int particle) const;
    double cell_volume() const;  // dx^N
};

double norm(const ProductState& psi);
ProductState normalize(const ProductState& psi);

/// Gaussian packet directly on a hyperplane (for building factors).
SurfaceWaveFunction surface_gaussian(const SpatialGrid& grid, const HyperplaneLabel& sigma,
                                     double mass, Dispersion disp, double x0, double w,
                                     double p0 = 0.0);

/// Tensor product of normalized single-particle factors on one hyperplane.
ProductState product_state(const std::vector<SurfaceWaveFunction>& factors);

/// (|L>|L> + |R>|R>)/sqrt(2). Requires |<L|R>| < 1e-6, else
/// "branches not distinguishable".
ProductState bell_state(const SurfaceWaveFunction& L, const SurfaceWaveFunction& R);

/// Per-particle free evolution by dt on the lab foliation.
ProductState evolve_product(const ProductState& psi, double dt);

/// I x ... x L(x_c) x ... x I applied to particle i, normalized; the
/// returned weight is the Born factor.
std::pair<ProductState, double> collapse_particle(const ProductState& psi, int particle,
                                                  double x_c, double alpha);

/// Marginal position density of one particle.
std::vector<double> marginal_density(const ProductState& psi, int particle);

/// Born pdf over flash centers for particle i (rho_i convolved with the
/// squared collapse kernel), normalized over the grid.
std::vector<double> particle_flash_pdf(const ProductState& psi, int particle, double alpha);

/// Unnormalized Born density ||L_i(c) psi||^2 over flash centers c; its
/// grid integral is 1 up to quadrature error for a normalized state.
std::vector<double> particle_flash_born(const ProductState& psi, int particle, double alpha);

/// Reduced density matrix of one particle; Tr(rho * dx) = 1.
Eigen::MatrixXcd reduced_density(const ProductState& psi, int particle);

/// 0.5 * sum |eig(rho_a - rho_b)| * dx for discrete density kernels.
double trace_distance(const Eigen::MatrixXcd& rho_a, const Eigen::MatrixXcd& rho_b, double dx);

/// Schmidt coefficients across the bipartition {particles < k} | {rest};
/// squares sum to 1.
std::vector<double> schmidt_coefficients(const ProductState& psi, int k);

/// Schmidt rank 1 across every single-particle bipartition (largest
/// discarded coefficient < 1e-10).
bool certify_separable(const ProductState& psi);

/// One half-open cell per particle; infinities allowed.
struct OutcomeCell {
    double lo;
    double hi;
};

/// | P(joint flash tuple in the cells) - prod_i P_i(cell_i) | with the
/// cell probabilities integrated exactly (erf) over collapse centers.
double factorization_defect(const ProductState& psi, const std::vector<OutcomeCell>& cells,
                            double alpha);

// ---------------------------------------------------------------------------
// frame-comparison obstruction (entangled initial data cannot be posed on a
// boosted hyperplane without knowing future flash outcomes)
// ---------------------------------------------------------------------------

struct FrameComparisonResult {
    double reduced1_trace_distance = 0.0;  // particle 1, between the two realizations
    double joint_trace_distance = 0.0;
    SpacetimePoint y2_left;
    SpacetimePoint y2_right;
};

/// Simulates two realizations that differ only in the stochastic outcome
/// Y2 of particle 2's next flash (left vs right), both lying below
/// sigma_prime in the boosted frame, and returns the distance between the
/// resulting states. Throws "invalid foliation geometry" when sigma_prime
/// cannot separate the events as required.
FrameComparisonResult frame_comparison_defect(const ProductState& psi0,
                                              const SpacetimePoint& x1,
                                              const SpacetimePoint& x2,
                                              const HyperplaneLabel& sigma_prime, double tau,
                                              double alpha, RngStream& rng);

struct NoSignalingResult {
    double p_left_with = 0.0;     // particle-1 left-branch frequency, particle 2 collapsed first
    double p_left_without = 0.0;  // same, no particle-2 collapse
    double sigma = 0.0;           // deviation in pooled standard errors
    long trials = 0;
};

/// Particle-1 flash statistics averaged over Y2 vs with particle 2 left
/// untouched.
NoSignalingResult no_signaling_check(const ProductState& psi0, double tau, double alpha,
                                     long trials, RngStream& rng);

// ---------------------------------------------------------------------------
// interaction obstruction
// ---------------------------------------------------------------------------

/// Pair potential V(x_i - x_j) scaled by strength; a Hermitian
/// multiplication operator on the two-particle grid.
struct InteractionSpec {
    std::function<double(double)> pair_potential;
    double strength = 0.0;
};

struct TwoParticleOperators {
    Eigen::MatrixXcd hamiltonian;       // H0 + strength * V
    Eigen::MatrixXcd free_hamiltonian;  // H0
    Eigen::MatrixXcd evolution;         // exp(-i H dt)
    Eigen::MatrixXcd free_evolution;    // exp(-i H0 dt)
    Eigen::MatrixXcd collapse_op;       // Gaussian multiplication on one particle
};

/// Explicit dense operators on a coarse two-particle grid (n_points <= 32).
TwoParticleOperators build_interaction_system(const SpatialGrid& grid, double mass,
                                              const InteractionSpec& spec, int particle,
                                              double x_c, double alpha, double dt);

/// ||[A, B]||_F / (||A||_F ||B||_F)
double commutator_defect(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

struct InteractionDefect {
    double interaction_picture = 0.0;  // [W_free^dag W, L], the entangling residual
    double raw = 0.0;                  // [W, L] with the full evolution
};

InteractionDefect interaction_factorization_defect(const SpatialGrid& grid, double mass,
                                                   const InteractionSpec& spec, int particle,
                                                   double x_c, double alpha, double dt);

// ---------------------------------------------------------------------------
// amplification
// ---------------------------------------------------------------------------

struct AmplificationResult {
    double rate = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    long trials = 0;
};

/// Decay rate of the center-of-mass superposition
/// (|all at -a> + |all at +a>)/sqrt(2) of N particles under GRW flashes,
/// estimated from the first-localization time over seeded trials. Exact
/// two-branch algebra (the state stays a sum of two products under every
/// applied operation).
AmplificationResult amplification_rate(int n_particles, double separation, double tau,
                                       double alpha, std::uint64_t seed, long trials,
                                       const SpatialGrid& grid, double mass,
                                       double packet_width);

}  // namespace collapsim
