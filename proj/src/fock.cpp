#include "collapsim/fock.hpp"

#include <Eigen/SVD>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace collapsim {

namespace {

std::mutex basis_mutex;
std::map<std::pair<int, int>, std::shared_ptr<const FockBasis>> basis_cache;

int parity_below(std::uint64_t mask, int site) {
    const std::uint64_t below = mask & ((std::uint64_t{1} << site) - 1);
    return (std::popcount(below) & 1) ? -1 : 1;
}

}  // namespace

std::shared_ptr<const FockBasis> FockBasis::get(int n_modes, int n_fermions) {
    if (n_modes < 1 || n_modes > 64) throw std::invalid_argument("n_modes must be 1..64");
    if (n_fermions < 0) throw std::invalid_argument("n_fermions must be nonnegative");
    std::lock_guard<std::mutex> lock(basis_mutex);
    auto key = std::make_pair(n_modes, n_fermions);
    auto it = basis_cache.find(key);
    if (it != basis_cache.end()) return it->second;

    auto basis = std::make_shared<FockBasis>();
    basis->n_modes = n_modes;
    basis->n_fermions = n_fermions;
    if (n_fermions <= n_modes) {
        if (n_fermions == 0) {
            basis->masks.push_back(0);
        } else {
            // Gosper's hack enumerates masks of fixed popcount in order
            std::uint64_t v = (n_fermions == 64) ? ~std::uint64_t{0}
                                                 : (std::uint64_t{1} << n_fermions) - 1;
            const std::uint64_t limit =
                (n_modes == 64) ? ~std::uint64_t{0}
                                : (std::uint64_t{1} << n_modes) - 1;
            while (v <= limit) {
                basis->masks.push_back(v);
                const std::uint64_t c = v & (~v + 1);
                const std::uint64_t r = v + c;
                if (r == 0) break;  // wrapped past the top mask
                v = (((r ^ v) >> 2) / c) | r;
            }
        }
        basis->index.reserve(basis->masks.size() * 2);
        for (int i = 0; i < basis->dim(); ++i) basis->index.emplace(basis->masks[i], i);
    }
    basis_cache.emplace(key, basis);
    return basis;
}

FockVector FockVector::zero(int n_modes, int n_fermions) {
    FockVector v;
    v.basis = FockBasis::get(n_modes, n_fermions);
    v.amp.assign(v.basis->dim(), 0.0);
    return v;
}

FockVector FockVector::vacuum(int n_modes) {
    FockVector v = zero(n_modes, 0);
    v.amp[0] = 1.0;
    return v;
}

double norm(const FockVector& v) {
    double s = 0.0;
    for (const cplx& a : v.amp) s += std::norm(a);
    return std::sqrt(s);
}

FockVector normalize(const FockVector& v) {
    const double n = norm(v);
    if (!(n > 1e-140)) throw std::runtime_error("null state");
    FockVector out = v;
    for (cplx& a : out.amp) a /= n;
    return out;
}

cplx inner(const FockVector& a, const FockVector& b) {
    if (a.basis->n_modes != b.basis->n_modes || a.basis->n_fermions != b.basis->n_fermions)
        throw std::invalid_argument("incompatible states");
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.amp.size(); ++i) s += std::conj(a.amp[i]) * b.amp[i];
    return s;
}

FockVector creation_apply(const FockVector& v, int site) {
    if (site < 0 || site >= v.basis->n_modes)
        throw std::invalid_argument("site index out of range");
    FockVector out = FockVector::zero(v.basis->n_modes, v.basis->n_fermions + 1);
    if (out.basis->dim() == 0) return out;
    const std::uint64_t bit = std::uint64_t{1} << site;
    for (int i = 0; i < v.basis->dim(); ++i) {
        if (v.amp[i] == 0.0) continue;
        const std::uint64_t m = v.basis->masks[i];
        if (m & bit) continue;  // Pauli exclusion
        const int j = out.basis->index.at(m | bit);
        out.amp[j] += static_cast<double>(parity_below(m, site)) * v.amp[i];
    }
    return out;
}

FockVector annihilation_apply(const FockVector& v, int site) {
    if (site < 0 || site >= v.basis->n_modes)
        throw std::invalid_argument("site index out of range");
    if (v.basis->n_fermions == 0) return FockVector::zero(v.basis->n_modes, 0);
    FockVector out = FockVector::zero(v.basis->n_modes, v.basis->n_fermions - 1);
    const std::uint64_t bit = std::uint64_t{1} << site;
    for (int i = 0; i < v.basis->dim(); ++i) {
        if (v.amp[i] == 0.0) continue;
        const std::uint64_t m = v.basis->masks[i];
        if (!(m & bit)) continue;
        const int j = out.basis->index.at(m & ~bit);
        out.amp[j] += static_cast<double>(parity_below(m, site)) * v.amp[i];
    }
    return out;
}

std::vector<double> number_diagonal(const FockBasis& basis, int lo, int hi) {
    if (lo < 0 || hi > basis.n_modes || lo > hi)
        throw std::invalid_argument("region out of range");
    std::uint64_t region = 0;
    for (int s = lo; s < hi; ++s) region |= std::uint64_t{1} << s;
    std::vector<double> diag(basis.masks.size());
    for (std::size_t i = 0; i < basis.masks.size(); ++i)
        diag[i] = static_cast<double>(std::popcount(basis.masks[i] & region));
    return diag;
}

FockVector apply_diagonal(const FockVector& v, const std::vector<double>& diag) {
    if (diag.size() != v.amp.size()) throw std::invalid_argument("incompatible states");
    FockVector out = v;
    for (std::size_t i = 0; i < out.amp.size(); ++i) out.amp[i] *= diag[i];
    return out;
}

FockVector BlobOperator::apply(const FockVector& v) const {
    FockVector out = v;
    for (auto it = sites.rbegin(); it != sites.rend(); ++it)
        out = creation_apply(out, *it);
    return out;
}

BlobOperator blob_operator(int center, int count, int eps, int n_modes) {
    if (count < 1) throw std::invalid_argument("blob count must be positive");
    if ((count * eps) % 2 != 0)
        throw std::invalid_argument("blob offsets must land on lattice sites");
    BlobOperator op;
    const int start = center - (count * eps) / 2;
    for (int n = 0; n < count; ++n) {
        const int site = start + n * eps;
        if (site < 0 || site >= n_modes)
            throw std::invalid_argument("blob site out of range");
        op.sites.push_back(site);
    }
    return op;
}

int required_modes(const BlobSpec& spec, int n_fermions) {
    return 2 * (spec.d + spec.r) + (n_fermions / 2 - 1) * spec.eps + 1;
}

void validate_blob_spec(const BlobSpec& spec, int n_fermions, int n_modes) {
    std::ostringstream err;
    if (n_fermions < 2 || n_fermions % 2 != 0)
        err << "N must be an even count >= 2 (got " << n_fermions << ")";
    else if (!(spec.alpha > 0.0))
        err << "alpha must be positive";
    else if (n_fermions * spec.eps / 2.0 > spec.r / 2.0)
        err << "scale separation N*eps/2 <= r/2 violated: " << n_fermions * spec.eps / 2.0
            << " > " << spec.r / 2.0;
    else if (spec.r > spec.d / 2.0)
        err << "scale separation r <= d/2 violated: " << spec.r << " > " << spec.d / 2.0;
    else if (1.0 / std::sqrt(spec.alpha) > spec.r / 4.0)
        err << "collapse width 1/sqrt(alpha) <= r/4 violated: " << 1.0 / std::sqrt(spec.alpha)
            << " > " << spec.r / 4.0;
    else if (required_modes(spec, n_fermions) > n_modes)
        err << "lattice too small for blob geometry: need " << required_modes(spec, n_fermions)
            << " modes, have " << n_modes;
    else
        return;
    throw std::invalid_argument(err.str());
}

MacroSystem initial_superposition(const BlobSpec& spec, int n_modes, int n_fermions) {
    validate_blob_spec(spec, n_fermions, n_modes);
    MacroSystem sys;
    sys.spec = spec;
    sys.n_modes = n_modes;
    sys.n_fermions = n_fermions;
    const int count = n_fermions / 2;
    sys.origin = spec.d + spec.r + (count * spec.eps) / 2;

    sys.a1 = blob_operator(sys.origin - spec.d - spec.r, count, spec.eps, n_modes);
    sys.a2 = blob_operator(sys.origin - spec.d + spec.r, count, spec.eps, n_modes);
    sys.b1 = blob_operator(sys.origin + spec.d - spec.r, count, spec.eps, n_modes);
    sys.b2 = blob_operator(sys.origin + spec.d + spec.r, count, spec.eps, n_modes);

    const FockVector vac = FockVector::vacuum(n_modes);
    FockVector right = sys.b1.apply(vac);
    {
        const FockVector r2 = sys.b2.apply(vac);
        for (std::size_t i = 0; i < right.amp.size(); ++i) right.amp[i] += r2.amp[i];
    }
    FockVector state = sys.a1.apply(right);
    {
        const FockVector s2 = sys.a2.apply(right);
        for (std::size_t i = 0; i < state.amp.size(); ++i) state.amp[i] += s2.amp[i];
    }
    for (cplx& a : state.amp) a *= 0.5;
    sys.state = std::move(state);
    return sys;
}

std::pair<FockVector, double> collapse_J(const FockVector& v, double x_c, double alpha,
                                         int origin) {
    const FockBasis& basis = *v.basis;
    std::vector<double> site_factor(basis.n_modes);
    for (int s = 0; s < basis.n_modes; ++s) {
        const double d = x_c - static_cast<double>(s - origin);
        site_factor[s] = std::exp(-0.5 * alpha * d * d);
    }
    FockVector out = v;
    double weight = 0.0;
    for (int i = 0; i < basis.dim(); ++i) {
        double lambda = 0.0;
        std::uint64_t m = basis.masks[i];
        while (m) {
            const int s = std::countr_zero(m);
            lambda += site_factor[s];
            m &= m - 1;
        }
        out.amp[i] *= lambda;
        weight += std::norm(out.amp[i]);
    }
    if (!(weight > 1e-300)) throw std::runtime_error("collapse onto null support");
    const double inv = 1.0 / std::sqrt(weight);
    for (cplx& a : out.amp) a *= inv;
    return {std::move(out), weight};
}

std::vector<double> schmidt_fock(const FockVector& v, int split) {
    const FockBasis& basis = *v.basis;
    if (split < 0 || split > basis.n_modes) throw std::invalid_argument("split out of range");
    const std::uint64_t left_region = (split == 64) ? ~std::uint64_t{0}
                                                    : (std::uint64_t{1} << split) - 1;

    // canonical ascending order puts all left-site creations first, so the
    // bipartite matrix carries no reordering signs
    std::map<std::uint64_t, int> left_ids, right_ids;
    for (int i = 0; i < basis.dim(); ++i) {
        if (v.amp[i] == 0.0) continue;
        left_ids.emplace(basis.masks[i] & left_region, 0);
        right_ids.emplace(basis.masks[i] >> split, 0);
    }
    int nl = 0, nr = 0;
    for (auto& kv : left_ids) kv.second = nl++;
    for (auto& kv : right_ids) kv.second = nr++;
    if (nl == 0 || nr == 0) return {};

    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(nl, nr);
    for (int i = 0; i < basis.dim(); ++i) {
        if (v.amp[i] == 0.0) continue;
        m(left_ids[basis.masks[i] & left_region], right_ids[basis.masks[i] >> split]) +=
            v.amp[i];
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    return {svd.singularValues().data(),
            svd.singularValues().data() + svd.singularValues().size()};
}

MacroReport macro_failure_report(const BlobSpec& spec, int n_modes, int n_fermions) {
    MacroSystem sys = initial_superposition(spec, n_modes, n_fermions);
    const FockBasis& basis = *sys.state.basis;

    MacroReport rep;
    rep.spec = spec;
    rep.n_modes = n_modes;
    rep.n_fermions = n_fermions;
    rep.origin = sys.origin;

    auto eigen_check = [&](const std::vector<double>& diag, double expected, bool& exact) {
        exact = true;
        double value = expected;
        for (int i = 0; i < basis.dim(); ++i) {
            if (sys.state.amp[i] == 0.0) continue;
            value = diag[i];
            if (diag[i] != expected) exact = false;
        }
        return value;
    };
    rep.n_total_eigen = eigen_check(number_diagonal(basis, 0, n_modes),
                                    static_cast<double>(n_fermions), rep.n_total_exact);
    rep.n_left_eigen = eigen_check(number_diagonal(basis, 0, sys.origin),
                                   n_fermions / 2.0, rep.n_left_exact);

    // region strictly left of -d: not an eigenstate
    {
        const std::vector<double> diag = number_diagonal(basis, 0, sys.origin - spec.d);
        const FockVector nv = apply_diagonal(sys.state, diag);
        const cplx expct = inner(sys.state, nv);
        FockVector resid = nv;
        for (std::size_t i = 0; i < resid.amp.size(); ++i)
            resid.amp[i] -= expct * sys.state.amp[i];
        rep.n_a1_residual = norm(resid);
    }

    // amplification collapses object 1 at -d + r (U ~ identity on this scale)
    auto [after, weight] = collapse_J(sys.state, static_cast<double>(-spec.d + spec.r),
                                      spec.alpha, sys.origin);
    rep.collapse_weight = weight;

    const FockVector vac = FockVector::vacuum(n_modes);
    FockVector target = sys.a2.apply(sys.b1.apply(vac));
    {
        const FockVector t2 = sys.a2.apply(sys.b2.apply(vac));
        for (std::size_t i = 0; i < target.amp.size(); ++i) target.amp[i] += t2.amp[i];
    }
    target = normalize(target);
    rep.fidelity_after_collapse = std::abs(inner(target, after));

    const FockVector a1b1 = sys.a1.apply(sys.b1.apply(vac));
    rep.suppressed_branch_amp = std::abs(inner(normalize(a1b1), after));

    // split between the B1 and B2 regions witnesses object 2's surviving
    // superposition (the split at the system midpoint would see the
    // product structure A2 (x) (B1 + B2) instead)
    rep.object2_schmidt = schmidt_fock(after, sys.origin + spec.d);
    rep.earliest_flash_near_branch = 2.0 * (spec.d - spec.r);
    rep.earliest_flash_far_branch = 2.0 * spec.d;
    return rep;
}

}  // namespace collapsim
