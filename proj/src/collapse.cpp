#include "collapsim/collapse.hpp"

#include <cmath>
#include <stdexcept>

namespace collapsim {

namespace {

constexpr double kNullWeight = 1e-300;

void check_kernel_resolution(const CollapseKernel& k, const SpatialGrid& grid) {
    if (1.0 / std::sqrt(k.alpha) < 2.0 * grid.dx)
        throw std::runtime_error("under-resolved");
}

}  // namespace

CollapseKernel kernel_at(const SpacetimePoint& x, double alpha, double eta) {
    return CollapseKernel(x.frame_position(eta), alpha, eta);
}

std::pair<SurfaceWaveFunction, double> apply_collapse(const SurfaceWaveFunction& psi,
                                                      const CollapseKernel& k) {
    if (psi.hyperplane.eta != k.eta)
        throw std::invalid_argument("collapse kernel frame does not match hyperplane");
    check_kernel_resolution(k, psi.grid);

    SurfaceWaveFunction out = psi;
    double weight = 0.0;
    for (int j = 0; j < psi.grid.n_points; ++j) {
        out.amp[j] *= k.factor(psi.grid.x(j));
        weight += std::norm(out.amp[j]);
    }
    weight *= psi.grid.dx;
    if (!(weight > kNullWeight)) throw std::runtime_error("collapse onto null support");
    const double inv = 1.0 / std::sqrt(weight);
    for (cplx& a : out.amp) a *= inv;
    return {std::move(out), weight};
}

std::pair<CovariantAmplitude, double> transported_collapse(const CovariantAmplitude& phi,
                                                           const SpacetimePoint& x,
                                                           const CollapseKernel& k) {
    const double center = x.frame_position(k.eta);
    if (std::abs(center - k.x_c) > 1e-9 * std::max(1.0, std::abs(center)))
        throw std::invalid_argument("kernel center does not match collapse point");
    HyperplaneLabel sigma(k.eta, x.frame_time(k.eta));
    SurfaceWaveFunction psi = restrict_to(phi, sigma);
    auto [collapsed, weight] = apply_collapse(psi, k);
    return {lift(collapsed), weight};
}

std::pair<CovariantAmplitude, double> transported_collapse_via(const CovariantAmplitude& phi,
                                                               const SpacetimePoint& x,
                                                               const CollapseKernel& k,
                                                               double via_eta) {
    HyperplaneLabel sigma_via(via_eta, x.frame_time(via_eta));
    // route onto the via surface, transport the kernel action through its
    // native frame, return on the via surface
    CovariantAmplitude mid = lift(restrict_to(phi, sigma_via));
    auto [collapsed, weight] = transported_collapse(mid, x, k);
    CovariantAmplitude back = lift(restrict_to(collapsed, sigma_via));
    return {std::move(back), weight};
}

double microcausality_defect(const CovariantAmplitude& phi, const SpacetimePoint& x1,
                             const SpacetimePoint& x2, double alpha) {
    if (x1.interval2(x2) >= 0.0)
        throw std::runtime_error("requires space-like separation");
    CollapseKernel k1(x1.x, alpha), k2(x2.x, alpha);
    check_kernel_resolution(k1, phi.grid);

    const HyperplaneLabel s1 = HyperplaneLabel::lab(x1.t);
    const double dt = x2.t - x1.t;
    const int n = phi.grid.n_points;

    // unnormalized linear maps on frame-lab surface data at sigma1
    auto localize = [&](std::vector<cplx> d, const CollapseKernel& k) {
        std::vector<cplx> pos = position_from_data(d, phi.grid, phi.mass, phi.dispersion);
        for (int j = 0; j < n; ++j) pos[j] *= k.factor(phi.grid.x(j));
        return data_from_position(pos, phi.grid, phi.mass, phi.dispersion);
    };
    auto shift_time = [&](std::vector<cplx> d, double delta) {
        CovariantAmplitude tmp{phi.grid, {}, phi.mass, phi.dispersion};
        for (int k = 0; k < n; ++k) d[k] *= std::polar(1.0, -tmp.energy(k) * delta);
        return d;
    };
    auto transported_l2 = [&](std::vector<cplx> d) {
        return shift_time(localize(shift_time(std::move(d), dt), k2), -dt);
    };

    std::vector<cplx> d0 = surface_data(phi, s1);
    std::vector<cplx> a = localize(transported_l2(d0), k1);
    std::vector<cplx> b = transported_l2(localize(d0, k1));

    CovariantAmplitude diff{phi.grid, std::vector<cplx>(n), phi.mass, phi.dispersion};
    for (int k = 0; k < n; ++k) diff.amp[k] = a[k] - b[k];
    return norm(diff);
}

}  // namespace collapsim
