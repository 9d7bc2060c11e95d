#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "collapsim/collapse.hpp"
#include "collapsim/rng.hpp"
#include "collapsim/state.hpp"

using namespace collapsim;

namespace {

const SpatialGrid kGrid = SpatialGrid::standard();

SurfaceWaveFunction two_packet_state(double sep, double w, double weight_left = 0.5) {
    // built directly in position space; the tails underflow to exact zero
    // far from the packets
    SurfaceWaveFunction psi{kGrid, HyperplaneLabel::lab(),
                            std::vector<cplx>(kGrid.n_points), 1.0, Dispersion::Relativistic};
    for (int j = 0; j < kGrid.n_points; ++j) {
        const double dl = kGrid.x(j) + sep / 2, dr = kGrid.x(j) - sep / 2;
        psi.amp[j] = std::sqrt(weight_left) * std::exp(-dl * dl / (2 * w * w)) +
                     std::sqrt(1.0 - weight_left) * std::exp(-dr * dr / (2 * w * w));
    }
    return normalize(psi);
}

double amp_distance(const CovariantAmplitude& a, const CovariantAmplitude& b) {
    CovariantAmplitude d = a;
    for (int k = 0; k < a.grid.n_points; ++k) d.amp[k] -= b.amp[k];
    return norm(d);
}

}  // namespace

TEST_CASE("apply_collapse on a point-localized state") {
    const double alpha = 0.25;
    const int jc = 512;
    SurfaceWaveFunction delta{kGrid, HyperplaneLabel::lab(),
                              std::vector<cplx>(kGrid.n_points, 0.0), 1.0,
                              Dispersion::Relativistic};
    delta.amp[jc] = 1.0 / std::sqrt(kGrid.dx);
    auto [out, weight] = apply_collapse(delta, CollapseKernel(kGrid.x(jc), alpha));
    // the Gaussian evaluated at its center: weight = sqrt(alpha/pi), state unchanged
    CHECK(weight == doctest::Approx(std::sqrt(alpha / std::numbers::pi)).epsilon(1e-12));
    CHECK(std::abs(out.amp[jc] - delta.amp[jc]) < 1e-12);
}

TEST_CASE("apply_collapse suppresses the far branch; weight matches the closed form") {
    const double sep = 40.0, w = 2.0, alpha = 1.0;
    SurfaceWaveFunction psi = two_packet_state(sep, w);
    auto [out, weight] = apply_collapse(psi, CollapseKernel(-sep / 2, alpha));

    // right-branch mass after collapse
    double right_mass = 0.0;
    for (int j = 0; j < kGrid.n_points; ++j)
        if (kGrid.x(j) > 0.0) right_mass += std::norm(out.amp[j]) * kGrid.dx;
    CHECK(std::sqrt(right_mass) < 1e-8);

    // closed-form Gaussian quadrature oracle:
    //   integral g_a(x-c)^2 N(x; c, w^2/2) dx = sqrt(a/pi) / sqrt(1 + a w^2)
    const double oracle = 0.5 * std::sqrt(alpha / std::numbers::pi) / std::sqrt(1 + alpha * w * w);
    CHECK(weight == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("apply_collapse error paths") {
    SurfaceWaveFunction psi = two_packet_state(10.0, 2.0);
    CHECK_THROWS_WITH((void)apply_collapse(psi, CollapseKernel(80.0, 1.0)),
                      "collapse onto null support");
    // kernel narrower than two grid spacings
    CHECK_THROWS_WITH((void)apply_collapse(psi, CollapseKernel(0.0, 100.0)), "under-resolved");
    // kernel frame must match the hyperplane
    CHECK_THROWS((void)apply_collapse(psi, CollapseKernel(0.0, 1.0, 0.5)));
    CHECK_THROWS(CollapseKernel(0.0, -1.0));
}

TEST_CASE("collapse idempotence direction over random superpositions") {
    RngStream rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        SurfaceWaveFunction psi =
            two_packet_state(rng.uniform(10.0, 40.0), rng.uniform(1.5, 3.0),
                             rng.uniform(0.2, 0.8));
        CollapseKernel k(rng.uniform(-20.0, 20.0), rng.uniform(0.1, 1.0));
        try {
            auto [once, w1] = apply_collapse(psi, k);
            auto [twice, w2] = apply_collapse(once, k);
            const double infid1 = 1.0 - std::abs(inner(once, psi));
            const double infid2 = 1.0 - std::abs(inner(twice, once));
            CHECK(infid2 <= infid1 + 1e-12);
        } catch (const std::exception&) {
            // a kernel far from all support is a legitimate draw; skip it
        }
    }
}

TEST_CASE("weight additivity across far-separated branches") {
    const double sep = 50.0, w = 2.0, alpha = 0.5, wl = 0.3;
    SurfaceWaveFunction psi = two_packet_state(sep, w, wl);
    // Born probability of a flash landing on either half line, integrated
    // exactly over collapse centers (erf form)
    auto cell_prob = [&](double lo, double hi) {
        double p = 0.0;
        for (int j = 0; j < kGrid.n_points; ++j) {
            const double x = kGrid.x(j);
            const double m = 0.5 * (std::erf(std::sqrt(alpha) * (hi - x)) -
                                    std::erf(std::sqrt(alpha) * (lo - x)));
            p += m * std::norm(psi.amp[j]) * kGrid.dx;
        }
        return p;
    };
    const double inf = std::numeric_limits<double>::infinity();
    const double p_left = cell_prob(-inf, 0.0), p_right = cell_prob(0.0, inf);
    CHECK(p_left + p_right == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p_left == doctest::Approx(wl).epsilon(0.01));
    CHECK(p_right == doctest::Approx(1.0 - wl).epsilon(0.01));
}

TEST_CASE("transported collapse: definition unwinds on the lab hyperplane") {
    CovariantAmplitude phi = gaussian_packet(kGrid, 1.0, Dispersion::Relativistic, 1.0, 3.0, 0.2);
    const SpacetimePoint x{0.0, 2.0};
    CollapseKernel k = kernel_at(x, 0.25, 0.0);
    auto [via_op, w1] = transported_collapse(phi, x, k);
    auto [psi2, w2] = apply_collapse(restrict_to(phi, HyperplaneLabel::lab(0.0)), k);
    CHECK(std::abs(w1 - w2) < 1e-12);
    CHECK(amp_distance(via_op, lift(psi2)) < 1e-12);
}

TEST_CASE("transported collapse: kernel center must sit on the flash point") {
    CovariantAmplitude phi = gaussian_packet(kGrid, 1.0, Dispersion::Relativistic, 0.0, 3.0, 0.0);
    const SpacetimePoint x{0.5, 1.0};
    CHECK_THROWS_WITH((void)transported_collapse(phi, x, CollapseKernel(5.0, 0.25, 0.0)),
                      "kernel center does not match collapse point");
}

TEST_CASE("post-collapse state and weight are surface independent") {
    RngStream rng(19);
    for (int trial = 0; trial < 10; ++trial) {
        CovariantAmplitude phi =
            gaussian_packet(kGrid, 1.0, Dispersion::Relativistic, rng.uniform(-8.0, 8.0),
                            rng.uniform(2.5, 4.0), rng.uniform(-0.6, 0.6));
        const SpacetimePoint x{rng.uniform(-2.0, 2.0), rng.uniform(-10.0, 10.0)};
        CollapseKernel k = kernel_at(x, 0.25, rng.uniform(-0.6, 0.6));
        const double via_a = 0.0, via_b = rng.uniform(0.2, 0.7);
        auto [pa, wa] = transported_collapse_via(phi, x, k, via_a);
        auto [pb, wb] = transported_collapse_via(phi, x, k, via_b);
        CHECK(amp_distance(pa, pb) < 1e-8);
        CHECK(std::abs(wa - wb) < 1e-9);
    }
}

TEST_CASE("microcausality: same-hyperplane multiplications commute exactly") {
    CovariantAmplitude nr = gaussian_packet(kGrid, 1.0, Dispersion::Nonrelativistic, 0.0, 2.0, 0.0);
    CHECK(microcausality_defect(nr, {0.0, -2.0}, {0.0, 2.0}, 1.0) <= 1e-12);
    CovariantAmplitude rel = gaussian_packet(kGrid, 1.0, Dispersion::Relativistic, 0.0, 2.0, 0.0);
    CHECK(microcausality_defect(rel, {0.0, -2.0}, {0.0, 2.0}, 1.0) <= 1e-12);
}

TEST_CASE("microcausality: defect decays with spatial separation") {
    CovariantAmplitude phi = gaussian_packet(kGrid, 1.0, Dispersion::Relativistic, 0.0, 2.0, 0.0);
    const double far = microcausality_defect(phi, {0.0, -10.0}, {2.0, 10.0}, 1.0);
    CHECK(far < 1e-3);
    const double near = microcausality_defect(phi, {0.0, -0.25}, {0.2, 0.25}, 1.0);
    MESSAGE("defect at 0.5 Compton separation: ", near);  // diagnostic, no pass/fail
    CHECK(near > far);
}

TEST_CASE("microcausality requires space-like separation") {
    CovariantAmplitude phi = gaussian_packet(kGrid, 1.0, Dispersion::Relativistic, 0.0, 2.0, 0.0);
    CHECK_THROWS_WITH((void)microcausality_defect(phi, {0.0, 0.0}, {3.0, 1.0}, 1.0),
                      "requires space-like separation");
}
