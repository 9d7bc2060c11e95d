#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace collapsim {

/// Uniform periodic spatial grid in 1D. n_points must be a power of two
/// (spectral transforms) and at least 8.
struct SpatialGrid {
    double x_min = -100.0;
    double dx = 200.0 / 1024.0;
    int n_points = 1024;
    bool periodic = true;

    SpatialGrid() = default;
    SpatialGrid(double x_min_, double dx_, int n, bool periodic_ = true)
        : x_min(x_min_), dx(dx_), n_points(n), periodic(periodic_) {
        validate();
    }

    /// Grid of n points centered on x = 0 with the given total extent.
    static SpatialGrid centered(double extent, int n) {
        return SpatialGrid(-extent / 2.0, extent / n, n);
    }

    static SpatialGrid standard() { return centered(200.0, 1024); }

    void validate() const {
        if (n_points < 8 || (n_points & (n_points - 1)) != 0)
            throw std::invalid_argument("grid n_points must be a power of two >= 8");
        if (!(dx > 0.0) || !(n_points * dx > 0.0))
            throw std::invalid_argument("grid extent must be positive");
    }

    double x(int j) const { return x_min + j * dx; }
    double extent() const { return n_points * dx; }
    double x_max() const { return x_min + (n_points - 1) * dx; }

    // FFT-dual momentum grid, natural (wrapped) order.
    double dp() const { return 2.0 * std::numbers::pi / extent(); }
    double p(int k) const {
        const int s = (k < n_points / 2) ? k : k - n_points;
        return s * dp();
    }
    double p_nyquist() const { return std::numbers::pi / dx; }

    bool operator==(const SpatialGrid&) const = default;
};

/// A flat space-like hyperplane: the constant-time surface at coordinate
/// time t in the inertial frame of rapidity eta, with t measured from the
/// common lab origin event. Equal (eta, t) means the identical surface.
struct HyperplaneLabel {
    double eta = 0.0;
    double t = 0.0;

    HyperplaneLabel() = default;
    HyperplaneLabel(double eta_, double t_) : eta(eta_), t(t_) {
        if (!std::isfinite(eta) || !std::isfinite(t))
            throw std::invalid_argument("hyperplane label must be finite");
    }

    static HyperplaneLabel lab(double t = 0.0) { return HyperplaneLabel(0.0, t); }

    bool operator==(const HyperplaneLabel&) const = default;
};

/// A spacetime event in lab coordinates.
struct SpacetimePoint {
    double t = 0.0;
    double x = 0.0;

    /// Frame-eta coordinate time of this event.
    double frame_time(double eta) const { return t * std::cosh(eta) - x * std::sinh(eta); }
    /// Frame-eta spatial coordinate of this event.
    double frame_position(double eta) const { return x * std::cosh(eta) - t * std::sinh(eta); }

    /// Minkowski interval squared to another event, (+,-) signature.
    double interval2(const SpacetimePoint& o) const {
        const double dt = o.t - t, dxx = o.x - x;
        return dt * dt - dxx * dxx;
    }
};

}  // namespace collapsim
