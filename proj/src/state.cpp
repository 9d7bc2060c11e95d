#include "collapsim/state.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "collapsim/fft.hpp"

namespace collapsim {

namespace {

constexpr double kBandEdge = 0.875;       // start of the guard band, in units of p_nyquist
constexpr double kBandLimit = 1e-6;       // tolerated norm fraction in the guard band
constexpr double kSeamLimit = 1e-8;       // tolerated mass on the wrap margin
constexpr double kNullNorm = 1e-140;

double energy_of(double p, double mass, Dispersion disp) {
    if (disp == Dispersion::Relativistic) return std::sqrt(p * p + mass * mass);
    return p * p / (2.0 * mass);
}

void check_compatible(const CovariantAmplitude& a, const CovariantAmplitude& b) {
    if (!(a.grid == b.grid) || a.dispersion != b.dispersion || a.mass != b.mass)
        throw std::invalid_argument("incompatible states");
}

}  // namespace

double norm(const SurfaceWaveFunction& psi) {
    double s = 0.0;
    for (const cplx& a : psi.amp) s += std::norm(a);
    return std::sqrt(s * psi.grid.dx);
}

double norm(const CovariantAmplitude& phi) {
    double s = 0.0;
    for (int k = 0; k < phi.grid.n_points; ++k) s += std::norm(phi.amp[k]) * phi.measure(k);
    return std::sqrt(s);
}

cplx inner(const SurfaceWaveFunction& a, const SurfaceWaveFunction& b) {
    if (!(a.grid == b.grid) || !(a.hyperplane == b.hyperplane))
        throw std::invalid_argument("incompatible states");
    cplx s = 0.0;
    for (std::size_t j = 0; j < a.amp.size(); ++j) s += std::conj(a.amp[j]) * b.amp[j];
    return s * a.grid.dx;
}

cplx inner(const CovariantAmplitude& a, const CovariantAmplitude& b) {
    check_compatible(a, b);
    cplx s = 0.0;
    for (int k = 0; k < a.grid.n_points; ++k)
        s += std::conj(a.amp[k]) * b.amp[k] * a.measure(k);
    return s;
}

SurfaceWaveFunction normalize(const SurfaceWaveFunction& psi) {
    const double n = norm(psi);
    if (!(n > kNullNorm)) throw std::runtime_error("null state");
    SurfaceWaveFunction out = psi;
    for (cplx& a : out.amp) a /= n;
    return out;
}

CovariantAmplitude normalize(const CovariantAmplitude& phi) {
    const double n = norm(phi);
    if (!(n > kNullNorm)) throw std::runtime_error("null state");
    CovariantAmplitude out = phi;
    for (cplx& a : out.amp) a /= n;
    return out;
}

double band_fraction(const std::vector<cplx>& data, const SpatialGrid& grid, double mass,
                     Dispersion disp) {
    const double edge = kBandEdge * grid.p_nyquist();
    double total = 0.0, outer = 0.0;
    for (int k = 0; k < grid.n_points; ++k) {
        const double p = grid.p(k);
        const double w = (disp == Dispersion::Relativistic)
                             ? grid.dp() / (2.0 * energy_of(p, mass, disp))
                             : grid.dp();
        const double m = std::norm(data[k]) * w;
        total += m;
        if (std::abs(p) >= edge) outer += m;
    }
    return total > 0.0 ? outer / total : 0.0;
}

double seam_fraction(const std::vector<cplx>& psi, const SpatialGrid& grid) {
    const int margin = std::max(2, grid.n_points / 128);
    double total = 0.0, edge = 0.0;
    for (int j = 0; j < grid.n_points; ++j) {
        const double m = std::norm(psi[j]);
        total += m;
        if (j < margin || j >= grid.n_points - margin) edge += m;
    }
    return total > 0.0 ? edge / total : 0.0;
}

CovariantAmplitude boost_amplitude(const CovariantAmplitude& phi, double eta) {
    if (phi.dispersion != Dispersion::Relativistic)
        throw std::runtime_error("boost undefined for Galilean mode");
    if (eta == 0.0) return phi;

    const int n = phi.grid.n_points;
    const double dx = phi.grid.dx;
    const double ch = std::cosh(eta), sh = std::sinh(eta);

    // Coefficients of the trigonometric interpolant
    //   phi(p) = sum_j c_j exp(i p (j - n/2) dx),
    // exact for states supported inside the box.
    std::vector<cplx> c(phi.amp);
    for (int k = 1; k < n; k += 2) c[k] = -c[k];
    fft::forward(c);
    const double inv_n = 1.0 / n;
    for (cplx& v : c) v *= inv_n;

    const double p_nyq = phi.grid.p_nyquist();
    CovariantAmplitude out = phi;
    for (int k = 0; k < n; ++k) {
        const double p = phi.grid.p(k);
        const double e = std::sqrt(p * p + phi.mass * phi.mass);
        const double q = p * ch - e * sh;
        // outside the principal band the interpolant wraps; a band-limited
        // amplitude is zero there
        if (std::abs(q) >= p_nyq) {
            out.amp[k] = 0.0;
            continue;
        }
        // Horner evaluation of sum_j c_j z^j at z = exp(i q dx).
        const cplx z = std::polar(1.0, q * dx);
        cplx acc = 0.0;
        for (int j = n - 1; j >= 0; --j) acc = acc * z + c[j];
        out.amp[k] = acc * std::polar(1.0, -q * (n / 2) * dx);
    }
    return out;
}

std::vector<cplx> surface_data(const CovariantAmplitude& phi, const HyperplaneLabel& sigma) {
    if (phi.dispersion == Dispersion::Nonrelativistic && sigma.eta != 0.0)
        throw std::runtime_error("boost undefined for Galilean mode");
    const CovariantAmplitude in_frame =
        (sigma.eta != 0.0) ? boost_amplitude(phi, -sigma.eta) : phi;
    std::vector<cplx> data(in_frame.amp);
    if (sigma.t != 0.0) {
        for (int k = 0; k < phi.grid.n_points; ++k)
            data[k] *= std::polar(1.0, -in_frame.energy(k) * sigma.t);
    }
    return data;
}

CovariantAmplitude from_surface_data(std::vector<cplx> data, const HyperplaneLabel& sigma,
                                     const SpatialGrid& grid, double mass, Dispersion disp) {
    if (disp == Dispersion::Nonrelativistic && sigma.eta != 0.0)
        throw std::runtime_error("boost undefined for Galilean mode");
    CovariantAmplitude phi{grid, std::move(data), mass, disp};
    if (sigma.t != 0.0) {
        for (int k = 0; k < grid.n_points; ++k)
            phi.amp[k] *= std::polar(1.0, phi.energy(k) * sigma.t);
    }
    if (sigma.eta != 0.0) phi = boost_amplitude(phi, sigma.eta);
    return phi;
}

std::vector<cplx> position_from_data(const std::vector<cplx>& data, const SpatialGrid& grid,
                                     double mass, Dispersion disp) {
    const int n = grid.n_points;
    std::vector<cplx> work(data);
    for (int k = 0; k < n; ++k) {
        if (disp == Dispersion::Relativistic)
            work[k] /= std::sqrt(2.0 * energy_of(grid.p(k), mass, disp));
        work[k] *= std::polar(1.0, grid.p(k) * grid.x_min);
    }
    fft::backward(work);
    const double scale = grid.dp() / std::sqrt(2.0 * std::numbers::pi);
    for (cplx& v : work) v *= scale;
    return work;
}

std::vector<cplx> data_from_position(const std::vector<cplx>& psi, const SpatialGrid& grid,
                                     double mass, Dispersion disp) {
    const int n = grid.n_points;
    std::vector<cplx> work(psi);
    fft::forward(work);
    const double scale = grid.dx / std::sqrt(2.0 * std::numbers::pi);
    for (int k = 0; k < n; ++k) {
        work[k] *= scale * std::polar(1.0, -grid.p(k) * grid.x_min);
        if (disp == Dispersion::Relativistic)
            work[k] *= std::sqrt(2.0 * energy_of(grid.p(k), mass, disp));
    }
    return work;
}

SurfaceWaveFunction restrict_to(const CovariantAmplitude& phi, const HyperplaneLabel& sigma) {
    std::vector<cplx> data = surface_data(phi, sigma);
    if (band_fraction(data, phi.grid, phi.mass, phi.dispersion) > kBandLimit)
        throw std::runtime_error("under-resolved");
    std::vector<cplx> pos = position_from_data(data, phi.grid, phi.mass, phi.dispersion);
    if (seam_fraction(pos, phi.grid) > kSeamLimit)
        throw std::runtime_error("seam violation");
    SurfaceWaveFunction psi{phi.grid, sigma, std::move(pos), phi.mass, phi.dispersion};
    return normalize(psi);
}

SurfaceWaveFunction restrict_to(const CovariantAmplitude& phi, const HyperplaneLabel& sigma,
                                const SpatialGrid& grid) {
    if (!(grid == phi.grid)) throw std::invalid_argument("incompatible states");
    return restrict_to(phi, sigma);
}

CovariantAmplitude lift(const SurfaceWaveFunction& psi) {
    std::vector<cplx> data = data_from_position(psi.amp, psi.grid, psi.mass, psi.dispersion);
    if (band_fraction(data, psi.grid, psi.mass, psi.dispersion) > kBandLimit)
        throw std::runtime_error("under-resolved");
    CovariantAmplitude phi =
        from_surface_data(std::move(data), psi.hyperplane, psi.grid, psi.mass, psi.dispersion);
    return normalize(phi);
}

SurfaceWaveFunction boost_state(const SurfaceWaveFunction& psi, double eta) {
    if (psi.dispersion != Dispersion::Relativistic)
        throw std::runtime_error("boost undefined for Galilean mode");
    CovariantAmplitude phi = lift(psi);
    HyperplaneLabel relabeled(psi.hyperplane.eta + eta, psi.hyperplane.t);
    return restrict_to(phi, relabeled);
}

CovariantAmplitude gaussian_packet(const SpatialGrid& grid, double mass, Dispersion disp,
                                   double x0, double w, double p0) {
    CovariantAmplitude phi{grid, std::vector<cplx>(grid.n_points), mass, disp};
    for (int k = 0; k < grid.n_points; ++k) {
        const double p = grid.p(k);
        const double g = std::exp(-0.5 * (p - p0) * (p - p0) * w * w);
        cplx a = g * std::polar(1.0, -p * x0);
        if (disp == Dispersion::Relativistic) a *= std::sqrt(2.0 * energy_of(p, mass, disp));
        phi.amp[k] = a;
    }
    return normalize(phi);
}

CovariantAmplitude plane_wave(const SpatialGrid& grid, double mass, Dispersion disp, int k) {
    CovariantAmplitude phi{grid, std::vector<cplx>(grid.n_points, 0.0), mass, disp};
    phi.amp[k] = 1.0;
    return normalize(phi);
}

double momentum_mean(const CovariantAmplitude& phi) {
    double s = 0.0, tot = 0.0;
    for (int k = 0; k < phi.grid.n_points; ++k) {
        const double m = std::norm(phi.amp[k]) * phi.measure(k);
        s += phi.grid.p(k) * m;
        tot += m;
    }
    return s / tot;
}

double position_mean(const SurfaceWaveFunction& psi) {
    double s = 0.0, tot = 0.0;
    for (int j = 0; j < psi.grid.n_points; ++j) {
        const double m = std::norm(psi.amp[j]);
        s += psi.grid.x(j) * m;
        tot += m;
    }
    return s / tot;
}

double position_variance(const SurfaceWaveFunction& psi) {
    const double mu = position_mean(psi);
    double s = 0.0, tot = 0.0;
    for (int j = 0; j < psi.grid.n_points; ++j) {
        const double m = std::norm(psi.amp[j]);
        const double d = psi.grid.x(j) - mu;
        s += d * d * m;
        tot += m;
    }
    return s / tot;
}

double fidelity(const CovariantAmplitude& a, const CovariantAmplitude& b) {
    return std::abs(inner(a, b)) / (norm(a) * norm(b));
}

}  // namespace collapsim
