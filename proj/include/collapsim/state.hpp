#pragma once

#include <complex>
#include <vector>

#include "collapsim/grid.hpp"

namespace collapsim {

using cplx = std::complex<double>;

enum class Dispersion { Nonrelativistic, Relativistic };

/// Frame-independent positive-energy momentum amplitude of a single
/// particle, anchored at the lab origin hyperplane (eta = 0, t = 0).
/// Samples live on the FFT-dual momentum grid of `grid`, natural order.
///
/// Relativistic amplitudes are normalized in the invariant inner product
/// sum conj(a) b dp / (2 E(p)); nonrelativistic ones in sum conj(a) b dp.
/// The wavefunction on any flat hyperplane is a derived view (restrict),
/// so a collapse written back through lift is defined on every surface
/// through the collapse point at once.
struct CovariantAmplitude {
    SpatialGrid grid;
    std::vector<cplx> amp;  // amp[k] at grid.p(k)
    double mass = 1.0;
    Dispersion dispersion = Dispersion::Relativistic;

    double energy(int k) const {
        const double p = grid.p(k);
        if (dispersion == Dispersion::Relativistic) return std::sqrt(p * p + mass * mass);
        return p * p / (2.0 * mass);
    }
    /// Invariant measure weight at sample k.
    double measure(int k) const {
        if (dispersion == Dispersion::Relativistic) return grid.dp() / (2.0 * energy(k));
        return grid.dp();
    }
};

/// Complex amplitudes on a spatial grid tagged with the flat hyperplane
/// they live on. mass/dispersion ride along so the state can be lifted
/// back to its covariant form.
struct SurfaceWaveFunction {
    SpatialGrid grid;
    HyperplaneLabel hyperplane;
    std::vector<cplx> amp;  // amp[j] at grid.x(j)
    double mass = 1.0;
    Dispersion dispersion = Dispersion::Relativistic;
};

// ---------------------------------------------------------------------------
// norms and inner products
// ---------------------------------------------------------------------------

double norm(const SurfaceWaveFunction& psi);
double norm(const CovariantAmplitude& phi);

/// Conjugate-linear in the first argument. Throws "incompatible states"
/// on mismatched grid or hyperplane.
cplx inner(const SurfaceWaveFunction& a, const SurfaceWaveFunction& b);
cplx inner(const CovariantAmplitude& a, const CovariantAmplitude& b);

SurfaceWaveFunction normalize(const SurfaceWaveFunction& psi);
CovariantAmplitude normalize(const CovariantAmplitude& phi);

// ---------------------------------------------------------------------------
// hyperplane restriction and its inverse
// ---------------------------------------------------------------------------

/// Unnormalized linear map to the frame-sigma momentum data of the state
/// on hyperplane sigma: boost by -sigma.eta, then the free phase
/// exp(-i E t). Building block for restrict/evolve/collapse transport.
std::vector<cplx> surface_data(const CovariantAmplitude& phi, const HyperplaneLabel& sigma);

/// Inverse of surface_data: undo the phase, boost back to the lab anchor.
CovariantAmplitude from_surface_data(std::vector<cplx> data, const HyperplaneLabel& sigma,
                                     const SpatialGrid& grid, double mass, Dispersion disp);

/// Newton-Wigner momentum -> position transform of frame-sigma data.
/// |psi(x)|^2 is then a probability density on the hyperplane.
std::vector<cplx> position_from_data(const std::vector<cplx>& data, const SpatialGrid& grid,
                                     double mass, Dispersion disp);
std::vector<cplx> data_from_position(const std::vector<cplx>& psi, const SpatialGrid& grid,
                                     double mass, Dispersion disp);

/// Wavefunction of phi on the hyperplane sigma, normalized there.
/// Throws "under-resolved" when more than 1e-6 of the invariant norm sits
/// in the outer momentum band, "seam violation" when the position support
/// touches the periodic wrap margin, "null state" on zero norm.
SurfaceWaveFunction restrict_to(const CovariantAmplitude& phi, const HyperplaneLabel& sigma);
SurfaceWaveFunction restrict_to(const CovariantAmplitude& phi, const HyperplaneLabel& sigma,
                                const SpatialGrid& grid);

/// Inverse of restrict_to: the covariant amplitude whose restriction to
/// psi.hyperplane reproduces psi.
CovariantAmplitude lift(const SurfaceWaveFunction& psi);

// ---------------------------------------------------------------------------
// Lorentz boosts
// ---------------------------------------------------------------------------

/// Active boost on the amplitude: (L_eta phi)(p) = phi(p cosh eta - E(p) sinh eta),
/// evaluated through the trigonometric interpolant of the samples (exact
/// for band-limited states). Unitary in the invariant inner product up to
/// discretization error. Relativistic only.
CovariantAmplitude boost_amplitude(const CovariantAmplitude& phi, double eta);

/// Same physical state re-expressed in the frame boosted by eta
/// (lift -> re-label frame -> restrict). Throws
/// "boost undefined for Galilean mode" for nonrelativistic dispersion.
SurfaceWaveFunction boost_state(const SurfaceWaveFunction& psi, double eta);

// ---------------------------------------------------------------------------
// diagnostics and construction helpers
// ---------------------------------------------------------------------------

/// Fraction of the squared norm carried by momenta |p| >= 0.875 p_nyquist.
double band_fraction(const std::vector<cplx>& data, const SpatialGrid& grid, double mass,
                     Dispersion disp);
/// Fraction of probability mass in the outer wrap margin of the box.
double seam_fraction(const std::vector<cplx>& psi, const SpatialGrid& grid);

/// Normalized Gaussian packet: Newton-Wigner position density centered at
/// x0 with amplitude width w, mean momentum p0.
CovariantAmplitude gaussian_packet(const SpatialGrid& grid, double mass, Dispersion disp,
                                   double x0, double w, double p0);

/// Unit-norm single momentum sample (plane wave) at grid index k.
CovariantAmplitude plane_wave(const SpatialGrid& grid, double mass, Dispersion disp, int k);

/// Mean momentum in the invariant density |phi|^2 dp/(2E).
double momentum_mean(const CovariantAmplitude& phi);
/// Mean and variance of position in |psi|^2 dx.
double position_mean(const SurfaceWaveFunction& psi);
double position_variance(const SurfaceWaveFunction& psi);

/// |<a|b>| in the invariant inner product (phase-insensitive overlap).
double fidelity(const CovariantAmplitude& a, const CovariantAmplitude& b);

}  // namespace collapsim
