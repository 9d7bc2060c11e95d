#pragma once

#include "collapsim/state.hpp"

namespace collapsim {

/// Free unitary evolution between flat hyperplanes, diagonal in momentum
/// space. No time stepping: exact for the free Hamiltonian.
struct Propagator {
    Dispersion dispersion = Dispersion::Relativistic;
    double mass = 1.0;

    CovariantAmplitude evolve(const CovariantAmplitude& phi, const HyperplaneLabel& from,
                              const HyperplaneLabel& to) const;
};

/// Amplitude that looks on `from` the way phi looks on `to` (the anchored
/// rendering of the surface-to-surface map). For parallel hyperplanes this
/// is the diagonal phase exp(-i (E cosh eta - p sinh eta) dt); the general
/// case composes the surface-data maps.
CovariantAmplitude evolve(const CovariantAmplitude& phi, const HyperplaneLabel& from,
                          const HyperplaneLabel& to);

/// Free evolution of a surface wavefunction by dt within its own frame
/// (spectral, exact); the hyperplane label advances by dt.
SurfaceWaveFunction free_evolve(const SurfaceWaveFunction& psi, double dt);

/// || U' phi - L^dag U L phi || where U is the lab-frame rendering of the
/// surface map sigma1 -> sigma2 and U' the same map computed in the frame
/// boosted by eta. Zero in the continuum; bounded by discretization error
/// (<= 1e-8 for band-limited states).
double covariance_defect(const CovariantAmplitude& phi, const HyperplaneLabel& sigma1,
                         const HyperplaneLabel& sigma2, double eta);

}  // namespace collapsim
