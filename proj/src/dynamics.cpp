#include "collapsim/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace collapsim {

CovariantAmplitude evolve(const CovariantAmplitude& phi, const HyperplaneLabel& from,
                          const HyperplaneLabel& to) {
    if (from == to) return phi;
    if (phi.dispersion == Dispersion::Nonrelativistic && (from.eta != 0.0 || to.eta != 0.0))
        throw std::runtime_error("boost undefined for Galilean mode");

    if (from.eta == to.eta) {
        // Parallel surfaces: the connecting map is the frame-eta kinetic
        // phase, diagonal in lab momentum. Exact, no interpolation.
        const double dt = to.t - from.t;
        const double ch = std::cosh(from.eta), sh = std::sinh(from.eta);
        CovariantAmplitude out = phi;
        for (int k = 0; k < phi.grid.n_points; ++k) {
            const double frame_energy =
                (phi.dispersion == Dispersion::Relativistic)
                    ? phi.energy(k) * ch - phi.grid.p(k) * sh
                    : phi.energy(k);
            out.amp[k] *= std::polar(1.0, -frame_energy * dt);
        }
        return out;
    }
    return from_surface_data(surface_data(phi, to), from, phi.grid, phi.mass, phi.dispersion);
}

CovariantAmplitude Propagator::evolve(const CovariantAmplitude& phi, const HyperplaneLabel& from,
                                      const HyperplaneLabel& to) const {
    if (phi.dispersion != dispersion || phi.mass != mass)
        throw std::invalid_argument("incompatible states");
    return collapsim::evolve(phi, from, to);
}

SurfaceWaveFunction free_evolve(const SurfaceWaveFunction& psi, double dt) {
    if (dt == 0.0) return psi;
    std::vector<cplx> data = data_from_position(psi.amp, psi.grid, psi.mass, psi.dispersion);
    for (int k = 0; k < psi.grid.n_points; ++k) {
        const double p = psi.grid.p(k);
        const double e = (psi.dispersion == Dispersion::Relativistic)
                             ? std::sqrt(p * p + psi.mass * psi.mass)
                             : p * p / (2.0 * psi.mass);
        data[k] *= std::polar(1.0, -e * dt);
    }
    SurfaceWaveFunction out = psi;
    out.amp = position_from_data(data, psi.grid, psi.mass, psi.dispersion);
    out.hyperplane.t += dt;
    return out;
}

double covariance_defect(const CovariantAmplitude& phi, const HyperplaneLabel& sigma1,
                         const HyperplaneLabel& sigma2, double eta) {
    if (phi.dispersion != Dispersion::Relativistic)
        throw std::runtime_error("boost undefined for Galilean mode");

    // lab-frame path
    CovariantAmplitude lab_path = evolve(phi, sigma1, sigma2);

    // boosted-frame path: re-express state and surface labels in the frame
    // of rapidity eta, evolve there, come back
    CovariantAmplitude tilde = boost_amplitude(phi, -eta);
    HyperplaneLabel s1p(sigma1.eta - eta, sigma1.t);
    HyperplaneLabel s2p(sigma2.eta - eta, sigma2.t);
    CovariantAmplitude boosted_path = boost_amplitude(evolve(tilde, s1p, s2p), eta);

    CovariantAmplitude diff = lab_path;
    for (int k = 0; k < phi.grid.n_points; ++k) diff.amp[k] -= boosted_path.amp[k];
    return norm(diff);
}

}  // namespace collapsim
