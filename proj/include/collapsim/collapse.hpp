#pragma once

#include <utility>

#include "collapsim/state.hpp"

namespace collapsim {

/// Gaussian localization operator (alpha/pi)^(1/4) exp(-alpha (x - x_c)^2 / 2),
/// acting plainly on the constant-time hyperplanes of the frame with
/// rapidity eta; on every other surface it is defined by unitary transport.
struct CollapseKernel {
    double x_c = 0.0;    // center, in frame-eta spatial coordinates
    double alpha = 1.0;  // inverse localization width squared
    double eta = 0.0;    // frame carrying the plain Gaussian action

    CollapseKernel() = default;
    CollapseKernel(double x_c_, double alpha_, double eta_ = 0.0)
        : x_c(x_c_), alpha(alpha_), eta(eta_) {
        if (!(alpha > 0.0)) throw std::invalid_argument("collapse alpha must be positive");
    }

    double factor(double x) const {
        const double d = x - x_c;
        return std::pow(alpha / std::numbers::pi, 0.25) * std::exp(-0.5 * alpha * d * d);
    }
};

/// Kernel of frame eta centered on the spacetime point x.
CollapseKernel kernel_at(const SpacetimePoint& x, double alpha, double eta = 0.0);

/// Pointwise Gaussian localization of psi about k.x_c. Returns the
/// normalized post-collapse state and the squared norm before
/// normalization (the Born factor of the flash location law).
std::pair<SurfaceWaveFunction, double> apply_collapse(const SurfaceWaveFunction& psi,
                                                      const CollapseKernel& k);

/// Collapse of the covariant amplitude at spacetime point x: restrict to
/// the frame-k.eta hyperplane through x, localize, lift back. The result
/// is the post-collapse state on every flat hyperplane through x at once.
std::pair<CovariantAmplitude, double> transported_collapse(const CovariantAmplitude& phi,
                                                           const SpacetimePoint& x,
                                                           const CollapseKernel& k);

/// Same collapse routed through the constant-time hyperplane of frame
/// via_eta through x, with the kernel transported there unitarily. Agrees
/// with transported_collapse up to discretization error; exercised by the
/// frame-transport consistency checks.
std::pair<CovariantAmplitude, double> transported_collapse_via(const CovariantAmplitude& phi,
                                                               const SpacetimePoint& x,
                                                               const CollapseKernel& k,
                                                               double via_eta);

/// || (L1 L2~ - L2~ L1) phi || where L2~ is the x2 collapse transported to
/// the hyperplane through x1. A measured diagnostic: the transported
/// Gaussian is not exactly microcausal relativistically.
double microcausality_defect(const CovariantAmplitude& phi, const SpacetimePoint& x1,
                             const SpacetimePoint& x2, double alpha);

}  // namespace collapsim
