#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "collapsim/collapse.hpp"
#include "collapsim/rng.hpp"
#include "collapsim/state.hpp"

namespace collapsim {

/// A spacetime collapse point in lab coordinates with the sampled proper
/// 4-distance from the previous flash. Consecutive flashes are time-like,
/// future-directed: (dt)^2 - (dx)^2 = delta_T^2 with dt > 0.
struct FlashEvent {
    double t = 0.0;
    double x = 0.0;
    double delta_T = 0.0;
    long index = 0;
};

/// Time-like-ordered flash sequence of one particle, reproducible from
/// rng_seed. If a step failed the chain is truncated and the error kept.
struct FlashChain {
    FlashEvent seed_event;
    std::vector<FlashEvent> events;
    std::uint64_t rng_seed = 0;
    std::string truncation_error;

    /// seed followed by the generated events
    std::vector<FlashEvent> all_events() const;
};

/// Future hyperboloid of points at proper distance delta_T from the apex,
/// sampled at rapidities chi: (t, x) = apex + delta_T (cosh chi, sinh chi).
struct Hyperboloid {
    SpacetimePoint apex;
    double delta_T = 1.0;
    std::vector<double> chi_samples;

    SpacetimePoint point(double chi) const {
        return {apex.t + delta_T * std::cosh(chi), apex.x + delta_T * std::sinh(chi)};
    }
};

/// Normalized Born-rule location weights over the hyperboloid rapidities.
struct FlashPdf {
    Hyperboloid hyperboloid;
    std::vector<double> weights;       // sums to 1
    double edge_weight_fraction = 0.0; // weight in the outermost chi bins
};

/// Exponential variate with mean tau (Poisson point process interval).
double sample_interval(double tau, RngStream& rng);

/// Born weights ||L(x(chi)) U phi||^2 expressed on the lab hyperplane
/// through each candidate point, times the invariant line element
/// delta_T dchi, normalized to sum 1.
FlashPdf flash_location_pdf(const CovariantAmplitude& phi, const SpacetimePoint& apex,
                            double delta_T, double alpha, const std::vector<double>& chi_grid);

/// Symmetric uniform rapidity grid {0, +-dchi, ..., +-chi_max}.
std::vector<double> make_chi_grid(double chi_max, double dchi);
/// Uniform grid of integer multiples of dchi covering [chi_lo, chi_hi].
std::vector<double> make_chi_grid(double chi_lo, double chi_hi, double dchi);

struct FlashStep {
    FlashEvent event;
    CovariantAmplitude post_state;
};

/// One Markov step of the flash process: sample the 4-distance, sample the
/// location on the hyperboloid, collapse. The default rapidity window
/// (chi_max = 4, dchi = 0.01) widens automatically until the boundary
/// bins carry less than 1e-10 of the weight.
FlashStep next_flash(const CovariantAmplitude& phi, const FlashEvent& previous, double tau,
                     double alpha, RngStream& rng, double dchi = 0.01);

/// Chain of n flashes from the seed; truncates with an error record if a
/// step fails. Reproducible from rng_seed.
FlashChain simulate_chain(const CovariantAmplitude& initial, const FlashEvent& seed_event,
                          long n, double tau, double alpha, std::uint64_t rng_seed,
                          double dchi = 0.01);

/// Largest violation of the time-like chain invariant
/// |(dt^2 - dx^2) - delta_T^2| over consecutive pairs (negative dt counts
/// as infinite violation).
double chain_invariant_defect(const FlashChain& chain);

struct DilationStat {
    double mean_dt = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    long n_intervals = 0;
};

/// Mean lab-frame coordinate interval between consecutive flashes with a
/// bootstrap 95% CI (resampling whole chains). Requires >= 30 chains.
DilationStat dilation_statistic(const std::vector<FlashChain>& chains,
                                std::uint64_t bootstrap_seed = 12345);

/// CSV serialization: columns trajectory,index,t,x,delta_T in lab
/// coordinates, 17 significant digits.
void write_flashes_csv(const std::string& path, const std::vector<FlashChain>& chains);

}  // namespace collapsim
