#pragma once

#include <cstdint>
#include <vector>

namespace collapsim {

double mean(const std::vector<double>& samples);
double variance(const std::vector<double>& samples);  // unbiased

struct BootstrapCi {
    double mean = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

/// Mean with a percentile-bootstrap 95% CI. Deterministic given the
/// resampling seed; throws "insufficient data" below 2 samples.
BootstrapCi bootstrap_mean_ci(const std::vector<double>& samples, int resamples = 2000,
                              std::uint64_t seed = 777);

/// One-sample Kolmogorov-Smirnov test against Exp(mean = tau).
/// Returns the asymptotic p-value.
double ks_exponential_pvalue(std::vector<double> samples, double tau);

/// Per-bin two-sample comparison of equal-width histograms over
/// [lo, hi). Returns the largest per-bin deviation in units of the pooled
/// binomial standard error (so > 3 fails a 3-sigma check).
double histogram_max_sigma(const std::vector<double>& a, const std::vector<double>& b,
                           double lo, double hi, int bins);

}  // namespace collapsim
