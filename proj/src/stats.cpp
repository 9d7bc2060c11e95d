#include "collapsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "collapsim/rng.hpp"

namespace collapsim {

double mean(const std::vector<double>& samples) {
    if (samples.empty()) throw std::runtime_error("insufficient data");
    double s = 0.0;
    for (double v : samples) s += v;
    return s / static_cast<double>(samples.size());
}

double variance(const std::vector<double>& samples) {
    if (samples.size() < 2) throw std::runtime_error("insufficient data");
    const double mu = mean(samples);
    double s = 0.0;
    for (double v : samples) s += (v - mu) * (v - mu);
    return s / static_cast<double>(samples.size() - 1);
}

BootstrapCi bootstrap_mean_ci(const std::vector<double>& samples, int resamples,
                              std::uint64_t seed) {
    if (samples.size() < 2) throw std::runtime_error("insufficient data");
    BootstrapCi ci;
    ci.mean = mean(samples);

    RngStream rng(seed);
    std::vector<double> means(resamples);
    const std::size_t n = samples.size();
    for (int b = 0; b < resamples; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += samples[rng.uniform_index(n)];
        means[b] = s / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    ci.ci_lo = means[static_cast<std::size_t>(0.025 * (resamples - 1))];
    ci.ci_hi = means[static_cast<std::size_t>(0.975 * (resamples - 1))];
    return ci;
}

double ks_exponential_pvalue(std::vector<double> samples, double tau) {
    if (samples.size() < 2) throw std::runtime_error("insufficient data");
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = 1.0 - std::exp(-samples[i] / tau);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max({d, std::abs(cdf - lo), std::abs(cdf - hi)});
    }
    // Stephens' small-sample correction, then the Kolmogorov tail series
    const double sn = std::sqrt(n);
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) *
                            std::exp(-2.0 * k * k * lambda * lambda);
        p += term;
        if (std::abs(term) < 1e-12) break;
    }
    return std::clamp(p, 0.0, 1.0);
}

double histogram_max_sigma(const std::vector<double>& a, const std::vector<double>& b,
                           double lo, double hi, int bins) {
    if (a.size() < 2 || b.size() < 2) throw std::runtime_error("insufficient data");
    std::vector<double> ca(bins, 0.0), cb(bins, 0.0);
    auto fill = [&](const std::vector<double>& s, std::vector<double>& c) {
        for (double v : s) {
            if (v < lo || v >= hi) continue;  // overflow bins are excluded from the compare
            int k = static_cast<int>((v - lo) / (hi - lo) * bins);
            c[std::clamp(k, 0, bins - 1)] += 1.0;
        }
    };
    fill(a, ca);
    fill(b, cb);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    double worst = 0.0;
    for (int k = 0; k < bins; ++k) {
        const double pa = ca[k] / na, pb = cb[k] / nb;
        const double pooled = (ca[k] + cb[k]) / (na + nb);
        const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb));
        if (se == 0.0) continue;
        worst = std::max(worst, std::abs(pa - pb) / se);
    }
    return worst;
}

}  // namespace collapsim
