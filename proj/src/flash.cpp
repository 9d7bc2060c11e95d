#include "collapsim/flash.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "collapsim/stats.hpp"

namespace collapsim {

namespace {

constexpr double kDefaultChiMax = 4.0;
constexpr double kEdgeWeightLimit = 1e-10;
// Spectral transforms leave a relative noise floor around 1e-17 in the
// position density (1e-34 in Born weights); support below this bound is
// numerically indistinguishable from none.
constexpr double kNullBorn = 1e-26;

}  // namespace

std::vector<FlashEvent> FlashChain::all_events() const {
    std::vector<FlashEvent> out;
    out.reserve(events.size() + 1);
    out.push_back(seed_event);
    out.insert(out.end(), events.begin(), events.end());
    return out;
}

double sample_interval(double tau, RngStream& rng) {
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    return rng.exponential(tau);
}

std::vector<double> make_chi_grid(double chi_max, double dchi) {
    return make_chi_grid(-chi_max, chi_max, dchi);
}

std::vector<double> make_chi_grid(double chi_lo, double chi_hi, double dchi) {
    const int k_lo = static_cast<int>(std::ceil(chi_lo / dchi - 1e-12));
    const int k_hi = static_cast<int>(std::floor(chi_hi / dchi + 1e-12));
    std::vector<double> chi;
    chi.reserve(static_cast<std::size_t>(std::max(0, k_hi - k_lo + 1)));
    for (int k = k_lo; k <= k_hi; ++k) chi.push_back(k * dchi);
    return chi;
}

FlashPdf flash_location_pdf(const CovariantAmplitude& phi, const SpacetimePoint& apex,
                            double delta_T, double alpha, const std::vector<double>& chi_grid) {
    if (!(delta_T > 0.0)) throw std::invalid_argument("delta_T must be positive");
    if (chi_grid.size() < 3) throw std::invalid_argument("chi grid too small");

    const int n = phi.grid.n_points;
    const int margin = std::max(2, n / 128);
    const double x_lo = phi.grid.x(margin), x_hi = phi.grid.x(n - 1 - margin);
    const double norm_kernel = std::sqrt(alpha / std::numbers::pi);
    const double kernel_width = 1.0 / std::sqrt(alpha);

    FlashPdf pdf;
    pdf.hyperboloid = Hyperboloid{apex, delta_T, chi_grid};
    pdf.weights.assign(chi_grid.size(), 0.0);

    // Velocity cone of the state (1e-13 quantiles of the group-velocity
    // distribution). A candidate whose kernel window cannot reach the cone
    // spread from the apex carries negligible weight and is not evaluated.
    double v_lo = -1.0, v_hi = 1.0;
    {
        double total = 0.0;
        std::vector<double> mass(n);
        for (int k = 0; k < n; ++k) {
            mass[k] = std::norm(phi.amp[k]) * phi.measure(k);
            total += mass[k];
        }
        auto velocity = [&](int k) {
            const double p = phi.grid.p(k);
            return (phi.dispersion == Dispersion::Relativistic)
                       ? p / std::sqrt(p * p + phi.mass * phi.mass)
                       : p / phi.mass;
        };
        // ascending momentum order = indices n/2..n-1 then 0..n/2-1
        auto k_at = [&](int i) { return (i + n / 2) % n; };
        const double q = 1e-13 * total;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += mass[k_at(i)];
            if (acc >= q) {
                v_lo = velocity(k_at(i));
                break;
            }
        }
        acc = 0.0;
        for (int i = n - 1; i >= 0; --i) {
            acc += mass[k_at(i)];
            if (acc >= q) {
                v_hi = velocity(k_at(i));
                break;
            }
        }
    }
    const double cone_slack = 12.0 * kernel_width + 60.0;

    // |psi|^2 on the lab hyperplane per distinct candidate time (the +-chi
    // pair shares one evolution). Times at which the state has outgrown
    // the box are unusable; candidates there must turn out negligible.
    std::unordered_map<std::uint64_t, std::vector<double>> density_cache;
    bool any_unusable = false;
    auto density_at = [&](double t) -> const std::vector<double>* {
        std::uint64_t key;
        static_assert(sizeof(key) == sizeof(t));
        std::memcpy(&key, &t, sizeof(t));
        auto it = density_cache.find(key);
        if (it != density_cache.end())
            return it->second.empty() ? nullptr : &it->second;
        std::vector<cplx> data = surface_data(phi, HyperplaneLabel::lab(t));
        std::vector<cplx> pos = position_from_data(data, phi.grid, phi.mass, phi.dispersion);
        std::vector<double> rho;
        if (seam_fraction(pos, phi.grid) <= 1e-8) {
            rho.resize(pos.size());
            for (std::size_t j = 0; j < pos.size(); ++j) rho[j] = std::norm(pos[j]);
        }
        auto& slot = density_cache.emplace(key, std::move(rho)).first->second;
        return slot.empty() ? nullptr : &slot;
    };

    double total = 0.0, max_born = 0.0;
    std::vector<char> valid(chi_grid.size(), 0);
    for (std::size_t i = 0; i < chi_grid.size(); ++i) {
        const SpacetimePoint cand = pdf.hyperboloid.point(chi_grid[i]);
        if (cand.x < x_lo || cand.x > x_hi) {
            any_unusable = true;
            continue;  // outside the usable box
        }
        // outside the velocity cone: negligible by construction
        const double flight = cand.t - apex.t;
        if (cand.x < apex.x + v_lo * flight - cone_slack ||
            cand.x > apex.x + v_hi * flight + cone_slack) {
            valid[i] = 1;  // bounded, not truncated
            continue;
        }
        const std::vector<double>* rho = density_at(cand.t);
        if (!rho) {
            any_unusable = true;
            continue;
        }
        valid[i] = 1;
        // kernel support window
        const int j0 = std::max(0, static_cast<int>((cand.x - 8.0 * kernel_width -
                                                     phi.grid.x_min) / phi.grid.dx));
        const int j1 = std::min(n - 1, static_cast<int>((cand.x + 8.0 * kernel_width -
                                                         phi.grid.x_min) / phi.grid.dx) + 1);
        double born = 0.0;
        for (int j = j0; j <= j1; ++j) {
            const double d = phi.grid.x(j) - cand.x;
            born += norm_kernel * std::exp(-alpha * d * d) * (*rho)[j];
        }
        born *= phi.grid.dx;
        max_born = std::max(max_born, born);
        // invariant line element on the hyperboloid
        const double dchi = (i == 0) ? (chi_grid[1] - chi_grid[0])
                            : (i + 1 == chi_grid.size())
                                ? (chi_grid[i] - chi_grid[i - 1])
                                : 0.5 * (chi_grid[i + 1] - chi_grid[i - 1]);
        pdf.weights[i] = born * delta_T * dchi;
        total += pdf.weights[i];
    }

    if (!(max_born > kNullBorn))
        throw std::runtime_error("wavefunction has no support on hyperboloid");

    for (double& w : pdf.weights) w /= total;

    // tail fraction at the outermost usable candidates
    std::size_t lo = 0, hi = chi_grid.size() - 1;
    while (lo < hi && !valid[lo]) ++lo;
    while (hi > lo && !valid[hi]) --hi;
    pdf.edge_weight_fraction = pdf.weights[lo] + pdf.weights[hi];
    if (lo + 1 < hi) pdf.edge_weight_fraction += pdf.weights[lo + 1] + pdf.weights[hi - 1];
    if (any_unusable && pdf.edge_weight_fraction >= 1e-8)
        throw std::runtime_error("seam violation");
    return pdf;
}

FlashStep next_flash(const CovariantAmplitude& phi, const FlashEvent& previous, double tau,
                     double alpha, RngStream& rng, double dchi) {
    const double delta_T = sample_interval(tau, rng);
    const SpacetimePoint apex{previous.t, previous.x};

    // the box bounds how far out in rapidity a candidate can sit, per side
    const int margin = std::max(2, phi.grid.n_points / 128);
    const double slack = 2.0 * phi.grid.dx;
    const double room_neg = apex.x - phi.grid.x(margin) - slack;
    const double room_pos = phi.grid.x(phi.grid.n_points - 1 - margin) - apex.x - slack;
    const double chi_box_neg = std::asinh(std::max(room_neg, phi.grid.dx) / delta_T);
    const double chi_box_pos = std::asinh(std::max(room_pos, phi.grid.dx) / delta_T);

    // start the window wide enough for the kernel reach and the packet
    // rapidity; it still widens if the boundary bins carry weight
    const double mean_rapidity = std::asinh(momentum_mean(phi) / phi.mass);
    const double reach = 12.0 / std::sqrt(alpha) + 60.0;
    const double chi_start =
        std::max(kDefaultChiMax, std::abs(mean_rapidity) + 1.0 + std::asinh(reach / delta_T));

    double chi_max = chi_start;
    FlashPdf pdf;
    for (;;) {
        pdf = flash_location_pdf(phi, apex, delta_T, alpha,
                                 make_chi_grid(-std::min(chi_max, chi_box_neg),
                                               std::min(chi_max, chi_box_pos), dchi));
        if (pdf.edge_weight_fraction < kEdgeWeightLimit ||
            (chi_max >= chi_box_neg && chi_max >= chi_box_pos))
            break;
        chi_max *= 1.5;
    }

    const std::size_t pick = rng.categorical(pdf.weights);
    const SpacetimePoint where = pdf.hyperboloid.point(pdf.hyperboloid.chi_samples[pick]);
    auto [post, weight] = transported_collapse(phi, where, kernel_at(where, alpha, 0.0));
    (void)weight;

    FlashStep step;
    step.event = FlashEvent{where.t, where.x, delta_T, previous.index + 1};
    step.post_state = std::move(post);
    return step;
}

FlashChain simulate_chain(const CovariantAmplitude& initial, const FlashEvent& seed_event,
                          long n, double tau, double alpha, std::uint64_t rng_seed,
                          double dchi) {
    if (n < 0) throw std::invalid_argument("chain length must be nonnegative");
    FlashChain chain;
    chain.seed_event = seed_event;
    chain.rng_seed = rng_seed;
    RngStream rng(rng_seed);

    CovariantAmplitude phi = initial;
    FlashEvent prev = seed_event;
    for (long i = 0; i < n; ++i) {
        try {
            FlashStep step = next_flash(phi, prev, tau, alpha, rng, dchi);
            chain.events.push_back(step.event);
            phi = std::move(step.post_state);
            prev = chain.events.back();
        } catch (const std::exception& e) {
            chain.truncation_error = e.what();
            break;
        }
    }
    return chain;
}

double chain_invariant_defect(const FlashChain& chain) {
    const std::vector<FlashEvent> ev = chain.all_events();
    double worst = 0.0;
    for (std::size_t i = 1; i < ev.size(); ++i) {
        const double dt = ev[i].t - ev[i - 1].t;
        const double dx = ev[i].x - ev[i - 1].x;
        if (!(dt > 0.0)) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, std::abs(dt * dt - dx * dx - ev[i].delta_T * ev[i].delta_T));
    }
    return worst;
}

DilationStat dilation_statistic(const std::vector<FlashChain>& chains,
                                std::uint64_t bootstrap_seed) {
    if (chains.size() < 30) throw std::runtime_error("insufficient data");

    std::vector<std::vector<double>> per_chain;
    std::vector<double> pooled;
    for (const FlashChain& c : chains) {
        const std::vector<FlashEvent> ev = c.all_events();
        std::vector<double> dts;
        for (std::size_t i = 1; i < ev.size(); ++i) dts.push_back(ev[i].t - ev[i - 1].t);
        if (!dts.empty()) {
            pooled.insert(pooled.end(), dts.begin(), dts.end());
            per_chain.push_back(std::move(dts));
        }
    }
    if (pooled.size() < 2) throw std::runtime_error("insufficient data");

    DilationStat stat;
    stat.n_intervals = static_cast<long>(pooled.size());
    stat.mean_dt = mean(pooled);

    // cluster bootstrap over chains
    const int B = 2000;
    RngStream rng(bootstrap_seed);
    std::vector<double> means(B);
    for (int b = 0; b < B; ++b) {
        double s = 0.0;
        long cnt = 0;
        for (std::size_t i = 0; i < per_chain.size(); ++i) {
            const auto& pick = per_chain[rng.uniform_index(per_chain.size())];
            for (double v : pick) s += v;
            cnt += static_cast<long>(pick.size());
        }
        means[b] = s / cnt;
    }
    std::sort(means.begin(), means.end());
    stat.ci_lo = means[static_cast<std::size_t>(0.025 * (B - 1))];
    stat.ci_hi = means[static_cast<std::size_t>(0.975 * (B - 1))];
    return stat;
}

void write_flashes_csv(const std::string& path, const std::vector<FlashChain>& chains) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "trajectory,index,t,x,delta_T\n";
    char buf[128];
    for (std::size_t c = 0; c < chains.size(); ++c) {
        for (const FlashEvent& e : chains[c].all_events()) {
            std::snprintf(buf, sizeof(buf), "%zu,%ld,%.17g,%.17g,%.17g\n", c, e.index, e.t, e.x,
                          e.delta_T);
            out << buf;
        }
    }
}

}  // namespace collapsim
