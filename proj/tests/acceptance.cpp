// Acceptance suite: runs every top-level consistency criterion at its
// stated tolerance and prints one pass/fail line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "collapsim/collapse.hpp"
#include "collapsim/dynamics.hpp"
#include "collapsim/flash.hpp"
#include "collapsim/fock.hpp"
#include "collapsim/harness.hpp"
#include "collapsim/multiparticle.hpp"
#include "collapsim/rng.hpp"
#include "collapsim/state.hpp"
#include "collapsim/stats.hpp"

using namespace collapsim;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Criterion {
  public:
    Criterion(int id, const std::string& name, double budget_seconds)
        : id_(id), name_(name), budget_(budget_seconds),
          start_(std::chrono::steady_clock::now()) {}

    void expect(bool ok, const std::string& detail) {
        all_ok_ = all_ok_ && ok;
        details_.push_back(std::string(ok ? "" : "FAILED: ") + detail);
    }

    ~Criterion() {
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        bool ok = all_ok_;
        std::string time_note;
        if (budget_ > 0.0) {
            ok = ok && elapsed <= budget_;
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.1fs <= %.0fs", elapsed, budget_);
            time_note = buf;
        } else {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.1fs", elapsed);
            time_note = buf;
        }
        if (!ok) ++g_failures;
        std::printf("[%2d] %s  %-28s (%s)\n", id_, ok ? "PASS" : "FAIL", name_.c_str(),
                    time_note.c_str());
        for (const std::string& d : details_) std::printf("       %s\n", d.c_str());
        std::fflush(stdout);
    }

  private:
    int id_;
    std::string name_;
    double budget_;
    std::chrono::steady_clock::time_point start_;
    bool all_ok_ = true;
    std::vector<std::string> details_;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), f, a, b, c);
    return buf;
}

std::string out_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("collapsim_acceptance_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

CovariantAmplitude random_rel_state(const SpatialGrid& grid, RngStream& rng) {
    CovariantAmplitude sum{grid, std::vector<cplx>(grid.n_points, 0.0), 1.0,
                           Dispersion::Relativistic};
    const int terms = 1 + static_cast<int>(rng.uniform_index(3));
    for (int t = 0; t < terms; ++t) {
        const CovariantAmplitude g = gaussian_packet(grid, 1.0, Dispersion::Relativistic,
                                                     rng.uniform(-25.0, 25.0),
                                                     rng.uniform(2.0, 4.0),
                                                     rng.uniform(-1.5, 1.5));
        const cplx c = std::polar(rng.uniform(0.5, 1.0), rng.uniform(0.0, 6.28));
        for (int k = 0; k < grid.n_points; ++k) sum.amp[k] += c * g.amp[k];
    }
    return normalize(sum);
}

void criterion_1_grw_normalization() {
    Criterion cr(1, "grw-normalization", 10.0);
    const SpatialGrid grid = SpatialGrid::centered(200.0, 1024);
    const double alpha = 0.25;
    std::vector<double> defects(100);
    parallel_for(100, [&](long i) {
        RngStream rng = RngStream::substream(11, i);
        std::vector<SurfaceWaveFunction> factor = {surface_gaussian(
            grid, HyperplaneLabel::lab(), 1.0, Dispersion::Nonrelativistic,
            rng.uniform(-30.0, 30.0), rng.uniform(1.0, 4.0), rng.uniform(-1.0, 1.0))};
        ProductState psi = product_state(factor);
        // a superposition keeps the state generic
        if (i % 2) {
            ProductState other = product_state({surface_gaussian(
                grid, HyperplaneLabel::lab(), 1.0, Dispersion::Nonrelativistic,
                rng.uniform(-30.0, 30.0), rng.uniform(1.0, 4.0), rng.uniform(-1.0, 1.0))});
            for (std::size_t k = 0; k < psi.amp.size(); ++k)
                psi.amp[k] = psi.amp[k] + 0.7 * other.amp[k];
            psi = normalize(psi);
        }
        const std::vector<double> born = particle_flash_born(psi, 0, alpha);
        double integral = 0.0;
        for (double b : born) integral += b * grid.dx;
        defects[i] = std::abs(integral - 1.0);
    });
    double worst = 0.0;
    for (double d : defects) worst = std::max(worst, d);
    cr.expect(worst <= 1e-9, fmt("max |integral(pdf) - 1| = %.3e <= 1e-9 over 100 states", worst));
}

void criterion_2_poisson() {
    Criterion cr(2, "poisson-interval-law", 5.0);
    RngStream rng(21);
    const long n = 100000;
    std::vector<double> samples(n);
    for (long i = 0; i < n; ++i) samples[i] = sample_interval(1.0, rng);
    const double m = mean(samples);
    const double bound = 3.0 / std::sqrt(static_cast<double>(n));
    cr.expect(std::abs(m - 1.0) <= bound,
              fmt("|mean - tau| = %.4e <= %.4e (3 sigma)", std::abs(m - 1.0), bound));
    const double p = ks_exponential_pvalue(samples, 1.0);
    cr.expect(p > 0.01, fmt("exponential KS p-value = %.4f > 0.01", p));
}

void criterion_3_surface_equivalence() {
    Criterion cr(3, "collapse-surface-equivalence", 30.0);
    const SpatialGrid grid = SpatialGrid::centered(200.0, 1024);
    std::vector<double> state_defect(50), weight_defect(50);
    parallel_for(50, [&](long i) {
        RngStream rng = RngStream::substream(31, i);
        const double x0 = rng.uniform(-10.0, 10.0);
        CovariantAmplitude phi =
            gaussian_packet(grid, 1.0, Dispersion::Relativistic, x0, rng.uniform(2.5, 4.0),
                            rng.uniform(-0.8, 0.8));
        const SpacetimePoint x{rng.uniform(-2.0, 2.0), x0 + rng.uniform(-3.0, 3.0)};
        CollapseKernel k = kernel_at(x, 0.25, rng.uniform(-0.8, 0.8));
        auto [a, wa] = transported_collapse_via(phi, x, k, 0.0);
        auto [b, wb] = transported_collapse_via(
            phi, x, k, rng.uniform(0.2, 0.8) * (rng.uniform() < 0.5 ? -1.0 : 1.0));
        CovariantAmplitude diff = a;
        for (int j = 0; j < grid.n_points; ++j) diff.amp[j] -= b.amp[j];
        state_defect[i] = norm(diff);
        weight_defect[i] = std::abs(wa - wb);
    });
    double worst_state = 0.0, worst_weight = 0.0;
    for (int i = 0; i < 50; ++i) {
        worst_state = std::max(worst_state, state_defect[i]);
        worst_weight = std::max(worst_weight, weight_defect[i]);
    }
    cr.expect(worst_state <= 1e-8,
              fmt("max post-collapse amplitude difference = %.3e <= 1e-8 (50 cases)",
                  worst_state));
    cr.expect(worst_weight <= 1e-9,
              fmt("max weight difference = %.3e <= 1e-9", worst_weight));
}

void criterion_4_chain_covariance() {
    Criterion cr(4, "flash-chain-covariance", 120.0);
    ExperimentConfig cfg;
    cfg.experiment = "flash-chain";
    cfg.seed = 41;
    cfg.out_dir = out_dir("chain");
    RunSummary s = run(cfg);
    const auto& m = s.json["metrics"];
    cr.expect(m["n_intervals"].get<long>() >= 900,
              fmt("%g flash intervals per ensemble (~1e3)", m["n_intervals"].get<double>()));
    const double sig_dT = m["histogram_sigma_delta_T"].get<double>();
    const double sig_dt = m["histogram_sigma_comoving_dt"].get<double>();
    cr.expect(sig_dT <= 3.0, fmt("delta_T histograms agree: max %.2f sigma <= 3", sig_dT));
    cr.expect(sig_dt <= 3.0, fmt("comoving dt histograms agree: max %.2f sigma <= 3", sig_dt));
    cr.expect(m["chain_invariant_defect"].get<double>() <= 1e-9,
              fmt("time-like chain invariant defect %.2e <= 1e-9",
                  m["chain_invariant_defect"].get<double>()));
    cr.expect(m["truncated_chains"].get<long>() == 0, "no truncated chains");
}

void criterion_5_dilation() {
    Criterion cr(5, "time-dilation", 120.0);
    ExperimentConfig cfg;
    cfg.experiment = "dilation";
    cfg.seed = 51;
    cfg.out_dir = out_dir("dilation");
    RunSummary s = run(cfg);
    for (const auto& row : s.json["metrics"]["per_eta"]) {
        const double eta = row["eta"].get<double>();
        const double rel = row["relative_error"].get<double>();
        cr.expect(rel <= 0.05,
                  fmt("eta = %.1f: |mean dt / (tau cosh eta) - 1| = %.4f <= 0.05", eta, rel));
    }
}

void criterion_6_unitary_covariance() {
    Criterion cr(6, "unitary-covariance", 10.0);
    const SpatialGrid grid = SpatialGrid::centered(200.0, 1024);
    std::vector<double> defects(100);
    parallel_for(100, [&](long i) {
        RngStream rng = RngStream::substream(61, i);
        CovariantAmplitude phi = random_rel_state(grid, rng);
        const double eta = rng.uniform(0.2, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        defects[i] =
            covariance_defect(phi, HyperplaneLabel::lab(0.0), HyperplaneLabel::lab(5.0), eta);
    });
    double worst = 0.0;
    for (double d : defects) worst = std::max(worst, d);
    cr.expect(worst <= 1e-8, fmt("max covariance defect = %.3e <= 1e-8 (100 states)", worst));
}

void criterion_7_factorization() {
    Criterion cr(7, "separable-factorization", 30.0);
    const SpatialGrid grid = SpatialGrid::centered(32.0, 64);
    const HyperplaneLabel lab = HyperplaneLabel::lab();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> defects(100);
    parallel_for(100, [&](long i) {
        RngStream rng = RngStream::substream(71, i);
        const int n = 2 + static_cast<int>(rng.uniform_index(2));
        std::vector<SurfaceWaveFunction> factors;
        std::vector<OutcomeCell> cells;
        for (int p = 0; p < n; ++p) {
            factors.push_back(surface_gaussian(grid, lab, 1.0, Dispersion::Nonrelativistic,
                                               rng.uniform(-6.0, 6.0), rng.uniform(0.8, 2.0),
                                               rng.uniform(-1.0, 1.0)));
            const double split = rng.uniform(-8.0, 8.0);
            cells.push_back(rng.uniform() < 0.5 ? OutcomeCell{-inf, split}
                                                : OutcomeCell{split, inf});
        }
        defects[i] = factorization_defect(product_state(factors), cells, 0.5);
    });
    double worst = 0.0;
    for (double d : defects) worst = std::max(worst, d);
    cr.expect(worst < 1e-9, fmt("max separable defect = %.3e < 1e-9 (100 states)", worst));

    const SurfaceWaveFunction L =
        surface_gaussian(grid, lab, 1.0, Dispersion::Nonrelativistic, -8.0, 1.0);
    const SurfaceWaveFunction R =
        surface_gaussian(grid, lab, 1.0, Dispersion::Nonrelativistic, 8.0, 1.0);
    const ProductState bell = bell_state(L, R);
    const double same =
        factorization_defect(bell, {OutcomeCell{-inf, 0.0}, OutcomeCell{-inf, 0.0}}, 0.5);
    cr.expect(std::abs(same - 0.25) <= 0.01,
              fmt("bell same-side defect = %.6f = 0.25 within 0.01", same));
    const double opp =
        factorization_defect(bell, {OutcomeCell{-inf, 0.0}, OutcomeCell{0.0, inf}}, 0.5);
    cr.expect(std::abs(opp - 0.25) <= 0.01,
              fmt("bell opposite-side defect = %.6f = 0.25 within 0.01", opp));
}

void criterion_8_frame_comparison() {
    Criterion cr(8, "frame-comparison-obstruction", 120.0);
    ExperimentConfig cfg;
    cfg.experiment = "bell-noncompare";
    cfg.seed = 81;
    cfg.trials = 10000;
    cfg.out_dir = out_dir("bell");
    RunSummary s = run(cfg);
    const auto& m = s.json["metrics"];
    const double bell_td = m["bell_reduced1_trace_distance"].get<double>();
    cr.expect(bell_td > 0.9, fmt("bell conditional trace distance = %.6f > 0.9", bell_td));
    const double sep_td = m["separable_reduced1_trace_distance"].get<double>();
    cr.expect(sep_td < 1e-6, fmt("separable control = %.3e < 1e-6", sep_td));
    const double sig = m["nosignal_sigma"].get<double>();
    cr.expect(sig <= 3.0,
              fmt("no-signaling marginal shift = %.2f sigma <= 3 (10^4 trials)", sig));
}

void criterion_9_interaction() {
    Criterion cr(9, "interaction-obstruction", 60.0);
    const SpatialGrid grid = SpatialGrid::centered(16.0, 16);
    InteractionSpec spec{[](double d) { return std::exp(-d * d / 8.0); }, 0.0};
    const double zero =
        interaction_factorization_defect(grid, 1.0, spec, 0, 2.0, 0.25, 0.5).interaction_picture;
    cr.expect(zero < 1e-9, fmt("zero-coupling defect = %.3e < 1e-9", zero));
    double prev = zero;
    bool increasing = true;
    std::ostringstream sweep;
    sweep << "sweep:";
    for (double s : {0.5, 1.0, 1.5, 2.0}) {
        spec.strength = s;
        const double d =
            interaction_factorization_defect(grid, 1.0, spec, 0, 2.0, 0.25, 0.5)
                .interaction_picture;
        sweep << " " << d;
        increasing = increasing && d > prev;
        prev = d;
    }
    cr.expect(increasing, "defect strictly increasing over the 5-point coupling sweep");
    cr.expect(true, sweep.str());
}

void criterion_10_amplification() {
    Criterion cr(10, "amplification", 300.0);
    ExperimentConfig cfg;
    cfg.experiment = "amplification";
    cfg.seed = 101;
    cfg.trials = 500;
    cfg.out_dir = out_dir("amp");
    RunSummary s = run(cfg);
    double rate1 = 0.0;
    for (const auto& row : s.json["metrics"]["per_n"]) {
        const int n = row["n"].get<int>();
        const double rate = row["rate"].get<double>();
        if (n == 1) {
            rate1 = rate;
            cr.expect(std::abs(rate - 1.0) <= 0.2,
                      fmt("rate(1) tau = %.3f = 1 within 20%%", rate));
        } else {
            const double ratio = rate / rate1;
            cr.expect(std::abs(ratio / n - 1.0) <= 0.2,
                      fmt("rate(%.0f)/rate(1) = %.3f = N within 20%% (500 trials)", double(n),
                          ratio));
        }
    }
}

void criterion_11_fock() {
    Criterion cr(11, "fock-two-blob", 30.0);
    // M = 32 requires d = 10 for the blob geometry to fit the lattice
    const BlobSpec spec{10, 4, 1, 1.0};
    const MacroReport rep = macro_failure_report(spec, 32, 4);
    cr.expect(rep.n_total_exact && rep.n_total_eigen == 4.0,
              fmt("N_T eigenvalue = %g (exactly N)", rep.n_total_eigen));
    cr.expect(rep.n_left_exact && rep.n_left_eigen == 2.0,
              fmt("N_A eigenvalue = %g (exactly N/2)", rep.n_left_eigen));
    cr.expect(rep.fidelity_after_collapse >= 0.99,
              fmt("post-collapse fidelity = %.6f >= 0.99", rep.fidelity_after_collapse));
    cr.expect(rep.suppressed_branch_amp < 1e-4,
              fmt("suppressed branch amplitude = %.3e < 1e-4", rep.suppressed_branch_amp));
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    const bool schmidt_ok = rep.object2_schmidt.size() >= 2 &&
                            std::abs(rep.object2_schmidt[0] - inv_sqrt2) <= 1e-3 &&
                            std::abs(rep.object2_schmidt[1] - inv_sqrt2) <= 1e-3;
    cr.expect(schmidt_ok, fmt("object-2 Schmidt coefficients (%.6f, %.6f) = 1/sqrt2 within 1e-3",
                              rep.object2_schmidt.empty() ? 0.0 : rep.object2_schmidt[0],
                              rep.object2_schmidt.size() < 2 ? 0.0 : rep.object2_schmidt[1]));
    cr.expect(rep.earliest_flash_far_branch == 2.0 * spec.d,
              fmt("earliest flash reaching object 2's far branch = %g = 2d exactly",
                  rep.earliest_flash_far_branch));
}

void criterion_12_microcausality() {
    Criterion cr(12, "microcausality-diagnostic", 60.0);
    const SpatialGrid grid = SpatialGrid::centered(200.0, 1024);
    const CovariantAmplitude phi =
        gaussian_packet(grid, 1.0, Dispersion::Relativistic, 0.0, 2.0, 0.0);
    std::ostringstream sweep;
    sweep << "sweep (separation: defect):";
    double worst_far = 0.0;
    for (double s : {0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0}) {
        const double toff = std::min(0.4 * s, 2.0);
        const double d = microcausality_defect(phi, {0.0, -s / 2}, {toff, s / 2}, 1.0);
        sweep << fmt(" %g:", s) << fmt("%.2e", d);
        if (s >= 20.0) worst_far = std::max(worst_far, d);
    }
    cr.expect(worst_far < 1e-3,
              fmt("defect at separation >= 20 Compton = %.3e < 1e-3", worst_far));
    const CovariantAmplitude nr =
        gaussian_packet(grid, 1.0, Dispersion::Nonrelativistic, 0.0, 2.0, 0.0);
    const double same = microcausality_defect(nr, {0.0, -2.0}, {0.0, 2.0}, 1.0);
    cr.expect(same <= 1e-12,
              fmt("nonrelativistic same-hyperplane defect = %.3e <= 1e-12", same));
    cr.expect(true, sweep.str());
}

void criterion_13_determinism() {
    Criterion cr(13, "determinism", 0.0);
    const std::vector<std::pair<std::string, long>> runs = {
        {"grw1d", 50},         {"flash-chain", 6},    {"dilation", 40},
        {"covariance", 10},    {"microcausality", 1}, {"bell-noncompare", 300},
        {"factorization", 20}, {"amplification", 60}, {"fock-macro", 1}};
    for (const auto& [name, trials] : runs) {
        ExperimentConfig cfg;
        cfg.experiment = name;
        cfg.seed = 131;
        cfg.trials = trials;
        cfg.out_dir = out_dir("det_a_" + name);
        RunSummary a = run(cfg);
        cfg.out_dir = out_dir("det_b_" + name);
        RunSummary b = run(cfg);
        nlohmann::ordered_json ja = a.json, jb = b.json;
        ja.erase("timestamp");
        jb.erase("timestamp");
        cr.expect(ja.dump() == jb.dump(), name + ": summary.json bit-identical across reruns");
    }
}

}  // namespace

int main() {
    std::printf("collapsim acceptance suite\n");
    criterion_1_grw_normalization();
    criterion_2_poisson();
    criterion_3_surface_equivalence();
    criterion_4_chain_covariance();
    criterion_5_dilation();
    criterion_6_unitary_covariance();
    criterion_7_factorization();
    criterion_8_frame_comparison();
    criterion_9_interaction();
    criterion_10_amplification();
    criterion_11_fock();
    criterion_12_microcausality();
    criterion_13_determinism();
    std::printf("%s (%d criteria failed)\n", g_failures == 0 ? "ALL PASS" : "FAILURES",
                g_failures);
    return g_failures == 0 ? 0 : 1;
}
