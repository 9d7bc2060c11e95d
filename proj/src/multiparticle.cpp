#include "collapsim/multiparticle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "collapsim/dynamics.hpp"
#include "collapsim/fft.hpp"
#include "collapsim/stats.hpp"

namespace collapsim {

namespace {

constexpr std::size_t kMaxDim = std::size_t{1} << 22;
constexpr double kNullWeight = 1e-300;

std::size_t ipow(std::size_t base, int e) {
    std::size_t r = 1;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

void check_particle(const ProductState& psi, int particle) {
    if (particle < 0 || particle >= psi.n_particles)
        throw std::invalid_argument("particle index out of range");
}

}  // namespace

std::size_t ProductState::stride(int particle) const {
    return ipow(static_cast<std::size_t>(grid.n_points), n_particles - 1 - particle);
}

double ProductState::cell_volume() const {
    double v = 1.0;
    for (int i = 0; i < n_particles; ++i) v *= grid.dx;
    return v;
}

double norm(const ProductState& psi) {
    double s = 0.0;
    for (const cplx& a : psi.amp) s += std::norm(a);
    return std::sqrt(s * psi.cell_volume());
}

ProductState normalize(const ProductState& psi) {
    const double n = norm(psi);
    if (!(n > 1e-140)) throw std::runtime_error("null state");
    ProductState out = psi;
    for (cplx& a : out.amp) a /= n;
    return out;
}

SurfaceWaveFunction surface_gaussian(const SpatialGrid& grid, const HyperplaneLabel& sigma,
                                     double mass, Dispersion disp, double x0, double w,
                                     double p0) {
    SurfaceWaveFunction psi{grid, sigma, std::vector<cplx>(grid.n_points), mass, disp};
    for (int j = 0; j < grid.n_points; ++j) {
        const double d = grid.x(j) - x0;
        psi.amp[j] = std::exp(-d * d / (2.0 * w * w)) * std::polar(1.0, p0 * grid.x(j));
    }
    return normalize(psi);
}

ProductState product_state(const std::vector<SurfaceWaveFunction>& factors) {
    if (factors.empty() || factors.size() > 8)
        throw std::invalid_argument("product state supports 1..8 particles");
    const SurfaceWaveFunction& f0 = factors.front();
    for (const SurfaceWaveFunction& f : factors) {
        if (!(f.grid == f0.grid) || !(f.hyperplane == f0.hyperplane) ||
            f.dispersion != f0.dispersion || f.mass != f0.mass)
            throw std::invalid_argument("incompatible states");
        if (std::abs(norm(f) - 1.0) > 1e-9)
            throw std::invalid_argument("factors must be normalized");
    }
    const int n = static_cast<int>(factors.size());
    const std::size_t g = static_cast<std::size_t>(f0.grid.n_points);
    const std::size_t dim = ipow(g, n);
    if (dim > kMaxDim) throw std::invalid_argument("product state dimension too large");

    ProductState psi;
    psi.grid = f0.grid;
    psi.hyperplane = f0.hyperplane;
    psi.n_particles = n;
    psi.mass = f0.mass;
    psi.dispersion = f0.dispersion;
    psi.separable = true;
    psi.amp.assign(dim, 1.0);
    for (int i = 0; i < n; ++i) {
        const std::size_t s = psi.stride(i);
        for (std::size_t idx = 0; idx < dim; ++idx)
            psi.amp[idx] *= factors[i].amp[(idx / s) % g];
    }
    return psi;
}

ProductState bell_state(const SurfaceWaveFunction& L, const SurfaceWaveFunction& R) {
    if (std::abs(inner(L, R)) >= 1e-6)
        throw std::runtime_error("branches not distinguishable");
    ProductState ll = product_state({L, L});
    ProductState rr = product_state({R, R});
    ProductState out = ll;
    out.separable = false;
    for (std::size_t i = 0; i < out.amp.size(); ++i)
        out.amp[i] = (ll.amp[i] + rr.amp[i]) / std::numbers::sqrt2;
    return normalize(out);
}

ProductState evolve_product(const ProductState& psi, double dt) {
    if (dt == 0.0) return psi;
    const int g = psi.grid.n_points;
    ProductState out = psi;

    std::vector<cplx> phase(g);
    for (int k = 0; k < g; ++k) {
        const double p = psi.grid.p(k);
        const double e = (psi.dispersion == Dispersion::Relativistic)
                             ? std::sqrt(p * p + psi.mass * psi.mass)
                             : p * p / (2.0 * psi.mass);
        phase[k] = std::polar(1.0, -e * dt);
    }

    std::vector<cplx> line(g);
    for (int axis = 0; axis < psi.n_particles; ++axis) {
        const std::size_t s = out.stride(axis);
        const std::size_t block = s * g;
        for (std::size_t base = 0; base < out.dim(); base += block) {
            for (std::size_t off = 0; off < s; ++off) {
                for (int j = 0; j < g; ++j) line[j] = out.amp[base + off + j * s];
                fft::forward(line);
                for (int k = 0; k < g; ++k) line[k] *= phase[k];
                fft::backward(line);
                for (int j = 0; j < g; ++j) out.amp[base + off + j * s] = line[j] / double(g);
            }
        }
    }
    out.hyperplane.t += dt;
    return out;
}

std::pair<ProductState, double> collapse_particle(const ProductState& psi, int particle,
                                                  double x_c, double alpha) {
    check_particle(psi, particle);
    if (1.0 / std::sqrt(alpha) < 2.0 * psi.grid.dx)
        throw std::runtime_error("under-resolved");
    const std::size_t g = static_cast<std::size_t>(psi.grid.n_points);
    const std::size_t s = psi.stride(particle);
    CollapseKernel k(x_c, alpha, psi.hyperplane.eta);

    std::vector<double> factor(g);
    for (std::size_t j = 0; j < g; ++j) factor[j] = k.factor(psi.grid.x(static_cast<int>(j)));

    ProductState out = psi;
    double weight = 0.0;
    for (std::size_t idx = 0; idx < out.dim(); ++idx) {
        out.amp[idx] *= factor[(idx / s) % g];
        weight += std::norm(out.amp[idx]);
    }
    weight *= psi.cell_volume();
    if (!(weight > kNullWeight)) throw std::runtime_error("collapse onto null support");
    const double inv = 1.0 / std::sqrt(weight);
    for (cplx& a : out.amp) a *= inv;
    return {std::move(out), weight};
}

std::vector<double> marginal_density(const ProductState& psi, int particle) {
    check_particle(psi, particle);
    const std::size_t g = static_cast<std::size_t>(psi.grid.n_points);
    const std::size_t s = psi.stride(particle);
    std::vector<double> rho(g, 0.0);
    for (std::size_t idx = 0; idx < psi.dim(); ++idx)
        rho[(idx / s) % g] += std::norm(psi.amp[idx]);
    const double rest = psi.cell_volume() / psi.grid.dx;
    for (double& r : rho) r *= rest;
    return rho;
}

std::vector<double> particle_flash_born(const ProductState& psi, int particle, double alpha) {
    const std::vector<double> rho = marginal_density(psi, particle);
    const int g = psi.grid.n_points;
    const double kn = std::sqrt(alpha / std::numbers::pi);
    std::vector<double> born(g, 0.0);
    for (int c = 0; c < g; ++c) {
        double w = 0.0;
        for (int j = 0; j < g; ++j) {
            const double d = psi.grid.x(j) - psi.grid.x(c);
            w += kn * std::exp(-alpha * d * d) * rho[j];
        }
        born[c] = w * psi.grid.dx;
    }
    return born;
}

std::vector<double> particle_flash_pdf(const ProductState& psi, int particle, double alpha) {
    std::vector<double> pdf = particle_flash_born(psi, particle, alpha);
    double total = 0.0;
    for (double w : pdf) total += w;
    for (double& w : pdf) w /= total;
    return pdf;
}

Eigen::MatrixXcd reduced_density(const ProductState& psi, int particle) {
    check_particle(psi, particle);
    const std::size_t g = static_cast<std::size_t>(psi.grid.n_points);
    const std::size_t s = psi.stride(particle);
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(g, g);
    // view the amplitudes as [pre, g, post] and accumulate slab products
    const std::size_t post = s;
    const std::size_t pre = psi.dim() / (g * post);
    for (std::size_t p = 0; p < pre; ++p) {
        const std::size_t base = p * g * post;
        for (std::size_t a = 0; a < g; ++a)
            for (std::size_t b = 0; b < g; ++b) {
                cplx acc = 0.0;
                const cplx* ra = &psi.amp[base + a * post];
                const cplx* rb = &psi.amp[base + b * post];
                for (std::size_t q = 0; q < post; ++q) acc += ra[q] * std::conj(rb[q]);
                rho(a, b) += acc;
            }
    }
    rho *= psi.cell_volume() / psi.grid.dx;
    return rho;
}

double trace_distance(const Eigen::MatrixXcd& rho_a, const Eigen::MatrixXcd& rho_b, double dx) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho_a - rho_b);
    return 0.5 * es.eigenvalues().cwiseAbs().sum() * dx;
}

std::vector<double> schmidt_coefficients(const ProductState& psi, int k) {
    if (k <= 0 || k >= psi.n_particles) throw std::invalid_argument("invalid bipartition");
    const std::size_t rows = ipow(static_cast<std::size_t>(psi.grid.n_points), k);
    const std::size_t cols = psi.dim() / rows;
    Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        psi.amp.data(), rows, cols);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(m);
    std::vector<double> out(svd.singularValues().data(),
                            svd.singularValues().data() + svd.singularValues().size());
    const double scale = std::sqrt(psi.cell_volume());
    for (double& s : out) s *= scale;
    return out;
}

bool certify_separable(const ProductState& psi) {
    if (psi.n_particles == 1) return true;
    const std::size_t g = static_cast<std::size_t>(psi.grid.n_points);
    for (int i = 0; i < psi.n_particles; ++i) {
        // bring particle i to the front, then test the prefix-1 bipartition
        ProductState perm = psi;
        if (i > 0) {
            const std::size_t s = psi.stride(i);
            const std::size_t rest_dim = psi.dim() / g;
            for (std::size_t idx = 0; idx < psi.dim(); ++idx) {
                const std::size_t ji = (idx / s) % g;
                const std::size_t rest = (idx / (s * g)) * s + idx % s;
                perm.amp[ji * rest_dim + rest] = psi.amp[idx];
            }
        }
        const std::vector<double> sv = schmidt_coefficients(perm, 1);
        if (sv.size() > 1 && sv[1] >= 1e-10) return false;
    }
    return true;
}

double factorization_defect(const ProductState& psi, const std::vector<OutcomeCell>& cells,
                            double alpha) {
    if (static_cast<int>(cells.size()) != psi.n_particles)
        throw std::invalid_argument("one outcome cell per particle required");
    const int g = psi.grid.n_points;
    const double sq = std::sqrt(alpha);

    // M_cell(x) = integral over collapse centers in the cell of the squared
    // kernel = (erf(sqrt(a)(hi-x)) - erf(sqrt(a)(lo-x))) / 2
    std::vector<std::vector<double>> m(psi.n_particles, std::vector<double>(g));
    for (int i = 0; i < psi.n_particles; ++i)
        for (int j = 0; j < g; ++j) {
            const double x = psi.grid.x(j);
            m[i][j] = 0.5 * (std::erf(sq * (cells[i].hi - x)) - std::erf(sq * (cells[i].lo - x)));
        }

    double joint = 0.0;
    std::vector<double> marg(psi.n_particles, 0.0);
    for (std::size_t idx = 0; idx < psi.dim(); ++idx) {
        const double w = std::norm(psi.amp[idx]);
        double prod = 1.0;
        for (int i = 0; i < psi.n_particles; ++i) {
            const double mi = m[i][(idx / psi.stride(i)) % g];
            prod *= mi;
            marg[i] += w * mi;
        }
        joint += w * prod;
    }
    const double vol = psi.cell_volume();
    joint *= vol;
    double prod_of_marg = 1.0;
    for (int i = 0; i < psi.n_particles; ++i) prod_of_marg *= marg[i] * vol;
    return std::abs(joint - prod_of_marg);
}

// ---------------------------------------------------------------------------
// frame comparison
// ---------------------------------------------------------------------------

namespace {

double density_mid(const ProductState& psi, int particle) {
    const std::vector<double> rho = marginal_density(psi, particle);
    double s = 0.0, tot = 0.0;
    for (int j = 0; j < psi.grid.n_points; ++j) {
        s += psi.grid.x(j) * rho[j];
        tot += rho[j];
    }
    return s / tot;
}

struct SampledFlash {
    double t;
    double x;
    ProductState post;
};

SampledFlash sample_particle_flash(const ProductState& psi0, int particle, double t0,
                                   double tau, double alpha, RngStream& rng) {
    const double dt = rng.exponential(tau);
    ProductState at_t = evolve_product(psi0, dt);
    const std::vector<double> pdf = particle_flash_pdf(at_t, particle, alpha);
    const int c = static_cast<int>(rng.categorical(pdf));
    const double x_c = psi0.grid.x(c);
    ProductState post = collapse_particle(at_t, particle, x_c, alpha).first;
    return {t0 + dt, x_c, std::move(post)};
}

}  // namespace

FrameComparisonResult frame_comparison_defect(const ProductState& psi0,
                                              const SpacetimePoint& x1,
                                              const SpacetimePoint& x2,
                                              const HyperplaneLabel& sigma_prime, double tau,
                                              double alpha, RngStream& rng) {
    // sigma' must lie to the future of both seeds in its own frame
    if (x1.frame_time(sigma_prime.eta) >= sigma_prime.t ||
        x2.frame_time(sigma_prime.eta) >= sigma_prime.t)
        throw std::runtime_error("invalid foliation geometry");

    const double mid = density_mid(psi0, 1);
    auto sample_side = [&](bool left) -> SampledFlash {
        for (int attempt = 0; attempt < 10000; ++attempt) {
            SampledFlash f = sample_particle_flash(psi0, 1, x2.t, tau, alpha, rng);
            const bool is_left = f.x < mid;
            const bool below_sigma =
                SpacetimePoint{f.t, f.x}.frame_time(sigma_prime.eta) < sigma_prime.t;
            if (is_left == left && below_sigma) return f;
        }
        throw std::runtime_error("invalid foliation geometry");
    };

    SampledFlash left = sample_side(true);
    SampledFlash right = sample_side(false);

    // compare on the first common lab surface after both realizations
    const double t_cmp = std::max(left.t, right.t);
    ProductState a = evolve_product(left.post, t_cmp - left.t);
    ProductState b = evolve_product(right.post, t_cmp - right.t);

    FrameComparisonResult res;
    res.y2_left = {left.t, left.x};
    res.y2_right = {right.t, right.x};
    res.reduced1_trace_distance =
        trace_distance(reduced_density(a, 0), reduced_density(b, 0), psi0.grid.dx);
    // pure joint states: TD = sqrt(1 - |<a|b>|^2)
    cplx ov = 0.0;
    for (std::size_t i = 0; i < a.amp.size(); ++i) ov += std::conj(a.amp[i]) * b.amp[i];
    ov *= a.cell_volume();
    res.joint_trace_distance = std::sqrt(std::max(0.0, 1.0 - std::norm(ov)));
    return res;
}

NoSignalingResult no_signaling_check(const ProductState& psi0, double tau, double alpha,
                                     long trials, RngStream& rng) {
    const double mid = density_mid(psi0, 0);
    long left_with = 0, left_without = 0;
    for (long k = 0; k < trials; ++k) {
        // particle 2 flashes first, then particle 1
        SampledFlash f2 = sample_particle_flash(psi0, 1, 0.0, tau, alpha, rng);
        SampledFlash f1 = sample_particle_flash(f2.post, 0, f2.t, tau, alpha, rng);
        if (f1.x < mid) ++left_with;
        // control: particle 1 flashes with particle 2 untouched
        const double dt_dummy = rng.exponential(tau);  // keep the clocks comparable
        (void)dt_dummy;
        SampledFlash g1 = sample_particle_flash(psi0, 0, 0.0, tau, alpha, rng);
        if (g1.x < mid) ++left_without;
    }
    NoSignalingResult res;
    res.trials = trials;
    res.p_left_with = static_cast<double>(left_with) / trials;
    res.p_left_without = static_cast<double>(left_without) / trials;
    const double pooled = 0.5 * (res.p_left_with + res.p_left_without);
    const double se = std::sqrt(std::max(pooled * (1.0 - pooled) * 2.0 / trials, 1e-300));
    res.sigma = std::abs(res.p_left_with - res.p_left_without) / se;
    return res;
}

// ---------------------------------------------------------------------------
// interaction obstruction
// ---------------------------------------------------------------------------

TwoParticleOperators build_interaction_system(const SpatialGrid& grid, double mass,
                                              const InteractionSpec& spec, int particle,
                                              double x_c, double alpha, double dt) {
    const int g = grid.n_points;
    if (g > 32) throw std::invalid_argument("interaction grid too large for explicit matrices");
    if (particle != 0 && particle != 1) throw std::invalid_argument("particle index out of range");

    // single-particle kinetic operator, spectral
    Eigen::MatrixXcd t1 = Eigen::MatrixXcd::Zero(g, g);
    for (int j = 0; j < g; ++j)
        for (int l = 0; l < g; ++l) {
            cplx acc = 0.0;
            for (int k = 0; k < g; ++k) {
                const double p = grid.p(k);
                acc += (p * p / (2.0 * mass)) *
                       std::polar(1.0 / g, p * (grid.x(j) - grid.x(l)));
            }
            t1(j, l) = acc;
        }
    t1 = 0.5 * (t1 + t1.adjoint()).eval();

    const int dim = g * g;
    TwoParticleOperators ops;
    ops.free_hamiltonian = Eigen::MatrixXcd::Zero(dim, dim);
    for (int a = 0; a < g; ++a)
        for (int b = 0; b < g; ++b)
            for (int c = 0; c < g; ++c) {
                ops.free_hamiltonian(a * g + b, c * g + b) += t1(a, c);
                ops.free_hamiltonian(b * g + a, b * g + c) += t1(a, c);
            }

    ops.hamiltonian = ops.free_hamiltonian;
    for (int a = 0; a < g; ++a)
        for (int b = 0; b < g; ++b)
            ops.hamiltonian(a * g + b, a * g + b) +=
                spec.strength * spec.pair_potential(grid.x(a) - grid.x(b));

    auto expm = [dt](const Eigen::MatrixXcd& h) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
        Eigen::VectorXcd ph(es.eigenvalues().size());
        for (int i = 0; i < ph.size(); ++i)
            ph(i) = std::polar(1.0, -es.eigenvalues()(i) * dt);
        return (es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint()).eval();
    };
    ops.evolution = expm(ops.hamiltonian);
    ops.free_evolution = expm(ops.free_hamiltonian);

    CollapseKernel kern(x_c, alpha);
    ops.collapse_op = Eigen::MatrixXcd::Zero(dim, dim);
    for (int a = 0; a < g; ++a)
        for (int b = 0; b < g; ++b) {
            const double x = (particle == 0) ? grid.x(a) : grid.x(b);
            ops.collapse_op(a * g + b, a * g + b) = kern.factor(x);
        }
    return ops;
}

double commutator_defect(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return (a * b - b * a).norm() / (a.norm() * b.norm());
}

InteractionDefect interaction_factorization_defect(const SpatialGrid& grid, double mass,
                                                   const InteractionSpec& spec, int particle,
                                                   double x_c, double alpha, double dt) {
    TwoParticleOperators ops = build_interaction_system(grid, mass, spec, particle, x_c, alpha, dt);
    InteractionDefect d;
    const Eigen::MatrixXcd w_int = ops.free_evolution.adjoint() * ops.evolution;
    d.interaction_picture = commutator_defect(w_int, ops.collapse_op);
    d.raw = commutator_defect(ops.evolution, ops.collapse_op);
    return d;
}

// ---------------------------------------------------------------------------
// amplification
// ---------------------------------------------------------------------------

namespace {

// (|all at -a> + |all at +a>)/sqrt(2) held exactly as two product branches;
// every applied operation (per-particle Gaussian multiplication, free
// evolution, normalization) preserves the form.
struct TwoBranchState {
    std::vector<SurfaceWaveFunction> f1, f2;
    cplx c1{1.0 / std::numbers::sqrt2, 0.0};
    cplx c2{1.0 / std::numbers::sqrt2, 0.0};

    cplx branch_overlap(int skip = -1) const {
        cplx o = 1.0;
        for (std::size_t j = 0; j < f1.size(); ++j)
            if (static_cast<int>(j) != skip) o *= inner(f1[j], f2[j]);
        return o;
    }
    double norm2() const {
        return std::norm(c1) + std::norm(c2) +
               2.0 * std::real(std::conj(c1) * c2 * branch_overlap());
    }
    // Macroscopic superposition witness: probability mass of particle 0 on
    // either side of the midpoint. Survives while both lobes carry weight.
    double survival() const {
        const SpatialGrid& grid = f1[0].grid;
        const cplx rest = std::conj(c1) * c2 * branch_overlap(0);
        double left = 0.0, right = 0.0;
        for (int j = 0; j < grid.n_points; ++j) {
            const double rho = std::norm(c1) * std::norm(f1[0].amp[j]) +
                               std::norm(c2) * std::norm(f2[0].amp[j]) +
                               2.0 * std::real(rest * std::conj(f1[0].amp[j]) * f2[0].amp[j]);
            (grid.x(j) < 0.0 ? left : right) += std::max(rho, 0.0);
        }
        return std::min(left, right) / (left + right);
    }
};

double run_amplification_trial(int n_particles, double separation, double tau, double alpha,
                               const SpatialGrid& grid, double mass, double width,
                               RngStream& rng) {
    const HyperplaneLabel sigma = HyperplaneLabel::lab(0.0);
    TwoBranchState st;
    for (int i = 0; i < n_particles; ++i) {
        st.f1.push_back(surface_gaussian(grid, sigma, mass, Dispersion::Nonrelativistic,
                                         -separation / 2.0, width));
        st.f2.push_back(surface_gaussian(grid, sigma, mass, Dispersion::Nonrelativistic,
                                         separation / 2.0, width));
    }

    const int g = grid.n_points;
    const double kn = std::sqrt(alpha / std::numbers::pi);
    std::vector<double> next(n_particles);
    for (int i = 0; i < n_particles; ++i) next[i] = rng.exponential(tau);

    double now = 0.0;
    const double t_cap = 50.0 * tau;
    while (now < t_cap) {
        const int who = static_cast<int>(std::min_element(next.begin(), next.end()) -
                                         next.begin());
        const double t = next[who];
        next[who] = t + rng.exponential(tau);

        const double dt = t - now;
        now = t;
        for (auto& f : st.f1) f = free_evolve(f, dt);
        for (auto& f : st.f2) f = free_evolve(f, dt);

        // location pdf for this particle's flash, exact in the branch form
        const cplx rest_overlap = std::conj(st.c1) * st.c2 * st.branch_overlap(who);
        std::vector<double> pdf(g, 0.0);
        for (int c = 0; c < g; ++c) {
            double q1 = 0.0, q2 = 0.0;
            cplx cr = 0.0;
            for (int j = 0; j < g; ++j) {
                const double d = grid.x(j) - grid.x(c);
                const double k2 = kn * std::exp(-alpha * d * d);
                q1 += k2 * std::norm(st.f1[who].amp[j]);
                q2 += k2 * std::norm(st.f2[who].amp[j]);
                cr += k2 * std::conj(st.f1[who].amp[j]) * st.f2[who].amp[j];
            }
            pdf[c] = std::max(0.0, std::norm(st.c1) * q1 + std::norm(st.c2) * q2 +
                                       2.0 * std::real(rest_overlap * cr));
        }
        const int c = static_cast<int>(rng.categorical(pdf));
        const double x_c = grid.x(c);

        CollapseKernel kern(x_c, alpha);
        auto hit = [&](SurfaceWaveFunction& f, cplx& coeff) {
            double w = 0.0;
            for (int j = 0; j < g; ++j) {
                f.amp[j] *= kern.factor(grid.x(j));
                w += std::norm(f.amp[j]);
            }
            w *= grid.dx;
            if (w > kNullWeight) {
                const double inv = 1.0 / std::sqrt(w);
                for (cplx& a : f.amp) a *= inv;
                coeff *= std::sqrt(w);
            } else {
                coeff = 0.0;
            }
        };
        hit(st.f1[who], st.c1);
        hit(st.f2[who], st.c2);

        const double n2 = st.norm2();
        st.c1 /= std::sqrt(n2);
        st.c2 /= std::sqrt(n2);

        if (st.survival() < 1e-3) return now;
    }
    return t_cap;
}

}  // namespace

AmplificationResult amplification_rate(int n_particles, double separation, double tau,
                                       double alpha, std::uint64_t seed, long trials,
                                       const SpatialGrid& grid, double mass,
                                       double packet_width) {
    if (n_particles < 1 || n_particles > 8)
        throw std::invalid_argument("n_particles must be 1..8");
    if (trials < 30) throw std::runtime_error("insufficient data");

    std::vector<double> death_times(trials);
    for (long k = 0; k < trials; ++k) {
        RngStream rng = RngStream::substream(seed, static_cast<std::uint64_t>(k));
        death_times[k] = run_amplification_trial(n_particles, separation, tau, alpha, grid,
                                                 mass, packet_width, rng);
    }
    const BootstrapCi ci = bootstrap_mean_ci(death_times);
    AmplificationResult res;
    res.trials = trials;
    res.rate = 1.0 / ci.mean;
    res.ci_lo = 1.0 / ci.ci_hi;
    res.ci_hi = 1.0 / ci.ci_lo;
    return res;
}

}  // namespace collapsim
