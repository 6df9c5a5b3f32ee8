#pragma once

// Floquet spectrum of the delay-coupled closed loop, by two independent
// routes: (i) Newton on the transcendental characteristic function
// h(λ) = det[λI - P(1 - ε/(λ-(1-ε)); δ, K0)], seeded from the classically
// assigned spectrum, the asymptotic delay circle and the trivial multiplier;
// (ii) eigenvalues of an explicitly assembled time-T map of the linear loop
// with the x̃ history discretized on a uniform mesh.

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "design.hpp"
#include "impulse.hpp"
#include "linalg.hpp"
#include "ode.hpp"
#include "system.hpp"

namespace etdf {

// ============================================================================
// δ→0 limit pieces
// ============================================================================

// σ(μ) = (exp(μ c) - 1)/c, the c→0 limit being μ.  c = K0ᵀ b(0).
inline Complex sigma(Complex mu, double c) {
    if (std::abs(c) < 1e-12) return mu;
    return (std::exp(mu * c) - 1.0) / c;
}

// P(μ; 0, K0) = P0 exp(-b0 K0ᵀ μ) through the rank-one identity.
inline Matrix delta_limit_monodromy(const Matrix& P0, const Vector& b0, const Vector& K0,
                                    double mu = 1.0) {
    Vector scaledK(K0.size());
    for (std::size_t i = 0; i < K0.size(); ++i) scaledK[i] = -mu * K0[i];
    return P0 * rank1_exp(b0, scaledK);
}

// ============================================================================
// Parametrised monodromy P(μ; δ, K0)
// ============================================================================

namespace detail {

inline ImpulseProfile spectrum_profile(const Linearization& lin, const GainDesign& d) {
    // spectrum analysis always uses the nominal period gate
    ImpulseProfile p{d.delta, lin.T, d.regularised_impulse};
    p.validate();
    return p;
}

}  // namespace detail

// Fundamental matrix over one period of ẏ = [A(t) - μ b(t) g(t) K0ᵀ] y with
// g = Δ_δ (time/state gating; both share this linearisation) or g ≡ 1
// (constant gains).
inline CMatrix monodromy_parametrized(const Linearization& lin, Complex mu, const GainDesign& d,
                                      double rtol = 1e-10, double atol = 1e-12) {
    const std::size_t n = lin.n;
    IntegrateOptions opt;
    opt.rtol = rtol;
    opt.atol = atol;
    const bool constant = (d.gating == Gating::constant_gain);
    ImpulseProfile prof;
    if (!constant) {
        prof = detail::spectrum_profile(lin, d);
        opt.breakpoints = prof.breakpoints(0.0, lin.T);
    }
    auto gen = [&](double t) {
        CMatrix G = to_complex(lin.A(t));
        const double g = constant ? 1.0 : prof.value(t);
        if (g != 0.0) {
            const Vector bt = lin.b(t);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) G(i, j) -= mu * g * bt[i] * d.K0[j];
        }
        return G;
    };
    return fundamental_matrix_complex(gen, 0.0, lin.T, n, opt);
}

// Real path for real μ (the classical closed loop P(1; δ, K0) and friends).
inline Matrix monodromy_closed_loop(const Linearization& lin, const GainDesign& d, double mu = 1.0,
                                    double rtol = 1e-10, double atol = 1e-12) {
    const std::size_t n = lin.n;
    IntegrateOptions opt;
    opt.rtol = rtol;
    opt.atol = atol;
    const bool constant = (d.gating == Gating::constant_gain);
    ImpulseProfile prof;
    if (!constant) {
        prof = detail::spectrum_profile(lin, d);
        opt.breakpoints = prof.breakpoints(0.0, lin.T);
    }
    auto gen = [&](double t) {
        Matrix G = lin.A(t);
        const double g = constant ? 1.0 : prof.value(t);
        if (g != 0.0) {
            const Vector bt = lin.b(t);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) G(i, j) -= mu * g * bt[i] * d.K0[j];
        }
        return G;
    };
    return fundamental_matrix(gen, 0.0, lin.T, n, opt);
}

// ============================================================================
// Characteristic function
// ============================================================================

struct PoleProximityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MuBoundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// h(λ) = det[λI - P(1 - ε/(λ - (1-ε)); δ, K0)].  Roots different from 1-ε are
// the closed-loop Floquet multipliers.
inline Complex char_fn(Complex lambda, const Linearization& lin, const GainDesign& d,
                       double rtol = 1e-10, double mu_bound = 4.0) {
    const Complex pole = Complex(1.0 - d.epsilon, 0.0);
    if (std::abs(lambda - pole) < 1e-8)
        throw PoleProximityError("char_fn: pole proximity at lambda = 1 - epsilon");
    const Complex mu = 1.0 - d.epsilon / (lambda - pole);
    if (std::abs(mu) > mu_bound)
        throw MuBoundError("char_fn: |mu| exceeds declared bound");
    const CMatrix P = monodromy_parametrized(lin, mu, d, rtol);
    CMatrix M(lin.n, lin.n);
    for (std::size_t i = 0; i < lin.n; ++i)
        for (std::size_t j = 0; j < lin.n; ++j)
            M(i, j) = (i == j ? lambda : Complex{}) - P(i, j);
    return determinant(M);
}

// ============================================================================
// κ-roots and asymptotic delay-induced multipliers
// ============================================================================

struct KappaRoots {
    CVector roots;          // ordered by ℓ = -L..L
    std::vector<int> ell;   // matching indices
    double c = 0;           // K0ᵀ b(0)
    int l_max = 0;          // floor((√3/2π)|c|), the admissible range
    int margin = 0;         // extra seed indices carried on each side

    bool admissible(int l) const { return std::abs(l) <= l_max; }
};

// κ_{ℓ,0} = 1 + 2πiℓ/c; a single root 1 when c = 0.
inline KappaRoots kappa_roots(const Vector& K0, const Vector& b0, int margin = 2) {
    KappaRoots k;
    k.c = dot(K0, b0);
    k.margin = margin;
    if (std::abs(k.c) < 1e-12) {
        k.roots = {Complex(1.0, 0.0)};
        k.ell = {0};
        k.l_max = 0;
        return k;
    }
    k.l_max = static_cast<int>(std::floor(std::sqrt(3.0) / (2 * M_PI) * std::abs(k.c)));
    const int L = k.l_max + margin;
    for (int l = -L; l <= L; ++l) {
        k.ell.push_back(l);
        k.roots.push_back(Complex(1.0, 0.0) + Complex(0.0, 2 * M_PI * l) / k.c);
    }
    return k;
}

// λ_ℓ = 1 - ε/2 + (ε/2)(c - 2πiℓ)/(c + 2πiℓ); exact at ℓ = 0 (the trivial
// multiplier) and on the circle |λ - (1-ε/2)| = ε/2 for every ℓ.
inline CVector asymptotic_delay_multipliers(const Vector& K0, const Vector& b0, double epsilon,
                                            int margin = 2) {
    const KappaRoots k = kappa_roots(K0, b0, margin);
    CVector lam;
    for (std::size_t i = 0; i < k.roots.size(); ++i) {
        const int l = k.ell[i];
        if (l == 0) {
            lam.push_back(Complex(1.0, 0.0));
            continue;
        }
        const Complex tpl(0.0, 2 * M_PI * l);
        lam.push_back(1.0 - epsilon / 2 + (epsilon / 2) * (k.c - tpl) / (k.c + tpl));
    }
    return lam;
}

// ============================================================================
// Spectrum containers
// ============================================================================

enum class MultiplierClass { assigned, delay_induced, trivial };
enum class SpectrumMethod { char_fn, operator_map, asymptotic, classical };

inline const char* to_string(MultiplierClass c) {
    switch (c) {
        case MultiplierClass::assigned: return "assigned";
        case MultiplierClass::delay_induced: return "delay_induced";
        default: return "trivial";
    }
}
inline const char* to_string(SpectrumMethod m) {
    switch (m) {
        case SpectrumMethod::char_fn: return "char_fn";
        case SpectrumMethod::operator_map: return "operator";
        case SpectrumMethod::asymptotic: return "asymptotic";
        default: return "classical";
    }
}

struct Multiplier {
    Complex value;
    MultiplierClass cls = MultiplierClass::assigned;
    double residual = 0;
};

struct FloquetSpectrum {
    std::vector<Multiplier> multipliers;
    SpectrumMethod method = SpectrumMethod::char_fn;
    double epsilon = 0, delta = 0;
    std::vector<std::string> warnings;
    CVector unresolved_seeds;
    bool must_fail_small_epsilon = false;  // classical closed loop unstable: ETDF at small epsilon inherits it

    double max_nontrivial_modulus() const {
        double m = 0;
        for (const auto& mu : multipliers)
            if (mu.cls != MultiplierClass::trivial) m = std::max(m, std::abs(mu.value));
        return m;
    }
    bool stable() const { return max_nontrivial_modulus() < 1.0; }

    CVector values() const {
        CVector v;
        for (const auto& m : multipliers) v.push_back(m.value);
        return v;
    }
    CVector values_above(double modulus) const {
        CVector v;
        for (const auto& m : multipliers)
            if (std::abs(m.value) > modulus) v.push_back(m.value);
        return v;
    }

    void sort_deterministic() {
        std::sort(multipliers.begin(), multipliers.end(),
                  [](const Multiplier& a, const Multiplier& b) {
                      if (a.cls != b.cls) return static_cast<int>(a.cls) < static_cast<int>(b.cls);
                      if (a.value.real() != b.value.real())
                          return a.value.real() > b.value.real();
                      return a.value.imag() > b.value.imag();
                  });
    }
};

struct SpectrumOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double mu_bound = 4.0;      // |ε/(λ-(1-ε))| ≤ 2 in the proof region, with margin
    double dedup_tol = 1e-8;
    int newton_max_iter = 60;
    double newton_step_tol = 1e-11;
    double fd_step_rel = 1e-6;
    int seed_margin = 2;
    double trivial_tol = 1e-6;
};

// ============================================================================
// Classical spectrum (eigenvalues of P(1; δ, K0))
// ============================================================================

inline FloquetSpectrum classical_spectrum(const Linearization& lin, const GainDesign& d,
                                          const SpectrumOptions& opt = {}) {
    FloquetSpectrum sp;
    sp.method = SpectrumMethod::classical;
    sp.epsilon = d.epsilon;
    sp.delta = d.delta;
    const Matrix P1 = monodromy_closed_loop(lin, d, 1.0, opt.rtol, opt.atol);
    CVector ev = eigenvalues(P1);
    sort_complex(ev);
    // at most one entry counts as the trivial multiplier: the one closest to 1
    std::size_t triv = ev.size();
    double best = opt.trivial_tol;
    for (std::size_t i = 0; i < ev.size(); ++i) {
        const double dst = std::abs(ev[i] - 1.0);
        if (dst <= best) {
            best = dst;
            triv = i;
        }
    }
    for (std::size_t i = 0; i < ev.size(); ++i) {
        Multiplier m;
        m.value = ev[i];
        m.cls = (i == triv) ? MultiplierClass::trivial : MultiplierClass::assigned;
        sp.multipliers.push_back(m);
        if (m.cls != MultiplierClass::trivial && std::abs(m.value) > 1.0)
            sp.must_fail_small_epsilon = true;
    }
    if (sp.must_fail_small_epsilon)
        sp.warnings.push_back("classical closed loop unstable: ETDF must fail for small epsilon");
    sp.sort_deterministic();
    return sp;
}

// ============================================================================
// Characteristic-function spectrum (seeded Newton)
// ============================================================================

inline FloquetSpectrum spectrum_char(const Linearization& lin, const GainDesign& d,
                                     const SpectrumOptions& opt = {}) {
    FloquetSpectrum sp;
    sp.method = SpectrumMethod::char_fn;
    sp.epsilon = d.epsilon;
    sp.delta = d.delta;

    const Vector b0 = lin.b(0.0);
    struct Seed {
        Complex z;
        MultiplierClass cls;
    };
    std::vector<Seed> seeds;
    const FloquetSpectrum classical = classical_spectrum(lin, d, opt);
    CVector assigned_seeds;
    for (const auto& m : classical.multipliers) {
        seeds.push_back({m.value, MultiplierClass::assigned});
        assigned_seeds.push_back(m.value);
    }
    const CVector lam_asym = asymptotic_delay_multipliers(d.K0, b0, d.epsilon, opt.seed_margin);
    CVector delay_seeds;
    for (const Complex& z : lam_asym)
        if (std::abs(z - 1.0) > 1e-14) {
            seeds.push_back({z, MultiplierClass::delay_induced});
            delay_seeds.push_back(z);
        }
    seeds.push_back({Complex(1.0, 0.0), MultiplierClass::trivial});

    auto h = [&](Complex z) { return char_fn(z, lin, d, opt.rtol, opt.mu_bound); };

    struct Root {
        Complex value;
        double residual;
    };
    std::vector<Root> roots;
    for (const Seed& seed : seeds) {
        Complex z = seed.z;
        bool ok = false;
        double resid = 0;
        try {
            for (int it = 0; it < opt.newton_max_iter; ++it) {
                const Complex h0 = h(z);
                const double s = opt.fd_step_rel * std::max(std::abs(z), 1e-3);
                const Complex dh = (h(z + s) - h(z - s)) / (2 * s);
                if (dh == Complex{}) break;
                const Complex step = h0 / dh;
                Complex znew = z - step;
                // keep the iterate inside the admissible μ region
                int guard = 0;
                while (guard < 4) {
                    const Complex mu = 1.0 - d.epsilon / (znew - (1.0 - d.epsilon));
                    if (std::abs(znew - (1.0 - d.epsilon)) > 1e-8 && std::abs(mu) <= opt.mu_bound)
                        break;
                    znew = 0.5 * (z + znew);
                    ++guard;
                }
                z = znew;
                if (std::abs(step) <= opt.newton_step_tol * std::max(1.0, std::abs(z))) {
                    resid = std::abs(h(z));
                    ok = true;
                    break;
                }
            }
        } catch (const PoleProximityError&) {
            ok = false;
        } catch (const MuBoundError&) {
            ok = false;
        }
        if (ok)
            roots.push_back({z, resid});
        else
            sp.unresolved_seeds.push_back(seed.z);
    }

    // deduplicate within dedup_tol, keeping the smaller residual
    std::vector<Root> unique_roots;
    for (const Root& r : roots) {
        bool merged = false;
        for (Root& u : unique_roots)
            if (std::abs(u.value - r.value) < opt.dedup_tol) {
                if (r.residual < u.residual) u = r;
                merged = true;
                break;
            }
        if (!merged) unique_roots.push_back(r);
    }

    // classification: the root closest to 1 (within trivial_tol) is trivial,
    // everything else goes to the nearest seed family, ties to delay_induced
    std::size_t triv = unique_roots.size();
    double best = opt.trivial_tol;
    for (std::size_t i = 0; i < unique_roots.size(); ++i) {
        const double dst = std::abs(unique_roots[i].value - 1.0);
        if (dst <= best) {
            best = dst;
            triv = i;
        }
    }
    std::size_t n_assigned = 0;
    for (std::size_t i = 0; i < unique_roots.size(); ++i) {
        Multiplier m;
        m.value = unique_roots[i].value;
        m.residual = unique_roots[i].residual;
        if (i == triv) {
            m.cls = MultiplierClass::trivial;
        } else {
            double da = std::numeric_limits<double>::infinity();
            for (const Complex& s : assigned_seeds) da = std::min(da, std::abs(m.value - s));
            double dd = std::numeric_limits<double>::infinity();
            for (const Complex& s : delay_seeds) dd = std::min(dd, std::abs(m.value - s));
            m.cls = (da < dd) ? MultiplierClass::assigned : MultiplierClass::delay_induced;
            if (m.cls == MultiplierClass::assigned) ++n_assigned;
        }
        sp.multipliers.push_back(m);
        if (m.cls != MultiplierClass::trivial && std::abs(m.value) >= 1.0)
            sp.warnings.push_back("root outside unit circle: " + std::to_string(m.value.real()) +
                                  (m.value.imag() < 0 ? "-" : "+") +
                                  std::to_string(std::abs(m.value.imag())) + "i");
    }
    if (n_assigned < lin.n)
        sp.warnings.push_back("possible root coalescence: fewer assigned roots than n");
    sp.sort_deterministic();
    return sp;
}

// Diagnostic grid scan over the annulus around 1-ε where the delay-induced
// roots live (|λ-(1-ε)| between ε/2.5 and 2ε, i.e. |κ| in [0.5, 2.5]):
// local minima of |h| on a polar grid, Newton-polished and deduplicated. A
// fallback for configurations where the asymptotic seeds miss roots; the
// seeded path stays the default.
inline CVector annulus_scan(const Linearization& lin, const GainDesign& d,
                            const SpectrumOptions& opt = {}, std::size_t n_radial = 8,
                            std::size_t n_angular = 48) {
    const double eps = d.epsilon;
    const Complex center(1 - eps, 0.0);
    auto ring_radius = [&](std::size_t i) {
        const double f = static_cast<double>(i) / static_cast<double>(n_radial - 1);
        return eps * (0.4 + (2.0 - 0.4) * f);
    };
    std::vector<std::vector<double>> mag(n_radial, std::vector<double>(n_angular, 0.0));
    for (std::size_t i = 0; i < n_radial; ++i)
        for (std::size_t j = 0; j < n_angular; ++j) {
            const double th = 2 * M_PI * static_cast<double>(j) / static_cast<double>(n_angular);
            double v = std::numeric_limits<double>::infinity();
            try {
                v = std::abs(char_fn(center + std::polar(ring_radius(i), th), lin, d, opt.rtol,
                                     opt.mu_bound));
            } catch (const std::exception&) {
            }
            mag[i][j] = v;
        }

    CVector candidates;
    for (std::size_t i = 0; i < n_radial; ++i)
        for (std::size_t j = 0; j < n_angular; ++j) {
            const double v = mag[i][j];
            if (!std::isfinite(v)) continue;
            bool is_min = true;
            for (int di = -1; di <= 1 && is_min; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    if (!di && !dj) continue;
                    const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i) + di;
                    if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(n_radial)) continue;
                    const std::size_t jj =
                        (j + static_cast<std::size_t>(dj + static_cast<int>(n_angular))) %
                        n_angular;
                    if (mag[static_cast<std::size_t>(ii)][jj] < v) {
                        is_min = false;
                        break;
                    }
                }
            if (!is_min) continue;
            const double th = 2 * M_PI * static_cast<double>(j) / static_cast<double>(n_angular);
            Complex z = center + std::polar(ring_radius(i), th);
            try {  // polish
                for (int it = 0; it < opt.newton_max_iter; ++it) {
                    const Complex h0 = char_fn(z, lin, d, opt.rtol, opt.mu_bound);
                    const double s = opt.fd_step_rel * std::max(std::abs(z), 1e-3);
                    const Complex dh = (char_fn(z + s, lin, d, opt.rtol, opt.mu_bound) -
                                        char_fn(z - s, lin, d, opt.rtol, opt.mu_bound)) /
                                       (2 * s);
                    if (dh == Complex{}) break;
                    const Complex step = h0 / dh;
                    z -= step;
                    if (std::abs(step) <= opt.newton_step_tol * std::max(1.0, std::abs(z))) {
                        bool dup = false;
                        for (const Complex& c : candidates)
                            if (std::abs(c - z) < opt.dedup_tol) dup = true;
                        if (!dup) candidates.push_back(z);
                        break;
                    }
                }
            } catch (const std::exception&) {
            }
        }
    sort_complex(candidates);
    return candidates;
}

// ============================================================================
// Discretized time-T operator spectrum
// ============================================================================

// State (x(0), x̃ history on a uniform N-point mesh of [-T, 0], piecewise
// linear). One application of the map:
//   1. reconstruct x on [-T,0] by integrating the closed-loop ODE backward
//      from x(0) with the stored x̃ history as forcing,
//   2. x̃ on [0,T] from the difference equation,
//   3. advance x on [0,T] with that forcing.
// Columns of the (n+nN)² matrix are the map applied to basis vectors.
inline FloquetSpectrum operator_spectrum(const Linearization& lin, const GainDesign& d,
                                         std::size_t N, const SpectrumOptions& opt = {}) {
    if (N < 32) throw std::invalid_argument("operator_spectrum: N >= 32 required");
    const std::size_t n = lin.n;
    const double T = lin.T;
    const double h = T / static_cast<double>(N - 1);
    const std::size_t m = n + n * N;
    const double eps = d.epsilon;
    const bool constant = (d.gating == Gating::constant_gain);
    ImpulseProfile prof;
    if (!constant) prof = detail::spectrum_profile(lin, d);

    // mesh node times on [-T, 0]
    std::vector<double> node(N);
    for (std::size_t j = 0; j < N; ++j) node[j] = -T + h * static_cast<double>(j);

    // Step boundaries where the forcing can kink: the gate window edges plus
    // every history-mesh node that lands inside an active window (for constant
    // gains the forcing is piecewise linear everywhere, so all nodes count).
    auto window_breaks = [&](double a, double b) {
        std::vector<double> bp;
        if (!constant) bp = prof.breakpoints(a, b);
        const double d2 = d.delta * d.delta;
        for (std::size_t j = 0; j < N; ++j)
            for (double off : {0.0, T, 2 * T}) {
                const double t = node[j] + off;  // shifted copies cover [-T, 2T]
                if (t <= a || t >= b) continue;
                if (constant) {
                    bp.push_back(t);
                    continue;
                }
                const double tau = prof.local_time(t);
                if (tau <= d.delta + d2 || tau >= T - d2) bp.push_back(t);
            }
        return bp;
    };

    IntegrateOptions iopt;
    iopt.rtol = opt.rtol;
    iopt.atol = opt.atol;

    Matrix M(m, m);
    Vector eta(n * N);   // history coefficients of the current basis vector
    Vector x0(n);

    auto eta_hat = [&](double t, Vector& out) {  // PL interpolation on [-T,0]
        double s = (t + T) / h;
        s = std::clamp(s, 0.0, static_cast<double>(N - 1));
        std::size_t j = std::min(static_cast<std::size_t>(s), N - 2);
        const double w = s - static_cast<double>(j);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = (1 - w) * eta[j * n + i] + w * eta[(j + 1) * n + i];
    };

    Vector scratch_eta(n), scratch_xp(n);
    for (std::size_t col = 0; col < m; ++col) {
        std::fill(x0.begin(), x0.end(), 0.0);
        std::fill(eta.begin(), eta.end(), 0.0);
        if (col < n)
            x0[col] = 1.0;
        else
            eta[col - n] = 1.0;

        // 1. backward reconstruction of x on [-T, 0], integrated in τ = -t
        auto rhs_back = [&](double tau, std::span<const double> y, std::span<double> dy) {
            const double t = -tau;
            const Matrix A = lin.A(t);
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0;
                for (std::size_t k2 = 0; k2 < n; ++k2) s += A(i, k2) * y[k2];
                dy[i] = -s;
            }
            const double g = constant ? 1.0 : prof.value(t);
            if (g != 0.0) {
                eta_hat(t, scratch_eta);
                double feed = 0;
                for (std::size_t i = 0; i < n; ++i)
                    feed += d.K0[i] * (scratch_eta[i] - y[i]);
                const Vector bt = lin.b(t);
                for (std::size_t i = 0; i < n; ++i) dy[i] -= bt[i] * g * feed;
            }
        };
        IntegrateOptions bopt = iopt;
        {
            std::vector<double> tb = window_breaks(-T, 0.0);
            for (double& v : tb) v = -v;
            bopt.breakpoints = std::move(tb);
        }
        const Trajectory back = integrate(rhs_back, 0.0, T, x0, bopt);
        auto xprev = [&back](double t, Vector& out) { back.eval_into(-t, out.data()); };

        // 2.+3. forward pass with x̃(t) = (1-ε) η(t-T) + ε x(t-T)
        auto xtilde = [&](double t, Vector& out) {
            eta_hat(t - T, scratch_eta);
            xprev(t - T, scratch_xp);
            for (std::size_t i = 0; i < n; ++i)
                out[i] = (1 - eps) * scratch_eta[i] + eps * scratch_xp[i];
        };
        Vector scratch_xt(n);
        auto rhs_fwd = [&](double t, std::span<const double> y, std::span<double> dy) {
            const Matrix A = lin.A(t);
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0;
                for (std::size_t k2 = 0; k2 < n; ++k2) s += A(i, k2) * y[k2];
                dy[i] = s;
            }
            const double g = constant ? 1.0 : prof.value(t);
            if (g != 0.0) {
                xtilde(t, scratch_xt);
                double feed = 0;
                for (std::size_t i = 0; i < n; ++i) feed += d.K0[i] * (scratch_xt[i] - y[i]);
                const Vector bt = lin.b(t);
                for (std::size_t i = 0; i < n; ++i) dy[i] += bt[i] * g * feed;
            }
        };
        IntegrateOptions fopt = iopt;
        fopt.breakpoints = window_breaks(0.0, T);
        fopt.store_dense = false;
        const Trajectory fwd = integrate(rhs_fwd, 0.0, T, x0, fopt);

        for (std::size_t i = 0; i < n; ++i) M(i, col) = fwd.back()[i];
        Vector xt(n);
        for (std::size_t j = 0; j < N; ++j) {
            const double t = h * static_cast<double>(j);
            xtilde(t, xt);
            for (std::size_t i = 0; i < n; ++i) M(n + j * n + i, col) = xt[i];
        }
    }

    CVector ev = eigenvalues(M);

    FloquetSpectrum sp;
    sp.method = SpectrumMethod::operator_map;
    sp.epsilon = eps;
    sp.delta = d.delta;
    // discretization pollutes small-modulus eigenvalues; the essential
    // spectral radius is 1-ε, so everything below (1-ε)/2 is discarded
    CVector kept;
    for (const Complex& z : ev)
        if (std::abs(z) >= (1 - eps) / 2) kept.push_back(z);
    sort_complex(kept);

    const FloquetSpectrum classical = classical_spectrum(lin, d, opt);
    const CVector assigned_seeds = classical.values();
    const CVector delay_seeds = asymptotic_delay_multipliers(d.K0, lin.b(0.0), eps, 6);

    std::size_t triv = kept.size();
    double best = opt.trivial_tol;
    for (std::size_t i = 0; i < kept.size(); ++i)
        if (std::abs(kept[i] - 1.0) <= best) {
            best = std::abs(kept[i] - 1.0);
            triv = i;
        }
    for (std::size_t i = 0; i < kept.size(); ++i) {
        Multiplier mu;
        mu.value = kept[i];
        if (i == triv) {
            mu.cls = MultiplierClass::trivial;
        } else {
            double da = std::numeric_limits<double>::infinity();
            for (const Complex& s : assigned_seeds) da = std::min(da, std::abs(kept[i] - s));
            double dd = std::numeric_limits<double>::infinity();
            for (const Complex& s : delay_seeds) dd = std::min(dd, std::abs(kept[i] - s));
            mu.cls = (da < dd) ? MultiplierClass::assigned : MultiplierClass::delay_induced;
        }
        sp.multipliers.push_back(mu);
    }
    sp.sort_deterministic();
    return sp;
}

// ============================================================================
// Adjoint eigenvector and the constant-gain necessary-condition ratio
// ============================================================================

struct DegenerateTrivialMultiplier : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// T-periodic solution of ẏ = -A(t)ᵀ y from the left eigenvector of P0 for the
// trivial multiplier, normalised so that x̄(0)ᵀ ẋ_*(0) = 1.
class AdjointEigenvector {
public:
    AdjointEigenvector(const Linearization& lin, const Vector& xdot0, double rtol = 1e-10,
                       double atol = 1e-12) {
        const Matrix P0 = monodromy_uncontrolled(lin, rtol, atol);
        const CVector ev = eigenvalues(P0);
        int near_one = 0;
        for (const Complex& z : ev)
            if (std::abs(z - 1.0) < 1e-8) ++near_one;
        if (near_one != 1)
            throw DegenerateTrivialMultiplier(
                "degenerate trivial multiplier: eigenvalue 1 of P0 not simple");
        Vector w = left_eigenvector(P0, 1.0);
        const double pairing = dot(w, xdot0);
        if (std::abs(pairing) < 1e-12)
            throw DegenerateTrivialMultiplier("degenerate trivial multiplier: zero pairing");
        for (auto& v : w) v /= pairing;
        T_ = lin.T;
        IntegrateOptions opt;
        opt.rtol = rtol;
        opt.atol = atol;
        const std::size_t n = lin.n;
        auto rhs = [&lin, n](double t, std::span<const double> y, std::span<double> dy) {
            const Matrix A = lin.A(t);
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0;
                for (std::size_t k = 0; k < n; ++k) s -= A(k, i) * y[k];
                dy[i] = s;
            }
        };
        traj_ = integrate(rhs, 0.0, T_, w, opt);
    }

    Vector eval(double t) const {
        double tau = std::fmod(t, T_);
        if (tau < 0) tau += T_;
        return traj_.eval(tau);
    }

    double periodicity_defect() const {
        const Vector a = traj_.front(), b = traj_.back();
        Vector diff(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
        return norm2(diff);
    }

private:
    double T_ = 0;
    Trajectory traj_;
};

inline AdjointEigenvector adjoint_eigenvector(const Linearization& lin, const PeriodicOrbit& orbit,
                                              double rtol = 1e-10) {
    return AdjointEigenvector(lin, orbit.anchor_velocity(), rtol);
}

// ∫ x̄ᵀ b Kᵀ ẋ_* dt / ∫ x̄ᵀ ẋ_* dt.  For an orbit with an odd number of
// multipliers with Re λ > 1, a stabilising constant-gain ETDF at small ε needs
// this ratio ≤ 0.
inline double constant_gain_criterion(const Linearization& lin, const PeriodicOrbit& orbit,
                                      const Vector& K, double rtol = 1e-10) {
    const AdjointEigenvector adj(lin, orbit.anchor_velocity(), rtol);
    const int M = 2048;
    const double T = lin.T;
    double num = 0, den = 0;
    for (int k = 0; k < M; ++k) {  // trapezoid on a periodic integrand
        const double t = T * k / M;
        const Vector xb = adj.eval(t);
        const Vector bt = lin.b(t);
        const Vector xd = orbit.xdot(t);
        num += dot(xb, bt) * dot(K, xd);
        den += dot(xb, xd);
    }
    num *= T / M;
    den *= T / M;
    if (std::abs(den) < 1e-12)
        throw std::runtime_error("constant_gain_criterion: degenerate normalization");
    return num / den;
}

}  // namespace etdf
