#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "wsl/dynamics.hpp"
#include "wsl/errors.hpp"
#include "wsl/rng.hpp"
#include "wsl/threshold.hpp"

// Threshold scans: measure the size of the double-escape window on the flux
// surface as a function of excess energy and fit the power law. Two escape
// measurements (bisection of the window edge, Monte Carlo fraction of an
// amplitude box) plus the linearized width as an analytic reference.
// Trajectory launches use the full-Hamiltonian shell so that each point's
// energy label is exact; see threshold.hpp.

namespace wsl {

namespace detail {

template <class Fn>
void parallel_for(long n, int workers, Fn&& fn)
{
    const long use = std::min<long>(std::max(workers, 1), n);
    if (use <= 1) {
        for (long i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<long> next{0};
    auto drain = [&] {
        for (long i; (i = next.fetch_add(1)) < n;)
            fn(i);
    };
    std::vector<std::thread> pool;
    pool.reserve(use);
    for (long w = 0; w < use; ++w)
        pool.emplace_back(drain);
    for (std::thread& t : pool)
        t.join();
}

}

/// Worker-count resolution: explicit request, then the WSL_WORKERS
/// environment variable, then the hardware concurrency.
inline int resolve_workers(int requested)
{
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("WSL_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0)
            return n;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc);
}

struct ProbeCounts {
    long n_integrations = 0;
    long n_double = 0;
    long n_single = 0;
    long n_sequential = 0;
    long n_bound = 0;
    long n_failures = 0;
    long n_infeasible = 0;
};

struct WidthResult {
    double width = 0.0;
    double sigma = 0.0;
    ProbeCounts counts;
    // largest |y|/|x| seen at the x = x_exit crossing among double escapes
    double projector_max_ratio = 0.0;
};

namespace detail {

struct ProbeOutcome {
    OutcomeLabel label;
    double exit_ratio;  // |y|/|x| when x crossed x_exit, NaN if never crossed
};

// Launch one full-shell sample and classify it, tracking the transverse
// ratio at the x_exit crossing on the way out.
inline ProbeOutcome probe_escape(const NormalModeFrame& frame, double eps, double x0,
                                 double x_exit, double yprime0, double pyprime0,
                                 const std::array<double, 3>& u,
                                 const std::array<double, 3>& pu,
                                 const IntegratorControls& ic, ProbeCounts& counts)
{
    FluxSample sample;
    try {
        sample = make_flux_sample(frame, eps, x0, yprime0, pyprime0, u, pu,
                                  ShellConvention::full);
    } catch (const InfeasibleSampleError&) {
        ++counts.n_infeasible;
        return {OutcomeLabel::Bound, std::numeric_limits<double>::quiet_NaN()};
    }

    double prev_x = x0, prev_y = sample.y0;
    double ratio = std::numeric_limits<double>::quiet_NaN();
    bool crossed = false;
    StepObserver watch = [&](double, const PhaseState& ps) {
        if (crossed)
            return;
        const Vec6 d = ps.q - frame.saddle.q;
        const double x = frame.e_x.dot(d);
        const double y = frame.e_y.dot(d);
        if (prev_x < x_exit && x >= x_exit) {
            const double f = (x_exit - prev_x) / (x - prev_x);
            const double y_at = prev_y + f * (y - prev_y);
            ratio = std::abs(y_at) / x_exit;
            crossed = true;
        }
        prev_x = x;
        prev_y = y;
    };

    ++counts.n_integrations;
    TrajectoryOutcome out{};
    try {
        const Trajectory tr = integrate(sample.state, frame.params, ic, {}, watch);
        out = classify(tr);
    } catch (const std::exception&) {
        // a probe the integrator rejects or cannot finish is a failed,
        // non-escaping sample; the window logic treats it as outside
        ++counts.n_failures;
        return {OutcomeLabel::Failure, ratio};
    }
    switch (out.label) {
        case OutcomeLabel::DoubleEscape: ++counts.n_double; break;
        case OutcomeLabel::SingleEscape: ++counts.n_single; break;
        case OutcomeLabel::SequentialEscape: ++counts.n_sequential; break;
        case OutcomeLabel::Bound: ++counts.n_bound; break;
        case OutcomeLabel::Failure: ++counts.n_failures; break;
    }
    return {out.label, ratio};
}

}

/// Bisect the edge of the double-escape window in y'_0 at fixed excess
/// energy, at fixed stable-mode amplitudes (zero by default) and zero
/// decaying-mode momentum. Failures and infeasible samples count as
/// non-escaping, which shrinks the bracket from the outside. The centre of
/// the flux surface must escape, otherwise the energy is below the usable
/// regime.
inline WidthResult critical_width_numeric(const NormalModeFrame& frame, double eps,
                                          double x0, double x_exit,
                                          const IntegratorControls& ic = {},
                                          double bisect_rel_tol = 1e-3,
                                          int max_expand = 64,
                                          const std::array<double, 3>& u = {0.0, 0.0, 0.0},
                                          const std::array<double, 3>& pu = {0.0, 0.0, 0.0})
{
    if (!(bisect_rel_tol > 0.0) || !(bisect_rel_tol < 1.0))
        throw std::domain_error("critical_width_numeric: bisect_rel_tol must be in (0, 1)");

    WidthResult res;
    auto is_double = [&](double yp) {
        const detail::ProbeOutcome po = detail::probe_escape(frame, eps, x0, x_exit, yp, 0.0,
                                                             u, pu, ic, res.counts);
        if (po.label == OutcomeLabel::DoubleEscape && po.exit_ratio == po.exit_ratio)
            res.projector_max_ratio = std::max(res.projector_max_ratio, po.exit_ratio);
        return po.label == OutcomeLabel::DoubleEscape;
    };

    if (!is_double(0.0))
        throw ThresholdRegimeError("critical_width_numeric: no double escape at the window "
                                   "centre, eps = " + std::to_string(eps));

    // bracket the edge starting from the linearized width
    double lo = 0.0;
    double hi = critical_width_harmonic(frame, eps, x0, x_exit);
    int expand = 0;
    while (is_double(hi)) {
        lo = hi;
        hi *= 2.0;
        if (++expand > max_expand)
            throw NoConvergenceError("critical_width_numeric: escape window edge not found "
                                     "after " + std::to_string(max_expand) + " doublings");
    }

    int iter = 0;
    while (hi - lo > bisect_rel_tol * hi) {
        if (++iter > 200)
            throw NoConvergenceError("critical_width_numeric: bisection stalled");
        const double mid = 0.5 * (lo + hi);
        (is_double(mid) ? lo : hi) = mid;
    }
    res.width = 0.5 * (lo + hi);
    res.sigma = 0.5 * (hi - lo);
    return res;
}

struct McBox {
    double y_half = 0.0;   // half-width of the y'_0 box
    double py_half = 0.0;  // half-width of the p_y'_0 box
    std::array<double, 3> u_half = {0.0, 0.0, 0.0};
    std::array<double, 3> pu_half = {0.0, 0.0, 0.0};
    double importance_half = 0.0;  // restrict y'_0 draws to this half-width, 0 = off
};

struct FractionResult {
    double fraction = 0.0;  // of the full y box, importance weight applied
    double sigma = 0.0;
    double box_used = 0.0;  // actual y'_0 draw half-width
    double weight = 1.0;    // box_used / y_half
    ProbeCounts counts;
};

/// Monte Carlo estimate of the double-escape fraction of the amplitude box
/// at one excess energy. Draws are keyed by (seed, stream, sample index),
/// so the result is bit-identical for any worker count.
inline FractionResult flux_monte_carlo(const NormalModeFrame& frame, double eps, double x0,
                                       double x_exit, const McBox& box, long n_samples,
                                       std::uint64_t seed, std::uint64_t stream = 0,
                                       const IntegratorControls& ic = {}, int workers = 1)
{
    if (n_samples <= 0 || !(box.y_half > 0.0))
        throw std::domain_error("flux_monte_carlo: need samples and a positive y box");

    FractionResult res;
    res.box_used = box.importance_half > 0.0 ? std::min(box.importance_half, box.y_half)
                                             : box.y_half;
    res.weight = res.box_used / box.y_half;

    std::atomic<long> a_int{0}, a_double{0}, a_single{0}, a_seq{0}, a_bound{0},
        a_fail{0}, a_inf{0};

    detail::parallel_for(n_samples, workers, [&](long i) {
        SplitMix64 rng = keyed_stream(seed, stream, std::uint64_t(i));
        const double yp = rng.symmetric(res.box_used);
        const double pyp = rng.symmetric(box.py_half);
        std::array<double, 3> u, pu;
        for (int k = 0; k < 3; ++k) {
            u[k] = rng.symmetric(box.u_half[k]);
            pu[k] = rng.symmetric(box.pu_half[k]);
        }
        ProbeCounts local;
        detail::probe_escape(frame, eps, x0, x_exit, yp, pyp, u, pu, ic, local);
        a_int += local.n_integrations;
        a_double += local.n_double;
        a_single += local.n_single;
        a_seq += local.n_sequential;
        a_bound += local.n_bound;
        a_fail += local.n_failures;
        a_inf += local.n_infeasible;
    });

    res.counts.n_integrations = a_int;
    res.counts.n_double = a_double;
    res.counts.n_single = a_single;
    res.counts.n_sequential = a_seq;
    res.counts.n_bound = a_bound;
    res.counts.n_failures = a_fail;
    res.counts.n_infeasible = a_inf;

    const double p = double(res.counts.n_double) / double(n_samples);
    res.fraction = res.weight * p;
    const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) / double(n_samples));
    res.sigma = res.weight * std::max(se, 1.0 / double(n_samples));
    return res;
}

struct FitResult {
    double slope = 0.0;
    double slope_err = 0.0;
    double intercept = 0.0;
    int n_used = 0;
    double chi2 = 0.0;
    int dof = 0;
};

struct EpsRecord {
    double eps = 0.0;
    double value = 0.0;  // window half-width, or box fraction for Monte Carlo
    double sigma = 0.0;
    double harmonic_width = 0.0;        // power-law reference (small-eps momentum)
    double harmonic_width_exact = 0.0;  // exact quadratic-shell reference
    ProbeCounts counts;
    double projector_max_ratio = 0.0;
    bool ok = false;
    std::string error;
};

/// Weighted log-log fit of value against eps over [window_lo, window_hi]
/// (0 means unbounded). With every point carrying an uncertainty the fit is
/// weighted and the quoted slope error absorbs any excess scatter through
/// the reduced chi-square; with any zero/missing sigma it falls back to an
/// ordinary least-squares fit with residual-based errors.
inline FitResult fit_exponent(const std::vector<EpsRecord>& records, double window_lo = 0.0,
                              double window_hi = 0.0)
{
    std::vector<double> x, y, sy;
    bool weighted = true;
    for (const EpsRecord& r : records) {
        if (!r.ok || !(r.value > 0.0) || !std::isfinite(r.value))
            continue;
        if (window_lo > 0.0 && r.eps < window_lo * (1.0 - 1e-12))
            continue;
        if (window_hi > 0.0 && r.eps > window_hi * (1.0 + 1e-12))
            continue;
        x.push_back(std::log(r.eps));
        y.push_back(std::log(r.value));
        sy.push_back(r.sigma / r.value);
        if (!(sy.back() > 0.0) || !std::isfinite(sy.back()))
            weighted = false;
    }
    const int n = int(x.size());
    if (n < 4)
        throw DegenerateWindowError("fit_exponent: only " + std::to_string(n)
                                    + " usable points in the window (need 4)");

    double sw = 0.0, swx = 0.0, swy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = weighted ? 1.0 / (sy[i] * sy[i]) : 1.0;
        sw += w;
        swx += w * x[i];
        swy += w * y[i];
    }
    const double xbar = swx / sw, ybar = swy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = weighted ? 1.0 / (sy[i] * sy[i]) : 1.0;
        sxx += w * (x[i] - xbar) * (x[i] - xbar);
        sxy += w * (x[i] - xbar) * (y[i] - ybar);
    }
    if (!(sxx > 0.0))
        throw DegenerateWindowError("fit_exponent: degenerate abscissa spread");

    FitResult fit;
    fit.n_used = n;
    fit.dof = n - 2;
    fit.slope = sxy / sxx;
    fit.intercept = ybar - fit.slope * xbar;
    for (int i = 0; i < n; ++i) {
        const double w = weighted ? 1.0 / (sy[i] * sy[i]) : 1.0;
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        fit.chi2 += w * r * r;
    }
    if (weighted) {
        const double scale = fit.dof > 0 ? std::max(1.0, fit.chi2 / fit.dof) : 1.0;
        fit.slope_err = std::sqrt(scale / sxx);
    } else {
        const double s2 = fit.dof > 0 ? fit.chi2 / fit.dof : 0.0;
        fit.slope_err = std::sqrt(s2 / sxx);
    }
    return fit;
}

enum class ScanMethod { bisection, monte_carlo, harmonic };

inline const char* to_string(ScanMethod m)
{
    switch (m) {
        case ScanMethod::bisection: return "bisection";
        case ScanMethod::monte_carlo: return "monte_carlo";
        case ScanMethod::harmonic: return "harmonic";
    }
    return "?";
}

struct McControls {
    long samples_per_eps = 3000;
    double y_box_factor = 2.0;       // y box = factor * W_harm(eps_max)
    double u_energy_frac = 0.1;      // per-mode box energy = frac * eps
    bool importance = true;
    double importance_factor = 3.0;  // y'_0 draw box = factor * W_harm(eps)
};

struct ScanControls {
    double eps_rel_min = 1e-4;  // in units of |V_s|
    double eps_rel_max = 1e-2;
    int points_per_decade = 8;
    ScanMethod method = ScanMethod::bisection;
    std::uint64_t seed = 1;
    int workers = 0;  // 0: WSL_WORKERS env, then hardware concurrency
    double x0_frac = 0.1;
    double x_exit_frac = 5.0;
    double bisect_rel_tol = 1e-3;
    McControls mc;
    IntegratorControls integrator;
    // Fit window in absolute eps (hartree); 0 resolves a default. The lower
    // bound defaults to the whole grid; the upper bound defaults to the
    // quadratic-regime cap eps <= fit_window_cap * mu^2 x0^2, the validity
    // condition of the linearized launch. Beyond it the measured window
    // bends away from the threshold power law (the top of the default grid
    // probes exactly that breakdown), so points above the cap are recorded
    // and reported but excluded from the default exponent fit.
    double fit_window_lo = 0.0;
    double fit_window_hi = 0.0;
    double fit_window_cap = 0.2;

    void validate() const
    {
        if (!(eps_rel_min > 0.0) || !(eps_rel_max > eps_rel_min))
            throw std::domain_error("ScanControls: need 0 < eps_rel_min < eps_rel_max");
        if (points_per_decade < 1)
            throw std::domain_error("ScanControls: points_per_decade must be >= 1");
        if (!(x0_frac > 0.0) || !(x_exit_frac > 0.0))
            throw std::domain_error("ScanControls: launch geometry fractions must be positive");
        if (mc.samples_per_eps <= 0)
            throw std::domain_error("ScanControls: samples_per_eps must be positive");
        if (!(fit_window_cap > 0.0))
            throw std::domain_error("ScanControls: fit_window_cap must be positive");
        integrator.validate();
    }
};

struct ThresholdScan {
    SystemParams params;
    ScanControls controls;
    double v_s = 0.0;
    double nu_over_mu = 0.0;
    double x0 = 0.0;      // resolved launch offset (negative)
    double x_exit = 0.0;  // resolved exit distance
    double fit_lo = 0.0;  // resolved fit window (hartree above the saddle)
    double fit_hi = 0.0;
    int workers_used = 1;
    std::vector<double> epsilon_grid;
    std::vector<EpsRecord> records;
    FitResult fit;
    bool fit_ok = false;
    std::string fit_error;

    explicit ThresholdScan(const SystemParams& sp, const ScanControls& c)
        : params(sp), controls(c) {}
};

inline std::vector<double> epsilon_grid(double eps_min, double eps_max, int points_per_decade)
{
    const double decades = std::log10(eps_max / eps_min);
    const int n = int(std::lround(decades * points_per_decade)) + 1;
    std::vector<double> grid(n);
    for (int i = 0; i < n; ++i)
        grid[i] = eps_min * std::pow(10.0, double(i) / points_per_decade);
    grid.back() = std::min(grid.back(), eps_max);
    return grid;
}

inline ThresholdScan run_threshold_scan(const SystemParams& sp, const ScanControls& controls)
{
    controls.validate();
    const NormalModeFrame frame = normal_mode_frame(sp);

    ThresholdScan scan(sp, controls);
    scan.v_s = frame.saddle.v_s;
    scan.nu_over_mu = frame.nu / frame.mu;
    scan.x0 = -controls.x0_frac * saddle_length_scale(sp);
    scan.x_exit = controls.x_exit_frac * std::abs(scan.x0);
    scan.fit_lo = controls.fit_window_lo;
    scan.fit_hi = controls.fit_window_hi > 0.0
                      ? controls.fit_window_hi
                      : controls.fit_window_cap * frame.mu * frame.mu * scan.x0 * scan.x0;
    scan.workers_used = resolve_workers(controls.workers);

    const double vs_abs = std::abs(scan.v_s);
    scan.epsilon_grid = epsilon_grid(controls.eps_rel_min * vs_abs,
                                     controls.eps_rel_max * vs_abs,
                                     controls.points_per_decade);
    const long n_eps = long(scan.epsilon_grid.size());
    scan.records.resize(n_eps);

    auto harmonic_width = [&](double eps) {
        return critical_width_harmonic(frame, eps, scan.x0, scan.x_exit);
    };
    auto reference_widths = [&](EpsRecord& r) {
        r.harmonic_width = harmonic_width(r.eps);
        r.harmonic_width_exact = critical_width_harmonic_exact(frame, r.eps, scan.x0,
                                                               scan.x_exit);
    };

    if (controls.method == ScanMethod::harmonic) {
        for (long i = 0; i < n_eps; ++i) {
            EpsRecord& r = scan.records[i];
            r.eps = scan.epsilon_grid[i];
            reference_widths(r);
            r.value = r.harmonic_width;
            r.sigma = 0.0;
            r.ok = true;
        }
    } else if (controls.method == ScanMethod::bisection) {
        detail::parallel_for(n_eps, scan.workers_used, [&](long i) {
            EpsRecord& r = scan.records[i];
            r.eps = scan.epsilon_grid[i];
            reference_widths(r);
            try {
                const WidthResult w = critical_width_numeric(frame, r.eps, scan.x0,
                                                             scan.x_exit, controls.integrator,
                                                             controls.bisect_rel_tol);
                r.value = w.width;
                r.sigma = w.sigma;
                r.counts = w.counts;
                r.projector_max_ratio = w.projector_max_ratio;
                r.ok = true;
            } catch (const std::exception& e) {
                r.ok = false;
                r.error = e.what();
            }
        });
    } else {
        // Monte Carlo: the y box is energy-independent so the fraction
        // inherits the window's power law; the importance restriction is an
        // exact power law itself and only rescales the estimate's statistics
        McBox box;
        box.y_half = controls.mc.y_box_factor * harmonic_width(scan.epsilon_grid.back());
        box.py_half = 0.5 * frame.nu * box.y_half;
        for (long i = 0; i < n_eps; ++i) {
            EpsRecord& r = scan.records[i];
            r.eps = scan.epsilon_grid[i];
            reference_widths(r);
            McBox b = box;
            const double cap = controls.mc.u_energy_frac * r.eps;
            for (int k = 0; k < 3; ++k) {
                b.u_half[k] = std::sqrt(cap) / frame.omega[k];
                b.pu_half[k] = std::sqrt(cap);
            }
            if (controls.mc.importance)
                b.importance_half = controls.mc.importance_factor * r.harmonic_width_exact;
            try {
                const FractionResult f = flux_monte_carlo(frame, r.eps, scan.x0, scan.x_exit,
                                                          b, controls.mc.samples_per_eps,
                                                          controls.seed, std::uint64_t(i),
                                                          controls.integrator,
                                                          scan.workers_used);
                r.value = f.fraction;
                r.sigma = f.sigma;
                r.counts = f.counts;
                r.ok = true;
            } catch (const std::exception& e) {
                r.ok = false;
                r.error = e.what();
            }
        }
    }

    try {
        scan.fit = fit_exponent(scan.records, scan.fit_lo, scan.fit_hi);
        scan.fit_ok = true;
    } catch (const std::exception& e) {
        scan.fit_ok = false;
        scan.fit_error = e.what();
    }
    return scan;
}

}
