#pragma once

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "wsl/errors.hpp"
#include "wsl/model.hpp"
#include "wsl/saddle.hpp"
#include "wsl/stability.hpp"
#include "wsl/system.hpp"

// Trajectory integration and outcome labeling. Escape of electron i means
// crossing the plane z_i = z_cut_factor * z_s moving outward (dz/dt > 0).
// Integration stops at the second escape, on failure, when the remaining
// electron provably cannot escape anymore, or at max_time.

namespace wsl {

struct IntegratorControls {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_time = 0.0;  // 0 resolves to 200/mu for the given params
    double min_separation = 1e-3;
    double energy_drift_limit = 1e-8;  // relative to the initial energy
    double z_cut_factor = 10.0;

    void validate() const
    {
        auto bad = [](double v) { return !std::isfinite(v) || v <= 0.0; };
        if (bad(rel_tol) || bad(abs_tol) || bad(min_separation) || bad(energy_drift_limit)
            || bad(z_cut_factor) || max_time < 0.0 || !std::isfinite(max_time))
            throw std::domain_error("IntegratorControls: all controls must be positive and finite");
    }
};

enum class OutcomeLabel { DoubleEscape, SingleEscape, SequentialEscape, Bound, Failure };

inline const char* to_string(OutcomeLabel o)
{
    switch (o) {
        case OutcomeLabel::DoubleEscape: return "DoubleEscape";
        case OutcomeLabel::SingleEscape: return "SingleEscape";
        case OutcomeLabel::SequentialEscape: return "SequentialEscape";
        case OutcomeLabel::Bound: return "Bound";
        case OutcomeLabel::Failure: return "Failure";
    }
    return "?";
}

enum class FailureReason { none, energy_drift, close_encounter };

inline const char* to_string(FailureReason r)
{
    switch (r) {
        case FailureReason::none: return "none";
        case FailureReason::energy_drift: return "energy_drift";
        case FailureReason::close_encounter: return "close_encounter";
    }
    return "?";
}

struct EscapeEvent {
    bool escaped = false;
    double time = std::numeric_limits<double>::quiet_NaN();
    Vec3 position = Vec3::Zero();
    Vec3 momentum = Vec3::Zero();
    // the electron's nuclear distance had a local minimum below z_s
    // at some earlier time (the mark of a sequential escape)
    bool returned_before = false;
};

struct TrajectorySample {
    double t;
    PhaseState state;
    double energy;
};

struct Trajectory {
    SystemParams params;
    IntegratorControls controls;
    double z_cut;
    double max_time_resolved;
    PhaseState initial;
    PhaseState final_state;
    double end_time = 0.0;
    double energy0 = 0.0;
    double max_energy_drift = 0.0;  // relative, over the whole run
    std::array<EscapeEvent, 2> escape;
    std::array<bool, 2> returned = {false, false};
    FailureReason failure = FailureReason::none;
    double failure_time = std::numeric_limits<double>::quiet_NaN();
    bool reached_max_time = false;
    bool stopped_hopeless = false;  // remaining electron could not escape anymore
    std::vector<TrajectorySample> samples;

    explicit Trajectory(const SystemParams& sp, const IntegratorControls& c)
        : params(sp), controls(c), z_cut(0.0), max_time_resolved(0.0) {}
};

struct TrajectoryOutcome {
    OutcomeLabel label;
    double time;  // decision time: second crossing, failure, or end of run
    FailureReason failure;
    int n_escaped;
    bool sequential_return;
    // energy of the non-escaping electron ignoring repulsion; only
    // meaningful for SingleEscape/Bound labels with one electron out
    double single_particle_energy_other;
};

/// Kinetic + nuclear + field energy of electron i alone.
inline double single_particle_energy(const PhaseState& s, int i, const SystemParams& sp)
{
    const Vec3 r = s.q.segment<3>(3 * i);
    const Vec3 p = s.p.segment<3>(3 * i);
    return 0.5 * p.squaredNorm() - sp.Z / r.norm() - sp.F * r[2];
}

/// Outcome of a finished trajectory. Pure function of the recorded data:
/// Failure first; both crossings present give DoubleEscape, or
/// SequentialEscape when the later escaper had returned inside z_s first;
/// one crossing gives SingleEscape when the remaining electron's
/// single-particle energy is negative (a labeling convention only), Bound
/// otherwise; no crossing is Bound.
inline TrajectoryOutcome classify(const Trajectory& tr)
{
    TrajectoryOutcome out{OutcomeLabel::Bound, tr.end_time, tr.failure, 0, false,
                          std::numeric_limits<double>::quiet_NaN()};
    out.n_escaped = int(tr.escape[0].escaped) + int(tr.escape[1].escaped);

    if (tr.failure != FailureReason::none) {
        out.label = OutcomeLabel::Failure;
        out.time = tr.failure_time;
        return out;
    }
    if (out.n_escaped == 2) {
        const int later = tr.escape[1].time > tr.escape[0].time ? 1 : 0;
        out.time = tr.escape[later].time;
        out.sequential_return = tr.escape[later].returned_before;
        out.label = out.sequential_return ? OutcomeLabel::SequentialEscape
                                          : OutcomeLabel::DoubleEscape;
        return out;
    }
    if (out.n_escaped == 1) {
        const int stayer = tr.escape[0].escaped ? 1 : 0;
        out.single_particle_energy_other = single_particle_energy(tr.final_state, stayer, tr.params);
        out.label = out.single_particle_energy_other < 0.0 ? OutcomeLabel::SingleEscape
                                                           : OutcomeLabel::Bound;
        return out;
    }
    return out;
}

using StepObserver = std::function<void(double, const PhaseState&)>;

namespace detail {

using State12 = std::array<double, 12>;

inline State12 pack(const PhaseState& s)
{
    State12 y;
    for (int i = 0; i < 6; ++i) {
        y[i] = s.q[i];
        y[6 + i] = s.p[i];
    }
    return y;
}

inline PhaseState unpack(const State12& y)
{
    PhaseState s;
    for (int i = 0; i < 6; ++i) {
        s.q[i] = y[i];
        s.p[i] = y[6 + i];
    }
    return s;
}

}

/// Integrate the full two-electron system from s0. sample_times must be
/// ascending and non-negative; times past the actual end of the run are
/// dropped. The observer, if given, is called after every accepted step.
inline Trajectory integrate(const PhaseState& s0, const SystemParams& sp,
                            const IntegratorControls& controls = {},
                            const std::vector<double>& sample_times = {},
                            const StepObserver& observer = {})
{
    namespace ode = boost::numeric::odeint;
    using detail::State12;

    controls.validate();
    if (!std::is_sorted(sample_times.begin(), sample_times.end())
        || (!sample_times.empty() && sample_times.front() < 0.0))
        throw std::domain_error("integrate: sample_times must be ascending and non-negative");

    const double mu = std::sqrt(mu_squared(sp));
    const SaddleInfo saddle = saddle_analytic(sp);

    Trajectory tr(sp, controls);
    tr.z_cut = controls.z_cut_factor * saddle.z_s;
    tr.max_time_resolved = controls.max_time > 0.0 ? controls.max_time : 200.0 / mu;
    tr.initial = s0;
    tr.energy0 = energy_full(s0, sp);

    if (min_pair_separation(s0.q) < controls.min_separation)
        throw std::domain_error("integrate: initial separations below min_separation");
    if (s0.q[2] >= tr.z_cut || s0.q[5] >= tr.z_cut)
        throw std::domain_error("integrate: initial state already beyond the escape plane");

    const double e_denom = std::max(std::abs(tr.energy0), 1e-12);
    // barrier top of the one-electron problem, for the cannot-escape cutoff
    const double stark_top = -2.0 * std::sqrt(sp.Z * sp.F);
    const double hopeless_margin = 0.02 * std::abs(stark_top);
    const double stark_zs = std::sqrt(sp.Z / sp.F);

    auto rhs = [&sp](const State12& y, State12& dydt, double) {
        const Vec3 r1(y[0], y[1], y[2]);
        const Vec3 r2(y[3], y[4], y[5]);
        const Vec3 d = r1 - r2;
        const double n1 = r1.norm(), n2 = r2.norm(), nd = d.norm();
        const double c1 = sp.Z / (n1 * n1 * n1);
        const double c2 = sp.Z / (n2 * n2 * n2);
        const double cd = 1.0 / (nd * nd * nd);
        for (int i = 0; i < 6; ++i)
            dydt[i] = y[6 + i];
        for (int i = 0; i < 3; ++i) {
            dydt[6 + i] = -(c1 * r1[i] - cd * d[i]);
            dydt[9 + i] = -(c2 * r2[i] + cd * d[i]);
        }
        dydt[8] += sp.F;
        dydt[11] += sp.F;
    };

    auto stepper = ode::make_dense_output(controls.abs_tol, controls.rel_tol,
                                          ode::runge_kutta_dopri5<State12>());
    stepper.initialize(detail::pack(s0), 0.0, 1e-3 / mu);

    auto state_at = [&stepper](double t) {
        State12 y;
        stepper.calc_state(t, y);
        return y;
    };

    // pending sample times always lie inside the current interpolation
    // interval once the initial t = 0 request is handled up front
    std::size_t next_sample = 0;
    auto emit_samples_until = [&](double t_hi) {
        while (next_sample < sample_times.size() && sample_times[next_sample] <= t_hi) {
            const PhaseState ps = detail::unpack(state_at(sample_times[next_sample]));
            tr.samples.push_back({sample_times[next_sample], ps, energy_full(ps, sp)});
            ++next_sample;
        }
    };
    if (!sample_times.empty() && sample_times.front() == 0.0) {
        tr.samples.push_back({0.0, s0, tr.energy0});
        ++next_sample;
    }

    // locate a zero of f on [t0, t1] given f(t0) < 0 <= f(t1)
    auto bisect = [&](double t0, double t1, auto&& f) {
        for (int it = 0; it < 200 && (t1 - t0) > 1e-13 * (1.0 + t1); ++it) {
            const double tm = 0.5 * (t0 + t1);
            (f(tm) < 0.0 ? t0 : t1) = tm;
        }
        return t1;
    };

    std::array<double, 2> prev_dist = {s0.q.head<3>().norm(), s0.q.tail<3>().norm()};
    std::array<double, 2> descent_min = prev_dist;
    std::array<bool, 2> descending = {false, false};

    auto finish = [&](double t, const State12& y) {
        tr.end_time = t;
        tr.final_state = detail::unpack(y);
    };

    const std::size_t max_steps = 20'000'000;
    double t_prev = 0.0;
    State12 y_prev = detail::pack(s0);

    for (std::size_t step = 0;; ++step) {
        if (step >= max_steps)
            throw NoConvergenceError("integrate: step budget exhausted at t = "
                                     + std::to_string(t_prev));
        if (t_prev >= tr.max_time_resolved) {
            tr.reached_max_time = true;
            finish(t_prev, y_prev);
            break;
        }

        stepper.do_step(rhs);
        double t_cur = stepper.current_time();
        State12 y_cur = stepper.current_state();
        if (t_cur > tr.max_time_resolved) {
            t_cur = tr.max_time_resolved;
            y_cur = state_at(t_cur);
        }

        const PhaseState ps_cur = detail::unpack(y_cur);

        // hard failures first: close encounters, then energy drift
        if (min_pair_separation(ps_cur.q) < controls.min_separation) {
            tr.failure = FailureReason::close_encounter;
            tr.failure_time = t_cur;
            emit_samples_until(t_cur);
            finish(t_cur, y_cur);
            break;
        }
        const double drift = std::abs(energy_full(ps_cur, sp) - tr.energy0) / e_denom;
        tr.max_energy_drift = std::max(tr.max_energy_drift, drift);
        if (drift > controls.energy_drift_limit) {
            tr.failure = FailureReason::energy_drift;
            tr.failure_time = t_cur;
            emit_samples_until(t_cur);
            finish(t_cur, y_cur);
            break;
        }

        // track local minima of each electron's nuclear distance
        for (int i = 0; i < 2; ++i) {
            const double dist = ps_cur.q.segment<3>(3 * i).norm();
            if (dist < prev_dist[i]) {
                if (!descending[i]) {
                    descending[i] = true;
                    descent_min[i] = dist;
                } else {
                    descent_min[i] = std::min(descent_min[i], dist);
                }
            } else if (descending[i]) {
                descending[i] = false;
                if (descent_min[i] < saddle.z_s)
                    tr.returned[i] = true;
            }
            prev_dist[i] = dist;
        }

        // escape-plane crossings inside this step, in time order
        std::array<double, 2> cross_time = {std::numeric_limits<double>::infinity(),
                                            std::numeric_limits<double>::infinity()};
        for (int i = 0; i < 2; ++i) {
            if (tr.escape[i].escaped)
                continue;
            const int zi = 3 * i + 2;
            if (y_cur[zi] < tr.z_cut || !(y_cur[6 + zi] > 0.0))
                continue;
            // beyond the plane and moving out at the step's end; the crossing
            // is inside this step unless a grazing contact was already carried
            // over from the previous one
            cross_time[i] = y_prev[zi] < tr.z_cut
                                ? bisect(t_prev, t_cur,
                                         [&](double t) { return state_at(t)[zi] - tr.z_cut; })
                                : t_prev;
        }
        for (int i = 0; i < 2; ++i) {
            const int first = cross_time[0] <= cross_time[1] ? 0 : 1;
            const int idx = i == 0 ? first : 1 - first;
            if (!std::isfinite(cross_time[idx]))
                continue;
            const State12 yc = state_at(cross_time[idx]);
            EscapeEvent& ev = tr.escape[idx];
            ev.escaped = true;
            ev.time = cross_time[idx];
            ev.position = Vec3(yc[3 * idx], yc[3 * idx + 1], yc[3 * idx + 2]);
            ev.momentum = Vec3(yc[6 + 3 * idx], yc[7 + 3 * idx], yc[8 + 3 * idx]);
            ev.returned_before = tr.returned[idx];
        }

        if (tr.escape[0].escaped && tr.escape[1].escaped) {
            const double t_done = std::max(tr.escape[0].time, tr.escape[1].time);
            emit_samples_until(t_done);
            finish(t_done, state_at(t_done));
            break;
        }

        emit_samples_until(t_cur);
        if (observer)
            observer(t_cur, ps_cur);

        // with one electron out, stop once the other provably stays:
        // even absorbing all remaining repulsion energy it would sit below
        // the one-electron barrier top while still inside the barrier
        if (tr.escape[0].escaped != tr.escape[1].escaped) {
            const int stayer = tr.escape[0].escaped ? 1 : 0;
            const double eps_sp = single_particle_energy(ps_cur, stayer, sp);
            const double repulsion = 1.0 / (ps_cur.q.head<3>() - ps_cur.q.tail<3>()).norm();
            const double z_stay = ps_cur.q[3 * stayer + 2];
            if (z_stay < stark_zs && eps_sp + repulsion < stark_top - hopeless_margin) {
                tr.stopped_hopeless = true;
                finish(t_cur, y_cur);
                break;
            }
        }

        t_prev = t_cur;
        y_prev = y_cur;
    }

    return tr;
}

/// Symmetric-subspace convenience overload: the state is embedded into the
/// full space (the subspace is exactly invariant) and integrated there.
inline Trajectory integrate(const SymmetricState& s0, const SystemParams& sp,
                            const IntegratorControls& controls = {},
                            const std::vector<double>& sample_times = {},
                            const StepObserver& observer = {})
{
    return integrate(embed_symmetric(s0), sp, controls, sample_times, observer);
}

}
