#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "wsl/errors.hpp"
#include "wsl/modes.hpp"

// Flux-surface samples for threshold studies. A sample at excess energy
// eps starts inside the barrier at mode offset x0 < 0 with all remaining
// energy in the outgoing x momentum; the transverse amplitudes are the
// sampled quantities. In the harmonic picture
//
//   p_x0^2 = 2 eps + mu^2 x0^2 + nu^2 y0^2 - p_y0^2 - sum(p_u^2 + w^2 u^2)
//
// places the sample exactly on the shell of the quadratic Hamiltonian;
// the full-shell convention solves instead
//
//   p_x0^2 = 2 (V_s + eps - V(q0)) - p_y0^2 - sum p_u^2
//
// so that eps is the sample's true energy above the barrier. The cubic
// terms of V are not negligible at the default launch offset (their size
// rivals the smallest scan energies), which is why the escape drivers use
// the full shell and the harmonic one serves as the analytic reference.

namespace wsl {

enum class ShellConvention { harmonic, full };

struct FluxSample {
    double eps = 0.0;
    double x0 = 0.0;
    double y0 = 0.0, py0 = 0.0;
    double yprime0 = 0.0, pyprime0 = 0.0;
    std::array<double, 3> u = {0.0, 0.0, 0.0};
    std::array<double, 3> pu = {0.0, 0.0, 0.0};
    double px0_harmonic = 0.0;  // exact quadratic-shell solve
    double px0_approx = 0.0;    // mu |x0| + eps/(mu |x0|)
    double px0 = 0.0;           // the one used for the state
    ShellConvention shell = ShellConvention::harmonic;
    double weight = 1.0;
    PhaseState state;
};

inline FluxSample make_flux_sample(const NormalModeFrame& frame, double eps, double x0,
                                   double yprime0, double pyprime0,
                                   const std::array<double, 3>& u,
                                   const std::array<double, 3>& pu,
                                   ShellConvention shell = ShellConvention::harmonic)
{
    if (!(eps > 0.0) || !std::isfinite(eps))
        throw std::domain_error("make_flux_sample: eps must be positive");
    if (!(x0 < 0.0) || !std::isfinite(x0))
        throw std::domain_error("make_flux_sample: x0 must be negative (inside the barrier)");

    FluxSample s;
    s.eps = eps;
    s.x0 = x0;
    s.yprime0 = yprime0;
    s.pyprime0 = pyprime0;
    s.u = u;
    s.pu = pu;
    s.shell = shell;
    s.y0 = frame.y_from_prime(yprime0, pyprime0);
    s.py0 = frame.py_from_prime(yprime0, pyprime0);

    const double mu2 = frame.mu * frame.mu;
    const double nu2 = frame.nu * frame.nu;
    double stable = 0.0;
    for (int k = 0; k < 3; ++k)
        stable += pu[k] * pu[k] + frame.omega[k] * frame.omega[k] * u[k] * u[k];

    const double rad_harm = 2.0 * eps + mu2 * x0 * x0 + nu2 * s.y0 * s.y0
                            - s.py0 * s.py0 - stable;
    s.px0_harmonic = rad_harm >= 0.0 ? std::sqrt(rad_harm)
                                     : std::numeric_limits<double>::quiet_NaN();
    s.px0_approx = frame.mu * std::abs(x0) + eps / (frame.mu * std::abs(x0));

    ModeCoords m;
    m.x = x0;
    m.y = s.y0;
    m.py = s.py0;
    m.u = u;
    m.pu = pu;

    if (shell == ShellConvention::harmonic) {
        if (rad_harm < 0.0)
            throw InfeasibleSampleError("make_flux_sample: harmonic radicand "
                                        + std::to_string(rad_harm) + " < 0");
        s.px0 = s.px0_harmonic;
    } else {
        m.px = 0.0;
        const PhaseState probe = frame.state(m);
        const double v0 = potential_full(probe.q, frame.params);
        double mom = s.py0 * s.py0;
        for (int k = 0; k < 3; ++k)
            mom += pu[k] * pu[k];
        const double rad_full = 2.0 * (frame.saddle.v_s + eps - v0) - mom;
        if (rad_full < 0.0)
            throw InfeasibleSampleError("make_flux_sample: full-shell radicand "
                                        + std::to_string(rad_full) + " < 0");
        s.px0 = std::sqrt(rad_full);
    }

    m.px = s.px0;
    s.state = frame.state(m);
    return s;
}

/// Solution of the linearized transverse motion, y'' = nu^2 y.
inline double linearized_y(const NormalModeFrame& frame, double t, double y0, double py0)
{
    return y0 * std::cosh(frame.nu * t) + py0 / frame.nu * std::sinh(frame.nu * t);
}

/// Solution of the linearized escape motion, x'' = mu^2 x.
inline double linearized_x(const NormalModeFrame& frame, double t, double x0, double px0)
{
    return x0 * std::cosh(frame.mu * t) + px0 / frame.mu * std::sinh(frame.mu * t);
}

/// Half-width of the escape window in y'_0 predicted by the linearized
/// dynamics: the y excursion must stay below |x| out to x = x_exit. With
/// the outgoing momentum mu |x0| + eps/(mu |x0|), the growing x coefficient
/// is exactly eps/(mu^2 |x0|) and the width is an exact power law in eps
/// with exponent nu/mu.
inline double critical_width_harmonic(const NormalModeFrame& frame, double eps, double x0,
                                      double x_exit)
{
    if (!(eps > 0.0) || !(x0 < 0.0) || !(x_exit > 0.0))
        throw std::domain_error("critical_width_harmonic: need eps > 0, x0 < 0, x_exit > 0");
    const double cx = eps / (frame.mu * frame.mu * std::abs(x0));
    return 2.0 * x_exit * std::pow(cx / (2.0 * x_exit), frame.nu / frame.mu);
}

/// Same window from the exact quadratic-shell momentum sqrt(2 eps +
/// mu^2 x0^2) instead of its small-eps linearization. Not a pure power law:
/// the growing coefficient crosses over from eps/(2 mu^2 |x0|) to
/// sqrt(2 eps)/(2 mu) once eps is no longer small against mu^2 x0^2, which
/// is the correct quadratic-model reference at the top of a scan window.
inline double critical_width_harmonic_exact(const NormalModeFrame& frame, double eps,
                                            double x0, double x_exit)
{
    if (!(eps > 0.0) || !(x0 < 0.0) || !(x_exit > 0.0))
        throw std::domain_error("critical_width_harmonic_exact: need eps > 0, x0 < 0, "
                                "x_exit > 0");
    const double px = std::sqrt(2.0 * eps + frame.mu * frame.mu * x0 * x0);
    const double cplus = 0.5 * (x0 + px / frame.mu);
    return 2.0 * x_exit * std::pow(cplus / x_exit, frame.nu / frame.mu);
}

}
