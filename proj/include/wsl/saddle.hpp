#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "wsl/errors.hpp"
#include "wsl/model.hpp"
#include "wsl/system.hpp"

// Field-induced saddle of the two-electron potential. On the symmetric
// configuration (both electrons at transverse distance r_s and height z_s,
// on opposite sides of the field axis) the gradient vanishes at
//
//   r_s = (2a-1)^(1/4) / (2 sqrt(F)),   z_s = (2a-1)^(3/4) / (2 sqrt(F)),
//   V_s = -2 (2a-1)^(3/4) sqrt(F),      a = (2 Z^2)^(1/3),
//
// so the locus of saddles over all F is the fixed ray r/z = (2a-1)^(-1/2).

namespace wsl {

struct SaddleInfo {
    SystemParams params;
    double a;
    double r_s;
    double z_s;
    double v_s;
    double locus_ratio;  // r_s / z_s
    Vec6 q;              // one embedded saddle configuration
};

inline SaddleInfo saddle_analytic(const SystemParams& sp)
{
    const double a = shape_parameter(sp.Z);
    const double w = 2.0 * a - 1.0;
    const double sqf = std::sqrt(sp.F);
    SaddleInfo s{sp, a, 0.0, 0.0, 0.0, 0.0, Vec6::Zero()};
    s.r_s = std::pow(w, 0.25) / (2.0 * sqf);
    s.z_s = std::pow(w, 0.75) / (2.0 * sqf);
    s.v_s = -2.0 * std::pow(w, 0.75) * sqf;
    s.locus_ratio = 1.0 / std::sqrt(w);
    s.q << s.r_s, 0.0, s.z_s, -s.r_s, 0.0, s.z_s;
    return s;
}

struct NewtonOptions {
    int max_iter = 50;
    double gtol = 1e-12;    // on the max-norm of grad V, in units of the field force F
    double max_step = 0.0;  // trust-region step clamp; 0 picks 0.25 * saddle_length_scale
};

// Generator of rigid rotation about the field axis at configuration q.
inline Vec6 rotation_generator(const Vec6& q)
{
    Vec6 t;
    t << -q[1], q[0], 0.0, -q[4], q[3], 0.0;
    return t;
}

/// Newton refinement of a saddle guess. The rotation direction is projected
/// out of every step (the critical point is a circle, not a point), so the
/// iteration needs a guess already close to the saddle; far guesses raise
/// NoConvergenceError instead of wandering to a wrong answer.
inline SaddleInfo saddle_numeric(const SystemParams& sp, const Vec6& guess,
                                 const NewtonOptions& opt = {})
{
    const double scale = saddle_length_scale(sp);
    const double max_step = opt.max_step > 0.0 ? opt.max_step : 0.25 * scale;
    const double gtol_abs = opt.gtol * sp.F;

    Vec6 q = guess;
    for (int it = 0; it < opt.max_iter; ++it) {
        if (min_pair_separation(q) < 1e-9 * scale)
            throw NoConvergenceError("saddle_numeric: iterate reached a collision");
        if (q.norm() > 1e3 * scale)
            throw NoConvergenceError("saddle_numeric: iterate left the saddle region");

        const Vec6 g = grad_potential_full(q, sp);
        if (g.lpNorm<Eigen::Infinity>() <= gtol_abs) {
            SaddleInfo s{sp, shape_parameter(sp.Z), 0.0, 0.0, 0.0, 0.0, q};
            s.r_s = std::hypot(q[0], q[1]);
            s.z_s = q[2];
            s.v_s = potential_full(q, sp);
            s.locus_ratio = s.r_s / s.z_s;
            return s;
        }

        const Mat6 h = hessian_potential_full(q, sp);
        Vec6 t = rotation_generator(q);
        Mat6 m = h;
        Vec6 rhs = -g;
        const double tn = t.norm();
        if (tn > 1e-12 * scale) {
            t /= tn;
            const Mat6 proj = Mat6::Identity() - t * t.transpose();
            m = proj * h * proj + h.norm() * t * t.transpose();
            rhs = proj * rhs;
        }
        Eigen::FullPivLU<Mat6> lu(m);
        if (!lu.isInvertible())
            throw SingularJacobianError("saddle_numeric: projected Hessian is singular at iteration "
                                        + std::to_string(it));
        Vec6 step = lu.solve(rhs);
        if (tn > 1e-12 * scale)
            step -= step.dot(t) * t;
        const double sn = step.norm();
        if (sn > max_step)
            step *= max_step / sn;
        q += step;
    }
    throw NoConvergenceError("saddle_numeric: no convergence after "
                             + std::to_string(opt.max_iter) + " iterations");
}

}
