#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>

#include "wsl/model.hpp"
#include "wsl/saddle.hpp"
#include "wsl/stability.hpp"
#include "wsl/system.hpp"

// Orthonormal mode frame at the saddle. Displacements d = q - q_s and
// momenta are both expanded in the Hessian eigenbasis:
//
//   x   along the unstable symmetric-escape direction (rate mu),
//   y   along the unstable symmetry-breaking direction (rate nu),
//   rot along the rigid rotation about the field axis (neutral),
//   u   the three stable directions (frequencies omega).
//
// Sign conventions make the frame reproducible: x points toward escape
// (positive total z component), y tilts electron 1 outward (positive
// electron-1 radial component, and then its z component is positive too),
// rot follows the rotation generator, and each stable vector has its
// largest component positive.
//
// For the unstable y pair the growing/decaying combinations
//
//   y' = y + p_y/nu,          p_y' = p_y/2 - nu y/2
//
// are canonical ({y', p_y'} = 1) and evolve as y' e^(nu t), p_y' e^(-nu t)
// under the linearized flow.

namespace wsl {

struct ModeCoords {
    double x = 0.0, px = 0.0;
    double y = 0.0, py = 0.0;
    double rot = 0.0, prot = 0.0;
    std::array<double, 3> u = {0.0, 0.0, 0.0};
    std::array<double, 3> pu = {0.0, 0.0, 0.0};
};

struct NormalModeFrame {
    SystemParams params;
    SaddleInfo saddle;
    double mu;
    double nu;
    std::array<double, 3> omega;  // ascending
    Vec6 e_x, e_y, e_rot;
    std::array<Vec6, 3> e_u;

    ModeCoords coords(const PhaseState& s) const
    {
        const Vec6 d = s.q - saddle.q;
        ModeCoords m;
        m.x = e_x.dot(d);
        m.px = e_x.dot(s.p);
        m.y = e_y.dot(d);
        m.py = e_y.dot(s.p);
        m.rot = e_rot.dot(d);
        m.prot = e_rot.dot(s.p);
        for (int k = 0; k < 3; ++k) {
            m.u[k] = e_u[k].dot(d);
            m.pu[k] = e_u[k].dot(s.p);
        }
        return m;
    }

    PhaseState state(const ModeCoords& m) const
    {
        PhaseState s;
        s.q = saddle.q + m.x * e_x + m.y * e_y + m.rot * e_rot;
        s.p = m.px * e_x + m.py * e_y + m.prot * e_rot;
        for (int k = 0; k < 3; ++k) {
            s.q += m.u[k] * e_u[k];
            s.p += m.pu[k] * e_u[k];
        }
        return s;
    }

    double yprime(double y, double py) const { return y + py / nu; }
    double pyprime(double y, double py) const { return 0.5 * py - 0.5 * nu * y; }
    double y_from_prime(double yp, double pyp) const { return 0.5 * yp - pyp / nu; }
    double py_from_prime(double yp, double pyp) const { return 0.5 * nu * yp + pyp; }
};

inline NormalModeFrame normal_mode_frame(const SystemParams& sp)
{
    const StabilitySpectrum spec = stability_spectrum(sp);

    NormalModeFrame f{sp,
                      spec.saddle,
                      std::sqrt(spec.mu2_numeric),
                      std::sqrt(spec.nu2_numeric),
                      {std::sqrt(spec.eigenvalues[3]), std::sqrt(spec.eigenvalues[4]),
                       std::sqrt(spec.eigenvalues[5])},
                      spec.eigenvectors.col(StabilitySpectrum::i_mu),
                      spec.eigenvectors.col(StabilitySpectrum::i_nu),
                      spec.eigenvectors.col(StabilitySpectrum::i_rot),
                      {spec.eigenvectors.col(3), spec.eigenvectors.col(4),
                       spec.eigenvectors.col(5)}};

    if (f.e_x[2] + f.e_x[5] < 0.0)
        f.e_x = -f.e_x;
    if (f.e_y[0] < 0.0)
        f.e_y = -f.e_y;
    if (!(f.e_y[0] * f.e_y[2] > 0.0))
        throw std::runtime_error("normal_mode_frame: symmetry-breaking mode lost its "
                                 "radial/vertical orientation");
    Vec6 t = rotation_generator(f.saddle.q);
    t.normalize();
    if (f.e_rot.dot(t) < 0.0)
        f.e_rot = -f.e_rot;
    for (Vec6& eu : f.e_u) {
        int imax = 0;
        eu.cwiseAbs().maxCoeff(&imax);
        if (eu[imax] < 0.0)
            eu = -eu;
    }
    return f;
}

}
