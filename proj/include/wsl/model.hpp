#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "wsl/system.hpp"

// Full-space model: two electrons with coordinates q = (x1,y1,z1,x2,y2,z2)
// and conjugate momenta in the same layout,
//
//   V(q) = -Z/|r1| - Z/|r2| + 1/|r1-r2| - F (z1 + z2),
//   H(q,p) = |p|^2/2 + V(q).
//
// The symmetric subspace keeps the electrons mirror images through the field
// axis, q1 = (r cos(phi), r sin(phi), z), q2 = -q1 + 2 z e_z, and is described
// by the reduced Hamiltonian
//
//   H_sym = (p_r^2 + p_z^2)/4 - 2 Z/sqrt(r^2+z^2) + 1/(2 r) - 2 F z,
//
// whose equations of motion carry the factor-of-two mass: dr/dt = p_r/2.
// All Coulomb terms are singular at zero separation; callers keep states
// away from exact coincidence (the integrator enforces a floor).

namespace wsl {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

struct PhaseState {
    Vec6 q = Vec6::Zero();
    Vec6 p = Vec6::Zero();
};

struct SymmetricState {
    double r = 0.0;
    double z = 0.0;
    double p_r = 0.0;
    double p_z = 0.0;
};

inline double potential_full(const Vec6& q, const SystemParams& sp)
{
    const Vec3 r1 = q.head<3>();
    const Vec3 r2 = q.tail<3>();
    return -sp.Z / r1.norm() - sp.Z / r2.norm() + 1.0 / (r1 - r2).norm()
           - sp.F * (q[2] + q[5]);
}

inline Vec6 grad_potential_full(const Vec6& q, const SystemParams& sp)
{
    const Vec3 r1 = q.head<3>();
    const Vec3 r2 = q.tail<3>();
    const Vec3 d = r1 - r2;
    const double n1 = r1.norm(), n2 = r2.norm(), nd = d.norm();
    Vec6 g;
    g.head<3>() = sp.Z * r1 / (n1 * n1 * n1) - d / (nd * nd * nd);
    g.tail<3>() = sp.Z * r2 / (n2 * n2 * n2) + d / (nd * nd * nd);
    g[2] -= sp.F;
    g[5] -= sp.F;
    return g;
}

namespace detail {

// Hessian block of c/|s|: c (3 s s^T - |s|^2 I) / |s|^5.
inline Mat3 coulomb_hessian_block(const Vec3& s, double c)
{
    const double n2 = s.squaredNorm();
    const double n5 = n2 * n2 * std::sqrt(n2);
    const Mat3 outer = s * s.transpose();  // exactly symmetric before scaling
    return (c / n5) * (3.0 * outer - n2 * Mat3::Identity());
}

}

inline Mat6 hessian_potential_full(const Vec6& q, const SystemParams& sp)
{
    const Vec3 r1 = q.head<3>();
    const Vec3 r2 = q.tail<3>();
    const Mat3 rep = detail::coulomb_hessian_block(r1 - r2, 1.0);
    Mat6 h;
    h.block<3, 3>(0, 0) = detail::coulomb_hessian_block(r1, -sp.Z) + rep;
    h.block<3, 3>(3, 3) = detail::coulomb_hessian_block(r2, -sp.Z) + rep;
    h.block<3, 3>(0, 3) = -rep;
    h.block<3, 3>(3, 0) = -rep;
    return h;
}

inline double energy_full(const PhaseState& s, const SystemParams& sp)
{
    return 0.5 * s.p.squaredNorm() + potential_full(s.q, sp);
}

/// Time derivative of (q, p) under H = |p|^2/2 + V.
inline PhaseState eom_full(const PhaseState& s, const SystemParams& sp)
{
    PhaseState ds;
    ds.q = s.p;
    ds.p = -grad_potential_full(s.q, sp);
    return ds;
}

inline double potential_symmetric(double r, double z, const SystemParams& sp)
{
    return -2.0 * sp.Z / std::hypot(r, z) + 0.5 / r - 2.0 * sp.F * z;
}

inline double energy_symmetric(const SymmetricState& s, const SystemParams& sp)
{
    return 0.25 * (s.p_r * s.p_r + s.p_z * s.p_z) + potential_symmetric(s.r, s.z, sp);
}

/// Time derivative of (r, z, p_r, p_z) under the reduced Hamiltonian.
inline SymmetricState eom_symmetric(const SymmetricState& s, const SystemParams& sp)
{
    const double rho2 = s.r * s.r + s.z * s.z;
    const double rho3 = rho2 * std::sqrt(rho2);
    SymmetricState ds;
    ds.r = 0.5 * s.p_r;
    ds.z = 0.5 * s.p_z;
    ds.p_r = -(2.0 * sp.Z * s.r / rho3 - 0.5 / (s.r * s.r));
    ds.p_z = -(2.0 * sp.Z * s.z / rho3 - 2.0 * sp.F);
    return ds;
}

/// Lift a symmetric-subspace state to the full space, placing electron 1 at
/// azimuth phi. Momenta carry the factor 1/2 so that the full Hamiltonian of
/// the embedded state equals the reduced Hamiltonian of the input.
inline PhaseState embed_symmetric(const SymmetricState& s, double phi = 0.0)
{
    const double c = std::cos(phi), sn = std::sin(phi);
    PhaseState out;
    out.q << s.r * c, s.r * sn, s.z, -s.r * c, -s.r * sn, s.z;
    out.p << 0.5 * s.p_r * c, 0.5 * s.p_r * sn, 0.5 * s.p_z,
             -0.5 * s.p_r * c, -0.5 * s.p_r * sn, 0.5 * s.p_z;
    return out;
}

/// Project a (mirror-symmetric) full state back to the reduced coordinates,
/// reading electron 1. Meaningful only when mirror_defect is small.
inline SymmetricState reduce_symmetric(const PhaseState& s)
{
    const double r = std::hypot(s.q[0], s.q[1]);
    SymmetricState out;
    out.r = r;
    out.z = s.q[2];
    out.p_r = r > 0.0 ? 2.0 * (s.p[0] * s.q[0] + s.p[1] * s.q[1]) / r : 0.0;
    out.p_z = 2.0 * s.p[2];
    return out;
}

/// Distance of a full state from the mirror-symmetric subspace: the largest
/// absolute mismatch between electron 2 and the reflection of electron 1.
inline double mirror_defect(const PhaseState& s)
{
    double d = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double sign = (i == 2) ? 1.0 : -1.0;
        d = std::max(d, std::abs(s.q[3 + i] - sign * s.q[i]));
        d = std::max(d, std::abs(s.p[3 + i] - sign * s.p[i]));
    }
    return d;
}

/// Smallest of the three separations |r1|, |r2|, |r1 - r2|.
inline double min_pair_separation(const Vec6& q)
{
    const Vec3 r1 = q.head<3>();
    const Vec3 r2 = q.tail<3>();
    return std::min({r1.norm(), r2.norm(), (r1 - r2).norm()});
}

// Rectangular sample of the symmetric-subspace potential, row per z value,
// column per r value, v[iz * r.size() + ir].
struct ContourGrid {
    std::vector<double> r;
    std::vector<double> z;
    std::vector<double> v;

    double at(std::size_t iz, std::size_t ir) const { return v[iz * r.size() + ir]; }
};

inline ContourGrid contour_grid(const SystemParams& sp, double r_min, double r_max,
                                double z_min, double z_max, std::size_t nr, std::size_t nz)
{
    if (!(r_min > 0.0) || !(r_max > r_min))
        throw std::domain_error("contour_grid: need 0 < r_min < r_max");
    if (!(z_max > z_min))
        throw std::domain_error("contour_grid: need z_min < z_max");
    if (nr < 2 || nz < 2)
        throw std::domain_error("contour_grid: need at least 2 points per axis");

    ContourGrid g;
    g.r.resize(nr);
    g.z.resize(nz);
    g.v.resize(nr * nz);
    for (std::size_t i = 0; i < nr; ++i)
        g.r[i] = r_min + (r_max - r_min) * double(i) / double(nr - 1);
    for (std::size_t j = 0; j < nz; ++j)
        g.z[j] = z_min + (z_max - z_min) * double(j) / double(nz - 1);
    for (std::size_t j = 0; j < nz; ++j)
        for (std::size_t i = 0; i < nr; ++i)
            g.v[j * nr + i] = potential_symmetric(g.r[i], g.z[j], sp);
    return g;
}

}
