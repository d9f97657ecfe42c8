#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "wsl/errors.hpp"
#include "wsl/model.hpp"
#include "wsl/saddle.hpp"
#include "wsl/system.hpp"

// Linear stability of the saddle. The 6x6 Hessian there has exactly two
// negative eigenvalues,
//
//   -mu^2 = -(sqrt(50a - 49 + 12/a) - sqrt(2a-1)) F^(3/2) / (2a-1)^(5/4),
//   -nu^2 = -(sqrt(32a - 28 +  6/a) + 2 sqrt(2a-1)) F^(3/2) / (2a-1)^(5/4),
//
// one zero (rotation about the field axis) and three positive ones. mu is
// the symmetric escape rate, nu the rate at which the electrons' mirror
// symmetry breaks; their ratio
//
//   alpha = nu / mu
//
// is independent of F and is the threshold-law exponent: the double-escape
// cross section rises as (E - V_s)^alpha. The field-free comparison value
// is wannier_exponent.

namespace wsl {

inline double mu_squared(const SystemParams& sp)
{
    const double a = shape_parameter(sp.Z);
    const double w = 2.0 * a - 1.0;
    return (std::sqrt(50.0 * a - 49.0 + 12.0 / a) - std::sqrt(w))
           * std::pow(sp.F, 1.5) / std::pow(w, 1.25);
}

inline double nu_squared(const SystemParams& sp)
{
    const double a = shape_parameter(sp.Z);
    const double w = 2.0 * a - 1.0;
    return (std::sqrt(32.0 * a - 28.0 + 6.0 / a) + 2.0 * std::sqrt(w))
           * std::pow(sp.F, 1.5) / std::pow(w, 1.25);
}

/// Threshold exponent nu/mu. Field-independent: both rates scale as F^(3/4).
inline double threshold_exponent(double Z)
{
    const SystemParams sp(Z, 1.0);
    return std::sqrt(nu_squared(sp) / mu_squared(sp));
}

/// Zero-field Wannier exponent for a two-electron threshold, for comparison.
inline double wannier_exponent(double Z)
{
    if (!std::isfinite(Z) || Z < 1.0)
        throw std::domain_error("wannier_exponent: Z must be finite and >= 1");
    return 0.25 * (std::sqrt((100.0 * Z - 9.0) / (4.0 * Z - 1.0)) - 1.0);
}

struct StabilitySpectrum {
    SaddleInfo saddle;
    Mat6 hessian;
    Vec6 eigenvalues;   // ascending: -nu^2, -mu^2, ~0, then three omega^2
    Mat6 eigenvectors;  // orthonormal columns, matching order
    double mu2_closed;
    double nu2_closed;
    double mu2_numeric;
    double nu2_numeric;
    double zero_mode;   // raw rotation eigenvalue, should vanish

    static constexpr int i_nu = 0;
    static constexpr int i_mu = 1;
    static constexpr int i_rot = 2;
    static constexpr int i_stable0 = 3;
};

/// Diagonalize the Hessian at the saddle and check the expected signature.
/// zero_tol applies to the rotation eigenvalue after normalizing by F^(3/2),
/// the natural scale of every Hessian eigenvalue here.
inline StabilitySpectrum stability_spectrum(const SystemParams& sp, double zero_tol = 1e-8)
{
    StabilitySpectrum out{saddle_analytic(sp), Mat6::Zero(), Vec6::Zero(), Mat6::Zero(),
                          mu_squared(sp), nu_squared(sp), 0.0, 0.0, 0.0};
    out.hessian = hessian_potential_full(out.saddle.q, sp);
    Eigen::SelfAdjointEigenSolver<Mat6> es(out.hessian);
    out.eigenvalues = es.eigenvalues();
    out.eigenvectors = es.eigenvectors();
    out.nu2_numeric = -out.eigenvalues[StabilitySpectrum::i_nu];
    out.mu2_numeric = -out.eigenvalues[StabilitySpectrum::i_mu];
    out.zero_mode = out.eigenvalues[StabilitySpectrum::i_rot];

    const double unit = std::pow(sp.F, 1.5);
    if (!(out.eigenvalues[0] < 0.0 && out.eigenvalues[1] < 0.0))
        throw std::runtime_error("stability_spectrum: expected two unstable directions");
    if (std::abs(out.zero_mode) / unit > zero_tol)
        throw std::runtime_error("stability_spectrum: rotation eigenvalue "
                                 + std::to_string(out.zero_mode / unit)
                                 + " (in units of F^1.5) exceeds tolerance");
    if (!(out.eigenvalues[3] > 0.0))
        throw std::runtime_error("stability_spectrum: expected three stable directions");
    return out;
}

struct ExponentRecord {
    double Z;
    double alpha;
    double wannier_alpha;
};

/// alpha and the Wannier comparison value for each requested charge,
/// in input order (duplicates preserved).
inline std::vector<ExponentRecord> exponent_table(const std::vector<double>& charges)
{
    std::vector<ExponentRecord> table;
    table.reserve(charges.size());
    for (double Z : charges)
        table.push_back({Z, threshold_exponent(Z), wannier_exponent(Z)});
    return table;
}

}
