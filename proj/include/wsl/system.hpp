#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace wsl {

// Two active electrons around a nucleus of charge Z in a uniform static
// field F pointing along +z (so the potential energy term is -F*z per
// electron and escape happens toward positive z).
struct SystemParams {
    double Z;
    double F;

    SystemParams(double Z_, double F_) : Z(Z_), F(F_)
    {
        if (!std::isfinite(Z) || Z < 1.0)
            throw std::domain_error("SystemParams: Z must be finite and >= 1, got " + std::to_string(Z_));
        if (!std::isfinite(F) || F <= 0.0)
            throw std::domain_error("SystemParams: F must be finite and > 0, got " + std::to_string(F_));
    }
};

/// Shape parameter a = (2 Z^2)^(1/3); a = 2 exactly for Z = 2.
inline double shape_parameter(double Z)
{
    if (!std::isfinite(Z) || Z < 1.0)
        throw std::domain_error("shape_parameter: Z must be finite and >= 1");
    return std::cbrt(2.0 * Z * Z);
}

/// Characteristic length of the saddle region, (2a-1)^(1/4)/sqrt(F).
/// Equals twice the saddle's transverse electron distance.
inline double saddle_length_scale(const SystemParams& sp)
{
    const double a = shape_parameter(sp.Z);
    return std::pow(2.0 * a - 1.0, 0.25) / std::sqrt(sp.F);
}

}
