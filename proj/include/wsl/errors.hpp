#pragma once

#include <stdexcept>
#include <string>

namespace wsl {

// Numerical routine ran out of iterations (Newton refinement, bracket search).
class NoConvergenceError : public std::runtime_error {
public:
    explicit NoConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// The projected Newton system lost rank and no step could be computed.
class SingularJacobianError : public NoConvergenceError {
public:
    explicit SingularJacobianError(const std::string& what) : NoConvergenceError(what) {}
};

// A flux-surface sample cannot be placed on the requested energy shell
// (the momentum radicand went negative for the given transverse amplitudes).
class InfeasibleSampleError : public std::runtime_error {
public:
    explicit InfeasibleSampleError(const std::string& what) : std::runtime_error(what) {}
};

// A width scan could not even start: the centre of the flux surface
// (y'_0 = 0) did not lead to double escape at this energy.
class ThresholdRegimeError : public std::runtime_error {
public:
    explicit ThresholdRegimeError(const std::string& what) : std::runtime_error(what) {}
};

// Too few usable points remained inside the requested fit window.
class DegenerateWindowError : public std::runtime_error {
public:
    explicit DegenerateWindowError(const std::string& what) : std::runtime_error(what) {}
};

}
