#pragma once

#include <stdexcept>
#include <string>

namespace pkgain {

// Inconsistent matrix shapes or channel sizes.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Algebraic loop (I - D1*D2) numerically singular.
class SingularLoopError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownGroupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// A norm or certificate needs a Hurwitz A matrix.
class NotHurwitzError : public std::domain_error {
public:
    NotHurwitzError(const std::string& what, double abscissa)
        : std::domain_error(what), abscissa_(abscissa) {}
    [[nodiscard]] double abscissa() const noexcept { return abscissa_; }

private:
    double abscissa_;
};

// jw is (numerically) an eigenvalue of A.
class ResonanceError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Adaptive quadrature could not reach the requested tolerance.
class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace pkgain
