#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pelab {

// Base for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Field shapes or grids that do not match.
class ShapeError : public Error {
public:
    using Error::Error;
};

// NaN or Inf encountered in an input or produced by a step.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::size_t point = 0)
        : Error(what), point_(point) {}
    std::size_t point() const noexcept { return point_; }

private:
    std::size_t point_;
};

// A state left the range over which a potential or coefficient set is certified.
class RangeError : public Error {
public:
    RangeError(const std::string& what, std::size_t point, double magnitude)
        : Error(what), point_(point), magnitude_(magnitude) {}
    std::size_t point() const noexcept { return point_; }
    double magnitude() const noexcept { return magnitude_; }

private:
    std::size_t point_;
    double magnitude_;
};

// Loss of strict convexity of a radial potential at radius r.
class ConvexityError : public Error {
public:
    ConvexityError(const std::string& what, double r) : Error(what), r_(r) {}
    double radius() const noexcept { return r_; }

private:
    double r_;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double achieved)
        : Error(what), achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

// A constructed object failed its own certification (e.g. an entropy identity residual).
class ConstructionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Cylinder or window outside the data it is applied to.
class DomainError : public Error {
public:
    using Error::Error;
};

} // namespace pelab
