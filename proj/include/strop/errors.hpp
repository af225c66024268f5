#pragma once

#include <stdexcept>
#include <string>

namespace strop {

// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Vector/matrix operands have incompatible shapes.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

// A factorization met a numerically rank-deficient matrix.
class RankDeficient : public Error {
public:
    using Error::Error;
};

// Problem sizes violate a structural requirement (e.g. d <= n where d > n is needed).
class InvalidDimensions : public Error {
public:
    using Error::Error;
};

// Sample or entry index outside the valid range.
class IndexOutOfRange : public Error {
public:
    using Error::Error;
};

// The sampled gradient is numerically zero; no step direction exists.
class GradientVanished : public Error {
public:
    using Error::Error;
};

// The model predicted no reduction; the acceptance ratio is undefined.
class NonpositivePrediction : public Error {
public:
    using Error::Error;
};

// A full gradient is numerically zero where a ratio of gradient norms is required.
class StationaryPoint : public Error {
public:
    using Error::Error;
};

// Invalid or missing configuration. Messages name the offending key.
class ConfigError : public Error {
public:
    using Error::Error;
};

// NaN or Inf appeared in a computed quantity.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

} // namespace strop
