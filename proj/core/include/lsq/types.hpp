#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lsq {

// All dense storage is row-major double precision.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Malformed input file (Matrix Market, config).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Matrix Market file with complex entries; kept distinct so callers can
/// report the unsupported-field case separately from ordinary parse failures.
class ComplexFieldError : public ParseError {
public:
    using ParseError::ParseError;
};

/// Numerical precondition violated (singular matrix, asymmetric input, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A solver's applicability conditions do not hold for the given problem
/// (e.g. a row-rank-deficient shard handed to the projection-consensus method).
class SolverInapplicable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }
inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace lsq
