#pragma once

#include "lsq/types.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lsq {

/// A stacked least-squares instance: minimize 0.5 ||A x - B||^2.
struct LeastSquaresProblem {
    Matrix A;                      // N x d
    Vector B;                      // N
    std::optional<Vector> x_star;  // known solution when synthesized
    std::string name;
};

/// One agent's contiguous slice of the stacked problem.
struct AgentShard {
    int agent_id = 0;  // 1-based
    Matrix Ai;         // n_i x d
    Vector Bi;         // n_i
};

/// One agent's quadratic cost 0.5 x^T Pi x - x^T qi + ri.
struct QuadraticShard {
    int agent_id = 0;
    Matrix Pi;  // d x d, symmetric
    Vector qi;  // d
    double ri = 0.0;
};

/// Matrix Market header fields, exposed so callers can inspect a file
/// (dimensions, value field) without paying for a full load.
struct MatrixMarketInfo {
    enum class Format { Coordinate, Array };
    enum class Field { Real, Integer, Pattern, Complex };
    enum class Symmetry { General, Symmetric, SkewSymmetric, Hermitian };
    Format format = Format::Coordinate;
    Field field = Field::Real;
    Symmetry symmetry = Symmetry::General;
    Index rows = 0;
    Index cols = 0;
    long long entries = 0;  // stored entries (coordinate format only)
};

/// Parse the banner and size line only.
MatrixMarketInfo matrix_market_info(const std::string& path);

/// Load a Matrix Market file as a dense matrix. Coordinate and array
/// formats are accepted; symmetric/skew-symmetric storage is expanded to
/// full. Pattern entries load as 1.0. Complex fields raise
/// ComplexFieldError; malformed input raises ParseError.
Matrix load_matrix_market(const std::string& path);

/// B = A * x_star with x_star the all-ones vector. Returns (B, x_star).
std::pair<Vector, Vector> synth_ones_observations(const Matrix& A);

/// Split into m contiguous row blocks: agents 1..m-1 take floor(N/m) rows
/// each, agent m the remainder block.
std::vector<AgentShard> partition(const LeastSquaresProblem& p, int m);

/// Pi = Ai^T Ai, qi = Ai^T Bi, ri = 0.5 Bi^T Bi.
QuadraticShard lsq_to_quadratic(const AgentShard& s);

/// Random instance with a prescribed Gram spectrum: rank nonzero
/// eigenvalues log-spaced over [lambda1/kappa, lambda1] with lambda1 = 1,
/// observations B = A * ones (consistent system).
struct SyntheticSpec {
    Index rows = 0;
    Index cols = 0;
    double kappa = 1.0;
    Index rank = 0;  // 0 means full rank min(rows, cols)
    std::uint64_t seed = 0;
};

LeastSquaresProblem make_synthetic(const SyntheticSpec& spec);

}  // namespace lsq
