#include "lsq/problem.hpp"

#include "lsq/random.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lsq {

std::pair<Vector, Vector> synth_ones_observations(const Matrix& A) {
    Vector x_star = Vector::Ones(A.cols());
    Vector B = A * x_star;
    return {std::move(B), std::move(x_star)};
}

std::vector<AgentShard> partition(const LeastSquaresProblem& p, int m) {
    const Index N = p.A.rows();
    if (p.B.size() != N) throw std::invalid_argument("partition: B length != rows of A");
    if (m < 1) throw std::invalid_argument("partition: need at least one agent");
    if (m > N) throw std::invalid_argument("partition: more agents than rows");

    const Index base = N / m;
    std::vector<AgentShard> shards;
    shards.reserve(static_cast<std::size_t>(m));
    Index row = 0;
    for (int i = 1; i <= m; ++i) {
        const Index ni = (i < m) ? base : N - row;
        shards.push_back({i, p.A.middleRows(row, ni), p.B.segment(row, ni)});
        row += ni;
    }
    return shards;
}

QuadraticShard lsq_to_quadratic(const AgentShard& s) {
    QuadraticShard q;
    q.agent_id = s.agent_id;
    Matrix Pi = s.Ai.transpose() * s.Ai;
    q.Pi = 0.5 * (Pi + Pi.transpose());
    q.qi = s.Ai.transpose() * s.Bi;
    q.ri = 0.5 * s.Bi.squaredNorm();
    return q;
}

LeastSquaresProblem make_synthetic(const SyntheticSpec& spec) {
    const Index N = spec.rows, d = spec.cols;
    if (N <= 0 || d <= 0) throw std::invalid_argument("make_synthetic: non-positive dimensions");
    if (spec.kappa < 1.0) throw std::invalid_argument("make_synthetic: kappa must be >= 1");
    const Index full = std::min(N, d);
    const Index rank = spec.rank == 0 ? full : spec.rank;
    if (rank < 1 || rank > full) throw std::invalid_argument("make_synthetic: bad rank");

    SplitMix64 rng(spec.seed);
    auto random_matrix = [&](Index r, Index c) {
        Matrix M(r, c);
        for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < c; ++j) M(i, j) = rng.next_uniform(-1.0, 1.0);
        return M;
    };

    // A = U diag(sigma) V^T with orthonormal U (N x rank) and V (d x rank);
    // Gram eigenvalues sigma^2 log-spaced over [1/kappa, 1].
    Matrix U = Eigen::HouseholderQR<Matrix>(random_matrix(N, rank))
                   .householderQ() *
               Matrix::Identity(N, rank);
    Matrix V = Eigen::HouseholderQR<Matrix>(random_matrix(d, rank))
                   .householderQ() *
               Matrix::Identity(d, rank);

    Vector sigma(rank);
    for (Index i = 0; i < rank; ++i) {
        const double t = rank == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(rank - 1);
        sigma(i) = std::sqrt(std::pow(spec.kappa, -t));  // lambda_i = kappa^{-t}
    }

    LeastSquaresProblem p;
    p.A = U * sigma.asDiagonal() * V.transpose();
    auto [B, x_star] = synth_ones_observations(p.A);
    p.B = std::move(B);
    p.x_star = std::move(x_star);
    p.name = "synthetic";
    return p;
}

}  // namespace lsq
