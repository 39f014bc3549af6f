#include "lsq/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace lsq {

namespace {

// Cholesky of the row Gram Ai Ai^T, shared by the projection and
// minimum-norm-solution routines. Refuses near-singular inputs since both
// callers require full row rank.
Eigen::LLT<Matrix> row_gram_cholesky(const Matrix& Ai) {
    if (Ai.rows() == 0 || Ai.cols() == 0)
        throw NumericalError("row_gram_cholesky: empty matrix");
    Matrix W = Ai * Ai.transpose();
    W = 0.5 * (W + W.transpose()).eval();
    Eigen::LLT<Matrix> llt(W);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-14)
        throw SolverInapplicable("shard is row-rank deficient (Ai Ai^T singular)");
    return llt;
}

}  // namespace

Matrix gram(const Matrix& A) {
    if (A.rows() == 0 || A.cols() == 0)
        throw NumericalError("gram: dimension-zero input");
    Matrix G = A.transpose() * A;
    return 0.5 * (G + G.transpose()).eval();
}

SpectralSummary spectral_summary(const Matrix& G, double rank_tol) {
    const Index d = G.rows();
    if (d == 0 || G.cols() != d)
        throw NumericalError("spectral_summary: input must be square and non-empty");

    const double scale = G.cwiseAbs().maxCoeff();
    if (scale == 0.0)
        throw NumericalError("spectral_summary: zero matrix has no spectral profile");
    const double asym = (G - G.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale)
        throw NumericalError("spectral_summary: input asymmetric beyond 1e-10 relative");

    Matrix S = 0.5 * (G + G.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError("spectral_summary: eigendecomposition failed");

    SpectralSummary out;
    out.eigenvalues = es.eigenvalues().reverse();  // ascending -> descending
    out.lambda1 = out.eigenvalues(0);
    if (out.lambda1 <= 0.0)
        throw NumericalError("spectral_summary: largest eigenvalue not positive");

    const double floor = rank_tol * out.lambda1;
    if (out.eigenvalues(d - 1) < -floor)
        throw NumericalError("spectral_summary: negative eigenvalue beyond tolerance: " +
                             std::to_string(out.eigenvalues(d - 1)));

    Index rank = 0;
    for (Index i = 0; i < d; ++i) {
        if (out.eigenvalues(i) > floor)
            ++rank;
        else
            out.eigenvalues(i) = 0.0;
    }
    out.rank_r = rank;
    out.lambda_r = out.eigenvalues(rank - 1);
    out.lambda_d = out.eigenvalues(d - 1);
    out.kappa_row_space = (out.lambda_d == 0.0);
    out.kappa = out.kappa_row_space ? out.lambda1 / out.lambda_r : out.lambda1 / out.lambda_d;
    return out;
}

Matrix k_beta(const Matrix& G, double beta) {
    const Index d = G.rows();
    if (d == 0 || G.cols() != d)
        throw NumericalError("k_beta: input must be square and non-empty");
    if (beta < 0.0)
        throw NumericalError("k_beta: beta must be non-negative");

    Matrix S = 0.5 * (G + G.transpose());
    S.diagonal().array() += beta;

    Eigen::LLT<Matrix> llt(S);
    if (llt.info() == Eigen::Success && llt.rcond() > 1e-14) {
        Matrix K = llt.solve(Matrix::Identity(d, d));
        return 0.5 * (K + K.transpose()).eval();
    }

    // Cholesky failed: fall back to the eigendecomposition and refuse a
    // genuinely singular matrix.
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    if (es.info() != Eigen::Success)
        throw NumericalError("k_beta: eigendecomposition fallback failed");
    const Vector& ev = es.eigenvalues();
    const double lmax = ev(d - 1);
    if (lmax <= 0.0 || ev(0) <= 1e-14 * lmax)
        throw NumericalError("k_beta: G + beta I is singular (beta = 0 with rank-deficient G?)");
    Matrix K = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (K + K.transpose()).eval();
}

double frobenius_distance(const Matrix& K, const Matrix& Kref) {
    if (K.rows() != Kref.rows() || K.cols() != Kref.cols())
        throw NumericalError("frobenius_distance: dimension mismatch");
    return (K - Kref).norm();
}

Matrix row_space_projection(const Matrix& Ai) {
    auto llt = row_gram_cholesky(Ai);
    const Index d = Ai.cols();
    Matrix P = Matrix::Identity(d, d) - Ai.transpose() * llt.solve(Ai);
    return 0.5 * (P + P.transpose()).eval();
}

Vector min_norm_solution(const Matrix& Ai, const Vector& Bi) {
    if (Bi.size() != Ai.rows())
        throw NumericalError("min_norm_solution: dimension mismatch");
    auto llt = row_gram_cholesky(Ai);
    return Ai.transpose() * llt.solve(Bi);
}

}  // namespace lsq
