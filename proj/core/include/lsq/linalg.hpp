#pragma once

#include "lsq/types.hpp"

namespace lsq {

/// Eigenvalue profile of a Gram matrix. Eigenvalues are sorted descending
/// and clamped to zero below rank_tol * lambda1, so lambda_r is the smallest
/// nonzero eigenvalue and lambda_d the smallest overall (zero when the
/// matrix is rank deficient).
struct SpectralSummary {
    Vector eigenvalues;  // descending, length d
    Index rank_r = 0;
    double lambda1 = 0.0;
    double lambda_r = 0.0;
    double lambda_d = 0.0;
    // lambda1 / lambda_d when full rank, otherwise lambda1 / lambda_r over
    // the row space (kappa_row_space set).
    double kappa = 0.0;
    bool kappa_row_space = false;

    bool full_rank() const { return rank_r == eigenvalues.size(); }
};

/// A^T A, symmetrized as (G + G^T)/2 to kill rounding asymmetry.
Matrix gram(const Matrix& A);

/// Eigenvalues of a symmetric PSD matrix, descending.
/// Throws NumericalError if G is asymmetric beyond 1e-10 relative, has a
/// negative eigenvalue beyond -rank_tol*lambda1, or is identically zero.
SpectralSummary spectral_summary(const Matrix& G, double rank_tol = 1e-12);

/// (G + beta I)^{-1}, symmetric. Reference matrix for convergence tests;
/// never used inside solver iterations. Requires beta > 0 or G full rank.
Matrix k_beta(const Matrix& G, double beta);

/// Frobenius norm of K - Kref.
double frobenius_distance(const Matrix& K, const Matrix& Kref);

/// P = I - Ai^T (Ai Ai^T)^{-1} Ai, the orthogonal projector onto the
/// nullspace of Ai. Throws SolverInapplicable when Ai is row-rank deficient.
Matrix row_space_projection(const Matrix& Ai);

/// x = Ai^T (Ai Ai^T)^{-1} Bi, the minimum-norm solution of Ai x = Bi.
Vector min_norm_solution(const Matrix& Ai, const Vector& Bi);

}  // namespace lsq
