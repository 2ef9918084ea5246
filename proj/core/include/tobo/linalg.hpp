#pragma once

#include <span>

#include <Eigen/Dense>

namespace tobo {

/// Diagonal increments tried, in order, when a covariance is not numerically PD.
inline constexpr double kJitterLadder[] = {0.0, 1e-10, 1e-6, 1e-4};

/// Cholesky factor of A + jitter * I for the first rung of the ladder that succeeds.
struct JitteredCholesky {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return llt.solve(b); }
    Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const { return llt.solve(B); }
    double log_det() const;
    Eigen::Index size() const { return llt.matrixLLT().rows(); }
};

/// Throws NumericalError when every rung fails or A has non-finite entries.
JitteredCholesky factorize_jittered(const Eigen::MatrixXd& A, std::span<const double> ladder = kJitterLadder);

/// Largest eigenvalue of a symmetric PSD matrix, clamped at zero.
double spectral_norm_psd(const Eigen::MatrixXd& S);

double min_eigenvalue(const Eigen::MatrixXd& S);

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& A) { return 0.5 * (A + A.transpose()); }

}  // namespace tobo
