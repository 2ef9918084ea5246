#include "tobo/linalg.hpp"

#include <cmath>
#include <string>

#include "tobo/error.hpp"

namespace tobo {

double JitteredCholesky::log_det() const {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

JitteredCholesky factorize_jittered(const Eigen::MatrixXd& A, std::span<const double> ladder) {
    if (!A.allFinite()) throw NumericalError("covariance matrix has non-finite entries");
    JitteredCholesky out;
    for (double jitter : ladder) {
        Eigen::MatrixXd M = A;
        M.diagonal().array() += jitter;
        out.llt.compute(M);
        if (out.llt.info() == Eigen::Success && out.llt.matrixLLT().diagonal().minCoeff() > 0.0) {
            out.jitter = jitter;
            return out;
        }
    }
    throw NumericalError("Cholesky factorization failed for a " + std::to_string(A.rows()) + "x" +
                         std::to_string(A.cols()) + " covariance after the full jitter ladder");
}

double spectral_norm_psd(const Eigen::MatrixXd& S) {
    if (S.size() == 0) return 0.0;
    if (S.rows() == 1) return std::max(S(0, 0), 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    return std::max(es.eigenvalues().maxCoeff(), 0.0);
}

double min_eigenvalue(const Eigen::MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(S), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace tobo
