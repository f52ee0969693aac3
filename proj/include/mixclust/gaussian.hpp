#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace mixclust {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Rows are observations, columns are coordinates.
using Observations = Eigen::MatrixXd;

// Symmetric positive-definite matrix with its Cholesky factor cached.
class CovMatrix {
public:
    explicit CovMatrix(const Matrix& entries);

    const Matrix& matrix() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }
    double log_det() const { return log_det_; }
    const Eigen::LLT<Matrix>& llt() const { return llt_; }

    static CovMatrix identity(int p);

private:
    Matrix m_;
    Eigen::LLT<Matrix> llt_;
    double log_det_ = 0.0;
};

struct GaussianComponent {
    Vector mean;
    CovMatrix cov;

    GaussianComponent(Vector mu, CovMatrix sigma);
    int dim() const { return static_cast<int>(mean.size()); }
};

double mahalanobis_sq(const Eigen::Ref<const Vector>& x, const GaussianComponent& comp);
double log_density(const Eigen::Ref<const Vector>& x, const GaussianComponent& comp);

// Squared Mahalanobis distances for every row of data.
Vector mahalanobis_sq_rows(const Observations& data, const GaussianComponent& comp);
Vector log_density_rows(const Observations& data, const GaussianComponent& comp);

// integral of phi^(1+beta) over R^p
double dpd_integral(const CovMatrix& cov, double beta);

// (1/(n beta)) sum phi^beta(X_i) - dpd_integral/(1+beta); mean log-density when beta == 0.
double component_beta_objective(const Observations& data, const GaussianComponent& comp,
                                double beta);

}  // namespace mixclust
