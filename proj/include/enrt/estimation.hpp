#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "enrt/model.hpp"

namespace enrt {

struct SubgroupCounts {
    int treated = 0;
    int control = 0;
};

// GEE fit of the member-outcome model Y = zeta_h + delta_h * G + network
// effect + noise under an exchangeable working correlation.
struct FittedModel {
    std::vector<double> zeta;       // zeta_1..zeta_H
    std::vector<double> se_zeta;    // std errors of zeta_hat
    std::vector<double> delta_hat;  // delta_1..delta_H
    double sigma2_hat = 0.0;
    double rho_hat = 0.0;
    Eigen::MatrixXd cov_delta;      // H x H covariance of delta_hat
    double dof = 0.0;               // residual dof: member rows - 2H
    int n_networks = 0;             // K
    long n_members = 0;
    std::vector<SubgroupCounts> counts;
    Direction direction = Direction::maximize;
    bool rho_identifiable = true;   // false when every network has one member
    int iterations = 0;
};

struct FitOptions {
    std::optional<double> fixed_rho;  // skip moment updates of rho when set
    int max_iter = 100;
    double tol = 1e-8;
};

// Alternates the weighted coefficient solve with moment re-estimation of
// (sigma2, rho) from an OLS start until the largest parameter change falls
// below tol.  Throws ValidationError when a subgroup x treatment cell is
// empty (the cell is named) and NumericalError on non-convergence.
FittedModel fit_gee(const EgoDataset& data, const FitOptions& options = {});

// Moment estimators from raw residuals grouped by network: sigma2 from the
// mean squared residual and rho from within-network cross-products, clamped
// to [0, 1-1e-6].  identifiable is false (and rho 0) when no network has
// two members.
struct VarComponents {
    double sigma2 = 0.0;
    double rho = 0.0;
    bool identifiable = true;
};
VarComponents estimate_variance_components(
    const std::vector<std::vector<double>>& residuals_by_network,
    long n_mean_params);

// Analytic covariance of delta_hat for a balanced design with known
// variance components: diag( sigma2 / (K g_h b p (1-p)) ) with
// b = n / (1 + (n-1) rho), the information contributed per network.
Eigen::MatrixXd design_cov_delta(const DesignSpec& design, int K);

}  // namespace enrt
