#pragma once

#include <cstdint>
#include <span>

#include "enrt/estimation.hpp"

namespace enrt {

// Constrained simultaneous interval for delta_h minus the best of the others.
struct Sci {
    double lower = 0.0;
    double upper = 0.0;
};

struct McbResult {
    std::vector<double> critical_values;        // c_h per subgroup
    std::vector<std::vector<double>> lambdas;   // factor loadings, H-1 per h
    std::vector<int> best_set;                  // 1-based subgroup labels
    std::vector<Sci> sci;
    std::vector<double> t_stats;  // delta_hat_h - max_{j!=h} delta_hat_j
                                  // (min under minimize)
    double overall_p = 1.0;
    std::vector<double> pairwise_p;             // BH-adjusted, one per subgroup
    Direction direction = Direction::maximize;
};

// Factor loadings lambda with corr(dhat_i - dhat_h, dhat_j - dhat_h) =
// lambda_i lambda_j for i, j != h (h is a 1-based subgroup label).  Exact
// closed form sqrt(v_h / (v_j + v_h)) for diagonal cov_delta; otherwise a
// rank-one least-squares fit.  Throws NumericalError("non-factorizable
// correlation") when the fit residual exceeds 1e-3; callers fall back to
// Monte Carlo critical values.
std::vector<double> lambda_factorize(const Eigen::MatrixXd& cov_delta, int h);

// Per-subgroup critical value: solves
//   integrate_phi_product(lambda, (c,...,c), nu) = 1 - alpha  within 1e-6.
double critical_value(std::span<const double> lambda, double nu, double alpha);

// Monte Carlo fallback: empirical 1-alpha quantile of max_j Z_j / U over
// n_draws of Z ~ N(0, corr) and U ~ ChiScaleDensity(nu), seed-fixed.
double critical_value_mc(const Eigen::MatrixXd& corr, double nu, double alpha,
                         std::uint64_t seed = 0x9E3779B97F4A7C15ull,
                         long n_draws = 1'000'000);

// Full MCB procedure: best-set membership uses strict interval positivity
// (U_h > 0); under minimize the intervals are negated and swapped relative to
// the sign-flipped maximize analysis.
McbResult mcb_test(const FittedModel& fit, double alpha, Direction direction);

// Family-level heterogeneity p-value: product over subgroups of the
// retention probability of each comparison-with-best margin measured against
// the simultaneous chi-square contrast bound c_S = sqrt(chisq_quantile(
// 1-alpha, H-1)); near 1 under ties, near 0 under clear separation.
double overall_p_value(const FittedModel& fit, Direction direction,
                       double alpha = 0.05);

// One-sided comparison-with-best p-values from the t reference, adjusted by
// Benjamini-Hochberg step-up.
std::vector<double> pairwise_p_values(const FittedModel& fit, Direction direction);

// Analytic probability of exact best-set identification at K networks:
// retention of the tied best set times witnessed exclusion of the rest, each
// a Gauss quadrature of a normal-product integral.  Throws InfeasibleError
// under a constant delta ("power undefined under global null").
double mcb_power(const DesignSpec& design, int K);

struct PowerCurvePoint {
    int K = 0;
    double power = 0.0;
};

struct MinKResult {
    int k_min = 0;
    std::vector<PowerCurvePoint> curve;  // evaluated (K, power) pairs, K ascending
};

// Minimal K with mcb_power >= 1 - beta, plus the evaluated power curve.
MinKResult mcb_min_k(const DesignSpec& design);

}  // namespace enrt
