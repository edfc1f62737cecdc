#pragma once

#include <functional>
#include <span>
#include <vector>

#include "enrt/common.hpp"

namespace enrt::num {

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

// Standard normal cdf, |error| <= 1e-12; keeps sub-normal tail mass (no
// premature underflow to 0 for x > -38).
double std_normal_cdf(double x);
double std_normal_pdf(double x);

// Inverse standard normal cdf for p in (0,1).
double std_normal_quantile(double p);

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double reg_lower_gamma(double a, double x);

// Regularized incomplete beta I_x(a, b).
double reg_inc_beta(double a, double b, double x);

// Central chi-square cdf / quantile (df > 0 need not be integral).
double chisq_cdf(double x, double df);
double chisq_quantile(double p, double df);

// Noncentral chi-square cdf; matches the central cdf at noncentrality 0.
// Absolute error <= 1e-9. Rejects df = 0.
double noncentral_chisq_cdf(double x, int df, double noncentrality);

// Student-t cdf / quantile with real dof nu > 0.
double student_t_cdf(double x, double nu);
double student_t_quantile(double p, double nu);

// ---------------------------------------------------------------------------
// Chi-scale density: law of sigma_hat/sigma when nu*sigma_hat^2/sigma^2 is
// chi-square(nu).  g(u) = nu^{nu/2} / (Gamma(nu/2) 2^{nu/2-1}) u^{nu-1}
// exp(-nu u^2 / 2) on u > 0.
// ---------------------------------------------------------------------------
struct ChiScaleDensity {
    double nu;
    double operator()(double u) const;
    double quantile(double p) const;  // sqrt(chisq_quantile(p, nu)/nu)
};

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------
struct QuadratureSpec {
    int nodes_z = 64;       // Gauss-Hermite order for the normal weight
    int nodes_u = 64;       // Gauss-Legendre order for the chi-scale weight
    double abs_tol = 1e-8;
};

struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Hermite rule for the standard normal weight (weights sum to 1).
GaussRule gauss_hermite_normal(int n);

// Gauss-Legendre rule on [a, b] (weights sum to b - a).
GaussRule gauss_legendre(int n, double a, double b);

// E[ prod_j Phi((lambda_j Z + shift_j + uscale_j U) / sqrt(1 - lambda_j^2)) ]
// with Z standard normal and U ~ ChiScaleDensity(nu), independent.
// nu > 1e7 is treated as a point mass at U = 1.
double integrate_phi_product_affine(std::span<const double> lambdas,
                                    std::span<const double> shifts,
                                    std::span<const double> uscales,
                                    double nu,
                                    const QuadratureSpec& spec = {});

// Specialization with shift 0: E[ prod_j Phi((lambda_j Z + thresholds_j U) /
// sqrt(1 - lambda_j^2)) ], nondecreasing in every threshold entry.
double integrate_phi_product(std::span<const double> lambdas,
                             std::span<const double> thresholds,
                             double nu,
                             const QuadratureSpec& spec = {});

// ---------------------------------------------------------------------------
// Root finding on a monotone nondecreasing function: returns x with
// |f(x) - target| <= tol.  The bracket is expanded geometrically when the
// target is not initially enclosed; throws NumericalError("no root in range")
// if expansion hits its cap.
// ---------------------------------------------------------------------------
double solve_monotone_root(const std::function<double(double)>& f,
                           double target, double lo, double hi,
                           double tol = 1e-6);

}  // namespace enrt::num
