#pragma once

#include "enrt/estimation.hpp"

namespace enrt {

struct WaldResult {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    double noncentrality = 0.0;  // power context only
};

// Chi-square(H-1) test of spillover homogeneity delta_1 = ... = delta_H via
// the contrast vector (delta_h - delta_H).
WaldResult wald_test(const FittedModel& fit);

// Chi-square(H) test of delta = 0 (the joint-null column of the coefficient
// report).
WaldResult wald_zero_test(const FittedModel& fit);

// Power of the heterogeneity test at K networks under the analytic design
// covariance; equals alpha exactly when delta is constant.
double wald_power(const DesignSpec& design, int K);

// Minimal K with wald_power >= 1 - beta.  Throws InfeasibleError when the
// contrast vector is zero.
int wald_min_k(const DesignSpec& design);

}  // namespace enrt
