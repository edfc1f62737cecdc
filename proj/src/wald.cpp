#include "enrt/wald.hpp"

#include <cmath>

#include "enrt/numerics.hpp"

namespace enrt {

namespace {

// Covariance of the contrast vector (delta_1 - delta_H, ..., delta_{H-1} - delta_H).
Eigen::MatrixXd contrast_cov(const Eigen::MatrixXd& cov) {
    const int H = static_cast<int>(cov.rows());
    Eigen::MatrixXd m(H - 1, H - 1);
    for (int i = 0; i < H - 1; ++i)
        for (int j = 0; j < H - 1; ++j)
            m(i, j) = cov(i, j) - cov(i, H - 1) - cov(j, H - 1) + cov(H - 1, H - 1);
    return m;
}

double quad_form_inv(const Eigen::MatrixXd& m, const Eigen::VectorXd& v,
                     const char* context) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
        throw NumericalError(std::string(context) + ": singular contrast covariance");
    return v.dot(llt.solve(v));
}

}  // namespace

WaldResult wald_test(const FittedModel& fit) {
    const int H = static_cast<int>(fit.delta_hat.size());
    if (H < 2) throw ValidationError("wald_test: need at least 2 subgroups");
    Eigen::VectorXd d(H - 1);
    for (int i = 0; i < H - 1; ++i) d[i] = fit.delta_hat[i] - fit.delta_hat[H - 1];
    WaldResult res;
    res.df = H - 1;
    res.statistic = quad_form_inv(contrast_cov(fit.cov_delta), d, "wald_test");
    res.p_value = 1.0 - num::chisq_cdf(res.statistic, res.df);
    return res;
}

WaldResult wald_zero_test(const FittedModel& fit) {
    const int H = static_cast<int>(fit.delta_hat.size());
    if (H < 1) throw ValidationError("wald_zero_test: empty fit");
    Eigen::VectorXd d(H);
    for (int i = 0; i < H; ++i) d[i] = fit.delta_hat[i];
    WaldResult res;
    res.df = H;
    res.statistic = quad_form_inv(fit.cov_delta, d, "wald_zero_test");
    res.p_value = 1.0 - num::chisq_cdf(res.statistic, res.df);
    return res;
}

double wald_power(const DesignSpec& design, int K) {
    validate(design);
    if (K < 1) throw ValidationError("wald_power: K must be >= 1");
    const int H = design.H;
    Eigen::VectorXd d(H - 1);
    for (int i = 0; i < H - 1; ++i) d[i] = design.delta[i] - design.delta[H - 1];
    const double theta =
        quad_form_inv(contrast_cov(design_cov_delta(design, K)), d, "wald_power");
    const double crit = num::chisq_quantile(1.0 - design.alpha, H - 1);
    return 1.0 - num::noncentral_chisq_cdf(crit, H - 1, theta);
}

int wald_min_k(const DesignSpec& design) {
    validate(design);
    bool null_contrast = true;
    for (int i = 0; i + 1 < design.H; ++i)
        if (design.delta[i] != design.delta[design.H - 1]) null_contrast = false;
    if (null_contrast)
        throw InfeasibleError("wald_min_k: power unattainable (constant delta)");

    const double target = 1.0 - design.beta;
    int hi = 1;
    while (wald_power(design, hi) < target) {
        hi *= 2;
        if (hi > (1 << 28))
            throw InfeasibleError("wald_min_k: no attainable sample size");
    }
    int lo = hi / 2;  // power(lo) < target (or lo == 0)
    while (hi - lo > 1) {
        const int mid = lo + (hi - lo) / 2;
        (wald_power(design, mid) >= target ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace enrt
