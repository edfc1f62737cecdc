#include "enrt/mcb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>

#include "enrt/numerics.hpp"
#include "enrt/rng.hpp"

namespace enrt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-subgroup view of a fit with the orientation folded in: work[h] is the
// estimate on the "larger is better" scale.
struct Oriented {
    int H = 0;
    std::vector<double> d;      // oriented point estimates
    double sigma_hat = 0.0;
    double nu = 0.0;
    const Eigen::MatrixXd* cov = nullptr;

    double sd_diff(int i, int j) const {
        return std::sqrt((*cov)(i, i) + (*cov)(j, j) - 2.0 * (*cov)(i, j));
    }
    // Best of the others and its index, on the oriented scale.
    std::pair<double, int> best_other(int h) const {
        double best = -kInf;
        int arg = -1;
        for (int j = 0; j < H; ++j)
            if (j != h && d[j] > best) {
                best = d[j];
                arg = j;
            }
        return {best, arg};
    }
};

Oriented orient(const FittedModel& fit, Direction direction) {
    Oriented o;
    o.H = static_cast<int>(fit.delta_hat.size());
    if (o.H < 2) throw ValidationError("mcb: need at least 2 subgroups");
    if (!(fit.sigma2_hat > 0.0)) throw ValidationError("mcb: sigma2_hat must be > 0");
    if (!(fit.dof > 0.0)) throw ValidationError("mcb: residual dof must be > 0");
    o.d.resize(o.H);
    const double sign = direction == Direction::maximize ? 1.0 : -1.0;
    for (int h = 0; h < o.H; ++h) o.d[h] = sign * fit.delta_hat[h];
    o.sigma_hat = std::sqrt(fit.sigma2_hat);
    o.nu = fit.dof;
    o.cov = &fit.cov_delta;
    return o;
}

// Memoized critical values keyed by the (quantized) loading multiset, dof and
// size; the same key recurs thousands of times in power searches.
double cached_critical_value(std::vector<double> lambda, double nu, double alpha) {
    std::sort(lambda.begin(), lambda.end());
    std::vector<long> key_lambda(lambda.size());
    for (std::size_t i = 0; i < lambda.size(); ++i)
        key_lambda[i] = std::lround(lambda[i] * 1e12);
    const auto key = std::make_tuple(std::move(key_lambda),
                                     std::lround(std::min(nu, 2e7) * 16.0),
                                     std::lround(alpha * 1e12));
    static std::mutex mu;
    static std::map<decltype(key), double> cache;
    {
        std::scoped_lock lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    const double c = critical_value(lambda, nu, alpha);
    std::scoped_lock lock(mu);
    return cache.emplace(key, c).first->second;
}

std::vector<double> bh_step_up(const std::vector<double>& raw) {
    const int m = static_cast<int>(raw.size());
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return raw[a] < raw[b]; });
    std::vector<double> adj(m);
    double running = 1.0;
    for (int i = m - 1; i >= 0; --i) {
        const double scaled = raw[order[i]] * m / (i + 1);
        running = std::min(running, std::min(scaled, 1.0));
        adj[order[i]] = running;
    }
    return adj;
}

}  // namespace

std::vector<double> lambda_factorize(const Eigen::MatrixXd& cov_delta, int h) {
    const int H = static_cast<int>(cov_delta.rows());
    if (cov_delta.cols() != H || H < 2)
        throw ValidationError("lambda_factorize: cov_delta must be square, H >= 2");
    if (h < 1 || h > H)
        throw ValidationError("lambda_factorize: subgroup out of range");
    const int hh = h - 1;

    double max_off = 0.0, max_diag = 0.0;
    for (int i = 0; i < H; ++i) {
        max_diag = std::max(max_diag, std::fabs(cov_delta(i, i)));
        for (int j = 0; j < H; ++j)
            if (i != j) max_off = std::max(max_off, std::fabs(cov_delta(i, j)));
    }
    if (max_off <= 1e-12 * max_diag) {
        // Independent estimates: corr(dhat_i - dhat_h, dhat_j - dhat_h) =
        // v_h / sqrt((v_i + v_h)(v_j + v_h)), an exact rank-one product.
        std::vector<double> lambda;
        lambda.reserve(H - 1);
        const double vh = cov_delta(hh, hh);
        for (int j = 0; j < H; ++j)
            if (j != hh) lambda.push_back(std::sqrt(vh / (cov_delta(j, j) + vh)));
        return lambda;
    }

    // General covariance: correlation matrix of the comparison vector, then a
    // rank-one least-squares fit of its off-diagonal.
    const int m = H - 1;
    Eigen::MatrixXd sigma(m, m);
    std::vector<int> idx;
    for (int j = 0; j < H; ++j)
        if (j != hh) idx.push_back(j);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            sigma(a, b) = cov_delta(idx[a], idx[b]) - cov_delta(idx[a], hh) -
                          cov_delta(idx[b], hh) + cov_delta(hh, hh);
    Eigen::VectorXd sd = sigma.diagonal().cwiseSqrt();
    Eigen::MatrixXd corr = sigma.array() /
                           (sd * sd.transpose()).array();

    if (m == 1) return {std::sqrt(cov_delta(hh, hh) / sigma(0, 0))};

    Eigen::VectorXd lambda(m);
    for (int i = 0; i < m; ++i) {
        double mx = 0.0;
        for (int j = 0; j < m; ++j)
            if (j != i) mx = std::max(mx, std::fabs(corr(i, j)));
        lambda[i] = std::sqrt(std::min(mx, 0.99));
    }
    for (int it = 0; it < 500; ++it) {
        double change = 0.0;
        for (int i = 0; i < m; ++i) {
            double num = 0.0, den = 0.0;
            for (int j = 0; j < m; ++j) {
                if (j == i) continue;
                num += corr(i, j) * lambda[j];
                den += lambda[j] * lambda[j];
            }
            const double next = den > 0 ? num / den : 0.0;
            change = std::max(change, std::fabs(next - lambda[i]));
            lambda[i] = next;
        }
        if (change < 1e-12) break;
    }
    double resid = 0.0;
    bool in_range = true;
    for (int i = 0; i < m; ++i) {
        if (!(std::fabs(lambda[i]) < 1.0)) in_range = false;
        for (int j = i + 1; j < m; ++j)
            resid = std::max(resid, std::fabs(corr(i, j) - lambda[i] * lambda[j]));
    }
    if (!in_range || resid > 1e-3)
        throw NumericalError("non-factorizable correlation (max residual " +
                             std::to_string(resid) + ")");
    return {lambda.data(), lambda.data() + m};
}

double critical_value(std::span<const double> lambda, double nu, double alpha) {
    if (!(alpha > 0.0 && alpha <= 0.5))
        throw ValidationError("critical_value: alpha must lie in (0, 0.5]");
    std::vector<double> lam(lambda.begin(), lambda.end());
    auto coverage = [&](double c) {
        const std::vector<double> thresholds(lam.size(), c);
        return num::integrate_phi_product(lam, thresholds, nu);
    };
    return num::solve_monotone_root(coverage, 1.0 - alpha, 0.5, 4.0, 1e-6);
}

double critical_value_mc(const Eigen::MatrixXd& corr, double nu, double alpha,
                         std::uint64_t seed, long n_draws) {
    const int m = static_cast<int>(corr.rows());
    if (m < 1 || corr.cols() != m)
        throw ValidationError("critical_value_mc: bad correlation matrix");
    Eigen::LLT<Eigen::MatrixXd> llt(corr);
    if (llt.info() != Eigen::Success)
        throw NumericalError("critical_value_mc: correlation not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    rng::Xoshiro256pp gen(seed);
    std::vector<double> stats(n_draws);
    Eigen::VectorXd z(m);
    for (long i = 0; i < n_draws; ++i) {
        for (int j = 0; j < m; ++j) z[j] = gen.normal();
        const Eigen::VectorXd x = L * z;
        const double u = nu > 1e7 ? 1.0 : std::sqrt(gen.chisq(nu) / nu);
        stats[i] = x.maxCoeff() / u;
    }
    const long k = std::lround((1.0 - alpha) * (n_draws - 1));
    std::nth_element(stats.begin(), stats.begin() + k, stats.end());
    return stats[k];
}

namespace {

// Loadings and critical value for subgroup h (0-based), with the Monte Carlo
// fallback when the correlation does not factor.
struct HGroupCalc {
    std::vector<double> lambda;
    double c = 0.0;
};

HGroupCalc h_group_calc(const Eigen::MatrixXd& cov, int hh, double nu,
                        double alpha) {
    HGroupCalc out;
    try {
        out.lambda = lambda_factorize(cov, hh + 1);
        out.c = cached_critical_value(out.lambda, nu, alpha);
        return out;
    } catch (const NumericalError&) {
        // Rank-one structure failed: simulate the exact max statistic.
        const int H = static_cast<int>(cov.rows());
        const int m = H - 1;
        Eigen::MatrixXd sigma(m, m);
        std::vector<int> idx;
        for (int j = 0; j < H; ++j)
            if (j != hh) idx.push_back(j);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                sigma(a, b) = cov(idx[a], idx[b]) - cov(idx[a], hh) -
                              cov(idx[b], hh) + cov(hh, hh);
        Eigen::VectorXd sd = sigma.diagonal().cwiseSqrt();
        Eigen::MatrixXd corr = sigma.array() / (sd * sd.transpose()).array();
        out.lambda.assign(m, 0.0);  // reported as "no common factor"
        out.c = critical_value_mc(corr, nu, alpha,
                                  0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(hh));
        return out;
    }
}

}  // namespace

double overall_p_value(const FittedModel& fit, Direction direction, double alpha) {
    const Oriented o = orient(fit, direction);
    const double c_s = std::sqrt(num::chisq_quantile(1.0 - alpha, o.H - 1));
    double p = 1.0;
    for (int h = 0; h < o.H; ++h) {
        const auto [best, arg] = o.best_other(h);
        const double margin = (best - o.d[h]) / o.sd_diff(h, arg);
        const HGroupCalc calc = h_group_calc(*o.cov, h, o.nu, alpha);
        const std::vector<double> thresholds(calc.lambda.size(),
                                             2.0 * c_s - margin);
        p *= num::integrate_phi_product(calc.lambda, thresholds, o.nu);
    }
    return std::clamp(p, 0.0, 1.0);
}

std::vector<double> pairwise_p_values(const FittedModel& fit, Direction direction) {
    const Oriented o = orient(fit, direction);
    std::vector<double> raw(o.H);
    for (int h = 0; h < o.H; ++h) {
        const auto [best, arg] = o.best_other(h);
        const double t = (o.d[h] - best) / o.sd_diff(h, arg);
        raw[h] = num::student_t_cdf(t, o.nu);
    }
    return bh_step_up(raw);
}

McbResult mcb_test(const FittedModel& fit, double alpha, Direction direction) {
    if (!(alpha > 0.0 && alpha <= 0.5))
        throw ValidationError("mcb_test: alpha must lie in (0, 0.5]");
    const Oriented o = orient(fit, direction);
    const int H = o.H;

    McbResult res;
    res.direction = direction;
    res.critical_values.resize(H);
    res.lambdas.resize(H);
    res.t_stats.resize(H);
    res.sci.resize(H);

    std::vector<double> upper(H), c(H);
    for (int h = 0; h < H; ++h) {
        const HGroupCalc calc = h_group_calc(*o.cov, h, o.nu, alpha);
        c[h] = calc.c;
        res.critical_values[h] = calc.c;
        res.lambdas[h] = calc.lambda;
        const auto [best, arg] = o.best_other(h);
        res.t_stats[h] = o.d[h] - best;  // oriented scale; re-signed below

        // Upper bound: smallest of the per-comparison upper limits, clamped.
        // sd_diff is on the cov_delta scale, which already carries sigma2_hat.
        double ub = kInf;
        for (int j = 0; j < H; ++j)
            if (j != h)
                ub = std::min(ub, o.d[h] - o.d[j] + c[h] * o.sd_diff(h, j));
        upper[h] = std::max(0.0, ub);
    }

    std::vector<int> candidate;  // subgroups with strictly positive upper bound
    for (int h = 0; h < H; ++h)
        if (upper[h] > 0.0) candidate.push_back(h);

    std::vector<double> lower(H, 0.0);
    for (int h = 0; h < H; ++h) {
        double lb = kInf;
        for (int j : candidate) {
            if (j == h) continue;
            lb = std::min(lb, o.d[h] - o.d[j] - c[h] * o.sd_diff(h, j));
        }
        lower[h] = std::min(0.0, lb);  // empty candidate set clamps to 0
    }

    for (int h = 0; h < H; ++h) {
        if (direction == Direction::maximize) {
            res.sci[h] = {lower[h], upper[h]};
        } else {
            // + 0.0 turns the negated zero bounds back into plain zeros.
            res.sci[h] = {-upper[h] + 0.0, -lower[h] + 0.0};
            res.t_stats[h] = -res.t_stats[h] + 0.0;
        }
        if (upper[h] > 0.0) res.best_set.push_back(h + 1);
    }
    res.overall_p = overall_p_value(fit, direction, alpha);
    res.pairwise_p = pairwise_p_values(fit, direction);
    return res;
}

// ---------------------------------------------------------------------------
// Design-time power
// ---------------------------------------------------------------------------

double mcb_power(const DesignSpec& design, int K) {
    validate(design);
    if (K < 1) throw ValidationError("mcb_power: K must be >= 1");
    const BestStructure bs = best_structure(design.delta, design.direction);
    if (bs.b1.empty())
        throw InfeasibleError("mcb_power: power undefined under global null");
    const int H = design.H;
    const double nu = static_cast<double>(design.n) * K - 2.0 * H;
    if (nu < 1.0) return 0.0;

    // Oriented true effects and the diagonal design covariance.
    std::vector<double> d(H);
    const double sign = design.direction == Direction::maximize ? 1.0 : -1.0;
    for (int h = 0; h < H; ++h) d[h] = sign * design.delta[h];
    const Eigen::MatrixXd cov = design_cov_delta(design, K);
    auto sd_diff = [&](int i, int j) {
        return std::sqrt(cov(i, i) + cov(j, j));
    };

    // Reference/witness: the highest-labelled member of the true best set.
    const int ref = bs.b0.back() - 1;

    std::vector<double> c(H);
    for (int h = 0; h < H; ++h)
        c[h] = cached_critical_value(lambda_factorize(cov, h + 1), nu, design.alpha);

    // Retention of every tied best subgroup, compared against the reference.
    double retention = 1.0;
    if (bs.b0.size() >= 2) {
        std::vector<double> lam, shift, uscale;
        for (int label : bs.b0) {
            const int h = label - 1;
            if (h == ref) continue;
            lam.push_back(std::sqrt(cov(ref, ref)) / sd_diff(h, ref));
            shift.push_back(0.0);
            uscale.push_back(c[h]);
        }
        retention = num::integrate_phi_product_affine(lam, shift, uscale, nu);
    }

    // Witnessed exclusion of every non-best subgroup by the reference.
    std::vector<double> lam, shift, uscale;
    for (int label : bs.b1) {
        const int h = label - 1;
        lam.push_back(std::sqrt(cov(ref, ref)) / sd_diff(h, ref));
        shift.push_back((d[ref] - d[h]) / sd_diff(h, ref));
        uscale.push_back(-c[h]);
    }
    const double exclusion = num::integrate_phi_product_affine(lam, shift, uscale, nu);
    return std::clamp(retention * exclusion, 0.0, 1.0);
}

MinKResult mcb_min_k(const DesignSpec& design) {
    validate(design);
    const double target = 1.0 - design.beta;
    MinKResult out;
    auto eval = [&](int K) {
        const double p = mcb_power(design, K);
        out.curve.push_back({K, p});
        return p;
    };

    int hi = std::max(2, (2 * design.H + design.n) / design.n);
    while (eval(hi) < target) {
        hi *= 2;
        if (hi > (1 << 28))
            throw InfeasibleError("mcb_min_k: no attainable sample size");
    }
    int lo = hi / 2;
    while (hi - lo > 1) {
        const int mid = lo + (hi - lo) / 2;
        (eval(mid) >= target ? hi : lo) = mid;
    }
    // Local minimality walk guards against integer plateaus near the boundary.
    while (hi > 1 && mcb_power(design, hi - 1) >= target) --hi;
    out.k_min = hi;
    std::sort(out.curve.begin(), out.curve.end(),
              [](const PowerCurvePoint& a, const PowerCurvePoint& b) {
                  return a.K < b.K;
              });
    out.curve.erase(std::unique(out.curve.begin(), out.curve.end(),
                                [](const PowerCurvePoint& a, const PowerCurvePoint& b) {
                                    return a.K == b.K;
                                }),
                    out.curve.end());
    return out;
}

}  // namespace enrt
