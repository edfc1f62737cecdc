#include "enrt/numerics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace enrt::num {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
constexpr double kPointMassNu = 1e7;

void check_positive(double v, const char* what) {
    if (!(v > 0.0)) throw ValidationError(std::string(what) + " must be positive");
}

}  // namespace

double std_normal_cdf(double x) {
    if (!std::isfinite(x)) {
        if (std::isnan(x)) throw ValidationError("std_normal_cdf: x is NaN");
        return x > 0 ? 1.0 : 0.0;
    }
    return 0.5 * std::erfc(-x / kSqrt2);
}

double std_normal_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// Wichura's AS 241 (PPND16): relative error ~1e-16 across (0,1).
double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw ValidationError("std_normal_quantile: p must lie in (0,1)");
    const double q = p - 0.5;
    double r, val;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        val = q *
              (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
                    67265.770927008700853) * r + 45921.953931549871457) * r +
                  13731.693765509461125) * r + 1971.5909503065514427) * r +
                133.14166789178437745) * r + 3.387132872796366608) /
              (((((((5226.495278852545703 * r + 28729.085735721942674) * r +
                    39307.89580009271061) * r + 21213.794301586595867) * r +
                  5394.1960214247511077) * r + 687.1870074920579083) * r +
                42.313330701600911252) * r + 1.0);
        return val;
    }
    r = q < 0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
                    0.24178072517745061177) * r + 1.27045825245236838258) * r +
                  3.64784832476320460504) * r + 5.7694972214606914055) * r +
                4.6303378461565452959) * r + 1.42343711074968357734) /
              (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
                    0.0151986665636164571966) * r + 0.14810397642748007459) * r +
                  0.68976733498510000455) * r + 1.6763848301838038494) * r +
                2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    0.0012426609473880784386) * r + 0.026532189526576123093) * r +
                  0.29656057182850489123) * r + 1.7848265399172913358) * r +
                5.4637849111641143699) * r + 6.6579046435011037772) /
              (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
                    1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
                  0.0148753612908506148525) * r + 0.13692988092273580531) * r +
                0.59983220655588793769) * r + 1.0);
    }
    return q < 0 ? -val : val;
}

// Series branch of the regularized lower incomplete gamma.
static double gamma_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued-fraction branch (modified Lentz) of the upper tail Q(a,x).
static double gamma_cont_frac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double reg_lower_gamma(double a, double x) {
    check_positive(a, "reg_lower_gamma: a");
    if (x < 0.0) throw ValidationError("reg_lower_gamma: x must be >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_series(a, x);
    return 1.0 - gamma_cont_frac(a, x);
}

static double beta_cont_frac(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return h;
}

double reg_inc_beta(double a, double b, double x) {
    check_positive(a, "reg_inc_beta: a");
    check_positive(b, "reg_inc_beta: b");
    if (x < 0.0 || x > 1.0) throw ValidationError("reg_inc_beta: x must lie in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * beta_cont_frac(a, b, x) / a;
    return 1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b;
}

double chisq_cdf(double x, double df) {
    check_positive(df, "chisq_cdf: df");
    if (x <= 0.0) return 0.0;
    return reg_lower_gamma(0.5 * df, 0.5 * x);
}

double chisq_quantile(double p, double df) {
    check_positive(df, "chisq_quantile: df");
    if (!(p >= 0.0 && p < 1.0))
        throw ValidationError("chisq_quantile: p must lie in [0,1)");
    if (p == 0.0) return 0.0;
    // Bisection in x: the cdf value itself is a poor convergence gauge at
    // extreme tails, where it saturates long before x does.
    double hi = df + 10.0 * std::sqrt(2.0 * df) + 10.0;
    for (int i = 0; i < 200 && chisq_cdf(hi, df) < p; ++i) hi *= 2.0;
    double lo = 0.0;
    while (hi - lo > 1e-14 * (1.0 + hi)) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (chisq_cdf(mid, df) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double noncentral_chisq_cdf(double x, int df, double noncentrality) {
    if (df <= 0) throw ValidationError("noncentral_chisq_cdf: df must be >= 1");
    if (noncentrality < 0.0)
        throw ValidationError("noncentral_chisq_cdf: noncentrality must be >= 0");
    if (x <= 0.0) return 0.0;
    const double half_df = 0.5 * df, half_x = 0.5 * x, half_ncp = 0.5 * noncentrality;
    if (half_ncp == 0.0) return reg_lower_gamma(half_df, half_x);

    // Poisson mixture of central chi-square cdfs, summed outward from the
    // modal Poisson index so every retained term is near the mass peak.
    const long m = static_cast<long>(std::floor(half_ncp));
    auto log_pois = [&](long j) {
        return -half_ncp + j * std::log(half_ncp) - std::lgamma(j + 1.0);
    };
    // Central cdf moves across dof by P(a,x) = P(a+1,x) + x^a e^{-x}/Gamma(a+1).
    auto log_step = [&](double a) {
        return a * std::log(half_x) - half_x - std::lgamma(a + 1.0);
    };

    double total = 0.0;
    // Downward sweep: j = m, m-1, ..., 0.
    {
        double w = std::exp(log_pois(m));
        double cdf = reg_lower_gamma(half_df + m, half_x);
        for (long j = m;; --j) {
            total += w * cdf;
            if (j == 0 || (w * cdf < 1e-18 && j < m)) break;
            w *= j / half_ncp;
            cdf += std::exp(log_step(half_df + j - 1.0));
            if (cdf > 1.0) cdf = 1.0;
        }
    }
    // Upward sweep: j = m+1, m+2, ...
    {
        double w = std::exp(log_pois(m));
        double cdf = reg_lower_gamma(half_df + m, half_x);
        for (long j = m + 1; j < m + 100000; ++j) {
            w *= half_ncp / j;
            cdf -= std::exp(log_step(half_df + j - 1.0));
            if (cdf < 0.0) cdf = 0.0;
            total += w * cdf;
            if (w < 1e-18 || (w * cdf < 1e-18 && j > m + 3)) break;
        }
    }
    return std::clamp(total, 0.0, 1.0);
}

double student_t_cdf(double x, double nu) {
    check_positive(nu, "student_t_cdf: nu");
    if (x == 0.0) return 0.5;
    const double w = nu / (nu + x * x);
    const double half_tail = 0.5 * reg_inc_beta(0.5 * nu, 0.5, w);
    return x > 0 ? 1.0 - half_tail : half_tail;
}

double student_t_quantile(double p, double nu) {
    check_positive(nu, "student_t_quantile: nu");
    if (!(p > 0.0 && p < 1.0))
        throw ValidationError("student_t_quantile: p must lie in (0,1)");
    if (p == 0.5) return 0.0;
    // Symmetric reduction to the upper half, then bisection in x.
    if (p < 0.5) return -student_t_quantile(1.0 - p, nu);
    double lo = 0.0;
    double hi = std_normal_quantile(p) + 2.0;
    for (int i = 0; i < 4096 && student_t_cdf(hi, nu) < p; ++i) hi *= 2.0;
    while (hi - lo > 1e-14 * (1.0 + hi)) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (student_t_cdf(mid, nu) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Chi-scale density
// ---------------------------------------------------------------------------

double ChiScaleDensity::operator()(double u) const {
    check_positive(nu, "ChiScaleDensity: nu");
    if (u <= 0.0) return 0.0;
    const double half = 0.5 * nu;
    const double log_pdf = half * std::log(nu) - std::lgamma(half) -
                           (half - 1.0) * std::log(2.0) + (nu - 1.0) * std::log(u) -
                           half * u * u;
    return std::exp(log_pdf);
}

double ChiScaleDensity::quantile(double p) const {
    check_positive(nu, "ChiScaleDensity: nu");
    return std::sqrt(chisq_quantile(p, nu) / nu);
}

// ---------------------------------------------------------------------------
// Quadrature rules via Golub-Welsch on the Jacobi matrix
// ---------------------------------------------------------------------------

namespace {

GaussRule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& subdiag,
                       double mu0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, subdiag, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success)
        throw NumericalError("quadrature eigensolve failed");
    const int n = static_cast<int>(diag.size());
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = es.eigenvalues()[i];
        const double v0 = es.eigenvectors()(0, i);
        rule.weights[i] = mu0 * v0 * v0;
    }
    return rule;
}

const GaussRule& cached_hermite(int n) {
    static std::mutex mu;
    static std::map<int, GaussRule> cache;
    std::scoped_lock lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
    return cache.emplace(n, golub_welsch(diag, sub, 1.0)).first->second;
}

const GaussRule& cached_legendre_unit(int n) {
    static std::mutex mu;
    static std::map<int, GaussRule> cache;
    std::scoped_lock lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int k = 1; k < n; ++k)
        sub[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
    return cache.emplace(n, golub_welsch(diag, sub, 2.0)).first->second;
}

void check_quadrature_spec(const QuadratureSpec& spec) {
    if (spec.nodes_z < 16 || spec.nodes_u < 16)
        throw ValidationError("QuadratureSpec: node counts must be >= 16");
    if (!(spec.abs_tol > 0.0))
        throw ValidationError("QuadratureSpec: abs_tol must be positive");
}

}  // namespace

GaussRule gauss_hermite_normal(int n) {
    if (n < 1) throw ValidationError("gauss_hermite_normal: order must be >= 1");
    return cached_hermite(n);
}

GaussRule gauss_legendre(int n, double a, double b) {
    if (n < 1) throw ValidationError("gauss_legendre: order must be >= 1");
    if (!(b > a)) throw ValidationError("gauss_legendre: need b > a");
    const GaussRule& unit = cached_legendre_unit(n);
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = mid + half * unit.nodes[i];
        rule.weights[i] = half * unit.weights[i];
    }
    return rule;
}

double integrate_phi_product_affine(std::span<const double> lambdas,
                                    std::span<const double> shifts,
                                    std::span<const double> uscales,
                                    double nu, const QuadratureSpec& spec) {
    check_quadrature_spec(spec);
    check_positive(nu, "integrate_phi_product: nu");
    const std::size_t m = lambdas.size();
    if (m == 0) throw ValidationError("integrate_phi_product: empty lambda vector");
    if (shifts.size() != m || uscales.size() != m)
        throw ValidationError("integrate_phi_product: length mismatch");
    std::vector<double> inv_s(m);
    for (std::size_t j = 0; j < m; ++j) {
        if (!(std::fabs(lambdas[j]) < 1.0))
            throw ValidationError("integrate_phi_product: |lambda| must be < 1");
        inv_s[j] = 1.0 / std::sqrt(1.0 - lambdas[j] * lambdas[j]);
    }

    const GaussRule& gz = cached_hermite(spec.nodes_z);
    auto inner = [&](double u) {
        double acc = 0.0;
        for (int iz = 0; iz < spec.nodes_z; ++iz) {
            const double z = gz.nodes[iz];
            double prod = 1.0;
            for (std::size_t j = 0; j < m; ++j) {
                prod *= std_normal_cdf((lambdas[j] * z + shifts[j] + uscales[j] * u) *
                                       inv_s[j]);
                if (prod == 0.0) break;
            }
            acc += gz.weights[iz] * prod;
        }
        return acc;
    };

    double result;
    if (nu > kPointMassNu) {
        result = inner(1.0);  // sigma_hat/sigma degenerates at 1
    } else {
        const ChiScaleDensity gamma{nu};
        const double lo = gamma.quantile(1e-12);
        const double hi = gamma.quantile(1.0 - 1e-12);
        const GaussRule gu = gauss_legendre(spec.nodes_u, lo, hi);
        result = 0.0;
        for (int iu = 0; iu < spec.nodes_u; ++iu)
            result += gu.weights[iu] * gamma(gu.nodes[iu]) * inner(gu.nodes[iu]);
    }
    return std::clamp(result, 0.0, 1.0);
}

double integrate_phi_product(std::span<const double> lambdas,
                             std::span<const double> thresholds, double nu,
                             const QuadratureSpec& spec) {
    const std::vector<double> zeros(lambdas.size(), 0.0);
    return integrate_phi_product_affine(lambdas, zeros, thresholds, nu, spec);
}

// ---------------------------------------------------------------------------
// Monotone root solver: geometric bracket expansion, then bisection with a
// secant step whenever the secant point stays inside the bracket.
// ---------------------------------------------------------------------------

double solve_monotone_root(const std::function<double(double)>& f, double target,
                           double lo, double hi, double tol) {
    if (!(hi > lo)) throw ValidationError("solve_monotone_root: need hi > lo");
    if (!(tol > 0.0)) throw ValidationError("solve_monotone_root: need tol > 0");
    double flo = f(lo), fhi = f(hi);
    for (int i = 0; i < 64 && flo > target; ++i) {
        const double width = hi - lo;
        hi = lo;
        fhi = flo;
        lo -= 2.0 * width;
        flo = f(lo);
    }
    for (int i = 0; i < 64 && fhi < target; ++i) {
        const double width = hi - lo;
        lo = hi;
        flo = fhi;
        hi += 2.0 * width;
        fhi = f(hi);
    }
    if (flo > target || fhi < target)
        throw NumericalError("solve_monotone_root: no root in range");

    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        // Secant proposal, clipped to the open bracket; fallback is bisection.
        double cand = mid;
        if (fhi > flo) {
            cand = lo + (target - flo) * (hi - lo) / (fhi - flo);
            if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
        }
        mid = cand;
        const double fm = f(mid);
        if (std::fabs(fm - target) <= tol) return mid;
        if (fm < target) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
        if (hi - lo <= 1e-15 * std::max(1.0, std::fabs(mid))) return mid;
        mid = 0.5 * (lo + hi);
    }
    return mid;
}

}  // namespace enrt::num
