#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

// Small special-function toolbox shared by the likelihood kernels and the
// chi-square machinery. Everything here is deterministic scalar math.

namespace gmlemix {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(n!) with a cached table for the small integers that dominate count data.
inline double log_factorial(int n) {
    if (n < 0) throw std::domain_error("log_factorial: negative argument");
    static const std::vector<double> table = [] {
        std::vector<double> t(256);
        t[0] = 0.0;
        for (std::size_t i = 1; i < t.size(); ++i) t[i] = t[i - 1] + std::log(double(i));
        return t;
    }();
    if (std::size_t(n) < table.size()) return table[std::size_t(n)];
    return std::lgamma(double(n) + 1.0);
}

// log C(n, k); -inf outside the support.
inline double log_choose(int n, int k) {
    if (k < 0 || k > n) return kNegInf;
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// Regularized lower incomplete gamma P(a, x). Series expansion for x < a+1,
// Lentz continued fraction for the upper tail otherwise.
inline double lower_regularized_gamma(double a, double x) {
    if (a <= 0.0) throw std::domain_error("lower_regularized_gamma: a must be positive");
    if (x < 0.0) throw std::domain_error("lower_regularized_gamma: x must be nonnegative");
    if (x == 0.0) return 0.0;

    const double log_prefactor = a * std::log(x) - x - std::lgamma(a);

    if (x < a + 1.0) {
        double ap = a;
        double del = 1.0 / a;
        double sum = del;
        for (int i = 0; i < 1000; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-17) break;
        }
        return sum * std::exp(log_prefactor);
    }

    // Continued fraction for Q(a, x); P = 1 - Q.
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 1000; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-17) break;
    }
    return 1.0 - h * std::exp(log_prefactor);
}

// Standard normal quantile: Acklam's rational approximation polished with two
// Newton steps on erfc, giving close to full double precision.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0,1)");

    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};

    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    for (int i = 0; i < 2; ++i) {
        const double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        if (pdf <= 0.0) break;
        x -= (cdf - p) / pdf;
    }
    return x;
}

}  // namespace gmlemix
