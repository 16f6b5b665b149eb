#include "wdrcc/gaussian.hpp"

#include <cmath>
#include <limits>

namespace wdrcc {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw std::domain_error(std::string(what) + ": non-finite input");
}

// Rational approximation of the normal quantile (Acklam). Relative error
// below 1.15e-9 everywhere; used only as the seed for Newton polishing.
double quantile_estimate(double p) {
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double q = p - 0.5;
    double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double std_pdf(double z) {
    require_finite(z, "std_pdf");
    return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

double std_cdf(double z) {
    require_finite(z, "std_cdf");
    return 0.5 * std::erfc(-z * kInvSqrt2);
}

double std_quantile(double p) {
    require_finite(p, "std_quantile");
    if (!(p > 0.0) || !(p < 1.0))
        throw std::domain_error("std_quantile: p must lie strictly inside (0,1)");

    double x = quantile_estimate(p);
    // Bracket around the estimate, then polish. The cdf is strictly
    // increasing so expanding the window geometrically must capture p.
    double lo = x - 1e-6, hi = x + 1e-6;
    double w = 1e-6;
    while (std_cdf(lo) > p) { w *= 4.0; lo = x - w; }
    w = 1e-6;
    while (std_cdf(hi) < p) { w *= 4.0; hi = x + w; }
    for (int it = 0; it < 60; ++it) {
        double f = std_cdf(x) - p;
        if (f > 0.0) hi = x; else lo = x;
        double dens = std_pdf(x);
        double step = (dens > 0.0) ? f / dens : 0.0;
        double xn = x - step;
        if (!(xn > lo) || !(xn < hi)) xn = 0.5 * (lo + hi);
        if (std::abs(xn - x) < 1e-15 * (1.0 + std::abs(x)) && std::abs(f) < 1e-14) {
            x = xn;
            break;
        }
        x = xn;
    }
    return x;
}

double cdf_antiderivative(double z) {
    require_finite(z, "cdf_antiderivative");
    // z*Phi(z) underflows gracefully for large negative z: Phi(z) -> 0
    // faster than z grows, so the product tends to zero.
    double v = z * std_cdf(z) + std_pdf(z) - kInvSqrt2Pi;
    return v;
}

}  // namespace wdrcc
