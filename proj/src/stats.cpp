#include "scbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scbench/error.hpp"

namespace scbench {
namespace {

constexpr int kMaxIterations = 300;
constexpr double kEpsilon = 1e-15;
constexpr double kTiny = 1e-300;

// Continued fraction for I_x(a, b), modified Lentz.
double beta_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEpsilon) return h;
    }
    throw NumericalError("incomplete beta continued fraction did not converge (a=" + std::to_string(a) +
                         ", b=" + std::to_string(b) + ", x=" + std::to_string(x) + ")");
}

} // namespace

double incomplete_beta(double a, double b, double x, double one_minus_x) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
        throw InvalidArgument("incomplete_beta needs finite a, b > 0");
    if (!(x >= 0.0 && x <= 1.0) || !(one_minus_x >= 0.0 && one_minus_x <= 1.0))
        throw InvalidArgument("incomplete_beta needs x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (one_minus_x == 0.0) return 1.0;
    const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(a * std::log(x) + b * std::log(one_minus_x) - log_beta);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
    return 1.0 - front * beta_fraction(b, a, one_minus_x) / b;
}

double incomplete_beta(double a, double b, double x) { return incomplete_beta(a, b, x, 1.0 - x); }

double student_t_sf(double t, double dof) {
    if (!std::isfinite(t) || !std::isfinite(dof)) throw NumericalError("student_t_sf needs finite t and dof");
    if (!(dof > 0.0)) throw InvalidArgument("student_t_sf needs dof > 0");
    if (t < 0.0) return 1.0 - student_t_sf(-t, dof);
    const double t2 = t * t;
    const double x = dof / (dof + t2);
    const double one_minus_x = t2 / (dof + t2);
    return 0.5 * incomplete_beta(0.5 * dof, 0.5, x, one_minus_x);
}

Moments moments(std::span<const double> values) {
    Moments m;
    m.n = values.size();
    if (m.n == 0) return m;
    double sum = 0.0;
    for (double v : values) sum += v;
    m.mean = sum / static_cast<double>(m.n);
    if (m.n < 2) return m;
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.variance = ss / static_cast<double>(m.n - 1);
    return m;
}

TestResult welch_from_moments(const Moments &a, const Moments &b) {
    if (a.n < 2 || b.n < 2) throw InvalidArgument("Welch's t-test needs at least two values per group");
    const double na = static_cast<double>(a.n);
    const double nb = static_cast<double>(b.n);
    const double va = a.variance / na;
    const double vb = b.variance / nb;
    const double se2 = va + vb;
    TestResult r;
    if (se2 == 0.0) {
        r.dof = na + nb - 2.0;
        if (a.mean == b.mean) {
            r.t_stat = 0.0;
            r.p_value = 1.0;
        } else {
            r.t_stat = a.mean > b.mean ? std::numeric_limits<double>::infinity()
                                       : -std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
        return r;
    }
    r.t_stat = (a.mean - b.mean) / std::sqrt(se2);
    r.dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    if (!std::isfinite(r.dof)) r.dof = na + nb - 2.0; // squared variances underflowed
    r.p_value = std::clamp(2.0 * student_t_sf(std::fabs(r.t_stat), r.dof), 0.0, 1.0);
    return r;
}

TestResult welch_t(std::span<const double> a, std::span<const double> b) {
    return welch_from_moments(moments(a), moments(b));
}

} // namespace scbench
