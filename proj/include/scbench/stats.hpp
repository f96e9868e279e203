#pragma once

#include <cstddef>
#include <span>

namespace scbench {

/// Regularized incomplete beta function I_x(a, b) for a, b > 0 and x in [0, 1].
///
/// Evaluated with the modified Lentz continued fraction, switching to
/// 1 - I_{1-x}(b, a) when x > (a + 1) / (a + b + 2). Throws NumericalError if
/// the fraction has not converged to 1e-15 after 300 iterations.
double incomplete_beta(double a, double b, double x);

/// Same as incomplete_beta() but takes x and 1 - x separately, so callers that
/// know the complement exactly avoid the cancellation in 1 - x.
double incomplete_beta(double a, double b, double x, double one_minus_x);

/// P(T > t) for a Student-t variable with `dof` degrees of freedom, t >= 0.
double student_t_sf(double t, double dof);

struct TestResult {
    double t_stat = 0.0;
    double dof = 1.0;
    double p_value = 1.0; // two-sided
};

/// Summary statistics of one sample: size, mean and (n - 1) variance.
struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;
};

/// Two-pass mean and sample variance.
Moments moments(std::span<const double> values);

/// Welch's unequal-variance t-test from precomputed moments (each n >= 2).
///
/// Degenerate groups: when both variances are zero the result is t = 0, p = 1
/// for equal means and t = +-inf, p = 0 otherwise, with dof = n_a + n_b - 2.
TestResult welch_from_moments(const Moments &a, const Moments &b);

/// Welch's t-test of `a` against `b`. Throws InvalidArgument when either group
/// has fewer than two values.
TestResult welch_t(std::span<const double> a, std::span<const double> b);

} // namespace scbench
