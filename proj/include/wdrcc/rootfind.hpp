#pragma once

#include <functional>
#include <stdexcept>

namespace wdrcc {

// Raised when a root is requested outside the function's range.
struct NoRootError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when bracket expansion fails to enclose a sign change.
struct BracketError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Brent's method on [a,b] with f(a), f(b) of opposite sign (or zero).
// Stops when |f| <= f_tol or the bracket collapses. Throws BracketError
// if the input does not bracket a sign change.
double brent_root(const std::function<double(double)>& f, double a, double b,
                  double f_tol = 1e-10, int max_iter = 200);

// Golden-section maximization of f on [a,b]. Returns the maximal value
// found; assumes f is continuous (unimodality makes the result exact).
double golden_max(const std::function<double(double)>& f, double a, double b,
                  double x_tol = 1e-10, int max_iter = 200);

// Recursive adaptive Simpson integration of f over [a,b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-9, int max_depth = 60);

}  // namespace wdrcc
