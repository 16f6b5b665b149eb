#pragma once

#include <stdexcept>

namespace wdrcc {

// Shared numeric tolerances. root_tol bounds residuals of scalar root
// finds, abs_tol is the floor for set-membership comparisons, quad_tol
// is the target for adaptive quadrature used in validation paths.
struct Tolerances {
    double abs_tol = 1e-12;
    double root_tol = 1e-10;
    double quad_tol = 1e-9;

    void validate() const {
        if (!(abs_tol > 0.0) || !(root_tol > 0.0) || !(quad_tol > 0.0))
            throw std::invalid_argument("Tolerances: all fields must be positive");
        if (root_tol < abs_tol)
            throw std::invalid_argument("Tolerances: root_tol must be >= abs_tol");
    }
};

// Standard normal pdf phi(z).
double std_pdf(double z);

// Standard normal cdf Phi(z), evaluated through erfc so both tails keep
// full relative accuracy. Throws std::domain_error on non-finite input.
double std_cdf(double z);

// Inverse cdf. Rational initial estimate polished by safeguarded Newton
// steps that stay inside a verified bracket. Requires p in (0,1).
double std_quantile(double p);

// Antiderivative of the cdf, normalized to vanish at zero:
//   I0(z) = integral_0^z Phi(t) dt = z*Phi(z) + phi(z) - phi(0).
double cdf_antiderivative(double z);

}  // namespace wdrcc
