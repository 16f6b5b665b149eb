#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wdrcc/levelset.hpp"

namespace wdrcc {

// Scalar affine expression over program variables:
// sum_k terms[k].second * x[terms[k].first] + constant.
struct AffineExpr {
    std::vector<std::pair<int, double>> terms;
    double constant = 0.0;

    static AffineExpr var(int index, double coeff = 1.0) {
        AffineExpr e;
        e.terms.emplace_back(index, coeff);
        return e;
    }
    static AffineExpr lit(double c) {
        AffineExpr e;
        e.constant = c;
        return e;
    }
    // Merge duplicate indices and drop exact zeros.
    void compress();
};

AffineExpr operator+(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a, const AffineExpr& b);
AffineExpr operator*(double c, AffineExpr a);
AffineExpr operator+(AffineExpr a, double c);
AffineExpr operator-(AffineExpr a, double c);
AffineExpr operator+(double c, AffineExpr a);
AffineExpr operator-(double c, const AffineExpr& a);

// Second-order cone block: |vec(x)|_2 <= scalar(x).
struct SocBlock {
    std::vector<AffineExpr> vec;
    AffineExpr scalar;
};

// Convex quadratic conic program in inequality normal form:
//   minimize    sum_q w_ij x_i x_j + sum_l w_i x_i + const
//   subject to  eq_k(x) == 0,  ineq_k(x) <= 0,  soc blocks.
class ConicProgram {
public:
    int add_variable(std::string name = "");
    int num_variables() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }

    void add_linear_cost(int var, double w);
    void add_quadratic_cost(int var, double w) { add_quadratic_cost(var, var, w); }
    void add_quadratic_cost(int i, int j, double w);
    void add_constant_cost(double c) { obj_const_ += c; }

    void add_equality(AffineExpr e);
    void add_inequality(AffineExpr e);
    void add_soc(SocBlock block);

    const std::vector<AffineExpr>& equalities() const { return eq_; }
    const std::vector<AffineExpr>& inequalities() const { return ineq_; }
    const std::vector<SocBlock>& socs() const { return socs_; }
    const std::vector<std::tuple<int, int, double>>& quadratic_terms() const { return quad_; }
    const std::vector<std::pair<int, double>>& linear_terms() const { return lin_; }
    double constant_cost() const { return obj_const_; }

    // Objective value at a given point.
    double objective_at(const Eigen::VectorXd& x) const;

    std::string to_json() const;
    static ConicProgram from_json(const std::string& text);

private:
    void check_var(int v) const;
    void check_expr(const AffineExpr& e) const;

    std::vector<std::string> names_;
    std::vector<std::tuple<int, int, double>> quad_;
    std::vector<std::pair<int, double>> lin_;
    double obj_const_ = 0.0;
    std::vector<AffineExpr> eq_;
    std::vector<AffineExpr> ineq_;
    std::vector<SocBlock> socs_;
};

// Rows registered for one robust two-sided chance constraint.
struct DrccHandle {
    int scale_var;    // auxiliary s >= |L' x|
    int soc_index;    // index into socs()
    int first_ineq;   // first of num_ineq consecutive inequality rows
    int num_ineq;
};

// Emit the lifted inner approximation of
//   inf_{Q in Wasserstein ball} Q(ell <= x'xi <= u) >= 1 - eps
// for xi with mean mu, covariance factor L: an auxiliary scale variable
// s with |L' row_x|_2 <= s plus the polyline membership rows scaled by
// s (denominators cleared, all rows written as <= 0).
DrccHandle add_two_sided_drcc(ConicProgram& prog, const std::vector<AffineExpr>& row_x,
                              const AffineExpr& ell, const AffineExpr& u,
                              const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma_factor,
                              const LevelPolyline& poly);

struct CovFactor {
    Eigen::MatrixXd L;  // lower triangular, Sigma ~= L L'
    bool ridged;        // true if a diagonal ridge was needed
};

// Cholesky factor of a symmetric PSD matrix; adds an escalating ridge
// proportional to trace/n when the strict factorization fails.
CovFactor factor_covariance(const Eigen::MatrixXd& sigma, double ridge = 1e-8);

}  // namespace wdrcc
