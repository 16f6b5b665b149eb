#include "wdrcc/conic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace wdrcc {

void AffineExpr::compress() {
    std::map<int, double> acc;
    for (const auto& [i, w] : terms) acc[i] += w;
    terms.clear();
    for (const auto& [i, w] : acc)
        if (w != 0.0) terms.emplace_back(i, w);
}

AffineExpr operator+(AffineExpr a, const AffineExpr& b) {
    a.terms.insert(a.terms.end(), b.terms.begin(), b.terms.end());
    a.constant += b.constant;
    a.compress();
    return a;
}

AffineExpr operator-(AffineExpr a, const AffineExpr& b) {
    for (const auto& [i, w] : b.terms) a.terms.emplace_back(i, -w);
    a.constant -= b.constant;
    a.compress();
    return a;
}

AffineExpr operator*(double c, AffineExpr a) {
    for (auto& [i, w] : a.terms) w *= c;
    a.constant *= c;
    return a;
}

AffineExpr operator+(AffineExpr a, double c) {
    a.constant += c;
    return a;
}

AffineExpr operator-(AffineExpr a, double c) {
    a.constant -= c;
    return a;
}

AffineExpr operator+(double c, AffineExpr a) {
    a.constant += c;
    return a;
}

AffineExpr operator-(double c, const AffineExpr& a) {
    return AffineExpr::lit(c) - a;
}

int ConicProgram::add_variable(std::string name) {
    if (name.empty()) name = "x" + std::to_string(names_.size());
    names_.push_back(std::move(name));
    return static_cast<int>(names_.size()) - 1;
}

void ConicProgram::check_var(int v) const {
    if (v < 0 || v >= num_variables())
        throw std::out_of_range("ConicProgram: variable index out of range");
}

void ConicProgram::check_expr(const AffineExpr& e) const {
    for (const auto& [i, w] : e.terms) {
        check_var(i);
        if (!std::isfinite(w)) throw std::invalid_argument("ConicProgram: non-finite coefficient");
    }
    if (!std::isfinite(e.constant))
        throw std::invalid_argument("ConicProgram: non-finite constant");
}

void ConicProgram::add_linear_cost(int var, double w) {
    check_var(var);
    if (!std::isfinite(w)) throw std::invalid_argument("ConicProgram: non-finite cost");
    lin_.emplace_back(var, w);
}

void ConicProgram::add_quadratic_cost(int i, int j, double w) {
    check_var(i);
    check_var(j);
    if (!std::isfinite(w)) throw std::invalid_argument("ConicProgram: non-finite cost");
    quad_.emplace_back(i, j, w);
}

void ConicProgram::add_equality(AffineExpr e) {
    check_expr(e);
    e.compress();
    eq_.push_back(std::move(e));
}

void ConicProgram::add_inequality(AffineExpr e) {
    check_expr(e);
    e.compress();
    ineq_.push_back(std::move(e));
}

void ConicProgram::add_soc(SocBlock block) {
    if (block.vec.empty()) throw std::invalid_argument("ConicProgram: empty cone vector");
    check_expr(block.scalar);
    block.scalar.compress();
    for (auto& row : block.vec) {
        check_expr(row);
        row.compress();
    }
    socs_.push_back(std::move(block));
}

double ConicProgram::objective_at(const Eigen::VectorXd& x) const {
    if (x.size() != num_variables())
        throw std::invalid_argument("objective_at: dimension mismatch");
    double v = obj_const_;
    for (const auto& [i, w] : lin_) v += w * x[i];
    for (const auto& [i, j, w] : quad_) v += w * x[i] * x[j];
    return v;
}

namespace {

nlohmann::json expr_to_json(const AffineExpr& e) {
    nlohmann::json j;
    auto terms = nlohmann::json::array();
    for (const auto& [i, w] : e.terms) terms.push_back({i, w});
    j["terms"] = terms;
    j["constant"] = e.constant;
    return j;
}

AffineExpr expr_from_json(const nlohmann::json& j) {
    AffineExpr e;
    for (const auto& t : j.at("terms")) {
        if (!t.is_array() || t.size() != 2)
            throw std::invalid_argument("ConicProgram: malformed term");
        e.terms.emplace_back(t[0].get<int>(), t[1].get<double>());
    }
    e.constant = j.at("constant").get<double>();
    return e;
}

}  // namespace

std::string ConicProgram::to_json() const {
    nlohmann::json j;
    j["schema"] = "conic-program/1";
    j["num_vars"] = num_variables();
    j["var_names"] = names_;
    auto quad = nlohmann::json::array();
    for (const auto& [a, b, w] : quad_) quad.push_back({a, b, w});
    auto lin = nlohmann::json::array();
    for (const auto& [a, w] : lin_) lin.push_back({a, w});
    j["objective"] = {{"quadratic", quad}, {"linear", lin}, {"constant", obj_const_}};
    auto eq = nlohmann::json::array();
    for (const auto& e : eq_) eq.push_back(expr_to_json(e));
    j["equalities"] = eq;
    auto ineq = nlohmann::json::array();
    for (const auto& e : ineq_) ineq.push_back(expr_to_json(e));
    j["inequalities"] = ineq;
    auto socs = nlohmann::json::array();
    for (const auto& s : socs_) {
        nlohmann::json b;
        auto vec = nlohmann::json::array();
        for (const auto& r : s.vec) vec.push_back(expr_to_json(r));
        b["vector"] = vec;
        b["scalar"] = expr_to_json(s.scalar);
        socs.push_back(b);
    }
    j["soc"] = socs;
    return j.dump(2);
}

ConicProgram ConicProgram::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ConicProgram prog;
    int n = j.at("num_vars").get<int>();
    auto names = j.value("var_names", std::vector<std::string>{});
    for (int i = 0; i < n; ++i)
        prog.add_variable(i < static_cast<int>(names.size()) ? names[i] : "");
    const auto& obj = j.at("objective");
    for (const auto& t : obj.at("quadratic"))
        prog.add_quadratic_cost(t[0].get<int>(), t[1].get<int>(), t[2].get<double>());
    for (const auto& t : obj.at("linear"))
        prog.add_linear_cost(t[0].get<int>(), t[1].get<double>());
    prog.add_constant_cost(obj.value("constant", 0.0));
    for (const auto& e : j.at("equalities")) prog.add_equality(expr_from_json(e));
    for (const auto& e : j.at("inequalities")) prog.add_inequality(expr_from_json(e));
    for (const auto& b : j.at("soc")) {
        SocBlock block;
        for (const auto& r : b.at("vector")) block.vec.push_back(expr_from_json(r));
        block.scalar = expr_from_json(b.at("scalar"));
        prog.add_soc(std::move(block));
    }
    return prog;
}

DrccHandle add_two_sided_drcc(ConicProgram& prog, const std::vector<AffineExpr>& row_x,
                              const AffineExpr& ell, const AffineExpr& u,
                              const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma_factor,
                              const LevelPolyline& poly) {
    const auto& pts = poly.points;
    poly.validate();
    int dim = static_cast<int>(row_x.size());
    if (dim == 0) throw std::invalid_argument("add_two_sided_drcc: empty row");
    if (mu.size() != dim || sigma_factor.rows() != dim || sigma_factor.cols() != dim)
        throw std::invalid_argument("add_two_sided_drcc: dimension mismatch");

    DrccHandle h;
    h.scale_var = prog.add_variable("drcc_s" + std::to_string(prog.socs().size()));

    // |L' row_x|_2 <= s.
    SocBlock cone;
    cone.scalar = AffineExpr::var(h.scale_var);
    cone.vec.reserve(dim);
    for (int k = 0; k < dim; ++k) {
        AffineExpr r;
        for (int jj = 0; jj < dim; ++jj) {
            double w = sigma_factor(jj, k);
            if (w != 0.0) r = r + w * row_x[jj];
        }
        cone.vec.push_back(std::move(r));
    }
    h.soc_index = static_cast<int>(prog.socs().size());
    prog.add_soc(std::move(cone));

    // Centered band endpoints.
    AffineExpr shift;
    for (int k = 0; k < dim; ++k)
        if (mu[k] != 0.0) shift = shift + mu[k] * row_x[k];
    AffineExpr lc = ell - shift;
    AffineExpr uc = u - shift;

    h.first_ineq = static_cast<int>(prog.inequalities().size());
    AffineExpr s = AffineExpr::var(h.scale_var);
    int n = static_cast<int>(pts.size());
    prog.add_inequality(lc - pts.front().ell * s);
    prog.add_inequality(pts.back().u * s - uc);
    for (int i = 0; i + 1 < n; ++i) {
        double dl = pts[i].ell - pts[i + 1].ell;
        double du = pts[i].u - pts[i + 1].u;
        prog.add_inequality(du * (lc - pts[i].ell * s) - dl * (uc - pts[i].u * s));
    }
    h.num_ineq = n + 1;
    return h;
}

CovFactor factor_covariance(const Eigen::MatrixXd& sigma, double ridge) {
    if (sigma.rows() != sigma.cols())
        throw std::invalid_argument("factor_covariance: matrix must be square");
    double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw std::invalid_argument("factor_covariance: matrix must be symmetric");

    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() == Eigen::Success)
        return CovFactor{Eigen::MatrixXd(llt.matrixL()), false};

    // The ridge repairs rounding-level indefiniteness only; it is capped
    // well below the matrix scale so genuinely indefinite inputs fail.
    double base = sigma.trace() / sigma.rows();
    if (!(base > 0.0)) base = 1.0;
    Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols());
    for (double lam = ridge * base; lam <= 1e-4 * std::max(base, scale); lam *= 10.0) {
        Eigen::LLT<Eigen::MatrixXd> retry(sigma + lam * eye);
        if (retry.info() == Eigen::Success)
            return CovFactor{Eigen::MatrixXd(retry.matrixL()), true};
    }
    throw std::runtime_error("factor_covariance: matrix is not positive semidefinite");
}

}  // namespace wdrcc
