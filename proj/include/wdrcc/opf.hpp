#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wdrcc/conic.hpp"
#include "wdrcc/grid.hpp"
#include "wdrcc/levelset.hpp"
#include "wdrcc/solver.hpp"

namespace wdrcc {

// Renewable in-feed site: the forecast enters the nodal balance, the
// forecast errors form the random vector of every chance constraint.
struct WindFarm {
    int bus;  // external bus id
    double forecast_mw;
};

struct WindFleet {
    std::vector<WindFarm> farms;

    void validate(const Network& net) const;
    Eigen::VectorXd forecast_mw() const;
};

// First and second sample moments of a wind-error training set.
struct MomentEstimate {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    CovFactor factor;
    int sample_count = 0;
};

// samples: one draw per row, one wind site per column (fleet order).
// Uses the unbiased covariance; the factor is ridged when singular.
MomentEstimate estimate_moments(const Eigen::MatrixXd& samples);

// Risk and approximation settings of one robust dispatch problem.
struct OpfSettings {
    double eps_gen = 0.05;     // generation band violation budget
    double eps_branch = 0.05;  // flow band violation budget
    double delta = 0.05;       // Wasserstein radius
    int pieces = 7;            // level-curve points per band (odd, >= 3)

    void validate() const;
};

enum class BandKind { generator, branch };

// One emitted robust band and where its rows live in the program.
struct BandRef {
    BandKind kind;
    int element;  // index into Network::gens or Network::branches
    DrccHandle handle;
};

// Assembled dispatch instance plus the bookkeeping needed to interpret
// a raw solver point. Variable layout: pbar block, alpha block (robust
// model only), theta block, then one scale auxiliary per band.
struct OpfModel {
    ConicProgram program;
    int num_gens = 0;
    int num_buses = 0;
    int num_farms = 0;
    int pbar0 = 0;
    int alpha0 = -1;  // -1 when the model has no recourse
    int theta0 = 0;
    std::vector<BandRef> bands;
};

// Robust dispatch with affine recourse pg - alpha_g * (total error):
// quadratic generation cost, participation factors summing to one, DC
// power balance with the slack angle fixed, and a two-sided robust
// band per generator and per rated branch. Generator bands use
// gen_poly, flow bands use branch_poly (pass the same polyline when
// the two violation budgets coincide).
OpfModel assemble(const Network& net, const DcOperators& ops, const WindFleet& fleet,
                  const MomentEstimate& moments, const OpfSettings& cfg,
                  const LevelPolyline& gen_poly, const LevelPolyline& branch_poly);

// Same dispatch problem with the uncertainty removed: no recourse, hard
// generation and flow limits at the forecast injection.
OpfModel assemble_deterministic(const Network& net, const DcOperators& ops,
                                const WindFleet& fleet);

// Decoded solver point.
struct Dispatch {
    SolveStatus status = SolveStatus::max_iter;
    double objective = 0.0;
    Eigen::VectorXd pbar_mw;
    Eigen::VectorXd alpha;
    Eigen::VectorXd theta;
    std::vector<double> scale;  // band scale s, aligned with OpfModel::bands
    KktResiduals residuals{};
    int iterations = 0;
};

Dispatch extract_dispatch(const OpfModel& model, const Solution& sol);

// One band at a fixed operating point: the requirement on a realized
// error vector xi reads  lo <= coef' xi <= hi.
struct BandGeometry {
    BandKind kind;
    int element;  // index into Network::gens or Network::branches
    Eigen::VectorXd coef;
    double lo = 0.0;
    double hi = 0.0;
};

// Bands of the dispatch in emission order (generators, then rated
// branches). An empty alpha means no recourse; coefficients are then
// purely the network response.
std::vector<BandGeometry> band_geometry(const Network& net, const DcOperators& ops,
                                        const WindFleet& fleet, const Dispatch& d);

}  // namespace wdrcc
