#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "wdrcc/opf.hpp"

namespace wdrcc {

// PCG32 (XSH RR 64/32). Chosen for its cheap, independent streams: one
// per (site, block) pair, so draws never depend on how work is split
// across threads or runs of different length.
class Pcg32 {
  public:
    Pcg32(std::uint64_t seed, std::uint64_t stream);
    std::uint32_t next();
    // Uniform on the open interval (0,1) at 32-bit resolution; never
    // returns an endpoint, so -log(u) and quantiles stay finite.
    double next_unit();

  private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

// Draws are produced in blocks of this many rows; extending a sample
// matrix leaves all earlier rows bit-identical.
inline constexpr int kSampleBlock = 4096;

// Error distribution of one wind site, in megawatts. Draws are centered
// by the analytic mean, so sampled errors are exactly zero-mean in
// expectation regardless of family.
struct Marginal {
    enum class Family { weibull, gaussian };
    Family family = Family::weibull;
    double a = 1.0;  // weibull: shape k      gaussian: mean
    double b = 1.0;  // weibull: scale lambda gaussian: std

    static Marginal weibull(double shape, double scale);
    static Marginal gaussian(double mean, double std);

    void validate() const;
    double analytic_mean() const;
    // Inverse cdf at u in (0,1), before centering.
    double quantile(double u) const;
};

struct TruthModel {
    std::vector<Marginal> sites;  // aligned with the wind fleet order

    void validate() const;
};

// n centered draws, one row per draw and one column per site.
// Deterministic in (model, seed); column j depends only on sites[j]
// and j, so editing one site leaves the other columns unchanged.
Eigen::MatrixXd sample(const TruthModel& model, int n, std::uint64_t seed);

struct OosResult {
    double satisfaction = 0.0;  // fraction of rows satisfying every band
    Eigen::VectorXd per_band;   // per-band fractions, band_geometry order
    int sample_count = 0;
};

// Out-of-sample check of a fixed dispatch: for each sample row xi the
// joint event is lo <= coef' xi <= hi across all generator and rated
// branch bands. Exact counting, so the result is independent of any
// block decomposition of the rows.
OosResult oos_satisfaction(const Dispatch& d, const Network& net, const DcOperators& ops,
                           const WindFleet& fleet, const Eigen::MatrixXd& samples);

}  // namespace wdrcc
