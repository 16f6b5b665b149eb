#include "wdrcc/stochastics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "wdrcc/gaussian.hpp"

namespace wdrcc {

namespace {

constexpr std::uint64_t kPcgMul = 6364136223846793005ULL;

// Stream id of one (site, block) pair. Sites own the high word, so a
// site's stream never collides with another's for any block count.
std::uint64_t substream(int site, int block) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(site)) << 32) |
           static_cast<std::uint32_t>(block);
}

}  // namespace

Pcg32::Pcg32(std::uint64_t seed, std::uint64_t stream) {
    state_ = 0;
    inc_ = (stream << 1u) | 1u;
    next();
    state_ += seed;
    next();
}

std::uint32_t Pcg32::next() {
    std::uint64_t old = state_;
    state_ = old * kPcgMul + inc_;
    auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

double Pcg32::next_unit() { return (static_cast<double>(next()) + 0.5) * 0x1p-32; }

Marginal Marginal::weibull(double shape, double scale) {
    return {Family::weibull, shape, scale};
}

Marginal Marginal::gaussian(double mean, double std) {
    return {Family::gaussian, mean, std};
}

void Marginal::validate() const {
    if (family == Family::weibull) {
        if (!(a > 0.0) || !(b > 0.0))
            throw std::invalid_argument("weibull shape and scale must be positive");
    } else {
        if (!std::isfinite(a) || !(b > 0.0))
            throw std::invalid_argument("gaussian needs a finite mean and positive std");
    }
}

double Marginal::analytic_mean() const {
    if (family == Family::weibull) return b * std::tgamma(1.0 + 1.0 / a);
    return a;
}

double Marginal::quantile(double u) const {
    if (family == Family::weibull) return b * std::pow(-std::log(u), 1.0 / a);
    return a + b * std_quantile(u);
}

void TruthModel::validate() const {
    if (sites.empty()) throw std::invalid_argument("truth model has no sites");
    for (const Marginal& m : sites) m.validate();
}

Eigen::MatrixXd sample(const TruthModel& model, int n, std::uint64_t seed) {
    model.validate();
    if (n < 1) throw std::invalid_argument("sample count must be at least 1");
    const int d = static_cast<int>(model.sites.size());
    Eigen::MatrixXd out(n, d);
    for (int j = 0; j < d; ++j) {
        const Marginal& m = model.sites[static_cast<size_t>(j)];
        const double center = m.analytic_mean();
        for (int r0 = 0; r0 < n; r0 += kSampleBlock) {
            Pcg32 rng(seed, substream(j, r0 / kSampleBlock));
            const int rows = std::min(kSampleBlock, n - r0);
            for (int r = 0; r < rows; ++r)
                out(r0 + r, j) = m.quantile(rng.next_unit()) - center;
        }
    }
    return out;
}

OosResult oos_satisfaction(const Dispatch& d, const Network& net, const DcOperators& ops,
                           const WindFleet& fleet, const Eigen::MatrixXd& samples) {
    const int n = static_cast<int>(samples.rows());
    if (n < 1) throw std::invalid_argument("out-of-sample check needs at least 1 row");
    if (samples.cols() != static_cast<int>(fleet.farms.size()))
        throw std::invalid_argument("sample columns must match the wind fleet");

    std::vector<BandGeometry> bands = band_geometry(net, ops, fleet, d);
    const int nbands = static_cast<int>(bands.size());

    OosResult res;
    res.sample_count = n;
    res.per_band = Eigen::VectorXd::Zero(nbands);
    if (nbands == 0) {
        res.satisfaction = 1.0;
        return res;
    }

    Eigen::MatrixXd coef(samples.cols(), nbands);
    Eigen::VectorXd lo(nbands), hi(nbands);
    for (int k = 0; k < nbands; ++k) {
        coef.col(k) = bands[static_cast<size_t>(k)].coef;
        lo[k] = bands[static_cast<size_t>(k)].lo;
        hi[k] = bands[static_cast<size_t>(k)].hi;
    }

    // v(r, k) = band k's realized value on sample r; exact integer
    // counting keeps the result independent of row ordering.
    Eigen::MatrixXd v = samples * coef;
    Eigen::VectorXi band_ok = Eigen::VectorXi::Zero(nbands);
    int joint_ok = 0;
    for (int r = 0; r < n; ++r) {
        bool all_ok = true;
        for (int k = 0; k < nbands; ++k) {
            bool ok = v(r, k) >= lo[k] && v(r, k) <= hi[k];
            band_ok[k] += ok ? 1 : 0;
            all_ok = all_ok && ok;
        }
        joint_ok += all_ok ? 1 : 0;
    }
    res.satisfaction = static_cast<double>(joint_ok) / n;
    res.per_band = band_ok.cast<double>() / n;
    return res;
}

}  // namespace wdrcc
