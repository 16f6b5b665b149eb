#pragma once

#include <Eigen/Dense>

#include "wdrcc/conic.hpp"

namespace wdrcc {

enum class SolveStatus { optimal, infeasible, unbounded, max_iter };

const char* to_string(SolveStatus s);

struct SolverOptions {
    double tol = 1e-8;    // feasibility and duality-gap target
    // Accepted at loop exit when the strict target was never met: the
    // best iterate seen still counts as optimal below this level. The
    // reduced KKT system squares the cone-scaling condition number, so
    // late iterates hit a residual floor near sqrt(eps) regardless of
    // refinement, and the floor grows with the cone aspect ratio (wide
    // two-sided bands push it past 1e-6). Multiplier refits cannot fix
    // it: the leftover lies along low-curvature feasible directions of
    // x. 1e-5 still sits an order under the inaccurate-but-accepted
    // bands of the common conic solvers; residuals are reported as
    // measured either way.
    double tol_soft = 1e-5;
    int max_iter = 100;
    bool verbose = false;
};

struct KktResiduals {
    double primal;
    double dual;
    double gap;  // relative duality gap
};

struct Solution {
    SolveStatus status;
    Eigen::VectorXd x;
    double objective;
    KktResiduals residuals;
    int iterations;
};

// Primal-dual interior-point solve of a ConicProgram. Pure function of
// its inputs: no globals, safe to call concurrently. Infeasibility and
// unboundedness are reported from diverging-iterate certificates and
// are heuristics, not proofs.
Solution solve(const ConicProgram& prog, const SolverOptions& opts = {});

}  // namespace wdrcc
