#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace wdrcc {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Bus {
    int id;         // external bus number
    int type;       // 1 load, 2 gen, 3 slack
    double pd_mw;   // active demand
};

struct Generator {
    int bus;        // external bus number
    double pmin_mw;
    double pmax_mw;
    double c2;      // $/MW^2 h
    double c1;      // $/MW h
    double c0;      // $/h
};

struct Branch {
    int from, to;    // external bus numbers
    double x;        // series reactance, p.u.
    double rate_mw;  // thermal limit; 0 means unlimited
};

// An in-service snapshot of a transmission grid: out-of-service rows are
// dropped at parse time, remaining data is validated and connected.
struct Network {
    double base_mva = 0.0;
    std::vector<Bus> buses;
    std::vector<Generator> gens;
    std::vector<Branch> branches;
    int slack_bus = -1;

    int bus_index(int external_id) const;
    double total_load_mw() const;

private:
    friend Network finalize_network(Network net);
    mutable std::unordered_map<int, int> index_;
};

// Parse the MATPOWER case subset: mpc.baseMVA, mpc.bus, mpc.gen,
// mpc.branch, mpc.gencost; '%' comments; polynomial costs of degree at
// most two. Errors carry the offending line number.
Network parse_case(const std::string& text, const std::string& filename = "<case>");
Network parse_case_file(const std::string& path);

// DC power-flow operators, all sized by internal (0-based) bus index.
struct DcOperators {
    Eigen::MatrixXd bbus;   // nodal susceptance matrix B
    Eigen::MatrixXd bpinv;  // Moore-Penrose pseudoinverse of B
    Eigen::MatrixXd ptdf;   // branch flows = ptdf * nodal injections
};

// Build B = A' diag(1/x) A from the incidence matrix, pseudoinvert it
// through an eigendecomposition (the single zero mode is the constant
// vector on a connected grid), and form the flow response.
DcOperators dc_operators(const Network& net);

}  // namespace wdrcc
