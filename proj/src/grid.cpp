#include "wdrcc/grid.hpp"

#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

namespace wdrcc {

namespace {

struct RawRow {
    int line;
    std::vector<double> vals;
};

struct RawCase {
    std::string filename;
    bool has_base = false;
    double base_mva = 0.0;
    std::unordered_map<std::string, std::vector<RawRow>> matrices;
};

[[noreturn]] void fail(const std::string& filename, int line, const std::string& msg) {
    throw ParseError(filename + ":" + std::to_string(line) + ": " + msg);
}

std::string strip(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string& filename, int line, const std::string& tok) {
    try {
        size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) fail(filename, line, "trailing characters in number '" + tok + "'");
        return v;
    } catch (const std::invalid_argument&) {
        fail(filename, line, "expected a number, got '" + tok + "'");
    } catch (const std::out_of_range&) {
        fail(filename, line, "number out of range: '" + tok + "'");
    }
}

void parse_matrix_row(const std::string& filename, int line, const std::string& chunk,
                      std::vector<RawRow>& rows) {
    std::string body = strip(chunk);
    if (body.empty()) return;
    std::istringstream iss(body);
    RawRow row{line, {}};
    std::string tok;
    while (iss >> tok) row.vals.push_back(parse_number(filename, line, tok));
    if (!row.vals.empty()) rows.push_back(std::move(row));
}

RawCase tokenize(const std::string& text, const std::string& filename) {
    RawCase raw;
    raw.filename = filename;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool in_matrix = false;
    std::string current;
    std::vector<RawRow>* rows = nullptr;

    while (std::getline(in, line)) {
        ++lineno;
        size_t cpos = line.find('%');
        if (cpos != std::string::npos) line = line.substr(0, cpos);
        std::string s = strip(line);
        if (s.empty()) continue;

        if (!in_matrix) {
            if (s.rfind("function", 0) == 0) continue;
            if (s.rfind("mpc.", 0) != 0) fail(filename, lineno, "unexpected statement '" + s + "'");
            size_t eq = s.find('=');
            if (eq == std::string::npos) fail(filename, lineno, "missing '=' after field name");
            std::string name = strip(s.substr(4, eq - 4));
            std::string rest = strip(s.substr(eq + 1));
            if (name.empty()) fail(filename, lineno, "empty field name");
            if (!rest.empty() && rest[0] == '[') {
                current = name;
                rows = &raw.matrices[name];  // keep even if already seen: overwrite below
                if (!rows->empty()) fail(filename, lineno, "duplicate matrix '" + name + "'");
                rest = rest.substr(1);
                size_t close = rest.find(']');
                std::string body = (close == std::string::npos) ? rest : rest.substr(0, close);
                std::istringstream rs(body);
                std::string chunk;
                while (std::getline(rs, chunk, ';')) parse_matrix_row(filename, lineno, chunk, *rows);
                if (close == std::string::npos) in_matrix = true;
            } else {
                // Scalar assignment, must end with ';'.
                if (rest.empty() || rest.back() != ';')
                    fail(filename, lineno, "scalar assignment must end with ';'");
                rest = strip(rest.substr(0, rest.size() - 1));
                if (name == "baseMVA") {
                    raw.base_mva = parse_number(filename, lineno, rest);
                    raw.has_base = true;
                } else if (name == "version") {
                    // accepted and ignored (string or number)
                }
            }
        } else {
            size_t close = s.find(']');
            std::string body = (close == std::string::npos) ? s : s.substr(0, close);
            std::istringstream rs(body);
            std::string chunk;
            while (std::getline(rs, chunk, ';')) parse_matrix_row(filename, lineno, chunk, *rows);
            if (close != std::string::npos) in_matrix = false;
        }
    }
    if (in_matrix) fail(filename, lineno, "unterminated matrix '" + current + "'");
    return raw;
}

const std::vector<RawRow>& require_matrix(const RawCase& raw, const std::string& name) {
    auto it = raw.matrices.find(name);
    if (it == raw.matrices.end() || it->second.empty())
        fail(raw.filename, 1, "missing required matrix mpc." + name);
    return it->second;
}

void require_cols(const RawCase& raw, const RawRow& row, size_t n, const std::string& what) {
    if (row.vals.size() < n)
        fail(raw.filename, row.line,
             what + " row needs at least " + std::to_string(n) + " columns, got " +
                 std::to_string(row.vals.size()));
}

}  // namespace

Network finalize_network(Network net) {
    net.index_.clear();
    for (size_t i = 0; i < net.buses.size(); ++i) net.index_[net.buses[i].id] = static_cast<int>(i);
    return net;
}

int Network::bus_index(int external_id) const {
    auto it = index_.find(external_id);
    if (it == index_.end())
        throw std::out_of_range("unknown bus id " + std::to_string(external_id));
    return it->second;
}

double Network::total_load_mw() const {
    double t = 0.0;
    for (const Bus& b : buses) t += b.pd_mw;
    return t;
}

Network parse_case(const std::string& text, const std::string& filename) {
    RawCase raw = tokenize(text, filename);
    if (!raw.has_base) fail(filename, 1, "missing mpc.baseMVA");
    if (!(raw.base_mva > 0.0)) fail(filename, 1, "baseMVA must be positive");

    Network net;
    net.base_mva = raw.base_mva;

    const auto& busrows = require_matrix(raw, "bus");
    std::unordered_map<int, int> seen;
    for (const RawRow& r : busrows) {
        require_cols(raw, r, 13, "bus");
        Bus b;
        b.id = static_cast<int>(r.vals[0]);
        b.type = static_cast<int>(r.vals[1]);
        b.pd_mw = r.vals[2];
        if (b.type < 1 || b.type > 3)
            fail(filename, r.line, "unsupported bus type " + std::to_string(b.type));
        if (seen.count(b.id)) fail(filename, r.line, "duplicate bus id " + std::to_string(b.id));
        seen[b.id] = 1;
        if (b.type == 3) {
            if (net.slack_bus != -1) fail(filename, r.line, "multiple slack buses");
            net.slack_bus = b.id;
        }
        net.buses.push_back(b);
    }
    if (net.slack_bus == -1) fail(filename, busrows.front().line, "no slack bus (type 3)");

    const auto& genrows = require_matrix(raw, "gen");
    const auto& costrows = require_matrix(raw, "gencost");
    if (genrows.size() != costrows.size())
        fail(filename, costrows.front().line,
             "gencost rows (" + std::to_string(costrows.size()) + ") must match gen rows (" +
                 std::to_string(genrows.size()) + ")");

    for (size_t gi = 0; gi < genrows.size(); ++gi) {
        const RawRow& r = genrows[gi];
        require_cols(raw, r, 10, "gen");
        int status = static_cast<int>(r.vals[7]);
        Generator g;
        g.bus = static_cast<int>(r.vals[0]);
        g.pmax_mw = r.vals[8];
        g.pmin_mw = r.vals[9];
        if (!seen.count(g.bus))
            fail(filename, r.line, "generator at unknown bus " + std::to_string(g.bus));
        if (g.pmin_mw > g.pmax_mw) fail(filename, r.line, "generator with pmin > pmax");

        const RawRow& cr = costrows[gi];
        require_cols(raw, cr, 4, "gencost");
        int model = static_cast<int>(cr.vals[0]);
        int ncost = static_cast<int>(cr.vals[3]);
        if (model != 2) fail(filename, cr.line, "only polynomial cost model 2 is supported");
        if (ncost < 1 || ncost > 3)
            fail(filename, cr.line, "polynomial cost must have 1 to 3 coefficients");
        if (cr.vals.size() < static_cast<size_t>(4 + ncost))
            fail(filename, cr.line, "gencost row shorter than its ncost");
        double c2 = 0.0, c1 = 0.0, c0 = 0.0;
        if (ncost == 3) {
            c2 = cr.vals[4];
            c1 = cr.vals[5];
            c0 = cr.vals[6];
        } else if (ncost == 2) {
            c1 = cr.vals[4];
            c0 = cr.vals[5];
        } else {
            c0 = cr.vals[4];
        }
        if (c2 < 0.0) fail(filename, cr.line, "negative quadratic cost coefficient");
        g.c2 = c2;
        g.c1 = c1;
        g.c0 = c0;
        if (status > 0) net.gens.push_back(g);
    }

    const auto& brrows = require_matrix(raw, "branch");
    for (const RawRow& r : brrows) {
        require_cols(raw, r, 11, "branch");
        int status = static_cast<int>(r.vals[10]);
        if (status <= 0) continue;
        Branch br;
        br.from = static_cast<int>(r.vals[0]);
        br.to = static_cast<int>(r.vals[1]);
        br.x = r.vals[3];
        br.rate_mw = r.vals[5];
        if (!seen.count(br.from) || !seen.count(br.to))
            fail(filename, r.line, "branch endpoint references unknown bus");
        if (br.from == br.to) fail(filename, r.line, "branch connects a bus to itself");
        if (br.x == 0.0) fail(filename, r.line, "zero branch reactance is unusable in a DC model");
        if (br.rate_mw < 0.0) fail(filename, r.line, "negative branch rating");
        net.branches.push_back(br);
    }

    net = finalize_network(std::move(net));

    // Connectivity over in-service branches.
    std::vector<std::vector<int>> adj(net.buses.size());
    for (const Branch& br : net.branches) {
        int a = net.bus_index(br.from), b = net.bus_index(br.to);
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<char> vis(net.buses.size(), 0);
    std::queue<int> bfs;
    bfs.push(0);
    vis[0] = 1;
    size_t reached = 1;
    while (!bfs.empty()) {
        int v = bfs.front();
        bfs.pop();
        for (int w : adj[v])
            if (!vis[w]) {
                vis[w] = 1;
                ++reached;
                bfs.push(w);
            }
    }
    if (reached != net.buses.size())
        throw ParseError(filename + ": network is disconnected (" + std::to_string(reached) +
                         " of " + std::to_string(net.buses.size()) + " buses reachable)");
    return net;
}

Network parse_case_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str(), path);
}

DcOperators dc_operators(const Network& net) {
    const int nb = static_cast<int>(net.buses.size());
    const int ne = static_cast<int>(net.branches.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(ne, nb);
    Eigen::VectorXd beta(ne);
    for (int e = 0; e < ne; ++e) {
        const Branch& br = net.branches[e];
        A(e, net.bus_index(br.from)) = 1.0;
        A(e, net.bus_index(br.to)) = -1.0;
        beta[e] = 1.0 / br.x;
    }

    DcOperators ops;
    ops.bbus = A.transpose() * beta.asDiagonal() * A;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ops.bbus);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("dc_operators: eigendecomposition failed");
    const Eigen::VectorXd& ev = eig.eigenvalues();
    double cutoff = 1e-9 * ev.cwiseAbs().maxCoeff();
    int zero_modes = 0;
    Eigen::VectorXd inv(nb);
    for (int i = 0; i < nb; ++i) {
        if (std::abs(ev[i]) <= cutoff) {
            inv[i] = 0.0;
            ++zero_modes;
        } else {
            inv[i] = 1.0 / ev[i];
        }
    }
    if (zero_modes != 1)
        throw std::runtime_error("dc_operators: susceptance matrix has " +
                                 std::to_string(zero_modes) +
                                 " zero modes, expected exactly 1 (connected grid)");
    ops.bpinv = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    ops.ptdf = beta.asDiagonal() * A * ops.bpinv;
    return ops;
}

}  // namespace wdrcc
