#pragma once

#include "sepinv/linalg.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace sepinv {

/// One linear subsystem x_i(t+1) = A_ii x_i + Σ A_ij x_j + B_i u_i + E_i d_i
/// with polytopic input, disturbance and state constraints.
struct Subsystem {
    int index = 0; ///< 1-based
    Mat A;         ///< A_ii, n_i × n_i
    Mat B;         ///< n_i × m_i
    Mat E;         ///< n_i × p_i (p_i = 0 when undisturbed)
    Mat H_u;
    Vec h_u;
    Mat H_d; ///< p_i × p_i, nonsingular; empty when p_i = 0
    Mat H_s;
    Vec h_s;
    Mat Z; ///< N_x_i × n_i, rank n_i

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index m() const { return B.cols(); }
    Eigen::Index p() const { return E.cols(); }
    Eigen::Index Nx() const { return Z.rows(); }
    Eigen::Index Nu() const { return H_u.rows(); }
    Eigen::Index Ns() const { return H_s.rows(); }
    bool disturbed() const { return p() > 0; }
};

struct Coupling {
    int i = 0; ///< 1-based receiving subsystem
    int j = 0; ///< 1-based source subsystem
    Mat A;     ///< n_i × n_j
};

struct SystemModel {
    std::vector<Subsystem> subsystems;
    std::vector<Coupling> couplings;
    std::set<std::pair<int, int>> k_pattern; ///< 1-based (i, j); always holds (i, i)

    int d() const { return static_cast<int>(subsystems.size()); }
};

/// Per-subsystem index ranges inside the composed matrices (0-based).
struct BlockRange {
    Eigen::Index x = 0, n = 0;   ///< state columns
    Eigen::Index u = 0, m = 0;   ///< input columns
    Eigen::Index d = 0, p = 0;   ///< disturbance columns
    Eigen::Index zr = 0, Nx = 0; ///< rows of Z
    Eigen::Index ur = 0, Nu = 0; ///< rows of H_u
    Eigen::Index sr = 0, Ns = 0; ///< rows of H_s
};

/// The block-composed global system.
struct ComposedSystem {
    Eigen::Index n = 0, m = 0, p = 0, Nx = 0, Nu = 0, Ns = 0;
    Mat A, B, E, Z, H_u, H_d, H_s;
    Vec h_u, h_s;
    std::vector<BlockRange> blocks;
    std::vector<int> row_owner_; ///< 0-based subsystem for each 0-based Z row
    std::set<std::pair<int, int>> k_pattern;

    int d() const { return static_cast<int>(blocks.size()); }
    bool disturbed() const { return p > 0; }

    /// 1-based owner of the 1-based global Z row j.
    int row_owner(Eigen::Index j) const
    {
        if (j < 1 || j > Nx)
            throw Error("row_owner: row " + std::to_string(j) + " out of range");
        return row_owner_[j - 1] + 1;
    }

    Mat A_block(int i, int j) const
    {
        const auto& bi = blocks[i];
        const auto& bj = blocks[j];
        return A.block(bi.x, bj.x, bi.n, bj.n);
    }
    Mat B_block(int i) const { return B.block(blocks[i].x, blocks[i].u, blocks[i].n, blocks[i].m); }
    Mat E_block(int i) const { return E.block(blocks[i].x, blocks[i].d, blocks[i].n, blocks[i].p); }
    Mat Z_block(int i) const { return Z.block(blocks[i].zr, blocks[i].x, blocks[i].Nx, blocks[i].n); }
    Mat Hd_block(int i) const { return H_d.block(blocks[i].d, blocks[i].d, blocks[i].p, blocks[i].p); }
    Mat Hu_block(int i) const { return H_u.block(blocks[i].ur, blocks[i].u, blocks[i].Nu, blocks[i].m); }
    Vec hu_block(int i) const { return h_u.segment(blocks[i].ur, blocks[i].Nu); }
    Mat Hs_block(int i) const { return H_s.block(blocks[i].sr, blocks[i].x, blocks[i].Ns, blocks[i].n); }
    Vec hs_block(int i) const { return h_s.segment(blocks[i].sr, blocks[i].Ns); }
};

/// Forward-Euler discretization: A = I + dt·A_c, B = dt·B_c, E = dt·E_c.
struct Discrete {
    Mat A, B, E;
};

inline Discrete discretize_euler(const Mat& A_cont, const Mat& B_cont, const Mat& E_cont, double dt)
{
    if (!(dt > 0.0))
        throw Error("discretize_euler: dt must be positive, got " + std::to_string(dt));
    if (A_cont.rows() != A_cont.cols())
        throw Error("discretize_euler: A must be square");
    return {Mat::Identity(A_cont.rows(), A_cont.cols()) + dt * A_cont, dt * B_cont, dt * E_cont};
}

enum class GeneratorMode { even, random };

/// `count` unit vectors on the half sphere {g : |g| = 1, g_1 >= 0}, one per row.
inline Mat make_generators(Eigen::Index n, Eigen::Index count, GeneratorMode mode, std::uint64_t seed = 0)
{
    if (n < 1 || count < 1)
        throw Error("make_generators: need n >= 1 and count >= 1");
    Mat Z(count, n);
    if (n == 1) {
        Z.setOnes();
        return Z;
    }
    if (mode == GeneratorMode::even && n == 2) {
        for (Eigen::Index k = 0; k < count; ++k) {
            const double a = -std::numbers::pi / 2 + std::numbers::pi * (static_cast<double>(k) + 0.5)
                / static_cast<double>(count);
            Z(k, 0) = std::cos(a);
            Z(k, 1) = std::sin(a);
        }
        return Z;
    }
    if (mode == GeneratorMode::even && n == 3) {
        // golden-angle spiral over the half sphere, first coordinate as height
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (Eigen::Index k = 0; k < count; ++k) {
            const double g1 = (static_cast<double>(k) + 0.5) / static_cast<double>(count);
            const double r = std::sqrt(std::max(0.0, 1.0 - g1 * g1));
            const double phi = golden * static_cast<double>(k);
            Z(k, 0) = g1;
            Z(k, 1) = r * std::cos(phi);
            Z(k, 2) = r * std::sin(phi);
        }
        return Z;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::Index start = 0;
    if (mode == GeneratorMode::even) {
        // axes first, remaining directions from a fixed generator
        for (; start < std::min(n, count); ++start) {
            Z.row(start).setZero();
            Z(start, start) = 1.0;
        }
    }
    for (Eigen::Index k = start; k < count; ++k) {
        Vec g(n);
        do {
            for (Eigen::Index c = 0; c < n; ++c)
                g(c) = nd(rng);
        } while (g.norm() < 1e-8);
        g.normalize();
        if (g(0) < 0.0)
            g = -g;
        Z.row(k) = g.transpose();
    }
    return Z;
}

/// Check every model invariant; throws Error naming the subsystem and field.
inline void validate(const SystemModel& model)
{
    const int d = model.d();
    if (d < 1)
        throw Error("model has no subsystems", 0, "subsystems");
    for (int k = 0; k < d; ++k) {
        const Subsystem& s = model.subsystems[k];
        const int i = s.index;
        if (i != k + 1)
            throw Error("subsystem indices must be 1..d without gaps", i, "index");
        const auto n = s.n();
        if (n < 1 || s.A.cols() != n)
            throw Error("A must be square and nonempty", i, "A");
        if (s.B.rows() != n)
            throw Error("B must have n_i rows", i, "B");
        if (s.E.rows() != n && s.E.size() != 0)
            throw Error("E must have n_i rows", i, "E");
        if (s.H_u.cols() != s.m() || s.H_u.rows() != s.h_u.size())
            throw Error("input constraint dimensions do not match", i, "H_u");
        if (s.Nu() > 0 && !(s.h_u.array() > 0.0).all())
            throw Error("h_u must be strictly positive", i, "h_u");
        if (s.H_s.cols() != n || s.H_s.rows() != s.h_s.size())
            throw Error("state constraint dimensions do not match", i, "H_s");
        if (s.Ns() > 0 && !(s.h_s.array() > 0.0).all())
            throw Error("h_s must be strictly positive", i, "h_s");
        if (s.disturbed()) {
            if (s.H_d.size() == 0)
                throw Error("disturbance channels present but H_d missing", i, "H_d");
            if (s.H_d.rows() != s.p() || s.H_d.cols() != s.p())
                throw Error("H_d must be square p_i × p_i", i, "H_d");
            if (linalg::rank(s.H_d) < s.p())
                throw Error("H_d is singular", i, "H_d");
        } else if (s.H_d.size() != 0) {
            throw Error("H_d given without disturbance channels", i, "H_d");
        }
        if (s.Z.cols() != n)
            throw Error("Z must have n_i columns", i, "Z");
        if (s.Nx() < n || linalg::rank(s.Z) < n)
            throw Error("Z must have full column rank (rank " + std::to_string(linalg::rank(s.Z))
                    + " < n_i = " + std::to_string(n) + ")",
                i, "Z");
        for (const Mat* m : {&s.A, &s.B, &s.E, &s.H_u, &s.H_s, &s.Z, &s.H_d})
            if (!m->allFinite())
                throw Error("non-finite matrix entry", i);
    }
    std::set<std::pair<int, int>> seen;
    for (const auto& c : model.couplings) {
        if (c.i < 1 || c.i > d || c.j < 1 || c.j > d || c.i == c.j)
            throw Error("coupling (" + std::to_string(c.i) + "," + std::to_string(c.j) + ") is invalid", c.i,
                "couplings");
        if (!seen.insert({c.i, c.j}).second)
            throw Error("duplicate coupling", c.i, "couplings");
        const auto& si = model.subsystems[c.i - 1];
        const auto& sj = model.subsystems[c.j - 1];
        if (c.A.rows() != si.n() || c.A.cols() != sj.n())
            throw Error("coupling block must be n_i × n_j", c.i, "couplings");
    }
    for (int i = 1; i <= d; ++i)
        if (!model.k_pattern.count({i, i}))
            throw Error("k_pattern must contain every diagonal block", i, "k_pattern");
    for (const auto& [a, b] : model.k_pattern)
        if (a < 1 || a > d || b < 1 || b > d)
            throw Error("k_pattern entry out of range", a, "k_pattern");
}

inline ComposedSystem compose(const SystemModel& model)
{
    validate(model);
    ComposedSystem cs;
    const int d = model.d();
    cs.blocks.resize(d);
    for (int k = 0; k < d; ++k) {
        const auto& s = model.subsystems[k];
        auto& b = cs.blocks[k];
        b.x = cs.n;
        b.n = s.n();
        b.u = cs.m;
        b.m = s.m();
        b.d = cs.p;
        b.p = s.p();
        b.zr = cs.Nx;
        b.Nx = s.Nx();
        b.ur = cs.Nu;
        b.Nu = s.Nu();
        b.sr = cs.Ns;
        b.Ns = s.Ns();
        cs.n += b.n;
        cs.m += b.m;
        cs.p += b.p;
        cs.Nx += b.Nx;
        cs.Nu += b.Nu;
        cs.Ns += b.Ns;
    }
    cs.A = Mat::Zero(cs.n, cs.n);
    cs.B = Mat::Zero(cs.n, cs.m);
    cs.E = Mat::Zero(cs.n, cs.p);
    cs.Z = Mat::Zero(cs.Nx, cs.n);
    cs.H_u = Mat::Zero(cs.Nu, cs.m);
    cs.h_u = Vec::Zero(cs.Nu);
    cs.H_d = Mat::Zero(cs.p, cs.p);
    cs.H_s = Mat::Zero(cs.Ns, cs.n);
    cs.h_s = Vec::Zero(cs.Ns);
    for (int k = 0; k < d; ++k) {
        const auto& s = model.subsystems[k];
        const auto& b = cs.blocks[k];
        cs.A.block(b.x, b.x, b.n, b.n) = s.A;
        cs.B.block(b.x, b.u, b.n, b.m) = s.B;
        if (b.p > 0) {
            cs.E.block(b.x, b.d, b.n, b.p) = s.E;
            cs.H_d.block(b.d, b.d, b.p, b.p) = s.H_d;
        }
        cs.Z.block(b.zr, b.x, b.Nx, b.n) = s.Z;
        cs.H_u.block(b.ur, b.u, b.Nu, b.m) = s.H_u;
        cs.h_u.segment(b.ur, b.Nu) = s.h_u;
        cs.H_s.block(b.sr, b.x, b.Ns, b.n) = s.H_s;
        cs.h_s.segment(b.sr, b.Ns) = s.h_s;
        for (Eigen::Index r = 0; r < b.Nx; ++r)
            cs.row_owner_.push_back(k);
    }
    for (const auto& c : model.couplings) {
        const auto& bi = cs.blocks[c.i - 1];
        const auto& bj = cs.blocks[c.j - 1];
        cs.A.block(bi.x, bj.x, bi.n, bj.n) = c.A;
    }
    cs.k_pattern = model.k_pattern;
    return cs;
}

// ---------------------------------------------------------------------------
// Model documents

namespace detail {

using json = nlohmann::json;

inline Mat json_to_matrix(const json& j, int sub, const std::string& field)
{
    if (j.is_number())
        return Mat::Constant(1, 1, j.get<double>());
    if (!j.is_array())
        throw Error("expected a matrix (nested array)", sub, field);
    if (j.empty())
        return Mat(0, 0);
    if (!j.front().is_array()) {
        // a flat list is a column vector
        Mat m(j.size(), 1);
        for (std::size_t r = 0; r < j.size(); ++r) {
            if (!j[r].is_number())
                throw Error("matrix entries must be numbers", sub, field);
            m(r, 0) = j[r].get<double>();
        }
        return m;
    }
    const std::size_t cols = j.front().size();
    Mat m(j.size(), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            throw Error("ragged matrix rows", sub, field);
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number())
                throw Error("matrix entries must be numbers", sub, field);
            m(r, c) = j[r][c].get<double>();
        }
    }
    return m;
}

inline Vec json_to_vector(const json& j, int sub, const std::string& field)
{
    const Mat m = json_to_matrix(j, sub, field);
    if (m.cols() == 1)
        return m.col(0);
    if (m.rows() == 1)
        return m.row(0).transpose();
    throw Error("expected a vector", sub, field);
}

/// |v_k| <= b_k  ->  H = [I; -I], h = [b; b]. A scalar bound is broadcast.
inline std::pair<Mat, Vec> box_rows(const json& j, Eigen::Index dim, int sub, const std::string& field)
{
    Vec b = json_to_vector(j, sub, field);
    if (b.size() == 1 && dim > 1)
        b = Vec::Constant(dim, b(0));
    if (b.size() != dim)
        throw Error("box bound has " + std::to_string(b.size()) + " entries, expected " + std::to_string(dim),
            sub, field);
    Mat H(2 * dim, dim);
    H << Mat::Identity(dim, dim), -Mat::Identity(dim, dim);
    Vec h(2 * dim);
    h << b, b;
    return {H, h};
}

} // namespace detail

namespace detail {

inline SystemModel load_model_unchecked(const std::string& text)
{
    using detail::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("model document is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("subsystems") || !doc["subsystems"].is_array())
        throw Error("model document needs a 'subsystems' list", 0, "subsystems");

    const bool continuous = doc.value("continuous", false);
    std::optional<double> dt;
    if (doc.contains("dt")) {
        if (!doc["dt"].is_number())
            throw Error("dt must be a number", 0, "dt");
        dt = doc["dt"].get<double>();
    }
    if (continuous && !dt)
        throw Error("continuous-time model needs dt", 0, "dt");

    SystemModel model;
    int idx = 0;
    for (const auto& js : doc["subsystems"]) {
        ++idx;
        if (!js.is_object())
            throw Error("subsystem entry must be an object", idx);
        Subsystem s;
        s.index = js.value("index", idx);
        for (const char* req : {"A", "B"})
            if (!js.contains(req))
                throw Error(std::string("missing field ") + req, idx, req);
        s.A = detail::json_to_matrix(js["A"], idx, "A");
        s.B = detail::json_to_matrix(js["B"], idx, "B");
        if (s.B.rows() == 1 && s.A.rows() > 1 && s.B.cols() == s.A.rows())
            throw Error("B must be given as an n_i × m_i nested array", idx, "B");
        const Eigen::Index n = s.A.rows();
        s.E = js.contains("E") ? detail::json_to_matrix(js["E"], idx, "E") : Mat(n, 0);
        if (s.B.rows() != n)
            throw Error("B must have n_i rows", idx, "B");
        if (s.E.rows() != n)
            throw Error("E must have n_i rows", idx, "E");

        if (js.contains("input_box")) {
            std::tie(s.H_u, s.h_u) = detail::box_rows(js["input_box"], s.B.cols(), idx, "input_box");
        } else if (js.contains("H_u") && js.contains("h_u")) {
            s.H_u = detail::json_to_matrix(js["H_u"], idx, "H_u");
            s.h_u = detail::json_to_vector(js["h_u"], idx, "h_u");
        } else {
            throw Error("missing input constraints (input_box or H_u/h_u)", idx, "input_box");
        }
        if (js.contains("state_box")) {
            std::tie(s.H_s, s.h_s) = detail::box_rows(js["state_box"], n, idx, "state_box");
        } else if (js.contains("H_s") && js.contains("h_s")) {
            s.H_s = detail::json_to_matrix(js["H_s"], idx, "H_s");
            s.h_s = detail::json_to_vector(js["h_s"], idx, "h_s");
        } else {
            throw Error("missing state constraints (state_box or H_s/h_s)", idx, "state_box");
        }
        if (js.contains("d_box")) {
            Vec b = detail::json_to_vector(js["d_box"], idx, "d_box");
            if (b.size() == 1 && s.p() > 1)
                b = Vec::Constant(s.p(), b(0));
            if (b.size() != s.p() || !(b.array() > 0.0).all())
                throw Error("d_box must hold p_i positive bounds", idx, "d_box");
            s.H_d = b.cwiseInverse().asDiagonal();
        } else if (js.contains("H_d")) {
            s.H_d = detail::json_to_matrix(js["H_d"], idx, "H_d");
        } else {
            s.H_d = Mat(0, 0);
        }
        if (js.contains("Z")) {
            s.Z = detail::json_to_matrix(js["Z"], idx, "Z");
            if (s.Z.cols() == 1 && n > 1 && s.Z.rows() == n)
                s.Z.transposeInPlace();
        } else {
            const auto& g = js.contains("generators") ? js["generators"] : json::object();
            const Eigen::Index count = g.value("count", static_cast<int>(2 * n));
            const std::string mode = g.value("mode", std::string("even"));
            if (mode != "even" && mode != "random")
                throw Error("generators.mode must be 'even' or 'random'", idx, "generators");
            const std::uint64_t seed = g.value("seed", static_cast<std::uint64_t>(0));
            s.Z = make_generators(n, count, mode == "even" ? GeneratorMode::even : GeneratorMode::random, seed);
        }
        if (continuous) {
            Discrete dd = discretize_euler(s.A, s.B, s.E, *dt);
            s.A = std::move(dd.A);
            s.B = std::move(dd.B);
            s.E = std::move(dd.E);
        }
        model.subsystems.push_back(std::move(s));
    }
    const int d = model.d();
    if (doc.contains("couplings")) {
        for (const auto& jc : doc["couplings"]) {
            Coupling c;
            if (!jc.contains("i") || !jc.contains("j") || !jc.contains("A"))
                throw Error("coupling needs i, j and A", 0, "couplings");
            c.i = jc["i"].get<int>();
            c.j = jc["j"].get<int>();
            c.A = detail::json_to_matrix(jc["A"], c.i, "couplings");
            if (continuous)
                c.A *= *dt;
            model.couplings.push_back(std::move(c));
        }
    }
    for (int i = 1; i <= d; ++i)
        model.k_pattern.insert({i, i});
    if (doc.contains("k_pattern")) {
        const auto& kp = doc["k_pattern"];
        if (kp.is_string()) {
            const std::string s = kp.get<std::string>();
            if (s == "tridiagonal") {
                for (int i = 1; i < d; ++i) {
                    model.k_pattern.insert({i, i + 1});
                    model.k_pattern.insert({i + 1, i});
                }
            } else if (s != "diagonal") {
                throw Error("k_pattern must be 'diagonal', 'tridiagonal' or a list of pairs", 0, "k_pattern");
            }
        } else {
            for (const auto& pr : kp) {
                if (!pr.is_array() || pr.size() != 2)
                    throw Error("k_pattern entries must be [i, j] pairs", 0, "k_pattern");
                model.k_pattern.insert({pr[0].get<int>(), pr[1].get<int>()});
            }
        }
    }
    validate(model);
    return model;
}

} // namespace detail

/// Parse and validate a model document (JSON text).
inline SystemModel load_model(const std::string& text)
{
    try {
        return detail::load_model_unchecked(text);
    } catch (const detail::json::exception& e) {
        throw Error(std::string("model document has a field of the wrong type: ") + e.what());
    }
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot read file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline SystemModel load_model_file(const std::string& path) { return load_model(read_text_file(path)); }

} // namespace sepinv
