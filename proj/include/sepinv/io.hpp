#pragma once

// Artifact files: solutions, polytopes, ladders and envelopes as nested-array
// JSON written at 17 significant digits; vertex CSV for plotting.

#include "sepinv/envelope.hpp"
#include "sepinv/synth.hpp"
#include "sepinv/verify.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

namespace sepinv {
namespace io {

using json = nlohmann::json;

inline void write_vector(std::ostream& os, const Vec& v)
{
    os << '[';
    for (Eigen::Index k = 0; k < v.size(); ++k)
        os << (k ? ", " : "") << lmi::fmt17(v(k));
    os << ']';
}

inline void write_matrix(std::ostream& os, const Mat& M)
{
    os << '[';
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        os << (r ? ", " : "");
        write_vector(os, M.row(r).transpose());
    }
    os << ']';
}

/// Matrix from nested arrays; `cols` fixes the width when the list is empty.
inline Mat read_matrix(const json& j, const std::string& what, Eigen::Index cols = -1)
{
    if (!j.is_array())
        throw Error(what + ": expected a nested array");
    if (j.empty())
        return Mat(0, std::max<Eigen::Index>(cols, 0));
    const auto r = static_cast<Eigen::Index>(j.size());
    const auto c = static_cast<Eigen::Index>(j[0].size());
    Mat M(r, c);
    for (Eigen::Index a = 0; a < r; ++a) {
        const json& row = j[static_cast<std::size_t>(a)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c)
            throw Error(what + ": ragged rows");
        for (Eigen::Index b = 0; b < c; ++b) {
            if (!row[static_cast<std::size_t>(b)].is_number())
                throw Error(what + ": non-numeric entry");
            M(a, b) = row[static_cast<std::size_t>(b)].get<double>();
        }
    }
    return M;
}

inline Vec read_vector(const json& j, const std::string& what)
{
    if (!j.is_array())
        throw Error(what + ": expected an array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (!j[k].is_number())
            throw Error(what + ": non-numeric entry");
        v(static_cast<Eigen::Index>(k)) = j[k].get<double>();
    }
    return v;
}

inline json parse(const std::string& text, const std::string& what)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(what + ": " + e.what());
    }
}

inline const json& field(const json& j, const char* key, const std::string& what)
{
    if (!j.is_object() || !j.contains(key))
        throw Error(what + ": missing '" + key + "'");
    return j[key];
}

inline void check_format(const json& j, const char* expected, const std::string& what)
{
    const json& f = field(j, "format", what);
    if (!f.is_string() || f.get<std::string>() != expected)
        throw Error(what + ": expected format '" + std::string(expected) + "'");
}

// ---------------------------------------------------------------- polytopes

inline void write_hpolytope(std::ostream& os, const HPolytope& P)
{
    os << "{\"dim\": " << P.dim() << ", \"H\": ";
    write_matrix(os, P.H);
    os << ", \"h\": ";
    write_vector(os, P.h);
    os << '}';
}

inline HPolytope read_hpolytope(const json& j, const std::string& what = "polytope")
{
    const auto n = static_cast<Eigen::Index>(field(j, "dim", what).get<long>());
    return HPolytope(read_matrix(field(j, "H", what), what + ".H", n), read_vector(field(j, "h", what), what + ".h"));
}

/// Vertices, one per row (planar polygons in counter-clockwise order).
inline void write_vertices_csv(std::ostream& os, const HPolytope& P, const std::string& label = {})
{
    const std::vector<Vec> V = enumerate_vertices(P);
    for (const Vec& v : V) {
        if (!label.empty())
            os << label << ',';
        for (Eigen::Index k = 0; k < v.size(); ++k)
            os << (k ? "," : "") << lmi::fmt17(v(k));
        os << '\n';
    }
}

// ---------------------------------------------------------------- solutions

/// H_x and K by blocks (K[i][j] = K_ij), Λ, eps and the raw multipliers.
/// Z blocks are stored so a solution cannot be read against a different model.
inline void write_solution(std::ostream& os, const ComposedSystem& cs, const SynthesisSolution& sol)
{
    os << "{\n  \"format\": \"sepinv-solution 1\",\n  \"eps\": " << lmi::fmt17(sol.eps) << ",\n  \"Lambda\": ";
    write_vector(os, sol.Lambda);
    os << ",\n  \"subsystems\": [\n";
    for (int i = 0; i < cs.d(); ++i) {
        os << "    {\"H_x\": ";
        write_matrix(os, sol.Hx_block(cs, i));
        os << ",\n     \"Z\": ";
        write_matrix(os, cs.Z_block(i));
        os << ",\n     \"K\": [";
        for (int j = 0; j < cs.d(); ++j) {
            os << (j ? ", " : "");
            write_matrix(os, sol.K_block(cs, i, j));
        }
        os << "]}" << (i + 1 < cs.d() ? "," : "") << '\n';
    }
    os << "  ],\n  \"multipliers\": ";
    write_vector(os, sol.multipliers);
    os << "\n}\n";
}

inline SynthesisSolution read_solution(const std::string& text, const ComposedSystem& cs)
{
    const std::string what = "solution";
    const json j = parse(text, what);
    check_format(j, "sepinv-solution 1", what);
    const json& subs = field(j, "subsystems", what);
    if (!subs.is_array() || static_cast<int>(subs.size()) != cs.d())
        throw Error("solution: subsystem count does not match the model");
    Mat H = Mat::Zero(cs.n, cs.n), K = Mat::Zero(cs.m, cs.n);
    for (int i = 0; i < cs.d(); ++i) {
        const auto& bi = cs.blocks[i];
        const json& s = subs[static_cast<std::size_t>(i)];
        const Mat Hi = read_matrix(field(s, "H_x", what), "solution H_x");
        if (Hi.rows() != bi.n || Hi.cols() != bi.n)
            throw Error("solution: H_x block has the wrong size", i + 1);
        H.block(bi.x, bi.x, bi.n, bi.n) = Hi;
        const Mat Zi = read_matrix(field(s, "Z", what), "solution Z", bi.n);
        const Mat Zm = cs.Z_block(i);
        if (Zi.rows() != Zm.rows() || Zi.cols() != Zm.cols() || (Zi - Zm).cwiseAbs().maxCoeff() > 1e-12)
            throw Error("solution: generators differ from the model's", i + 1);
        const json& Kr = field(s, "K", what);
        if (!Kr.is_array() || static_cast<int>(Kr.size()) != cs.d())
            throw Error("solution: K needs one block per subsystem", i + 1);
        for (int jj = 0; jj < cs.d(); ++jj) {
            const auto& bj = cs.blocks[jj];
            const Mat Kij = read_matrix(Kr[static_cast<std::size_t>(jj)], "solution K", bj.n);
            if (Kij.rows() != bi.m || Kij.cols() != bj.n)
                throw Error("solution: K block has the wrong size", i + 1);
            K.block(bi.u, bj.x, bi.m, bj.n) = Kij;
        }
    }
    SynthesisSolution sol = make_solution(cs, H, K);
    sol.Lambda = read_vector(field(j, "Lambda", what), "solution Lambda");
    if (sol.Lambda.size() != cs.d())
        throw Error("solution: Lambda needs one entry per subsystem");
    sol.multipliers = read_vector(field(j, "multipliers", what), "solution multipliers");
    sol.eps = field(j, "eps", what).get<double>();
    return sol;
}

inline SynthesisSolution load_solution_file(const std::string& path, const ComposedSystem& cs)
{
    return read_solution(read_text_file(path), cs);
}

// ---------------------------------------------------------------- certificates

inline Certificate read_certificate(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != "sepinv-certificate 1")
        throw Error("certificate: bad header");
    Certificate c;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "valid") {
            std::string v;
            ls >> v;
            c.valid = v == "true";
        } else if (key == "tolerance") {
            ls >> c.tolerance;
        } else if (key == "invariance" || key == "state" || key == "input") {
            long n = 0;
            ls >> n;
            Vec v(n);
            for (long k = 0; k < n; ++k)
                ls >> v(k);
            if (!ls)
                throw Error("certificate: truncated '" + key + "' line");
            (key == "invariance" ? c.invariance_margins : key == "state" ? c.state_margins : c.input_margins) = v;
        }
    }
    return c;
}

// ---------------------------------------------------------------- ladders

inline void write_ladder(std::ostream& os, const ReachLadder& L)
{
    os << "{\n  \"format\": \"sepinv-ladder 1\",\n  \"subsystem\": " << L.subsystem + 1
       << ",\n  \"converged\": " << (L.converged ? "true" : "false")
       << ",\n  \"shrunk_target\": " << (L.shrunk_target ? "true" : "false") << ",\n  \"covered_at\": " << L.covered_at
       << ",\n  \"target\": ";
    write_hpolytope(os, L.target);
    os << ",\n  \"levels\": [\n";
    for (std::size_t r = 0; r < L.levels.size(); ++r) {
        os << "    ";
        write_hpolytope(os, L.levels[r]);
        os << (r + 1 < L.levels.size() ? ",\n" : "\n");
    }
    os << "  ]\n}\n";
}

inline ReachLadder read_ladder(const json& j)
{
    const std::string what = "ladder";
    check_format(j, "sepinv-ladder 1", what);
    ReachLadder L;
    L.subsystem = field(j, "subsystem", what).get<int>() - 1;
    L.converged = field(j, "converged", what).get<bool>();
    L.shrunk_target = field(j, "shrunk_target", what).get<bool>();
    L.covered_at = field(j, "covered_at", what).get<int>();
    L.target = read_hpolytope(field(j, "target", what), "ladder target");
    for (const json& lv : field(j, "levels", what))
        L.levels.push_back(read_hpolytope(lv, "ladder level"));
    return L;
}

/// Both ladders of a recurrence controller; the serialized controller.
inline void write_controller(std::ostream& os, const RecurrenceController& c)
{
    os << "{\"format\": \"sepinv-controller 1\", \"subsystem\": " << c.subsystem + 1 << ", \"ladders\": [\n";
    write_ladder(os, c.ladders[0]);
    os << ",\n";
    write_ladder(os, c.ladders[1]);
    os << "]}\n";
}

// ---------------------------------------------------------------- envelopes

inline void write_envelope(std::ostream& os, const InputEnvelope& e)
{
    os << "{\"format\": \"sepinv-envelope 1\", \"subsystem\": " << e.subsystem + 1 << ",\n \"point\": ";
    write_vector(os, e.point);
    os << ",\n \"coupling_upper\": ";
    write_vector(os, e.coupling_upper);
    os << ",\n \"coupling_lower\": ";
    write_vector(os, e.coupling_lower);
    os << ",\n \"polytope\": ";
    write_hpolytope(os, e.poly);
    os << "}\n";
}

inline InputEnvelope read_envelope(const json& j)
{
    const std::string what = "envelope";
    check_format(j, "sepinv-envelope 1", what);
    InputEnvelope e;
    e.subsystem = field(j, "subsystem", what).get<int>() - 1;
    e.point = read_vector(field(j, "point", what), "envelope point");
    e.coupling_upper = read_vector(field(j, "coupling_upper", what), "envelope coupling_upper");
    e.coupling_lower = read_vector(field(j, "coupling_lower", what), "envelope coupling_lower");
    e.poly = read_hpolytope(field(j, "polytope", what), "envelope polytope");
    return e;
}

} // namespace io
} // namespace sepinv
