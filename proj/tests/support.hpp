#pragma once

// Shared fixtures: model paths, random instances, cached syntheses.

#include "sepinv.hpp"

#include <map>
#include <random>
#include <string>

namespace sepinv::testing {

inline std::string model_path(const std::string& name) { return std::string(SEPINV_MODELS_DIR) + "/" + name; }

inline ComposedSystem load(const std::string& name) { return compose(load_model_file(model_path(name))); }

/// Smallest eigenvalue, computed from scratch (no library helpers).
inline double lam_min(const Mat& M)
{
    const Mat S = 0.5 * (M + M.transpose());
    return Eigen::SelfAdjointEigenSolver<Mat>(S, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

inline Mat gauss(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c)
{
    std::normal_distribution<double> nd;
    Mat M(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i)
            M(i, j) = nd(rng);
    return M;
}

/// G Gᵀ + s I with s in [0.1, 1.1]
inline Mat spd(std::mt19937_64& rng, Eigen::Index n)
{
    std::uniform_real_distribution<double> u(0.1, 1.1);
    const Mat G = gauss(rng, n, n);
    return G * G.transpose() + u(rng) * Mat::Identity(n, n);
}

inline Mat skew(std::mt19937_64& rng, Eigen::Index n)
{
    const Mat G = gauss(rng, n, n);
    return 0.5 * (G - G.transpose());
}

inline Mat blk2(const Mat& a, const Mat& b, const Mat& d)
{
    Mat M(a.rows() + d.rows(), a.cols() + d.cols());
    M << a, b, b.transpose(), d;
    return M;
}

/// Stable coupled model: d in {2,3}, n_i = 2, m_i = 1, ρ(A_ii) in [0.3, 0.8],
/// ‖A_ij‖₂ ≤ 0.15, |u| ≤ 1, |d| ≤ 0.02 on both states, unit state box.
inline SystemModel random_coupled_model(std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> dd(2, 3);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    const int d = dd(rng);
    SystemModel m;
    for (int i = 0; i < d; ++i) {
        Subsystem s;
        s.index = i + 1;
        Mat A = gauss(rng, 2, 2);
        const double rho = A.eigenvalues().cwiseAbs().maxCoeff();
        A *= (0.3 + 0.25 * (ud(rng) + 1.0)) / rho;
        s.A = A;
        s.B = gauss(rng, 2, 1);
        s.E = Mat::Identity(2, 2);
        s.H_d = Mat::Identity(2, 2) / 0.02;
        s.H_u = Mat(2, 1);
        s.H_u << 1, -1;
        s.h_u = Vec::Ones(2);
        s.H_s = Mat(4, 2);
        s.H_s << Mat::Identity(2, 2), -Mat::Identity(2, 2);
        s.h_s = Vec::Ones(4);
        s.Z = make_generators(2, 4, GeneratorMode::even);
        m.subsystems.push_back(s);
        m.k_pattern.insert({i + 1, i + 1});
    }
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j) {
                Mat C = gauss(rng, 2, 2);
                C *= 0.15 * ud(rng) / C.norm();
                m.couplings.push_back({i + 1, j + 1, C});
            }
    return m;
}

struct Synthesized {
    ComposedSystem cs;
    LmiProblem prob;
    SolveOutcome out;
    SynthesisSolution sol;
};

inline Synthesized synthesize(const ComposedSystem& cs, bool trace_objective = false)
{
    Synthesized s{cs, build_problem(cs, default_eps(cs)), {}, {}};
    SolveOptions o;
    if (trace_objective)
        o.objective = trace_w_objective(s.prob);
    s.out = solve(s.prob, o);
    if (s.out.status == SolveStatus::feasible)
        s.sol = recover(cs, s.prob, *s.out.y);
    return s;
}

/// Syntheses shared across tests of one binary; the UAV uses the trace objective.
inline const Synthesized& cached(const std::string& model)
{
    static std::map<std::string, Synthesized> cache;
    auto it = cache.find(model);
    if (it == cache.end())
        it = cache.emplace(model, synthesize(load(model), model == "uav.model")).first;
    return it->second;
}

/// UAV goal slabs on the position coordinate: {G₁⁺, G₁⁻}, {G₂⁺, G₂⁻}.
inline std::array<std::array<double, 2>, 2> uav_goal_bounds() { return {{{0.2, 0.35}, {0.05, 0.18}}}; }

} // namespace sepinv::testing
