#pragma once

// State-dependent input envelopes that keep 𝒳_i invariant against
// worst-case neighbor states and disturbances.

#include "sepinv/verify.hpp"

#include <ostream>

namespace sepinv {

struct InputEnvelope {
    int subsystem = 0; ///< 0-based
    Vec point;
    HPolytope poly; ///< over u_i
    Vec coupling_upper, coupling_lower;
};

/// Row r of `upper`: Σ_{j≠i} max_{x_j∈𝒳_j} (Z_iH_x^iA_ij x_j)_r + max_{d∈𝒟_i} (Z_iH_x^iE_i d)_r.
inline std::pair<Vec, Vec> coupling_bounds(const ComposedSystem& cs, const SynthesisSolution& sol, int i)
{
    if (i < 0 || i >= cs.d())
        throw Error("coupling_bounds: subsystem index out of range");
    const Mat G = cs.Z_block(i) * sol.Hx_block(cs, i);
    Vec upper = Vec::Zero(G.rows());
    for (int j = 0; j < cs.d(); ++j) {
        if (j == i)
            continue;
        const Mat Aij = cs.A_block(i, j);
        if (Aij.cwiseAbs().maxCoeff() == 0.0)
            continue;
        const Mat GA = G * Aij;
        for (Eigen::Index r = 0; r < G.rows(); ++r)
            if (GA.row(r).cwiseAbs().maxCoeff() > 0.0)
                upper(r) += support(sol.gen_sets[j], GA.row(r).transpose());
    }
    if (cs.blocks[i].p > 0) {
        const Mat GE = G * cs.E_block(i);
        const GenSet D = disturbance_set(cs, i);
        for (Eigen::Index r = 0; r < G.rows(); ++r)
            if (GE.row(r).cwiseAbs().maxCoeff() > 0.0)
                upper(r) += support(D, GE.row(r).transpose());
    }
    return {upper, -upper};
}

/// All u_i with H_u^i u ≤ h_u^i and -1 ≤ G_i(A_ii x0 + B_i u) ± upper ≤ 1, G_i = Z_iH_x^i.
inline InputEnvelope admissible_inputs(const ComposedSystem& cs, const SynthesisSolution& sol, int i, const Vec& x0,
    const std::pair<Vec, Vec>* bounds = nullptr)
{
    if (i < 0 || i >= cs.d())
        throw Error("admissible_inputs: subsystem index out of range");
    if (x0.size() != cs.blocks[i].n)
        throw Error("admissible_inputs: point has the wrong dimension");
    if (!sol.gen_sets[i].contains_point(x0, 1e-8))
        throw Error("admissible_inputs: point lies outside the invariant set", i + 1);

    InputEnvelope env;
    env.subsystem = i;
    env.point = x0;
    if (bounds) {
        env.coupling_upper = bounds->first;
        env.coupling_lower = bounds->second;
    } else {
        std::tie(env.coupling_upper, env.coupling_lower) = coupling_bounds(cs, sol, i);
    }
    const Mat G = cs.Z_block(i) * sol.Hx_block(cs, i);
    const Mat GB = G * cs.B_block(i);
    const Vec gax = G * (cs.A_block(i, i) * x0);
    const Mat Hu = cs.Hu_block(i);
    const Eigen::Index Nu = Hu.rows(), N = G.rows(), m = GB.cols();
    Mat H(Nu + 2 * N, m);
    H << Hu, GB, -GB;
    Vec h(Nu + 2 * N);
    h << cs.hu_block(i), Vec::Ones(N) - gax - env.coupling_upper, Vec::Ones(N) + gax + env.coupling_lower;
    env.poly = HPolytope(H, h);
    return env;
}

/// max over neighbor states and disturbances of the facet residuals
/// |G_i x_i⁺| - 1 for input u, evaluated with the cached bounds.
inline double envelope_residual(const ComposedSystem& cs, const SynthesisSolution& sol, const InputEnvelope& env,
    const Vec& u)
{
    const int i = env.subsystem;
    const Mat G = cs.Z_block(i) * sol.Hx_block(cs, i);
    const Vec c = G * (cs.A_block(i, i) * env.point + cs.B_block(i) * u);
    return std::max((c + env.coupling_upper).maxCoeff(), (-c - env.coupling_lower).maxCoeff()) - 1.0;
}

} // namespace sepinv
