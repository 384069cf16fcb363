#include "support.hpp"

#include <gtest/gtest.h>

using namespace sepinv;
using namespace sepinv::testing;

namespace {

Subsystem scalar_sub(int index, double a, double delta)
{
    Subsystem s;
    s.index = index;
    s.A = Mat::Constant(1, 1, a);
    s.B = Mat::Ones(1, 1);
    if (delta > 0) {
        s.E = Mat::Ones(1, 1);
        s.H_d = Mat::Constant(1, 1, 1.0 / delta);
    } else {
        s.E = Mat::Zero(1, 0);
        s.H_d = Mat::Zero(0, 0);
    }
    s.H_u = (Mat(2, 1) << 1, -1).finished();
    s.h_u = Vec::Ones(2);
    s.H_s = s.H_u;
    s.h_s = Vec::Ones(2);
    s.Z = Mat::Ones(1, 1);
    return s;
}

/// Two scalar subsystems, x₁⁺ = a x₁ + c x₂ + u₁ + d₁, with sets [-w₁, w₁], [-w₂, w₂].
struct Pair {
    ComposedSystem cs;
    SynthesisSolution sol;
};

Pair scalar_pair(double a, double c, double delta, double w1, double w2)
{
    SystemModel m;
    m.subsystems = {scalar_sub(1, a, delta), scalar_sub(2, 0.5, 0.0)};
    m.couplings.push_back({1, 2, Mat::Constant(1, 1, c)});
    m.k_pattern = {{1, 1}, {2, 2}};
    Pair p{compose(m), {}};
    p.sol = make_solution(p.cs, (Vec(2) << 1.0 / w1, 1.0 / w2).finished().asDiagonal().toDenseMatrix(), Mat::Zero(2, 2));
    return p;
}

double lo_of(const HPolytope& P) { return -support(P, -Vec::Ones(1)); }
double hi_of(const HPolytope& P) { return support(P, Vec::Ones(1)); }

/// Worst successor residual |G x⁺| - 1 over vertices of neighbor sets and disturbances.
double brute_residual(const ComposedSystem& cs, const SynthesisSolution& sol, int i, const Vec& xi, const Vec& ui)
{
    const Mat G = cs.Z_block(i) * sol.Hx_block(cs, i);
    const Vec base = G * (cs.A_block(i, i) * xi + cs.B_block(i) * ui);
    // rows are maximized independently: add per-neighbor maxima row by row
    Vec up = base, dn = -base;
    for (int j = 0; j < cs.d(); ++j) {
        if (j == i)
            continue;
        const Mat GA = G * cs.A_block(i, j);
        Vec best = Vec::Constant(G.rows(), -1e300);
        for (const Vec& v : enumerate_vertices(sol.gen_sets[j]))
            best = best.cwiseMax((GA * v).cwiseAbs());
        up += best;
        dn += best;
    }
    if (cs.blocks[i].p > 0) {
        const Mat GE = G * cs.E_block(i);
        Vec best = Vec::Constant(G.rows(), -1e300);
        for (const Vec& d : parallelotope_vertices(cs.Hd_block(i)))
            best = best.cwiseMax((GE * d).cwiseAbs());
        up += best;
        dn += best;
    }
    return up.cwiseMax(dn).maxCoeff() - 1.0;
}

} // namespace

TEST(Envelope, ScalarIntervalInClosedForm)
{
    // u ∈ [-1, 1] ∩ [-w₁ + δ + |c| w₂ - a x, w₁ - δ - |c| w₂ - a x]
    const double a = 1.1, c = -0.2, delta = 0.05, w1 = 0.9, w2 = 0.5;
    const Pair p = scalar_pair(a, c, delta, w1, w2);
    const auto [upper, lower] = coupling_bounds(p.cs, p.sol, 0);
    EXPECT_NEAR(upper(0), (std::abs(c) * w2 + delta) / w1, 1e-12);
    EXPECT_NEAR(lower(0), -upper(0), 1e-12);
    for (double x : {-0.9, -0.3, 0.0, 0.6, 0.9}) {
        const InputEnvelope env = admissible_inputs(p.cs, p.sol, 0, Vec::Constant(1, x));
        const double slack = w1 - delta - std::abs(c) * w2;
        EXPECT_NEAR(lo_of(env.poly), std::max(-1.0, -slack - a * x), 1e-9) << x;
        EXPECT_NEAR(hi_of(env.poly), std::min(1.0, slack - a * x), 1e-9) << x;
    }
    // an uncoupled, undisturbed subsystem has zero bounds
    EXPECT_EQ(coupling_bounds(p.cs, p.sol, 1).first.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Envelope, ResidualSignMatchesMembership)
{
    const Pair p = scalar_pair(1.1, 0.2, 0.05, 0.9, 0.5);
    const InputEnvelope env = admissible_inputs(p.cs, p.sol, 0, Vec::Constant(1, 0.5));
    const double hi = hi_of(env.poly), lo = lo_of(env.poly);
    EXPECT_LE(envelope_residual(p.cs, p.sol, env, Vec::Constant(1, 0.5 * (lo + hi))), 0.0);
    EXPECT_NEAR(envelope_residual(p.cs, p.sol, env, Vec::Constant(1, hi)), 0.0, 1e-12);
    EXPECT_GT(envelope_residual(p.cs, p.sol, env, Vec::Constant(1, hi + 0.01)), 0.0);
}

TEST(Envelope, EmptyWhenNeighborsDominate)
{
    // |c| w₂ + δ > w₁: nothing keeps x₁ inside
    const Pair p = scalar_pair(0.5, 1.0, 0.05, 0.4, 0.5);
    EXPECT_TRUE(is_empty(admissible_inputs(p.cs, p.sol, 0, Vec::Zero(1)).poly));
}

TEST(Envelope, SynthesizedGainInputsAndVerticesAreSafe)
{
    for (const char* model : {"uav.model", "rotational.model"}) {
        const Synthesized& s = cached(model);
        ASSERT_EQ(s.out.status, SolveStatus::feasible) << model;
        for (int i = 0; i < s.cs.d(); ++i) {
            const auto bounds = coupling_bounds(s.cs, s.sol, i);
            HitAndRun walk(s.sol.gen_sets[i].to_hpolytope(), Vec::Zero(s.cs.blocks[i].n), 17 + i);
            walk.burn_in(50);
            for (int k = 0; k < 40; ++k) {
                const Vec x = walk.next();
                const InputEnvelope env = admissible_inputs(s.cs, s.sol, i, x, &bounds);
                const Vec u = s.sol.K_block(s.cs, i, i) * x;
                EXPECT_TRUE(env.poly.contains_point(u, 1e-8)) << model << " subsystem " << i + 1;
                EXPECT_LE(brute_residual(s.cs, s.sol, i, x, u), 1e-8) << model;
                for (const Vec& v : enumerate_vertices(env.poly)) {
                    EXPECT_LE(brute_residual(s.cs, s.sol, i, x, v), 1e-8) << model;
                    EXPECT_TRUE(s.cs.Hu_block(i).rows() == 0
                        || ((s.cs.Hu_block(i) * v - s.cs.hu_block(i)).array() <= 1e-8).all());
                }
            }
        }
    }
}

TEST(Envelope, ArgumentChecks)
{
    const Pair p = scalar_pair(1.1, 0.2, 0.05, 0.9, 0.5);
    EXPECT_THROW(admissible_inputs(p.cs, p.sol, 2, Vec::Zero(1)), Error);
    EXPECT_THROW(admissible_inputs(p.cs, p.sol, 0, Vec::Zero(2)), Error);
    EXPECT_THROW(admissible_inputs(p.cs, p.sol, 0, Vec::Constant(1, 0.95)), Error);
    EXPECT_THROW(coupling_bounds(p.cs, p.sol, -1), Error);
}

TEST(Envelope, RightSidesDoNotShrinkAsPointMovesInward)
{
    // min over each ± row pair of the right side grows as x0 is scaled toward 0
    const Synthesized& s = cached("rotational.model");
    ASSERT_EQ(s.out.status, SolveStatus::feasible);
    for (int i = 0; i < s.cs.d(); ++i) {
        const auto verts = enumerate_vertices(s.sol.gen_sets[i]);
        const Eigen::Index Nu = s.cs.Hu_block(i).rows();
        for (const Vec& x0 : verts) {
            Vec prev;
            for (double alpha : {1.0, 0.75, 0.5, 0.25, 0.0}) {
                const HPolytope P = admissible_inputs(s.cs, s.sol, i, alpha * x0).poly;
                const Eigen::Index N = (P.rows() - Nu) / 2;
                const Vec pair_min = P.h.segment(Nu, N).cwiseMin(P.h.segment(Nu + N, N));
                if (prev.size()) {
                    EXPECT_TRUE(((pair_min - prev).array() >= -1e-12).all()) << "alpha " << alpha;
                }
                // the width of each slab does not depend on x0
                EXPECT_LT((P.h.segment(Nu, N) + P.h.segment(Nu + N, N)
                              - 2.0 * (Vec::Ones(N) - coupling_bounds(s.cs, s.sol, i).first))
                              .cwiseAbs()
                              .maxCoeff(),
                    1e-12);
                EXPECT_FALSE(is_empty(P));
                prev = pair_min;
            }
        }
    }
}
