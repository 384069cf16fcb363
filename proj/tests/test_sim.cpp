#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace sepinv;
using namespace sepinv::testing;

namespace {

/// scalar_stable: x⁺ = 0.5 x + u with 𝒳 = [-w, w].
struct Scalar {
    ComposedSystem cs = load("scalar_stable.model");
    SynthesisSolution sol;
    explicit Scalar(double w = 1.0) { sol = make_solution(cs, Mat::Constant(1, 1, 1.0 / w), Mat::Zero(1, 1)); }
};

Policy constant_input(double u)
{
    return [u](const Vec&) { return Vec::Constant(1, u); };
}

} // namespace

TEST(Run, ZeroStepsKeepsOnlyInitialState)
{
    Scalar s;
    SimOptions o;
    o.steps = 0;
    const Trajectory tr = run(s.cs, s.sol, {constant_input(0.0)}, Vec::Constant(1, 0.4), o);
    ASSERT_EQ(tr.states.size(), 1u);
    EXPECT_TRUE(tr.inputs.empty());
    EXPECT_TRUE(tr.violations.empty());
}

TEST(Run, ScalarGainMatchesGeometricSequence)
{
    // u = -0.2 x gives x_t = 0.3^t x_0
    Scalar s;
    SimOptions o;
    o.steps = 20;
    const Policy p = [](const Vec& x) { return Vec(-0.2 * x); };
    const Trajectory tr = run(s.cs, s.sol, {p}, Vec::Constant(1, 0.9), o);
    ASSERT_EQ(tr.states.size(), 21u);
    for (int t = 0; t <= 20; ++t)
        EXPECT_NEAR(tr.states[t](0), 0.9 * std::pow(0.3, t), 1e-15) << t;
    EXPECT_TRUE(tr.violations.empty());
}

TEST(Run, ReportsExitsInputViolationsAndGoalEntries)
{
    // u = 0.6 drives x toward 1.2 and out of [-1, 1]
    Scalar s;
    SimOptions o;
    o.steps = 6;
    o.goals = {{HPolytope((Mat(2, 1) << 1, -1).finished(), (Vec(2) << 0.8, -0.5).finished())}};
    const Trajectory tr = run(s.cs, s.sol, {constant_input(0.6)}, Vec::Zero(1), o);
    // x: 0, 0.6, 0.9, 1.05, ...
    ASSERT_FALSE(tr.violations.empty());
    EXPECT_EQ(tr.violations[0].step, 3);
    EXPECT_EQ(tr.violations[0].kind, "state_exit");
    EXPECT_EQ(tr.visit_count(1, 0), 1);
    EXPECT_EQ(tr.visits[0].step, 1);
    const Trajectory big = run(s.cs, s.sol, {constant_input(1.5)}, Vec::Zero(1), o);
    EXPECT_EQ(big.violations[0].kind, "input_violation");
    EXPECT_EQ(big.violations[0].step, 0);
}

TEST(Run, ArgumentChecks)
{
    Scalar s(0.5);
    const SimOptions o;
    EXPECT_THROW(run(s.cs, s.sol, {}, Vec::Zero(1), o), Error);
    EXPECT_THROW(run(s.cs, s.sol, {constant_input(0.0)}, Vec::Zero(2), o), Error);
    EXPECT_THROW(run(s.cs, s.sol, {constant_input(0.0)}, Vec::Constant(1, 0.6), o), Error);
    const Policy wide = [](const Vec&) { return Vec::Zero(2); };
    EXPECT_THROW(run(s.cs, s.sol, {wide}, Vec::Zero(1), o), Error);
    SimOptions neg;
    neg.steps = -1;
    EXPECT_THROW(run(s.cs, s.sol, {constant_input(0.0)}, Vec::Zero(1), neg), Error);
    EXPECT_EQ(parse_dist_mode("vertices"), DistMode::vertices);
    EXPECT_THROW(parse_dist_mode("gaussian"), Error);
}

TEST(Run, CertifiedGainSurvivesWorstCaseDisturbances)
{
    const Synthesized& s = cached("rotational.model");
    ASSERT_EQ(s.out.status, SolveStatus::feasible);
    for (DistMode mode : {DistMode::vertices, DistMode::random}) {
        SimOptions o;
        o.steps = 500;
        o.dist = mode;
        o.seed = 5;
        // start on a vertex of each 𝒳_i
        Vec x0(s.cs.n);
        for (int i = 0; i < s.cs.d(); ++i)
            x0.segment(s.cs.blocks[i].x, s.cs.blocks[i].n) = enumerate_vertices(s.sol.gen_sets[i]).front();
        const Trajectory tr = run(s.cs, s.sol, gain_policies(s.cs, s.sol), x0, o);
        EXPECT_TRUE(tr.violations.empty()) << tr.violations.size() << " violations";
        for (const Vec& d : tr.disturbances)
            EXPECT_LE((s.cs.H_d * d).cwiseAbs().maxCoeff(), 1.0 + 1e-12);
        if (mode == DistMode::vertices) {
            for (const Vec& d : tr.disturbances)
                EXPECT_NEAR((s.cs.H_d * d).cwiseAbs().minCoeff(), 1.0, 1e-12);
        }
    }
}

TEST(Run, SeededRunsAreReproducible)
{
    const Synthesized& s = cached("rotational.model");
    ASSERT_EQ(s.out.status, SolveStatus::feasible);
    SimOptions o;
    o.steps = 50;
    o.dist = DistMode::random;
    o.seed = 99;
    const auto pol = gain_policies(s.cs, s.sol);
    const Vec x0 = Vec::Zero(s.cs.n);
    const Trajectory a = run(s.cs, s.sol, pol, x0, o), b = run(s.cs, s.sol, pol, x0, o);
    for (std::size_t t = 0; t < a.states.size(); ++t)
        EXPECT_EQ(a.states[t], b.states[t]);
    o.seed = 100;
    const Trajectory c = run(s.cs, s.sol, pol, x0, o);
    EXPECT_NE(a.states.back(), c.states.back());
}

TEST(TrajectoryCsv, HeaderRowsAndEvents)
{
    Scalar s;
    SimOptions o;
    o.steps = 4;
    o.goals = {{HPolytope((Mat(2, 1) << 1, -1).finished(), (Vec(2) << 0.8, -0.5).finished())}};
    const Trajectory tr = run(s.cs, s.sol, {constant_input(0.6)}, Vec::Zero(1), o);
    std::ostringstream os;
    write_trajectory_csv(os, s.cs, tr);
    std::istringstream is(os.str());
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(is, line))
        lines.push_back(line);
    ASSERT_EQ(lines.size(), 6u);
    EXPECT_EQ(lines[0], "step,x1,u1,events");
    EXPECT_EQ(lines[1], "0,0,0.59999999999999998,");
    EXPECT_EQ(lines[2], "1,0.59999999999999998,0.59999999999999998,goal1_0");
    EXPECT_NE(lines[4].find("state_exit1"), std::string::npos) << lines[4];
    // no input on the final row
    EXPECT_NE(lines[5].find(",,state_exit1"), std::string::npos) << lines[5];
}
