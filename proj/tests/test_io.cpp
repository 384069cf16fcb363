#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace sepinv;
using namespace sepinv::testing;

namespace {

template <class F>
std::string text(F&& write)
{
    std::ostringstream os;
    write(os);
    return os.str();
}

} // namespace

TEST(SolutionFile, RoundTripIsExact)
{
    const Synthesized& s = cached("uav.model");
    ASSERT_EQ(s.out.status, SolveStatus::feasible);
    const std::string a = text([&](std::ostream& os) { io::write_solution(os, s.cs, s.sol); });
    const SynthesisSolution back = io::read_solution(a, s.cs);
    EXPECT_EQ(back.H_x, s.sol.H_x);
    EXPECT_EQ(back.K, s.sol.K);
    EXPECT_EQ(back.Lambda, s.sol.Lambda);
    EXPECT_EQ(back.multipliers, s.sol.multipliers);
    EXPECT_EQ(back.eps, s.sol.eps);
    EXPECT_EQ(a, text([&](std::ostream& os) { io::write_solution(os, s.cs, back); }));
    EXPECT_EQ(certify(s.cs, back).worst(), certify(s.cs, s.sol).worst());
}

TEST(SolutionFile, RejectsMismatchAndDamage)
{
    const Synthesized& s = cached("uav.model");
    ASSERT_EQ(s.out.status, SolveStatus::feasible);
    const std::string a = text([&](std::ostream& os) { io::write_solution(os, s.cs, s.sol); });
    EXPECT_THROW(io::read_solution(a, load("rotational.model")), Error);
    auto edited = [&](const std::string& from, const std::string& to) {
        std::string t = a;
        const auto pos = t.find(from);
        EXPECT_NE(pos, std::string::npos) << from;
        return t.replace(pos, from.size(), to);
    };
    EXPECT_THROW(io::read_solution(edited("sepinv-solution 1", "sepinv-solution 9"), s.cs), Error);
    EXPECT_THROW(io::read_solution(edited("\"Z\": [[", "\"Z\": [[7, "), s.cs), Error);
    EXPECT_THROW(io::read_solution(edited("\"Lambda\"", "\"Lambada\""), s.cs), Error);
    EXPECT_THROW(io::read_solution(a.substr(0, a.size() / 2), s.cs), Error);
    EXPECT_THROW(io::load_solution_file("/nonexistent/solution.json", s.cs), Error);
}

TEST(PolytopeFile, RoundTripIncludingEmptyRowSet)
{
    std::mt19937_64 rng(3);
    const HPolytope P(gauss(rng, 5, 3), Vec::Ones(5));
    const std::string a = text([&](std::ostream& os) { io::write_hpolytope(os, P); });
    const HPolytope Q = io::read_hpolytope(io::parse(a, "test"));
    EXPECT_EQ(Q.H, P.H);
    EXPECT_EQ(Q.h, P.h);
    const HPolytope R = io::read_hpolytope(io::parse("{\"dim\": 4, \"H\": [], \"h\": []}", "test"));
    EXPECT_EQ(R.dim(), 4);
    EXPECT_EQ(R.rows(), 0);
    EXPECT_THROW(io::read_hpolytope(io::parse("{\"dim\": 2, \"H\": [[1, 0], [1]], \"h\": [1, 1]}", "t")), Error);
    EXPECT_THROW(io::read_hpolytope(io::parse("{\"dim\": 2, \"H\": [[1, \"x\"]], \"h\": [1]}", "t")), Error);
    EXPECT_THROW(io::parse("{\"dim\": ", "t"), Error);
}

TEST(VertexCsv, SquareCornersWithLabel)
{
    const std::string t = text([](std::ostream& os) {
        io::write_vertices_csv(os, HPolytope::box(Vec::Constant(2, -1.0), Vec::Ones(2)), "X1");
    });
    std::istringstream is(t);
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        EXPECT_EQ(line.rfind("X1,", 0), 0u) << line;
    }
    EXPECT_EQ(rows, 4);
}

TEST(CertificateFile, RoundTrip)
{
    const Synthesized& s = cached("uav.model");
    ASSERT_EQ(s.out.status, SolveStatus::feasible);
    const Certificate c = certify(s.cs, s.sol);
    std::stringstream ss;
    write_certificate(ss, c);
    const Certificate back = io::read_certificate(ss);
    EXPECT_EQ(back.valid, c.valid);
    EXPECT_EQ(back.tolerance, c.tolerance);
    EXPECT_EQ(back.invariance_margins, c.invariance_margins);
    EXPECT_EQ(back.state_margins, c.state_margins);
    EXPECT_EQ(back.input_margins, c.input_margins);
    std::stringstream bad("sepinv-certificate 2\n");
    EXPECT_THROW(io::read_certificate(bad), Error);
    std::stringstream cut("sepinv-certificate 1\ninvariance 3 0.1 0.2\n");
    EXPECT_THROW(io::read_certificate(cut), Error);
}

TEST(LadderFile, RoundTripAndController)
{
    const Synthesized& s = cached("uav.model");
    ASSERT_EQ(s.out.status, SolveStatus::feasible);
    const auto gb = uav_goal_bounds();
    const HPolytope g0 = slab_goal(s.cs, s.sol, 0, 0, gb[0][0], gb[0][1]);
    const HPolytope g1 = slab_goal(s.cs, s.sol, 0, 0, -gb[0][1], -gb[0][0]);
    const RecurrenceController c = make_recurrence_controller(s.cs, s.sol, 0, g0, g1);
    const std::string a = text([&](std::ostream& os) { io::write_ladder(os, c.ladders[0]); });
    const ReachLadder L = io::read_ladder(io::parse(a, "ladder"));
    EXPECT_EQ(L.subsystem, 0);
    EXPECT_EQ(L.converged, c.ladders[0].converged);
    EXPECT_EQ(L.covered_at, c.ladders[0].covered_at);
    ASSERT_EQ(L.levels.size(), c.ladders[0].levels.size());
    EXPECT_EQ(a, text([&](std::ostream& os) { io::write_ladder(os, L); }));

    const io::json j = io::parse(text([&](std::ostream& os) { io::write_controller(os, c); }), "controller");
    io::check_format(j, "sepinv-controller 1", "controller");
    ASSERT_EQ(j["ladders"].size(), 2u);
    EXPECT_EQ(io::read_ladder(j["ladders"][1]).levels.size(), c.ladders[1].levels.size());
    EXPECT_THROW(io::read_ladder(io::parse("{\"format\": \"sepinv-envelope 1\"}", "l")), Error);
}

TEST(EnvelopeFile, RoundTrip)
{
    const Synthesized& s = cached("uav.model");
    ASSERT_EQ(s.out.status, SolveStatus::feasible);
    const InputEnvelope e = admissible_inputs(s.cs, s.sol, 1, Vec::Zero(2));
    const InputEnvelope back = io::read_envelope(
        io::parse(text([&](std::ostream& os) { io::write_envelope(os, e); }), "envelope"));
    EXPECT_EQ(back.subsystem, 1);
    EXPECT_EQ(back.point, e.point);
    EXPECT_EQ(back.coupling_upper, e.coupling_upper);
    EXPECT_EQ(back.coupling_lower, e.coupling_lower);
    EXPECT_EQ(back.poly.H, e.poly.H);
    EXPECT_EQ(back.poly.h, e.poly.h);
}
