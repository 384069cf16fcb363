// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,3] [--expect-fail 4]
//
// Exit status is 0 when the failing criteria are exactly the expected ones.

#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace sepinv;
using namespace sepinv::testing;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

constexpr double kEigTol = 1e-9;

std::string num(double v)
{
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

// ------------------------------------------------------------------ 1. lemmas

/// Gaussian square matrix resampled until σ_min ≥ 0.2, so that PD instances
/// are not lost to the relative refusal threshold.
Mat well_conditioned(std::mt19937_64& rng, Eigen::Index n)
{
    for (;;) {
        const Mat C = gauss(rng, n, n);
        if (Eigen::JacobiSVD<Mat>(C).singularValues()(n - 1) >= 0.2)
            return C;
    }
}

Verdict lemma_suite()
{
    std::mt19937_64 rng(20240501);
    std::uniform_int_distribution<int> dim(1, 5);
    const int trials = 500;
    int fails[6] = {0, 0, 0, 0, 0, 0};
    int hyp_false = 0;

    for (int t = 0; t < trials; ++t) {
        // Lemma 1, forward: composite PD by Schur construction.
        {
            const int a = dim(rng), k = dim(rng), c = dim(rng);
            const Mat A = gauss(rng, a, k), B = gauss(rng, k, c), Z = spd(rng, c);
            const Mat AB = A * B;
            const Mat R = AB * Z.inverse() * AB.transpose() + spd(rng, a);
            const LemmaOutcome o = lemma1_split(R, A, B, Z);
            bool ok = o.witness.has_value();
            if (ok) {
                const Mat& X = o.witness->matrices.at("X");
                ok = lam_min(blk2(R, A, X.inverse())) > -kEigTol && lam_min(blk2(X, B, Z)) > -kEigTol
                    && lam_min(X) > 0.0;
            }
            fails[0] += !ok;
        }
        // Lemma 1, reverse: both split blocks PD for a given X.
        {
            const int a = dim(rng), k = dim(rng), c = dim(rng);
            const Mat X = spd(rng, k), A = gauss(rng, a, k), B = gauss(rng, k, c);
            const Mat R = A * X * A.transpose() + spd(rng, a);
            const Mat Z = B.transpose() * X.inverse() * B + spd(rng, c);
            const bool hyp = lam_min(blk2(R, A, X.inverse())) > 0.0 && lam_min(blk2(X, B, Z)) > 0.0;
            fails[1] += !(hyp && lam_min(blk2(R, A * B, Z)) > -kEigTol);
        }
        // Lemma 2, forward.
        {
            const int n = dim(rng), c = dim(rng);
            const Mat C = well_conditioned(rng, n);
            const Mat X = spd(rng, n), Y = gauss(rng, n, c);
            const Mat CXC = C.transpose() * X * C;
            const Mat Z = Y.transpose() * CXC.inverse() * Y + spd(rng, c);
            const LemmaOutcome o = lemma2_witness(C, X, Y, Z);
            bool ok = o.witness.has_value();
            if (ok) {
                const Mat& P = o.witness->matrices.at("Psi");
                const Mat top = C * P + P.transpose() * C.transpose() - X.inverse();
                ok = lam_min(blk2(top, P.transpose() * Y, Z)) > -kEigTol;
            }
            fails[2] += !ok;
        }
        // Lemma 2, reverse: any Ψ making the split block PD implies the hypothesis.
        {
            const int n = dim(rng), c = dim(rng);
            const Mat C = well_conditioned(rng, n);
            const Mat X = spd(rng, n), S = spd(rng, n), Y = gauss(rng, n, c);
            const Mat Psi = C.inverse() * (0.5 * (X.inverse() + S) + skew(rng, n));
            const Mat top = C * Psi + Psi.transpose() * C.transpose() - X.inverse();
            const Mat PY = Psi.transpose() * Y;
            const Mat Z = PY.transpose() * top.inverse() * PY + spd(rng, c);
            const bool split = lam_min(blk2(top, PY, Z)) > 0.0;
            fails[3] += !(split && lam_min(blk2(C.transpose() * X * C, Y, Z)) > -kEigTol);
        }
        // Lemma 3, forward: Δ ≻ 0 and the hypothesis ≻ 0 give the conclusion.
        {
            const int a = dim(rng), b = dim(rng), c = dim(rng);
            const Mat X = gauss(rng, a, b), Y = gauss(rng, b, a), V = gauss(rng, a, c), W = spd(rng, c);
            const Mat Gamma = spd(rng, b);
            const Mat Xi = Y.transpose() * Gamma.inverse() * Y + spd(rng, a);
            const Mat Delta = blk2(Gamma, Y, Xi);
            const Mat Theta = 0.5 * (Delta + spd(rng, a + b)) + skew(rng, a + b);
            Mat XI(a, a + b);
            XI << -X, Mat::Identity(a, a);
            const Mat M = XI * Theta, Q = Theta + Theta.transpose() - Delta;
            const Mat Z = -Xi + M * Q.inverse() * M.transpose() + V * W.inverse() * V.transpose() + spd(rng, a);
            Mat H(2 * a + b + c, 2 * a + b + c);
            H.setZero();
            H.block(0, 0, a, a) = Z + Xi;
            H.block(0, a, a, a + b) = M;
            H.block(a, 0, a + b, a) = M.transpose();
            H.block(0, 2 * a + b, a, c) = V;
            H.block(2 * a + b, 0, c, a) = V.transpose();
            H.block(a, a, a + b, a + b) = Q;
            H.block(2 * a + b, 2 * a + b, c, c) = W;
            const bool hyp = lam_min(Delta) > 0.0 && lam_min(H) > 0.0;
            bool ok = hyp && lemma3_check(X, Y, Z, V, W, Theta, Gamma, Xi);
            ok = ok && lam_min(blk2(Z + X * Y + Y.transpose() * X.transpose(), V, W)) > -kEigTol;
            fails[4] += !ok;
            // a perturbed Δ that is not PD must be reported as not satisfying the hypothesis
            hyp_false += lemma3_check(X, Y, Z, V, W, Theta, -Gamma, Xi) ? 1 : 0;
        }
        // Lemma 3, reverse with XΓXᵀ added: conclusion PD gives a hypothesis witness.
        {
            const int a = dim(rng), b = dim(rng), c = dim(rng);
            const Mat X = gauss(rng, a, b), Y = gauss(rng, b, a), V = gauss(rng, a, c), W = spd(rng, c);
            const Mat Z = -(X * Y + Y.transpose() * X.transpose()) + V * W.inverse() * V.transpose() + spd(rng, a);
            const LemmaOutcome o = lemma3_reverse_witness(X, Y, Z, V, W);
            bool ok = o.witness.has_value();
            if (ok) {
                const Mat& Th = o.witness->matrices.at("Theta");
                const Mat& G = o.witness->matrices.at("Gamma");
                const Mat& Xi = o.witness->matrices.at("Xi");
                const Mat Delta = blk2(G, Y, Xi);
                Mat XI(a, a + b);
                XI << -X, Mat::Identity(a, a);
                Mat H = Mat::Zero(2 * a + b + c, 2 * a + b + c);
                H.block(0, 0, a, a) = Z + Xi + X * G * X.transpose();
                H.block(0, a, a, a + b) = XI * Th;
                H.block(a, 0, a + b, a) = (XI * Th).transpose();
                H.block(0, 2 * a + b, a, c) = V;
                H.block(2 * a + b, 0, c, a) = V.transpose();
                H.block(a, a, a + b, a + b) = Th + Th.transpose() - Delta;
                H.block(2 * a + b, 2 * a + b, c, c) = W;
                ok = lam_min(Delta) > -kEigTol && lam_min(H) > -kEigTol;
            }
            fails[5] += !ok;
        }
    }
    int total = 0;
    std::ostringstream os;
    const char* names[6] = {"L1 fwd", "L1 rev", "L2 fwd", "L2 rev", "L3 fwd", "L3 rev"};
    for (int k = 0; k < 6; ++k) {
        total += fails[k];
        os << names[k] << ' ' << fails[k] << (k < 5 ? ", " : "");
    }
    os << " failures of " << trials << " each; bogus hypotheses accepted " << hyp_false;
    return {total == 0 && hyp_false == 0, os.str()};
}

// ------------------------------------------------------------------ 2. soundness chain

Verdict soundness_chain()
{
    std::mt19937_64 rng(7);
    int feasible = 0, valid = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 50; ++k) {
        const ComposedSystem cs = compose(random_coupled_model(rng));
        const Synthesized s = synthesize(cs);
        if (s.out.status != SolveStatus::feasible)
            continue;
        ++feasible;
        const Certificate c = certify(cs, s.sol);
        worst = std::min(worst, c.worst());
        valid += c.valid && c.worst() >= 0.0;
    }
    return {feasible > 0 && valid == feasible,
        std::to_string(valid) + "/" + std::to_string(feasible) + " feasible models certified, smallest margin "
            + num(worst)};
}

// ------------------------------------------------------------------ 3. rotational

std::vector<double> worst_per_subsystem(const ComposedSystem& cs, const Certificate& c)
{
    std::vector<double> w(cs.d(), std::numeric_limits<double>::infinity());
    for (Eigen::Index j = 0; j < cs.Nx; ++j) {
        const int i = cs.row_owner(j + 1) - 1;
        w[i] = std::min(w[i], c.invariance_margins(j));
    }
    return w;
}

Verdict rotational()
{
    const Synthesized& s = cached("rotational.model");
    if (s.out.status != SolveStatus::feasible)
        return {false, std::string("solve: ") + to_string(s.out.status)};
    const Certificate c = certify(s.cs, s.sol);
    const auto w = worst_per_subsystem(s.cs, c);
    const bool order = w[1] <= w[0] && w[1] <= w[2];
    return {c.valid && order,
        std::string("feasible, certificate ") + (c.valid ? "valid" : "NOT valid") + ", worst invariance margins "
            + num(w[0]) + " / " + num(w[1]) + " / " + num(w[2])};
}

// ------------------------------------------------------------------ 4. pendulum array

Verdict pendulum()
{
    const Synthesized& s = cached("pendulum.model");
    if (s.out.status != SolveStatus::feasible)
        return {false, std::string("solve: ") + to_string(s.out.status) + " (best margin " + num(s.out.min_margin)
                + "); refine not run"};
    const Certificate c = certify(s.cs, s.sol);
    if (!c.valid)
        return {false, "certificate NOT valid"};
    const RefineResult r = refine(s.cs, s.sol, RefineOptions{});
    bool ok = true;
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& it : r.accepted) {
        const double sc = set_score(s.cs, it);
        ok = ok && certify(s.cs, it).valid && sc >= prev;
        prev = sc;
    }
    return {ok, std::to_string(r.accepted.size() - 1) + " refine rounds accepted, final score " + num(prev)};
}

// ------------------------------------------------------------------ 5. UAV

struct UavRun {
    Trajectory tr;
    std::string ctrl1;
    bool converged = true;
};

UavRun uav_run(const Synthesized& s, const std::array<std::array<double, 2>, 2>& g2)
{
    const auto gb = uav_goal_bounds();
    UavRun out;
    std::vector<Policy> pol;
    SimOptions so;
    so.steps = 200;
    so.goals.resize(2);
    for (int i = 0; i < 2; ++i) {
        const auto& g = i == 0 ? std::array<std::array<double, 2>, 2>{{{gb[0][0], gb[0][1]}, {-gb[0][1], -gb[0][0]}}}
                               : g2;
        const HPolytope a = slab_goal(s.cs, s.sol, i, 0, g[0][0], g[0][1]);
        const HPolytope b = slab_goal(s.cs, s.sol, i, 0, g[1][0], g[1][1]);
        auto ctrl = std::make_shared<RecurrenceController>(make_recurrence_controller(s.cs, s.sol, i, a, b));
        out.converged = out.converged && ctrl->ladders[0].converged && ctrl->ladders[1].converged;
        if (i == 0) {
            std::ostringstream os;
            io::write_controller(os, *ctrl);
            out.ctrl1 = os.str();
        }
        pol.push_back(local_policy(s.cs, ctrl));
        so.goals[i] = {a, b};
    }
    if (out.converged)
        out.tr = run(s.cs, s.sol, pol, Vec::Zero(s.cs.n), so);
    return out;
}

bool visits_ok(const Trajectory& tr, int* least)
{
    *least = std::numeric_limits<int>::max();
    for (int i = 1; i <= 2; ++i)
        for (int g = 0; g < 2; ++g)
            *least = std::min(*least, tr.visit_count(i, g));
    return *least >= 3 && tr.violations.empty();
}

Verdict uav()
{
    const Synthesized& s = cached("uav.model");
    if (s.out.status != SolveStatus::feasible)
        return {false, std::string("solve: ") + to_string(s.out.status)};
    if (!certify(s.cs, s.sol).valid)
        return {false, "certificate NOT valid"};
    const auto gb = uav_goal_bounds();
    const UavRun a = uav_run(s, {{{gb[1][0], gb[1][1]}, {-gb[1][1], -gb[1][0]}}});
    if (!a.converged)
        return {false, "a recurrence ladder did not converge"};
    int least_a = 0, least_b = 0;
    const bool ok_a = visits_ok(a.tr, &least_a);
    const UavRun b = uav_run(s, {{{-0.18, -0.05}, {0.18, 0.33}}});
    if (!b.converged)
        return {false, "re-synthesis: a ladder did not converge"};
    const bool ok_b = visits_ok(b.tr, &least_b);
    const bool same = a.ctrl1 == b.ctrl1;
    return {ok_a && ok_b && same,
        "ladders converged; fewest goal visits " + std::to_string(least_a) + ", violations "
            + std::to_string(a.tr.violations.size()) + "; re-synthesis fewest visits " + std::to_string(least_b)
            + ", violations " + std::to_string(b.tr.violations.size()) + ", subsystem 1 controller "
            + (same ? "byte-identical" : "CHANGED")};
}

// ------------------------------------------------------------------ 6. envelopes

/// max over x_j ∈ 𝒳_j and d ∈ 𝒟_i of |G(A_ii x + B u + Σ A_ij x_j + E d)| - 1, by direct LPs.
double worst_successor(const ComposedSystem& cs, const SynthesisSolution& sol, int i, const Vec& x, const Vec& u)
{
    const auto& bi = cs.blocks[i];
    const Mat G = cs.Z_block(i) * sol.H_x.block(bi.x, bi.x, bi.n, bi.n);
    const Vec base = G * (cs.A.block(bi.x, bi.x, bi.n, bi.n) * x + cs.B.block(bi.x, bi.u, bi.n, bi.m) * u);
    double worst = -std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < G.rows(); ++r) {
        for (double sgn : {1.0, -1.0}) {
            const Vec g = sgn * G.row(r).transpose();
            double v = sgn * base(r);
            for (int j = 0; j < cs.d(); ++j) {
                if (j == i)
                    continue;
                const auto& bj = cs.blocks[j];
                const Vec c = cs.A.block(bi.x, bj.x, bi.n, bj.n).transpose() * g;
                if (c.cwiseAbs().maxCoeff() == 0.0)
                    continue;
                const Mat F = cs.Z_block(j) * sol.H_x.block(bj.x, bj.x, bj.n, bj.n);
                Mat H(2 * F.rows(), bj.n);
                H << F, -F;
                const LpResult lr = lp_solve(c, HPolytope(H, Vec::Ones(2 * F.rows())));
                v += *lr.value;
            }
            if (bi.p > 0) {
                const Vec c = cs.E.block(bi.x, bi.d, bi.n, bi.p).transpose() * g;
                const Mat Hdinv = cs.H_d.block(bi.d, bi.d, bi.p, bi.p).inverse();
                v += (Hdinv.transpose() * c).cwiseAbs().sum(); // max over the parallelotope
            }
            worst = std::max(worst, v - 1.0);
        }
    }
    return worst;
}

Verdict envelopes()
{
    int points = 0, empty = 0, missing_gain = 0, unsafe = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (const char* name : {"rotational.model", "uav.model"}) {
        const Synthesized& s = cached(name);
        if (s.out.status != SolveStatus::feasible)
            return {false, std::string(name) + " is not feasible"};
        for (int i = 0; i < s.cs.d(); ++i) {
            const auto& b = s.cs.blocks[i];
            HitAndRun hr(s.sol.gen_sets[i].to_hpolytope(), Vec::Zero(b.n), 100 + i);
            hr.burn_in(50);
            const Mat Kii = s.sol.K.block(b.u, b.x, b.m, b.n);
            for (int k = 0; k < 500; ++k) {
                const Vec x = hr.next();
                const InputEnvelope env = admissible_inputs(s.cs, s.sol, i, x);
                ++points;
                if (is_empty(env.poly)) {
                    ++empty;
                    continue;
                }
                missing_gain += !env.poly.contains_point(Kii * x, 1e-8);
                for (const Vec& u : enumerate_vertices(env.poly)) {
                    const double w = worst_successor(s.cs, s.sol, i, x, u);
                    worst = std::max(worst, w);
                    unsafe += w > 1e-8 || (s.cs.Hu_block(i) * u - s.cs.hu_block(i)).maxCoeff() > 1e-8;
                }
            }
        }
    }
    return {empty == 0 && missing_gain == 0 && unsafe == 0,
        std::to_string(points) + " points: " + std::to_string(empty) + " empty, " + std::to_string(missing_gain)
            + " without the gain input, " + std::to_string(unsafe) + " unsafe vertices (largest residual "
            + num(worst) + ")"};
}

// ------------------------------------------------------------------ 7. LP / geometry

HPolytope random_polytope(std::mt19937_64& rng, int n)
{
    std::uniform_int_distribution<int> rows(n + 3, 12);
    std::uniform_real_distribution<double> off(0.3, 1.5);
    const int m = rows(rng);
    Mat H(m + 2 * n, n);
    Vec h(m + 2 * n);
    for (int r = 0; r < m; ++r) {
        H.row(r) = gauss(rng, 1, n).normalized();
        h(r) = off(rng);
    }
    // a loose box keeps it bounded
    H.bottomRows(2 * n) << Mat::Identity(n, n), -Mat::Identity(n, n);
    h.tail(2 * n).setConstant(2.0);
    return HPolytope(H, h);
}

/// Brute-force vertices: every n-subset of rows, solved and filtered for feasibility.
std::vector<Vec> brute_vertices(const HPolytope& P)
{
    const int n = static_cast<int>(P.dim()), m = static_cast<int>(P.rows());
    std::vector<Vec> out;
    std::vector<int> idx(n);
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == n) {
            Mat A(n, n);
            Vec b(n);
            for (int k = 0; k < n; ++k) {
                A.row(k) = P.H.row(idx[k]);
                b(k) = P.h(idx[k]);
            }
            Eigen::FullPivLU<Mat> lu(A);
            if (lu.rank() < n)
                return;
            const Vec x = lu.solve(b);
            if (((P.H * x - P.h).array() <= 1e-9).all())
                out.push_back(x);
            return;
        }
        for (int r = start; r < m; ++r) {
            idx[depth] = r;
            rec(r + 1, depth + 1);
        }
    };
    rec(0, 0);
    return out;
}

Verdict geometry()
{
    std::mt19937_64 rng(99);
    int lp_bad = 0, fm_bad = 0, fm_inside = 0, fm_total = 0;
    double lp_err = 0.0;
    for (int t = 0; t < 200; ++t) {
        const int n = 2 + t % 2;
        const HPolytope P = random_polytope(rng, n);
        const Vec c = gauss(rng, n, 1);
        const LpResult r = lp_solve(c, P);
        double best = -std::numeric_limits<double>::infinity();
        for (const Vec& v : brute_vertices(P))
            best = std::max(best, c.dot(v));
        const double err = r.optimal() ? std::abs(*r.value - best) / std::max(1.0, std::abs(best)) : 1.0;
        lp_err = std::max(lp_err, err);
        lp_bad += err > 1e-8;
    }
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        // 3-D polytope, project out one coordinate (interval oracle) or two (LP oracle)
        const HPolytope P = random_polytope(rng, 3);
        const bool two = t % 2;
        const std::vector<Eigen::Index> drop = two ? std::vector<Eigen::Index>{1, 2} : std::vector<Eigen::Index>{1};
        const HPolytope Q = fm_project(P, drop);
        for (int k = 0; k < 100; ++k) {
            Vec y(Q.dim());
            for (Eigen::Index c = 0; c < y.size(); ++c)
                y(c) = 2.2 * ud(rng);
            bool feas;
            if (!two) {
                double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
                for (Eigen::Index r = 0; r < P.rows(); ++r) {
                    const double a = P.H(r, 1), rest = P.h(r) - P.H(r, 0) * y(0) - P.H(r, 2) * y(1);
                    if (a > 1e-14)
                        hi = std::min(hi, rest / a);
                    else if (a < -1e-14)
                        lo = std::max(lo, rest / a);
                    else if (rest < -1e-9)
                        lo = std::numeric_limits<double>::infinity();
                }
                feas = lo <= hi + 1e-9;
            } else {
                // fix x0 = y, feasibility of the remaining 2-D slice
                Mat Hs = P.H.rightCols(2);
                Vec hs = P.h - P.H.col(0) * y(0);
                feas = !is_empty(HPolytope(Hs, hs));
            }
            const bool member = Q.contains_point(y, 1e-9);
            fm_bad += feas != member;
            fm_inside += member;
            ++fm_total;
        }
    }
    return {lp_bad == 0 && fm_bad == 0,
        "LP vs vertices: " + std::to_string(lp_bad) + "/200 mismatches (max rel err " + num(lp_err)
            + "); projection: " + std::to_string(fm_bad) + "/" + std::to_string(fm_total) + " mismatches ("
            + std::to_string(fm_inside) + " inside)"};
}

// ------------------------------------------------------------------ 8. negative control

Verdict negative_control()
{
    const ComposedSystem cs = load("scalar_underactuated.model");
    const Synthesized s = synthesize(cs);
    const double a = cs.A(0, 0), b = cs.B(0, 0), e = cs.E(0, 0);
    const double umax = cs.h_u(0) / std::abs(cs.H_u(0, 0)), dmax = 1.0 / std::abs(cs.H_d(0, 0));
    const double smax = cs.h_s(0) / std::abs(cs.H_s(0, 0));
    // Set {|x| ≤ |w|}, gain k = k̂/w. Certifiable iff
    // |a w + b k̂| + |e| d_max ≤ |w|, |k̂| ≤ u_max, |w| ≤ x_max.
    long found = 0, points = 0;
    for (int iw = -1000; iw <= 1000; ++iw)
        for (int ik = -1000; ik <= 1000; ++ik) {
            const double w = iw * 0.01, k = ik * 0.01;
            ++points;
            if (w == 0.0)
                continue;
            found += std::abs(a * w + b * k) + std::abs(e) * dmax <= std::abs(w) && std::abs(k) <= umax
                && std::abs(w) <= smax;
        }
    const bool infeasible = s.out.status == SolveStatus::no_feasible_point_found;
    return {infeasible && found == 0,
        std::string("solve: ") + to_string(s.out.status) + "; grid " + std::to_string(points) + " points, "
            + std::to_string(found) + " certifiable"};
}

std::set<int> parse_list(const std::string& s)
{
    std::set<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty())
            out.insert(std::stoi(tok));
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    std::set<int> only, expect_fail;
    for (int k = 1; k < argc; ++k) {
        const std::string a = argv[k];
        if (a == "--only" && k + 1 < argc)
            only = parse_list(argv[++k]);
        else if (a == "--expect-fail" && k + 1 < argc)
            expect_fail = parse_list(argv[++k]);
        else {
            std::cerr << "usage: acceptance [--only LIST] [--expect-fail LIST]\n";
            return 1;
        }
    }
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
        {"lemma oracle suite", lemma_suite},
        {"soundness chain on random coupled models", soundness_chain},
        {"rotational example", rotational},
        {"pendulum array", pendulum},
        {"UAV/robot recurrence", uav},
        {"envelope soundness", envelopes},
        {"LP and projection oracles", geometry},
        {"under-actuated negative control", negative_control},
    };
    int unexpected = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && !only.count(id))
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[k].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (id == 1 && secs >= 30.0) {
            v.pass = false;
            v.detail += "; too slow";
        }
        const bool expected = expect_fail.count(id) > 0;
        unexpected += v.pass == expected;
        std::cout << "criterion " << id << " " << (v.pass ? "PASS" : "FAIL") << (expected ? " (expected failure)" : "")
                  << " [" << num(secs) << " s] " << criteria[k].first << ": " << v.detail << std::endl;
    }
    return unexpected == 0 ? 0 : 1;
}
