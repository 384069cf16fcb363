#pragma once

// Robust backward reachability inside a certified invariant set and
// two-goal recurrence controllers built on top of it.

#include "sepinv/envelope.hpp"

#include <array>
#include <ostream>

namespace sepinv {

/// Worst case of aᵀw over w = Σ_{j≠i} A_ij x_j + E_i d_i, x_j ∈ 𝒳_j, d_i ∈ 𝒟_i.
/// Vertex lists are cached for low-dimensional neighbors.
class CouplingSet {
public:
    CouplingSet(const ComposedSystem& cs, const SynthesisSolution& sol, int i)
    {
        for (int j = 0; j < cs.d(); ++j) {
            if (j == i)
                continue;
            Mat Aij = cs.A_block(i, j);
            if (Aij.cwiseAbs().maxCoeff() == 0.0)
                continue;
            add(std::move(Aij), sol.gen_sets[j]);
        }
        if (cs.blocks[i].p > 0)
            add(cs.E_block(i), disturbance_set(cs, i));
    }

    double support(const Vec& a) const
    {
        double s = 0.0;
        for (const auto& t : terms_) {
            const Vec dir = t.M.transpose() * a;
            if (dir.cwiseAbs().maxCoeff() == 0.0)
                continue;
            if (!t.verts.empty()) {
                double best = -std::numeric_limits<double>::infinity();
                for (const auto& v : t.verts)
                    best = std::max(best, dir.dot(v));
                s += best;
            } else {
                s += sepinv::support(t.set, dir);
            }
        }
        return s;
    }

    bool empty() const { return terms_.empty(); }

private:
    struct Term {
        Mat M;
        GenSet set;
        std::vector<Vec> verts;
    };
    std::vector<Term> terms_;

    void add(Mat M, const GenSet& S)
    {
        Term t{std::move(M), S, {}};
        if (S.H.rows() <= 3)
            t.verts = enumerate_vertices(S);
        terms_.push_back(std::move(t));
    }
};

namespace synth_detail {

/// Right sides of P's rows after subtracting the coupling support of each row.
inline Vec tightened_rhs(const HPolytope& P, const CouplingSet& W)
{
    Vec h = P.h;
    if (W.empty())
        return h;
    for (Eigen::Index r = 0; r < P.rows(); ++r)
        h(r) -= W.support(P.H.row(r).transpose());
    return h;
}

/// Envelope rows over (x, u): H_u u ≤ h_u, ±G(A_ii x + B_i u) ≤ 1 − upper.
struct EnvelopeRows {
    Mat Hx, Hu;
    Vec h;
};

inline EnvelopeRows envelope_rows(const ComposedSystem& cs, const SynthesisSolution& sol, int i, const Vec& upper)
{
    const Mat G = cs.Z_block(i) * sol.Hx_block(cs, i);
    const Mat GA = G * cs.A_block(i, i), GB = G * cs.B_block(i);
    const Mat Hu = cs.Hu_block(i);
    const Eigen::Index Nu = Hu.rows(), N = G.rows(), n = GA.cols(), m = GB.cols();
    EnvelopeRows e{Mat::Zero(Nu + 2 * N, n), Mat(Nu + 2 * N, m), Vec(Nu + 2 * N)};
    e.Hu << Hu, GB, -GB;
    e.Hx.middleRows(Nu, N) = GA;
    e.Hx.bottomRows(N) = -GA;
    e.h << cs.hu_block(i), Vec::Ones(N) - upper, Vec::Ones(N) - upper;
    return e;
}

inline void check_subsystem(const ComposedSystem& cs, const SynthesisSolution& sol, int i, const char* who)
{
    if (i < 0 || i >= cs.d())
        throw Error(std::string(who) + ": subsystem index out of range");
    if (static_cast<int>(sol.gen_sets.size()) != cs.d())
        throw Error(std::string(who) + ": solution does not match the system");
}

} // namespace synth_detail

/// {x ∈ 𝒳_i : ∃u in the envelope at x with A_ii x + B_i u + w ∈ target for all w}.
/// An empty result comes back as HPolytope::empty(n_i).
inline HPolytope robust_pre(const ComposedSystem& cs, const SynthesisSolution& sol, int i, const HPolytope& target,
    const CouplingSet& W)
{
    synth_detail::check_subsystem(cs, sol, i, "robust_pre");
    const Eigen::Index n = cs.blocks[i].n, m = cs.blocks[i].m;
    if (target.dim() != n)
        throw Error("robust_pre: target has the wrong dimension", i + 1);
    const Mat A = cs.A_block(i, i), B = cs.B_block(i);
    const HPolytope X = sol.gen_sets[i].to_hpolytope();
    const auto env = synth_detail::envelope_rows(cs, sol, i, coupling_bounds(cs, sol, i).first);
    const Vec ht = synth_detail::tightened_rhs(target, W);

    const Eigen::Index rt = target.rows(), re = env.h.size(), rx = X.rows();
    Mat H = Mat::Zero(rt + re + rx, n + m);
    Vec h(rt + re + rx);
    H.topLeftCorner(rt, n) = target.H * A;
    H.topRightCorner(rt, m) = target.H * B;
    H.block(rt, 0, re, n) = env.Hx;
    H.block(rt, n, re, m) = env.Hu;
    H.bottomLeftCorner(rx, n) = X.H;
    h << ht, env.h, X.h;

    std::vector<Eigen::Index> drop;
    for (Eigen::Index k = 0; k < m; ++k)
        drop.push_back(n + k);
    const HPolytope joint(H, h);
    if (is_empty(joint))
        return HPolytope::empty(n);
    HPolytope out = fm_project(joint, drop);
    if (out.dim() != n || is_empty(out))
        return HPolytope::empty(n);
    return out;
}

inline HPolytope robust_pre(const ComposedSystem& cs, const SynthesisSolution& sol, int i, const HPolytope& target)
{
    return robust_pre(cs, sol, i, target, CouplingSet(cs, sol, i));
}

/// Largest set C ⊆ target ∩ 𝒳_i found by C ← C ∩ Pre(C) with C ⊆ Pre(C).
/// Returns nullopt when the iteration does not settle within max_iter.
inline std::optional<HPolytope> robust_core(const ComposedSystem& cs, const SynthesisSolution& sol, int i,
    const HPolytope& target, const CouplingSet& W, int max_iter = 200)
{
    HPolytope C = remove_redundancy(target.intersect(sol.gen_sets[i].to_hpolytope()));
    for (int it = 0; it < max_iter; ++it) {
        if (is_empty(C))
            return C;
        const HPolytope P = robust_pre(cs, sol, i, C, W);
        if (subset_of(C, P, 1e-9))
            return C;
        C = remove_redundancy(C.intersect(P));
    }
    return std::nullopt;
}

struct ReachLadder {
    int subsystem = 0; ///< 0-based
    HPolytope target;
    /// levels[0] ⊆ target is robustly controlled invariant (target itself when it
    /// already is); levels[r] = Pre(levels[r-1]).
    std::vector<HPolytope> levels;
    bool converged = false;
    bool shrunk_target = false;
    int covered_at = -1; ///< first level containing the other goal
};

/// Smallest r with x ∈ levels[r], or -1.
inline int level_of(const ReachLadder& L, const Vec& x, double tol = 1e-9)
{
    for (std::size_t r = 0; r < L.levels.size(); ++r)
        if (L.levels[r].contains_point(x, tol))
            return static_cast<int>(r);
    return -1;
}

inline ReachLadder reach_ladder(const ComposedSystem& cs, const SynthesisSolution& sol, int i, const HPolytope& target,
    const HPolytope& other_goal, int max_levels = 100)
{
    synth_detail::check_subsystem(cs, sol, i, "reach_ladder");
    const CouplingSet W(cs, sol, i);
    const HPolytope X = sol.gen_sets[i].to_hpolytope();
    const HPolytope goal = remove_redundancy(other_goal.intersect(X));

    ReachLadder L;
    L.subsystem = i;
    L.target = target;
    if (!is_empty(goal) && subset_of(goal, target)) {
        // already at the target: nothing to climb
        L.levels.push_back(remove_redundancy(target.intersect(X)));
        L.converged = true;
        L.covered_at = 0;
        return L;
    }
    const HPolytope base = remove_redundancy(target.intersect(X));
    auto core = robust_core(cs, sol, i, target, W);
    if (!core || is_empty(*core)) {
        L.levels.push_back(base);
        return L;
    }
    L.shrunk_target = !subset_of(base, *core);
    L.levels.push_back(std::move(*core));

    for (int r = 1; r <= max_levels; ++r) {
        HPolytope next = robust_pre(cs, sol, i, L.levels.back(), W);
        if (!subset_of(L.levels.back(), next, 1e-8))
            break; // nesting lost, stop rather than publish a broken ladder
        const bool stalled = subset_of(next, L.levels.back(), 1e-9);
        L.levels.push_back(std::move(next));
        if (subset_of(goal, L.levels.back(), 1e-9)) {
            L.converged = true;
            L.covered_at = r;
            break;
        }
        if (stalled)
            break;
    }
    return L;
}

/// Goal region {x ∈ 𝒳_i : lo ≤ x_c ≤ hi}.
inline HPolytope slab_goal(const ComposedSystem& cs, const SynthesisSolution& sol, int i, Eigen::Index c, double lo,
    double hi)
{
    const Eigen::Index n = cs.blocks[i].n;
    if (c < 0 || c >= n || !(lo <= hi))
        throw Error("slab_goal: bad coordinate or empty interval", i + 1);
    Mat H = Mat::Zero(2, n);
    H(0, c) = 1.0;
    H(1, c) = -1.0;
    Vec h(2);
    h << hi, -lo;
    return remove_redundancy(HPolytope(H, h).intersect(sol.gen_sets[i].to_hpolytope()));
}

struct RecurrenceController {
    int subsystem = 0;
    std::array<ReachLadder, 2> ladders; ///< ladders[k] drives toward goal k
    int mode = 0;                       ///< goal currently pursued
    int last_level = -1;                ///< level of the state at the last policy call

    // cached one-step data
    HPolytope X;
    Mat A, B;
    synth_detail::EnvelopeRows env;
    std::array<std::vector<Vec>, 2> tight; ///< per ladder and level: tightened right sides

    const HPolytope& goal(int k) const { return ladders[k].target; }
};

inline RecurrenceController make_recurrence_controller(const ComposedSystem& cs, const SynthesisSolution& sol, int i,
    const HPolytope& goal0, const HPolytope& goal1, int max_levels = 100)
{
    RecurrenceController c;
    c.subsystem = i;
    c.ladders[0] = reach_ladder(cs, sol, i, goal0, goal1, max_levels);
    c.ladders[1] = reach_ladder(cs, sol, i, goal1, goal0, max_levels);
    c.X = sol.gen_sets[i].to_hpolytope();
    c.A = cs.A_block(i, i);
    c.B = cs.B_block(i);
    c.env = synth_detail::envelope_rows(cs, sol, i, coupling_bounds(cs, sol, i).first);
    const CouplingSet W(cs, sol, i);
    for (int k = 0; k < 2; ++k)
        for (const auto& lv : c.ladders[k].levels)
            c.tight[k].push_back(synth_detail::tightened_rhs(lv, W));
    return c;
}

namespace synth_detail {

/// min ‖u‖∞ over the envelope at x, optionally with A x + B u robustly in a level.
inline std::optional<Vec> min_input(const RecurrenceController& c, const Vec& x, const HPolytope* level,
    const Vec* rhs)
{
    const Eigen::Index m = c.B.cols();
    const Eigen::Index rl = level ? level->rows() : 0, re = c.env.h.size();
    Mat H = Mat::Zero(rl + re + 2 * m, m + 1);
    Vec h(rl + re + 2 * m);
    if (level) {
        H.topLeftCorner(rl, m) = level->H * c.B;
        h.head(rl) = *rhs - level->H * (c.A * x);
    }
    H.block(rl, 0, re, m) = c.env.Hu;
    h.segment(rl, re) = c.env.h - c.env.Hx * x;
    for (Eigen::Index k = 0; k < m; ++k) {
        H(rl + re + 2 * k, k) = 1.0;
        H(rl + re + 2 * k, m) = -1.0;
        H(rl + re + 2 * k + 1, k) = -1.0;
        H(rl + re + 2 * k + 1, m) = -1.0;
    }
    h.tail(2 * m).setZero();
    Vec cost = Vec::Zero(m + 1);
    cost(m) = 1.0;
    const LpResult r = lp_solve(cost, HPolytope(H, h), Sense::minimize);
    if (r.status != LpStatus::optimal || !r.x_star)
        return std::nullopt;
    return Vec(r.x_star->head(m));
}

} // namespace synth_detail

/// One control step. Flips the pursued goal when x is inside it, then drives
/// x to the lowest reachable ladder level below its current one, breaking ties
/// by the smallest ‖u‖∞.
inline Vec recurrence_policy(RecurrenceController& c, const Vec& x)
{
    if (!c.ladders[0].converged || !c.ladders[1].converged)
        throw Error("recurrence_policy: ladders not converged", c.subsystem + 1);
    if (x.size() != c.A.rows())
        throw Error("recurrence_policy: state has the wrong dimension", c.subsystem + 1);
    if (!c.X.contains_point(x, 1e-8))
        throw Error("recurrence_policy: state lies outside the invariant set", c.subsystem + 1);
    if (c.goal(c.mode).contains_point(x, 1e-9))
        c.mode ^= 1;
    const ReachLadder& L = c.ladders[c.mode];
    const int r = level_of(L, x);
    c.last_level = r;
    const int top = r < 0 ? static_cast<int>(L.levels.size()) - 1 : std::max(0, r - 1);
    for (int k = 0; k <= top; ++k)
        if (auto u = synth_detail::min_input(c, x, &L.levels[k], &c.tight[c.mode][k]))
            return *u;
    if (auto u = synth_detail::min_input(c, x, nullptr, nullptr))
        return *u;
    throw Error("recurrence_policy: empty input envelope", c.subsystem + 1);
}

} // namespace sepinv
