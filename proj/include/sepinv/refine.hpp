#pragma once

// Verifier-gated iterative enlargement of a certified solution.
//
// Each round anchors the upper blocks of Θ_j at the previous iterate
// (T1 = Λ̄⁰⁻¹Γ_j⁰, T2 = Λ̄⁰⁻¹Ψ_j⁰, the choice Θ_j = Δ_j that makes the slack
// lemma exact), bounds ‖W − W⁰‖_F ≤ cap·‖W⁰‖_F and maximizes the linearized
// score Σ tr((W_i⁰)⁻¹ W_i). Any fixed anchor keeps the inequalities sufficient;
// acceptance still requires a valid LP certificate.

#include "sepinv/lmi.hpp"
#include "sepinv/sdp.hpp"
#include "sepinv/verify.hpp"

#include <functional>
#include <limits>
#include <ostream>

namespace sepinv {

/// Σ_i log|det (H_x^i)^-1|, the volume proxy of the product set.
inline double set_score(const ComposedSystem& cs, const SynthesisSolution& sol)
{
    double s = 0.0;
    for (int i = 0; i < cs.d(); ++i)
        s -= std::log(std::abs(sol.Hx_block(cs, i).determinant()));
    return s;
}

struct RefineOptions {
    int iters = 5;
    double step_cap = 0.25;
    int max_halvings = 40;
    double eps = 0.0;      ///< 0: the solution's own eps, else default_eps
    bool anchor = true;    ///< relax Θ around the previous iterate
    SolveOptions solve;
    /// Applied to each candidate before certification (testing hook).
    std::function<void(SynthesisSolution&)> perturb;
};

struct RefineLogEntry {
    int round = 0;
    int attempt = 0;
    double cap = 0.0;
    std::string outcome; ///< accepted | infeasible | not_certified | score_decreased | recover_failed
    double score = 0.0;
    double worst_margin = 0.0;
};

struct RefineResult {
    std::vector<SynthesisSolution> accepted;
    std::vector<RefineLogEntry> log;
};

namespace refine_detail {

inline Mat lambda_bar(const ComposedSystem& cs, const Vec& lam)
{
    const Eigen::Index q = lmi::slack_dim(cs);
    Mat L = Mat::Zero(q, q);
    for (int i = 0; i < cs.d(); ++i)
        for (Eigen::Index k = 0; k < cs.blocks[i].n; ++k)
            for (Eigen::Index c = 0; c < q; c += cs.n)
                L(c + cs.blocks[i].x + k, c + cs.blocks[i].x + k) = lam(i);
    return L;
}

inline ThetaAnchor anchor_from(const ComposedSystem& cs, const LmiProblem& base, const Vec& y)
{
    const VarMap& vm = base.var_map;
    const Vec lam = vm.value(vm.lambda, y).diagonal();
    const Mat Linv = lambda_bar(cs, lam).inverse();
    ThetaAnchor a;
    for (const auto& f : vm.facets) {
        a.T1.push_back(Linv * vm.value(f.Gamma, y));
        a.T2.push_back(Linv * vm.value(f.Psi, y));
    }
    return a;
}

/// Appends [r, (w − w⁰)ᵀ; (w − w⁰), rI] ⪰ 0 over all W entries.
inline void add_trust_region(const ComposedSystem& cs, LmiProblem& prob, const Mat& W0, double radius)
{
    const VarMap& vm = prob.var_map;
    Eigen::Index q = 0;
    for (int i = 0; i < cs.d(); ++i)
        q += vm.blocks[vm.W[i]].size();
    AffMat dw(q, 1);
    Mat w0(q, 1);
    Eigen::Index row = 0;
    for (int i = 0; i < cs.d(); ++i) {
        const auto& b = vm.blocks[vm.W[i]];
        dw.embed(row, 0, AffMat::full(b.offset, b.size(), 1));
        const auto& br = cs.blocks[i];
        const Mat Wi = W0.block(br.x, br.x, br.n, br.n);
        for (Eigen::Index r = 0; r < b.rows; ++r)
            for (Eigen::Index c = 0; c < b.cols; ++c)
                w0(row + r * b.cols + c, 0) = Wi(r, c);
        row += b.size();
    }
    dw -= AffMat::constant(w0);
    AffMat M(q + 1, q + 1);
    M.embed(0, 0, AffMat::constant(Mat::Constant(1, 1, radius)));
    lmi::embed_pair(M, 0, 1, dw.transpose());
    M.embed(1, 1, AffMat::constant(radius * Mat::Identity(q, q)));
    prob.blocks.push_back(Pencil::from_affine("trust_region", M));
    lmi::finalize(prob);
}

inline Vec score_gradient(const ComposedSystem& cs, const LmiProblem& prob, const Mat& W0)
{
    Vec c = Vec::Zero(prob.num_vars());
    const VarMap& vm = prob.var_map;
    for (int i = 0; i < cs.d(); ++i) {
        const auto& b = vm.blocks[vm.W[i]];
        const auto& br = cs.blocks[i];
        const Mat G = W0.block(br.x, br.x, br.n, br.n).inverse().transpose();
        for (Eigen::Index r = 0; r < b.rows; ++r)
            for (Eigen::Index cc = 0; cc < b.cols; ++cc)
                c(b.offset + r * b.cols + cc) = G(r, cc);
    }
    return c;
}

} // namespace refine_detail

inline RefineResult refine(const ComposedSystem& cs, const SynthesisSolution& sol0, const RefineOptions& opts)
{
    const Certificate c0 = certify(cs, sol0);
    if (!c0.valid)
        throw Error("refine: the initial solution is not certified valid");
    if (opts.iters < 0 || !(opts.step_cap > 0.0))
        throw Error("refine: iters must be >= 0 and step_cap > 0");

    RefineResult res;
    res.accepted.push_back(sol0);
    const double eps = opts.eps > 0.0 ? opts.eps : sol0.eps > 0.0 ? sol0.eps : default_eps(cs);
    const LmiProblem base = build_problem(cs, eps);
    double cap = opts.step_cap;

    for (int round = 1; round <= opts.iters; ++round) {
        const SynthesisSolution& prev = res.accepted.back();
        const double prev_score = set_score(cs, prev);
        const Mat W0 = prev.H_x.inverse();
        const bool have_y = prev.multipliers.size() == base.num_vars();
        bool use_anchor = opts.anchor && have_y;
        bool accepted = false;

        for (int attempt = 0; attempt <= opts.max_halvings && !accepted; ++attempt) {
            RefineLogEntry e{round, attempt, cap, "", prev_score, c0.worst()};
            LmiProblem prob = use_anchor ? build_problem(cs, eps, refine_detail::anchor_from(cs, base, prev.multipliers))
                                         : base;
            const double wn = std::isfinite(cap) ? cap * W0.norm() : 1e6 * (1.0 + W0.norm());
            refine_detail::add_trust_region(cs, prob, W0, wn);
            SolveOptions so = opts.solve;
            so.objective = refine_detail::score_gradient(cs, prob, W0);
            const SolveOutcome out = have_y ? warm_start(prob, prev.multipliers, so) : solve(prob, so);
            if (out.status != SolveStatus::feasible) {
                e.outcome = "infeasible";
                res.log.push_back(e);
                if (use_anchor) {
                    use_anchor = false; // retry the same cap with the plain restriction
                    continue;
                }
                cap *= 0.5;
                continue;
            }
            SynthesisSolution cand;
            try {
                cand = recover(cs, prob, *out.y);
            } catch (const Error&) {
                e.outcome = "recover_failed";
                res.log.push_back(e);
                cap *= 0.5;
                continue;
            }
            if (opts.perturb)
                opts.perturb(cand);
            const Certificate cert = certify(cs, cand);
            e.score = set_score(cs, cand);
            e.worst_margin = cert.worst();
            if (!cert.valid) {
                e.outcome = "not_certified";
            } else if (!(e.score >= prev_score)) {
                e.outcome = "score_decreased";
            } else {
                e.outcome = "accepted";
                accepted = true;
                res.log.push_back(e);
                res.accepted.push_back(std::move(cand));
                break;
            }
            res.log.push_back(e);
            cap *= 0.5;
        }
        if (!accepted)
            break; // round abandoned
    }
    return res;
}

inline std::vector<SynthesisSolution> refine(const ComposedSystem& cs, const SynthesisSolution& sol0, int iters,
    double step_cap)
{
    RefineOptions o;
    o.iters = iters;
    o.step_cap = step_cap;
    return refine(cs, sol0, o).accepted;
}

inline void write_refine_csv(std::ostream& os, const RefineResult& r)
{
    os << "round,attempt,cap,outcome,score,worst_margin\n";
    for (const auto& e : r.log)
        os << e.round << ',' << e.attempt << ',' << lmi::fmt17(e.cap) << ',' << e.outcome << ','
           << lmi::fmt17(e.score) << ',' << lmi::fmt17(e.worst_margin) << '\n';
}

} // namespace sepinv
