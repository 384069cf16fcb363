#pragma once

#include "sepinv/lmi.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace sepinv {

struct SolveOptions {
    int max_iter = 400;
    double tol_margin = 0.0;         ///< feasible iff min_b λ_min(F_b) − eps ≥ tol_margin
    std::string backend = "internal"; ///< "internal" or a shell command (see solve_external)
    double time_limit = 3600.0;      ///< seconds
    std::uint64_t seed = 0;          ///< nonzero: perturb the starting point
    double box = 1e3;                ///< |y_i| ≤ box
    std::optional<Vec> objective;    ///< phase 2: maximize objective·y keeping feasibility
    int phase2_iter = 80;
    double phase2_gap = 1e-4;        ///< relative duality-gap target of phase 2
    bool verbose = false;
};

enum class SolveStatus { feasible, no_feasible_point_found, iteration_limit, time_limit };

inline const char* to_string(SolveStatus s)
{
    switch (s) {
    case SolveStatus::feasible: return "feasible";
    case SolveStatus::no_feasible_point_found: return "no_feasible_point_found";
    case SolveStatus::iteration_limit: return "iteration_limit";
    case SolveStatus::time_limit: return "time_limit";
    }
    return "?";
}

struct TraceEntry {
    int phase = 1;
    int iter = 0;
    double t = 0.0;      ///< phase 1: current margin variable; phase 2: objective value
    double margin = 0.0; ///< min_b λ_min(F_b) − eps at the accepted iterate
    double tau = 0.0;
    double step = 0.0;
    double decrement = 0.0;
};

struct SolveOutcome {
    SolveStatus status = SolveStatus::no_feasible_point_found;
    std::optional<Vec> y;
    double min_margin = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    std::vector<TraceEntry> trace;
    std::string message;
};

namespace sdp_detail {

/// Preprocessed pencil: upper-triangle entries grouped by variable.
struct Block {
    int group = -1;
    Eigen::Index size = 0;
    bool diagonal = false;
    Mat F0;
    std::vector<int> vars;
    std::vector<int> ptr;
    std::vector<Eigen::Index> er, ec;
    std::vector<double> ev;

    Mat eval(const Vec& y, double shift) const
    {
        Mat m = F0;
        for (std::size_t k = 0; k < vars.size(); ++k) {
            const double yv = y(vars[k]);
            if (yv == 0.0)
                continue;
            for (int e = ptr[k]; e < ptr[k + 1]; ++e) {
                m(er[e], ec[e]) += ev[e] * yv;
                if (er[e] != ec[e])
                    m(ec[e], er[e]) += ev[e] * yv;
            }
        }
        m.diagonal().array() -= shift;
        return m;
    }
};

struct Layout {
    int num_vars = 0;
    int num_groups = 0;
    std::vector<int> group;          ///< per var, merged group or -1
    std::vector<int> local;          ///< per var, index within its group / shared list
    std::vector<std::vector<int>> group_vars;
    std::vector<int> shared_vars;
    std::vector<Block> blocks;
    std::vector<std::vector<int>> group_blocks; ///< block ids per group
    std::vector<int> shared_blocks;
    double nu = 0.0; ///< barrier parameter (Σ block sizes + 2·num_vars)
};

inline int uf_find(std::vector<int>& p, int a)
{
    while (p[a] != a)
        a = p[a] = p[p[a]];
    return a;
}

inline Layout make_layout(const LmiProblem& prob)
{
    Layout L;
    L.num_vars = prob.num_vars();
    if (static_cast<int>(prob.var_group.size()) != L.num_vars)
        throw Error("solve: var_group size mismatch");
    int maxg = -1;
    for (int g : prob.var_group)
        maxg = std::max(maxg, g);
    std::vector<int> parent(maxg + 1);
    std::iota(parent.begin(), parent.end(), 0);
    for (const auto& p : prob.blocks) {
        if (p.size <= 0)
            continue;
        int first = -1;
        for (const auto& c : p.coeffs) {
            if (c.var < 0 || c.var >= L.num_vars)
                throw Error("solve: block '" + p.label + "' references an unknown variable");
            const int g = prob.var_group[c.var];
            if (g < 0)
                continue;
            if (first < 0)
                first = g;
            else
                parent[uf_find(parent, g)] = uf_find(parent, first);
        }
    }
    std::vector<int> remap(maxg + 1, -1);
    L.group.assign(L.num_vars, -1);
    L.local.assign(L.num_vars, -1);
    for (int v = 0; v < L.num_vars; ++v) {
        const int g0 = prob.var_group[v];
        if (g0 < 0) {
            L.local[v] = static_cast<int>(L.shared_vars.size());
            L.shared_vars.push_back(v);
            continue;
        }
        const int root = uf_find(parent, g0);
        if (remap[root] < 0) {
            remap[root] = L.num_groups++;
            L.group_vars.emplace_back();
        }
        const int g = remap[root];
        L.group[v] = g;
        L.local[v] = static_cast<int>(L.group_vars[g].size());
        L.group_vars[g].push_back(v);
    }
    L.group_blocks.resize(L.num_groups);
    for (const auto& p : prob.blocks) {
        if (p.size <= 0)
            continue;
        Block b;
        b.size = p.size;
        b.diagonal = p.diagonal;
        b.F0 = Mat::Zero(p.size, p.size);
        for (const auto& e : p.constant) {
            b.F0(e.row, e.col) += e.value;
            if (e.row != e.col)
                b.F0(e.col, e.row) += e.value;
        }
        for (const auto& c : p.coeffs) {
            if (b.vars.empty() || b.vars.back() != c.var) {
                b.vars.push_back(c.var);
                b.ptr.push_back(static_cast<int>(b.er.size()));
            }
            b.er.push_back(c.row);
            b.ec.push_back(c.col);
            b.ev.push_back(c.coeff);
            if (L.group[c.var] >= 0)
                b.group = L.group[c.var];
        }
        b.ptr.push_back(static_cast<int>(b.er.size()));
        L.nu += static_cast<double>(p.size);
        const int id = static_cast<int>(L.blocks.size());
        if (b.group >= 0)
            L.group_blocks[b.group].push_back(id);
        else
            L.shared_blocks.push_back(id);
        L.blocks.push_back(std::move(b));
    }
    L.nu += 2.0 * L.num_vars;
    return L;
}

/// Barrier path-following engine. Phase 1 minimizes −τ·t + φ(y, t) with
/// φ = −Σ log det(F_b(y) − tI) − Σ log(R² − y_i²); phase 2 fixes t = shift
/// and minimizes −τ·cᵀy + φ.
class Engine {
public:
    Engine(const Layout& L, double box) : L_(L), R_(box) {}

    /// Barrier value; +inf outside the domain.
    double phi(const Vec& y, double t) const
    {
        double f = 0.0;
        for (int v = 0; v < L_.num_vars; ++v) {
            const double a = R_ - y(v), b = R_ + y(v);
            if (!(a > 0.0 && b > 0.0))
                return inf();
            f -= std::log(a) + std::log(b);
        }
        for (const auto& b : L_.blocks) {
            const Mat F = b.eval(y, t);
            if (b.diagonal) {
                for (Eigen::Index i = 0; i < b.size; ++i) {
                    if (!(F(i, i) > 0.0))
                        return inf();
                    f -= std::log(F(i, i));
                }
            } else {
                Eigen::LLT<Mat> llt(F);
                if (llt.info() != Eigen::Success)
                    return inf();
                const Mat& Lm = llt.matrixLLT();
                for (Eigen::Index i = 0; i < b.size; ++i) {
                    const double d = Lm(i, i);
                    if (!(d > 0.0))
                        return inf();
                    f -= 2.0 * std::log(d);
                }
            }
        }
        return f;
    }

    /// Newton direction for f = −τ·t + φ (phase 1) or −τ·cᵀy + φ (phase 2),
    /// using the arrow structure: dense per-group Hessians, Schur complement
    /// over the shared variables and t.
    void newton(const Vec& y, double t, bool t_var, double tau, const Vec* c, Vec& dy, double& dt)
    {
        const int ns = static_cast<int>(L_.shared_vars.size()) + (t_var ? 1 : 0);
        const int it = t_var ? ns - 1 : -1;
        Mat Hss = Mat::Zero(ns, ns);
        Vec gs = Vec::Zero(ns);
        std::vector<Vec> a_g(L_.num_groups);
        std::vector<Mat> B_g(L_.num_groups);

        // box barrier and linear objective on shared vars
        for (int k = 0; k < static_cast<int>(L_.shared_vars.size()); ++k) {
            const int v = L_.shared_vars[k];
            box_terms(y(v), gs(k), Hss(k, k));
            if (c)
                gs(k) -= tau * (*c)(v);
        }
        if (t_var)
            gs(it) -= tau;

        for (int bid : L_.shared_blocks)
            accumulate(L_.blocks[bid], y, t, it, nullptr, nullptr, nullptr, Hss, gs);

        for (int g = 0; g < L_.num_groups; ++g) {
            const auto& gv = L_.group_vars[g];
            const int k = static_cast<int>(gv.size());
            Mat Hgg = Mat::Zero(k, k);
            Mat Hgs = Mat::Zero(k, ns);
            Vec gg = Vec::Zero(k);
            for (int q = 0; q < k; ++q) {
                box_terms(y(gv[q]), gg(q), Hgg(q, q));
                if (c)
                    gg(q) -= tau * (*c)(gv[q]);
            }
            for (int bid : L_.group_blocks[g])
                accumulate(L_.blocks[bid], y, t, it, &Hgg, &Hgs, &gg, Hss, gs);
            Eigen::LLT<Mat> llt(Hgg);
            if (llt.info() != Eigen::Success) {
                Hgg.diagonal().array() += 1e-12 * (1.0 + Hgg.diagonal().cwiseAbs().maxCoeff());
                llt.compute(Hgg);
            }
            a_g[g] = llt.solve(gg);
            B_g[g] = llt.solve(Hgs);
            Hss.noalias() -= Hgs.transpose() * B_g[g];
            gs.noalias() -= Hgs.transpose() * a_g[g];
        }
        // gs now holds the reduced gradient; the full gradient is kept for the decrement
        Vec ds = Vec::Zero(ns);
        if (ns > 0) {
            Hss = linalg::symmetrize(Hss);
            Eigen::LDLT<Mat> ldlt(Hss);
            ds = -ldlt.solve(gs);
        }
        dy = Vec::Zero(L_.num_vars);
        for (int k = 0; k < static_cast<int>(L_.shared_vars.size()); ++k)
            dy(L_.shared_vars[k]) = ds(k);
        dt = t_var ? ds(it) : 0.0;
        for (int g = 0; g < L_.num_groups; ++g) {
            const Vec dg = -(a_g[g] + B_g[g] * ds);
            for (int q = 0; q < static_cast<int>(dg.size()); ++q)
                dy(L_.group_vars[g][q]) = dg(q);
        }
    }

    /// Full gradient of f at (y, t).
    void gradient(const Vec& y, double t, bool t_var, double tau, const Vec* c, Vec& gy, double& gt) const
    {
        gy = Vec::Zero(L_.num_vars);
        gt = t_var ? -tau : 0.0;
        for (int v = 0; v < L_.num_vars; ++v) {
            double h = 0.0;
            box_terms(y(v), gy(v), h);
            if (c)
                gy(v) -= tau * (*c)(v);
        }
        for (const auto& b : L_.blocks) {
            const Mat F = b.eval(y, t);
            Mat S;
            if (b.diagonal)
                S = F.diagonal().cwiseInverse().asDiagonal();
            else
                S = Eigen::LLT<Mat>(F).solve(Mat::Identity(b.size, b.size));
            for (std::size_t k = 0; k < b.vars.size(); ++k) {
                double tr = 0.0;
                for (int e = b.ptr[k]; e < b.ptr[k + 1]; ++e)
                    tr += b.ev[e] * (b.er[e] == b.ec[e] ? 1.0 : 2.0) * S(b.er[e], b.ec[e]);
                gy(b.vars[k]) -= tr;
            }
            if (t_var)
                gt += S.trace();
        }
    }

private:
    static double inf() { return std::numeric_limits<double>::infinity(); }

    void box_terms(double yv, double& g, double& h) const
    {
        const double a = 1.0 / (R_ - yv), b = 1.0 / (R_ + yv);
        g += a - b;
        h += a * a + b * b;
    }

    /// Add one block's barrier gradient/Hessian. Group-local entries go to
    /// Hgg/Hgs/gg, shared ones to Hss/gs; `it` is the shared index of t or -1.
    void accumulate(const Block& b, const Vec& y, double t, int it, Mat* Hgg, Mat* Hgs, Vec* gg, Mat& Hss,
        Vec& gs) const
    {
        const Mat F = b.eval(y, t);
        const int nv = static_cast<int>(b.vars.size());
        auto add_h = [&](int va, int vb, double h) {
            const int ga = va < 0 ? -1 : L_.group[va], gb = vb < 0 ? -1 : L_.group[vb];
            const int la = va < 0 ? it : L_.local[va], lb = vb < 0 ? it : L_.local[vb];
            if (ga >= 0 && gb >= 0) {
                (*Hgg)(la, lb) += h;
                if (la != lb || va != vb)
                    (*Hgg)(lb, la) += h;
            } else if (ga >= 0) {
                (*Hgs)(la, lb) += h;
            } else if (gb >= 0) {
                (*Hgs)(lb, la) += h;
            } else {
                Hss(la, lb) += h;
                if (la != lb || va != vb)
                    Hss(lb, la) += h;
            }
        };
        auto add_g = [&](int v, double g) {
            if (v < 0)
                gs(it) += g;
            else if (L_.group[v] >= 0)
                (*gg)(L_.local[v]) += g;
            else
                gs(L_.local[v]) += g;
        };

        if (b.diagonal) {
            // independent scalar barriers −log(f_i − t)
            std::vector<std::vector<std::pair<int, double>>> rows(b.size);
            for (int k = 0; k < nv; ++k)
                for (int e = b.ptr[k]; e < b.ptr[k + 1]; ++e)
                    rows[b.er[e]].push_back({b.vars[k], b.ev[e]});
            for (Eigen::Index i = 0; i < b.size; ++i) {
                const double s = 1.0 / F(i, i);
                const double s2 = s * s;
                const auto& r = rows[i];
                for (std::size_t p = 0; p < r.size(); ++p) {
                    add_g(r[p].first, -r[p].second * s);
                    for (std::size_t q = p; q < r.size(); ++q)
                        add_h(r[p].first, r[q].first, r[p].second * r[q].second * s2);
                    if (it >= 0)
                        add_h(r[p].first, -1, -r[p].second * s2);
                }
                if (it >= 0) {
                    gs(it) += s;
                    Hss(it, it) += s2;
                }
            }
            return;
        }

        const Mat S = Eigen::LLT<Mat>(F).solve(Mat::Identity(b.size, b.size));
        Mat M(b.size, b.size);
        for (int ka = 0; ka < nv; ++ka) {
            // M = S F_a S
            M.setZero();
            double tr = 0.0;
            for (int e = b.ptr[ka]; e < b.ptr[ka + 1]; ++e) {
                const auto r = b.er[e], cc = b.ec[e];
                const double v = b.ev[e];
                if (r == cc) {
                    M.noalias() += v * S.col(r) * S.row(r);
                    tr += v * S(r, r);
                } else {
                    M.noalias() += v * S.col(r) * S.row(cc);
                    M.noalias() += v * S.col(cc) * S.row(r);
                    tr += 2.0 * v * S(r, cc);
                }
            }
            const int va = b.vars[ka];
            add_g(va, -tr);
            for (int kb = ka; kb < nv; ++kb) {
                double h = 0.0;
                for (int e = b.ptr[kb]; e < b.ptr[kb + 1]; ++e)
                    h += b.ev[e] * (b.er[e] == b.ec[e] ? 1.0 : 2.0) * M(b.er[e], b.ec[e]);
                add_h(va, b.vars[kb], h);
            }
            if (it >= 0)
                add_h(va, -1, -M.trace());
        }
        if (it >= 0) {
            gs(it) += S.trace();
            Hss(it, it) += S.squaredNorm();
        }
    }

    const Layout& L_;
    double R_;
};

inline double min_eig_all(const Layout& L, const Vec& y)
{
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : L.blocks) {
        const Mat F = b.eval(y, 0.0);
        m = std::min(m, b.diagonal ? F.diagonal().minCoeff() : linalg::min_eig(F));
    }
    return m;
}

/// Backtracking line search on f; returns the accepted step (0 if none).
template <typename F>
double line_search(F&& f, double f0, double slope, int max_halvings = 60)
{
    double alpha = 1.0;
    for (int k = 0; k < max_halvings; ++k, alpha *= 0.5) {
        const double v = f(alpha);
        if (std::isfinite(v) && v <= f0 + 1e-4 * alpha * slope)
            return alpha;
    }
    return 0.0;
}

} // namespace sdp_detail

namespace sdp_detail {

inline SolveOutcome solve_internal(const LmiProblem& prob, const Vec& y_init, const SolveOptions& opts)
{
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };

    SolveOutcome out;
    const Layout L = make_layout(prob);
    Engine eng(L, opts.box);
    const double eps = prob.eps;

    Vec y = y_init;
    if (opts.seed != 0) {
        std::mt19937_64 rng(opts.seed);
        std::normal_distribution<double> nd(0.0, 1e-3);
        for (int v = 0; v < y.size(); ++v)
            y(v) += nd(rng);
    }
    y = y.cwiseMax(-0.5 * opts.box).cwiseMin(0.5 * opts.box);

    auto finish_feasible = [&](const Vec& yy) {
        out.status = SolveStatus::feasible;
        out.y = yy;
        out.min_margin = min_margin(prob, yy);
    };

    double lam0 = L.blocks.empty() ? 1.0 : min_eig_all(L, y);
    if (lam0 - eps >= opts.tol_margin && min_margin(prob, y) >= opts.tol_margin) {
        finish_feasible(y);
    } else {
        // phase 1
        const double gap0 = std::max(1.0, std::abs(lam0));
        double t = lam0 - gap0;
        // start near the central path: the barrier holds about ν/τ of slack
        double tau = std::max(1.0, L.nu / gap0);
        const double mu = 8.0;
        int iter = 0, stalls = 0, inner = 0;
        bool done = false;
        while (!done) {
            if (iter >= opts.max_iter) {
                out.status = SolveStatus::iteration_limit;
                break;
            }
            if (elapsed() > opts.time_limit) {
                out.status = SolveStatus::time_limit;
                break;
            }
            Vec dy;
            double dt = 0.0;
            eng.newton(y, t, true, tau, nullptr, dy, dt);
            Vec gy;
            double gt = 0.0;
            eng.gradient(y, t, true, tau, nullptr, gy, gt);
            const double slope = gy.dot(dy) + gt * dt;
            const double dec = -slope;
            double f0 = -tau * t + eng.phi(y, t);
            double alpha = 0.0;
            if (slope < 0.0)
                alpha = line_search(
                    [&](double a) { return -tau * (t + a * dt) + eng.phi(y + a * dy, t + a * dt); }, f0, slope);
            if (alpha > 0.0) {
                y += alpha * dy;
                t += alpha * dt;
            }
            ++iter;
            const double margin = t - eps;
            out.trace.push_back({1, iter, t, margin, tau, alpha, dec});
            if (opts.verbose)
                std::fprintf(stderr, "phase1 it=%d t=%.6e tau=%.3e step=%.3e dec=%.3e\n", iter, t, tau, alpha, dec);
            if (margin >= opts.tol_margin) {
                const double mm = min_margin(prob, y);
                if (mm >= opts.tol_margin) {
                    out.trace.back().margin = mm;
                    finish_feasible(y);
                    done = true;
                    break;
                }
            }
            stalls = alpha < 1e-8 ? stalls + 1 : 0;
            if (stalls >= 3) {
                out.status = SolveStatus::no_feasible_point_found;
                out.message = "line search stalled at margin " + lmi::fmt17(t - eps);
                done = true;
                break;
            }
            ++inner;
            if (dec < 1e-3 || alpha < 1e-8 || inner >= 50) {
                inner = 0;
                // centered: t* ≤ t + ν/τ for the boxed problem
                if (t + 2.0 * L.nu / tau < eps + opts.tol_margin) {
                    out.status = SolveStatus::no_feasible_point_found;
                    out.message = "margin upper bound " + lmi::fmt17(t + 2.0 * L.nu / tau - eps) + " below target";
                    done = true;
                    break;
                }
                if (tau > 1e14) {
                    out.status = SolveStatus::no_feasible_point_found;
                    out.message = "barrier parameter exhausted";
                    done = true;
                    break;
                }
                tau *= mu;
            }
        }
        out.iterations = iter;
        if (!done && out.status != SolveStatus::iteration_limit && out.status != SolveStatus::time_limit)
            out.status = SolveStatus::no_feasible_point_found;
        if (out.status != SolveStatus::feasible) {
            out.y = y;
            out.min_margin = min_margin(prob, y);
            return out;
        }
    }

    // phase 2: maximize cᵀy subject to F_b(y) ⪰ (eps + tol_margin)·I
    if (opts.objective && out.min_margin > opts.tol_margin + 1e-12) {
        const Vec& c = *opts.objective;
        if (c.size() != prob.num_vars())
            throw Error("solve: objective length mismatch");
        const double shift = eps + opts.tol_margin;
        Vec yb = *out.y;
        double tau = 1.0;
        for (int k = 0; k < opts.phase2_iter && elapsed() <= opts.time_limit; ++k) {
            Vec dy;
            double dt = 0.0;
            eng.newton(yb, shift, false, tau, &c, dy, dt);
            Vec gy;
            double gt = 0.0;
            eng.gradient(yb, shift, false, tau, &c, gy, gt);
            const double slope = gy.dot(dy);
            const double f0 = -tau * c.dot(yb) + eng.phi(yb, shift);
            double alpha = 0.0;
            if (slope < 0.0)
                alpha = line_search([&](double a) { return -tau * c.dot(yb + a * dy) + eng.phi(yb + a * dy, shift); },
                    f0, slope);
            if (alpha > 0.0)
                yb += alpha * dy;
            ++out.iterations;
            out.trace.push_back({2, k + 1, c.dot(yb), 0.0, tau, alpha, -slope});
            if (opts.verbose)
                std::fprintf(stderr, "phase2 it=%d obj=%.9e tau=%.3e step=%.3e dec=%.3e\n", k + 1, c.dot(yb), tau,
                    alpha, -slope);
            if (alpha < 1e-8 && k > 0 && out.trace[out.trace.size() - 2].step < 1e-8)
                break;
            if (-slope < 1e-6 || alpha < 1e-8) {
                if (L.nu / tau <= opts.phase2_gap * std::max(1.0, std::abs(c.dot(yb))))
                    break;
                tau *= 8.0;
            }
        }
        const double mm = min_margin(prob, yb);
        if (mm >= opts.tol_margin) {
            out.y = yb;
            out.min_margin = mm;
        }
    }
    return out;
}

} // namespace sdp_detail

/// Text format returned by external backends and by `solve-lmi`:
///   sepinv-result 1
///   status <feasible|no_feasible_point_found|...>
///   margin <claimed margin>
///   y <N> v_0 ... v_{N-1}
inline void write_result(std::ostream& os, const SolveOutcome& o)
{
    os << "sepinv-result 1\n";
    os << "status " << to_string(o.status) << "\n";
    os << "margin " << lmi::fmt17(o.min_margin) << "\n";
    if (o.y) {
        os << "y " << o.y->size();
        for (int i = 0; i < o.y->size(); ++i)
            os << " " << lmi::fmt17((*o.y)(i));
        os << "\n";
    }
}

inline SolveOutcome read_result(std::istream& is)
{
    SolveOutcome o;
    std::string tag;
    is >> tag;
    int ver = 0;
    is >> ver;
    if (tag != "sepinv-result" || ver != 1)
        throw Error("backend result: bad header");
    while (is >> tag) {
        if (tag == "status") {
            std::string s;
            is >> s;
            if (s == "feasible")
                o.status = SolveStatus::feasible;
            else if (s == "iteration_limit")
                o.status = SolveStatus::iteration_limit;
            else if (s == "time_limit")
                o.status = SolveStatus::time_limit;
            else
                o.status = SolveStatus::no_feasible_point_found;
        } else if (tag == "margin") {
            std::string s;
            is >> s;
            o.min_margin = std::strtod(s.c_str(), nullptr);
        } else if (tag == "y") {
            long n = 0;
            is >> n;
            if (!is || n < 0)
                throw Error("backend result: bad y length");
            Vec y(n);
            for (long i = 0; i < n; ++i) {
                std::string s;
                is >> s;
                y(i) = std::strtod(s.c_str(), nullptr);
            }
            if (!is)
                throw Error("backend result: truncated y");
            o.y = y;
        } else {
            throw Error("backend result: unknown tag '" + tag + "'");
        }
    }
    return o;
}

namespace sdp_detail {

/// Never trust a backend: replay the claimed point through eval_pencil.
inline SolveOutcome reverify(const LmiProblem& prob, SolveOutcome o, double tol_margin)
{
    if (o.status != SolveStatus::feasible)
        return o;
    if (!o.y || o.y->size() != prob.num_vars() || !o.y->allFinite()) {
        o.status = SolveStatus::no_feasible_point_found;
        o.message = "backend claimed feasibility without a usable point";
        return o;
    }
    o.min_margin = min_margin(prob, *o.y);
    if (!(o.min_margin >= tol_margin)) {
        o.status = SolveStatus::no_feasible_point_found;
        o.message = "backend point fails re-verification (margin " + lmi::fmt17(o.min_margin) + ")";
    }
    return o;
}

/// Run `<command> <problem file> <result file>` and read the result.
inline SolveOutcome solve_external(const LmiProblem& prob, const std::string& command)
{
    namespace fs = std::filesystem;
    static int counter = 0;
    const fs::path dir = fs::temp_directory_path();
    const std::string stem = "sepinv_" + std::to_string(::getpid()) + "_" + std::to_string(counter++);
    const fs::path in = dir / (stem + ".lmi"), res = dir / (stem + ".res");
    {
        std::ofstream os(in);
        write_triplets(os, prob);
        if (!os)
            throw Error("external backend: cannot write " + in.string());
    }
    const std::string cmd = command + " '" + in.string() + "' '" + res.string() + "'";
    const int rc = std::system(cmd.c_str());
    SolveOutcome o;
    std::ifstream is(res);
    if (is) {
        try {
            o = read_result(is);
        } catch (const Error& e) {
            o.status = SolveStatus::no_feasible_point_found;
            o.message = std::string("external backend: ") + e.what();
        }
    } else {
        o.status = SolveStatus::no_feasible_point_found;
        o.message = "external backend produced no result (exit " + std::to_string(rc) + ")";
    }
    std::error_code ec;
    fs::remove(in, ec);
    fs::remove(res, ec);
    return o;
}

} // namespace sdp_detail

inline SolveOutcome warm_start(const LmiProblem& prob, const Vec& y0, const SolveOptions& opts = {})
{
    if (y0.size() != prob.num_vars())
        throw Error("warm_start: y0 has " + std::to_string(y0.size()) + " entries, problem has "
            + std::to_string(prob.num_vars()));
    if (!(opts.max_iter > 0) || !(opts.time_limit > 0.0) || !(opts.box > 0.0))
        throw Error("solve: limits must be positive");
    SolveOutcome o = opts.backend == "internal" ? sdp_detail::solve_internal(prob, y0, opts)
                                                : sdp_detail::solve_external(prob, opts.backend);
    return sdp_detail::reverify(prob, std::move(o), opts.tol_margin);
}

inline SolveOutcome solve(const LmiProblem& prob, const SolveOptions& opts = {})
{
    return warm_start(prob, Vec::Zero(prob.num_vars()), opts);
}

} // namespace sepinv
