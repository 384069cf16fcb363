#pragma once

// A-posteriori LP certification of separable invariance.

#include "sepinv/lmi.hpp"
#include "sepinv/model.hpp"
#include "sepinv/polytope.hpp"

#include <ostream>
#include <random>

namespace sepinv {

struct Certificate {
    Vec invariance_margins; ///< per global facet j: 1 - max over 𝒳×𝒟 of e_jᵀZH_x(A_K x + E d)
    Vec state_margins;
    Vec input_margins;
    bool valid = false;
    double tolerance = 1e-7;

    double worst() const
    {
        double w = std::numeric_limits<double>::infinity();
        for (const Vec* v : {&invariance_margins, &state_margins, &input_margins})
            if (v->size() > 0)
                w = std::min(w, v->minCoeff());
        return w;
    }
    /// 0-based index of the smallest invariance margin, -1 when none.
    Eigen::Index worst_facet() const
    {
        if (invariance_margins.size() == 0)
            return -1;
        Eigen::Index k;
        invariance_margins.minCoeff(&k);
        return k;
    }
};

/// 𝒟_i = {d : ‖H_d d‖∞ ≤ 1}.
inline GenSet disturbance_set(const ComposedSystem& cs, int i)
{
    const auto p = cs.blocks[i].p;
    return GenSet(Mat::Identity(p, p), cs.Hd_block(i));
}

/// Subsystem owning a 0-based row of H_u.
inline int input_row_owner(const ComposedSystem& cs, Eigen::Index l)
{
    for (int i = 0; i < cs.d(); ++i)
        if (l >= cs.blocks[i].ur && l < cs.blocks[i].ur + cs.blocks[i].Nu)
            return i;
    throw Error("input row out of range");
}

inline int state_row_owner(const ComposedSystem& cs, Eigen::Index k)
{
    for (int i = 0; i < cs.d(); ++i)
        if (k >= cs.blocks[i].sr && k < cs.blocks[i].sr + cs.blocks[i].Ns)
            return i;
    throw Error("state row out of range");
}

namespace verify_detail {

/// max over Π𝒳_i of c·x, one LP per subsystem with nonzero coefficients.
inline double support_product(const ComposedSystem& cs, const SynthesisSolution& sol, const Vec& c)
{
    double s = 0.0;
    for (int i = 0; i < cs.d(); ++i) {
        const auto& b = cs.blocks[i];
        const Vec ci = c.segment(b.x, b.n);
        if (ci.cwiseAbs().maxCoeff() == 0.0)
            continue;
        s += support(sol.gen_sets[i], ci);
    }
    return s;
}

inline double support_dist(const ComposedSystem& cs, const Vec& c)
{
    double s = 0.0;
    for (int i = 0; i < cs.d(); ++i) {
        const auto& b = cs.blocks[i];
        if (b.p == 0)
            continue;
        const Vec ci = c.segment(b.d, b.p);
        if (ci.cwiseAbs().maxCoeff() == 0.0)
            continue;
        s += support(disturbance_set(cs, i), ci);
    }
    return s;
}

} // namespace verify_detail

/// Checks A_K𝒳 ⊕ E𝒟 ⊂ 𝒳, 𝒳 ⊂ 𝒮 and K𝒳 ⊂ 𝒰 by LPs. Only the N_x upper facets
/// are checked; the lower ones follow by symmetry of 𝒳 and 𝒟.
inline Certificate certify(const ComposedSystem& cs, const SynthesisSolution& sol, double tolerance = 1e-7)
{
    if (sol.H_x.rows() != cs.n || sol.K.rows() != cs.m || static_cast<int>(sol.gen_sets.size()) != cs.d())
        throw Error("certify: solution dimensions do not match the system");
    Certificate cert;
    cert.tolerance = tolerance;
    const Mat AK = cs.A + cs.B * sol.K;
    const Mat F = cs.Z * sol.H_x;
    const Mat FA = F * AK;

    cert.invariance_margins.resize(cs.Nx);
    for (Eigen::Index j = 0; j < cs.Nx; ++j) {
        double m = 1.0 - verify_detail::support_product(cs, sol, FA.row(j).transpose());
        if (cs.disturbed())
            m -= verify_detail::support_dist(cs, (F.row(j) * cs.E).transpose());
        cert.invariance_margins(j) = m;
    }
    cert.state_margins.resize(cs.Ns);
    for (Eigen::Index k = 0; k < cs.Ns; ++k)
        cert.state_margins(k) = cs.h_s(k) - verify_detail::support_product(cs, sol, cs.H_s.row(k).transpose());
    const Mat HK = cs.H_u * sol.K;
    cert.input_margins.resize(cs.Nu);
    for (Eigen::Index l = 0; l < cs.Nu; ++l)
        cert.input_margins(l) = cs.h_u(l) - verify_detail::support_product(cs, sol, HK.row(l).transpose());

    cert.valid = cert.worst() >= -tolerance;
    return cert;
}

/// Hit-and-run sampler for a bounded H-polytope containing x0.
class HitAndRun {
public:
    HitAndRun(HPolytope P, Vec x0, std::uint64_t seed) : P_(std::move(P)), x_(std::move(x0)), rng_(seed) {}

    const Vec& next()
    {
        std::normal_distribution<double> nd(0.0, 1.0);
        std::uniform_real_distribution<double> ud(0.0, 1.0);
        const Eigen::Index n = x_.size();
        Vec dir(n);
        for (Eigen::Index i = 0; i < n; ++i)
            dir(i) = nd(rng_);
        dir.normalize();
        const Vec Hd = P_.H * dir;
        const Vec slack = P_.h - P_.H * x_;
        double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
        for (Eigen::Index r = 0; r < Hd.size(); ++r) {
            const double s = std::max(slack(r), 0.0);
            if (Hd(r) > 1e-14)
                hi = std::min(hi, s / Hd(r));
            else if (Hd(r) < -1e-14)
                lo = std::max(lo, s / Hd(r));
        }
        if (std::isfinite(lo) && std::isfinite(hi) && hi > lo)
            x_ += (lo + (hi - lo) * ud(rng_)) * dir;
        return x_;
    }

    void burn_in(int steps)
    {
        for (int k = 0; k < steps; ++k)
            next();
    }

private:
    HPolytope P_;
    Vec x_;
    std::mt19937_64 rng_;
};

/// Vertices of the parallelotope {d : ‖H_d d‖∞ ≤ 1}.
inline std::vector<Vec> parallelotope_vertices(const Mat& Hd)
{
    const Eigen::Index p = Hd.rows();
    if (p > 20)
        throw Error("parallelotope_vertices: dimension too large");
    const Eigen::FullPivLU<Mat> lu(Hd);
    std::vector<Vec> out;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << p); ++mask) {
        Vec s(p);
        for (Eigen::Index k = 0; k < p; ++k)
            s(k) = (mask >> k) & 1 ? 1.0 : -1.0;
        out.push_back(lu.solve(s));
    }
    return out;
}

struct SampleReport {
    double worst_residual = -std::numeric_limits<double>::infinity(); ///< max_j |e_jᵀZH_x x⁺| - 1
    Eigen::Index worst_facet = -1;
    long samples = 0;
    long violations = 0;
    Vec worst_x, worst_d;

    double violation_rate() const { return samples ? static_cast<double>(violations) / samples : 0.0; }
};

/// Monte-Carlo cross-check of certify: x uniform in 𝒳 by hit-and-run, d at
/// vertices of 𝒟. When nothing violates within `count` samples but `focus`
/// is given, up to 9·count more samples are drawn near it.
inline SampleReport sample_check(const ComposedSystem& cs, const SynthesisSolution& sol, long count,
    std::uint64_t seed, const Vec* focus = nullptr)
{
    if (count < 1)
        throw Error("sample_check: count must be >= 1");
    const Mat AK = cs.A + cs.B * sol.K;
    const Mat F = cs.Z * sol.H_x;

    std::vector<Vec> dverts;
    if (cs.disturbed()) {
        // vertices of the product of per-subsystem parallelotopes
        std::vector<std::vector<Vec>> per;
        for (int i = 0; i < cs.d(); ++i)
            per.push_back(cs.blocks[i].p ? parallelotope_vertices(cs.Hd_block(i)) : std::vector<Vec>{Vec()});
        std::size_t total = 1;
        for (const auto& v : per)
            total *= v.size();
        const std::size_t cap = std::min<std::size_t>(total, 4096);
        std::mt19937_64 vr(seed ^ 0x9e3779b97f4a7c15ULL);
        for (std::size_t k = 0; k < cap; ++k) {
            std::size_t idx = total == cap ? k : vr() % total;
            Vec d(cs.p);
            for (int i = 0; i < cs.d(); ++i) {
                const auto& vs = per[i];
                if (cs.blocks[i].p)
                    d.segment(cs.blocks[i].d, cs.blocks[i].p) = vs[idx % vs.size()];
                idx /= vs.size();
            }
            dverts.push_back(d);
        }
    } else {
        dverts.push_back(Vec::Zero(cs.p));
    }

    std::vector<HitAndRun> chains;
    for (int i = 0; i < cs.d(); ++i) {
        chains.emplace_back(sol.gen_sets[i].to_hpolytope(), Vec::Zero(cs.blocks[i].n), seed + 1 + i);
        chains.back().burn_in(100);
    }

    SampleReport rep;
    auto eval = [&](const Vec& x) {
        const Vec base = F * (AK * x);
        for (const auto& d : dverts) {
            const Vec r = (base + F * (cs.E * d)).cwiseAbs().array() - 1.0;
            Eigen::Index j;
            const double w = r.maxCoeff(&j);
            ++rep.samples;
            if (w > 1e-12)
                ++rep.violations;
            if (w > rep.worst_residual) {
                rep.worst_residual = w;
                rep.worst_facet = j;
                rep.worst_x = x;
                rep.worst_d = d;
            }
        }
    };
    auto draw = [&]() {
        Vec x(cs.n);
        for (int i = 0; i < cs.d(); ++i)
            x.segment(cs.blocks[i].x, cs.blocks[i].n) = chains[i].next();
        return x;
    };

    for (long k = 0; k < count; ++k)
        eval(draw());
    if (rep.violations == 0 && focus) {
        std::mt19937_64 fr(seed + 7919);
        std::uniform_real_distribution<double> ud(0.0, 0.05);
        for (long k = 0; k < 9 * count && rep.violations == 0; ++k) {
            const Vec y = draw();
            eval(*focus + ud(fr) * (y - *focus));
        }
    }
    return rep;
}

/// Maximizer over Π𝒳_i of the worst invariance facet, usable as a sample_check focus.
inline Vec worst_facet_argmax(const ComposedSystem& cs, const SynthesisSolution& sol, const Certificate& cert)
{
    const Eigen::Index j = cert.worst_facet();
    Vec x = Vec::Zero(cs.n);
    if (j < 0)
        return x;
    const Mat FA = cs.Z * sol.H_x * (cs.A + cs.B * sol.K);
    for (int i = 0; i < cs.d(); ++i) {
        const auto& b = cs.blocks[i];
        const Vec ci = FA.row(j).transpose().segment(b.x, b.n);
        if (ci.cwiseAbs().maxCoeff() == 0.0)
            continue;
        const auto r = lp_solve(ci, sol.gen_sets[i].to_hpolytope());
        if (r.optimal())
            x.segment(b.x, b.n) = *r.x_star;
    }
    return x;
}

inline void write_certificate(std::ostream& os, const Certificate& c)
{
    auto vec = [&](const char* name, const Vec& v) {
        os << name << ' ' << v.size();
        for (Eigen::Index k = 0; k < v.size(); ++k)
            os << ' ' << lmi::fmt17(v(k));
        os << '\n';
    };
    os << "sepinv-certificate 1\n";
    os << "valid " << (c.valid ? "true" : "false") << '\n';
    os << "tolerance " << lmi::fmt17(c.tolerance) << '\n';
    os << "worst_margin " << lmi::fmt17(c.worst()) << '\n';
    os << "worst_facet " << (c.worst_facet() + 1) << '\n';
    vec("invariance", c.invariance_margins);
    vec("state", c.state_margins);
    vec("input", c.input_margins);
}

} // namespace sepinv
