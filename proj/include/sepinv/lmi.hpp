#pragma once

#include "sepinv/affine.hpp"
#include "sepinv/linalg.hpp"
#include "sepinv/model.hpp"
#include "sepinv/polytope.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace sepinv {

/// One symmetric affine block F(y) = F0 + Σ y_i F_i, upper triangle stored.
/// A `diagonal` pencil only has diagonal entries; each entry is a scalar
/// constraint.
struct Pencil {
    struct Entry {
        Eigen::Index row, col;
        double value;
    };
    struct Coef {
        int var;
        Eigen::Index row, col;
        double coeff;
    };

    std::string label;
    Eigen::Index size = 0;
    bool diagonal = false;
    std::vector<Entry> constant;
    std::vector<Coef> coeffs; ///< sorted by (var, row, col)

    Mat eval(const Vec& y) const
    {
        Mat m = Mat::Zero(size, size);
        for (const auto& e : constant) {
            m(e.row, e.col) += e.value;
            if (e.row != e.col)
                m(e.col, e.row) += e.value;
        }
        for (const auto& c : coeffs) {
            const double v = c.coeff * y(c.var);
            m(c.row, c.col) += v;
            if (c.row != c.col)
                m(c.col, c.row) += v;
        }
        return m;
    }

    /// Dense F_var (zero when the variable does not occur).
    Mat coefficient(int var) const
    {
        Mat m = Mat::Zero(size, size);
        for (const auto& c : coeffs) {
            if (c.var != var)
                continue;
            m(c.row, c.col) += c.coeff;
            if (c.row != c.col)
                m(c.col, c.row) += c.coeff;
        }
        return m;
    }

    Mat constant_matrix() const { return eval(Vec::Zero(max_var() + 1)); }

    int max_var() const
    {
        int mv = -1;
        for (const auto& c : coeffs)
            mv = std::max(mv, c.var);
        return mv;
    }

    std::vector<int> variables() const
    {
        std::vector<int> v;
        for (const auto& c : coeffs)
            if (v.empty() || v.back() != c.var)
                v.push_back(c.var);
        return v;
    }

    /// Sort and merge entries; drop exact zeros.
    void normalize()
    {
        std::sort(coeffs.begin(), coeffs.end(), [](const Coef& a, const Coef& b) {
            return std::tie(a.var, a.row, a.col) < std::tie(b.var, b.row, b.col);
        });
        std::vector<Coef> merged;
        for (const auto& c : coeffs) {
            if (!merged.empty() && merged.back().var == c.var && merged.back().row == c.row
                && merged.back().col == c.col)
                merged.back().coeff += c.coeff;
            else
                merged.push_back(c);
        }
        coeffs.clear();
        for (const auto& c : merged)
            if (c.coeff != 0.0)
                coeffs.push_back(c);
        std::sort(constant.begin(), constant.end(),
            [](const Entry& a, const Entry& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
        std::vector<Entry> mc;
        for (const auto& e : constant) {
            if (!mc.empty() && mc.back().row == e.row && mc.back().col == e.col)
                mc.back().value += e.value;
            else
                mc.push_back(e);
        }
        constant.clear();
        for (const auto& e : mc)
            if (e.value != 0.0)
                constant.push_back(e);
    }

    /// Build from a square affine matrix that must be symmetric for every y;
    /// the lower triangle is checked against the upper one and then dropped.
    static Pencil from_affine(std::string label, const AffMat& a, bool diagonal = false)
    {
        if (a.rows() != a.cols())
            throw Error("pencil '" + label + "' is not square");
        Pencil p;
        p.label = std::move(label);
        p.size = a.rows();
        p.diagonal = diagonal;
        const Mat& k = a.constant_part();
        for (Eigen::Index i = 0; i < p.size; ++i)
            for (Eigen::Index j = i; j < p.size; ++j)
                if (k(i, j) != 0.0)
                    p.constant.push_back({i, j, k(i, j)});
        std::vector<Coef> lower;
        for (const auto& t : a.terms()) {
            if (t.r <= t.c)
                p.coeffs.push_back({t.var, t.r, t.c, t.coeff});
            else
                lower.push_back({t.var, t.c, t.r, t.coeff});
        }
        p.normalize();
        // symmetry: the mirrored lower triangle must equal the upper off-diagonal part
        Pencil mirror;
        mirror.coeffs = std::move(lower);
        mirror.normalize();
        std::vector<Coef> upper_off;
        for (const auto& c : p.coeffs)
            if (c.row != c.col)
                upper_off.push_back(c);
        bool sym = mirror.coeffs.size() == upper_off.size();
        for (std::size_t i = 0; sym && i < upper_off.size(); ++i) {
            const auto& u = upper_off[i];
            const auto& l = mirror.coeffs[i];
            sym = u.var == l.var && u.row == l.row && u.col == l.col
                && std::abs(u.coeff - l.coeff) <= 1e-12 * (1.0 + std::abs(u.coeff));
        }
        if (!sym || !linalg::is_symmetric(k, 1e-14))
            throw Error("pencil '" + p.label + "' is not symmetric");
        if (diagonal)
            for (const auto& c : p.coeffs)
                if (c.row != c.col)
                    throw Error("diagonal pencil '" + p.label + "' has off-diagonal entries");
        return p;
    }
};

enum class VarKind { full, sym, diag };

struct VarBlock {
    std::string name;
    VarKind kind = VarKind::full;
    Eigen::Index rows = 0, cols = 0;
    int offset = 0;
    int group = -1; ///< -1: shared by all blocks

    int size() const
    {
        switch (kind) {
        case VarKind::full: return static_cast<int>(rows * cols);
        case VarKind::sym: return static_cast<int>(rows * (rows + 1) / 2);
        case VarKind::diag: return static_cast<int>(rows);
        }
        return 0;
    }
};

/// Layout of the scalar decision variables. Indices into `blocks` are kept
/// per role; -1 means the role is absent.
struct VarMap {
    struct Facet {
        int Dx = -1, Dd = -1, P = -1, Gamma = -1, Xi = -1, Psi = -1, Omega1 = -1, Omega2 = -1;
    };

    std::vector<VarBlock> blocks;
    int size = 0;
    int num_groups = 0;
    std::vector<int> W;                      ///< per subsystem (0-based)
    std::map<std::pair<int, int>, int> Khat; ///< 0-based (i, j)
    int lambda = -1;
    std::vector<Facet> facets;
    std::vector<int> Ds, Du;

    int add(std::string name, VarKind kind, Eigen::Index rows, Eigen::Index cols, int group)
    {
        VarBlock b{std::move(name), kind, rows, cols, size, group};
        size += b.size();
        blocks.push_back(b);
        return static_cast<int>(blocks.size()) - 1;
    }

    AffMat affine(int block) const
    {
        const auto& b = blocks.at(block);
        switch (b.kind) {
        case VarKind::full: return AffMat::full(b.offset, b.rows, b.cols);
        case VarKind::sym: return AffMat::sym(b.offset, b.rows);
        case VarKind::diag: return AffMat::diag(b.offset, b.rows);
        }
        return {};
    }

    /// Dense value of a variable block at y.
    Mat value(int block, const Vec& y) const { return affine(block).eval(y); }

    std::vector<int> group_of_var() const
    {
        std::vector<int> g(size, -1);
        for (const auto& b : blocks)
            for (int k = 0; k < b.size(); ++k)
                g[b.offset + k] = b.group;
        return g;
    }

    const VarBlock* find(const std::string& name) const
    {
        for (const auto& b : blocks)
            if (b.name == name)
                return &b;
        return nullptr;
    }
};

struct LmiProblem {
    std::vector<Pencil> blocks;
    VarMap var_map;
    double eps = 0.0;            ///< every block must satisfy F(y) ⪰ eps·I
    std::vector<int> var_group;  ///< per variable, -1 = shared
    Vec fixed_lambda;            ///< used when Λ is not a decision variable

    int num_vars() const { return static_cast<int>(var_group.size()); }

    const Pencil* find(const std::string& label) const
    {
        for (const auto& b : blocks)
            if (b.label == label)
                return &b;
        return nullptr;
    }
};

struct SynthesisSolution {
    Mat H_x;               ///< block diagonal n×n
    Mat K;                 ///< m×n, k_pattern block structure
    Vec Lambda;            ///< λ_i per subsystem
    Vec multipliers;       ///< raw decision vector (may be empty)
    std::vector<GenSet> gen_sets;
    std::vector<double> W_cond; ///< condition number of each W_i = (H_x^i)^-1
    double eps = 0.0;           ///< strictness margin of the problem the multipliers belong to

    Mat K_block(const ComposedSystem& cs, int i, int j) const
    {
        const auto& bi = cs.blocks[i];
        const auto& bj = cs.blocks[j];
        return K.block(bi.u, bj.x, bi.m, bj.n);
    }
    Mat Hx_block(const ComposedSystem& cs, int i) const
    {
        const auto& b = cs.blocks[i];
        return H_x.block(b.x, b.x, b.n, b.n);
    }
};

/// Strictness margin default: 1e-6·max(1, ‖A‖_∞).
inline double default_eps(const ComposedSystem& cs)
{
    const double norm_inf = cs.A.size() ? cs.A.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
    return 1e-6 * std::max(1.0, norm_inf);
}

namespace lmi {

/// W, K̂ and Λ as affine matrices in the composed coordinates.
struct SharedVars {
    AffMat W, Khat, Lambda;
};

inline void add_shared_vars(const ComposedSystem& cs, VarMap& vm, bool with_lambda)
{
    const int d = cs.d();
    for (int i = 0; i < d; ++i)
        vm.W.push_back(
            vm.add("W_" + std::to_string(i + 1), VarKind::full, cs.blocks[i].n, cs.blocks[i].n, -1));
    for (const auto& [i1, j1] : cs.k_pattern) {
        const int i = i1 - 1, j = j1 - 1;
        vm.Khat[{i, j}] = vm.add("Khat_" + std::to_string(i1) + "_" + std::to_string(j1), VarKind::full,
            cs.blocks[i].m, cs.blocks[j].n, -1);
    }
    if (with_lambda)
        vm.lambda = vm.add("lambda", VarKind::diag, d, 1, -1);
}

inline SharedVars shared_affine(const ComposedSystem& cs, const VarMap& vm, const Vec& fixed_lambda = {})
{
    SharedVars s{AffMat(cs.n, cs.n), AffMat(cs.m, cs.n), AffMat(cs.n, cs.n)};
    for (int i = 0; i < cs.d(); ++i)
        s.W.embed(cs.blocks[i].x, cs.blocks[i].x, vm.affine(vm.W[i]));
    for (const auto& [ij, blk] : vm.Khat)
        s.Khat.embed(cs.blocks[ij.first].u, cs.blocks[ij.second].x, vm.affine(blk));
    if (vm.lambda >= 0) {
        const int off = vm.blocks[vm.lambda].offset;
        for (int i = 0; i < cs.d(); ++i) {
            AffMat li = AffMat::diag(off + i, 1);
            for (Eigen::Index k = 0; k < cs.blocks[i].n; ++k)
                s.Lambda.embed(cs.blocks[i].x + k, cs.blocks[i].x + k, li);
        }
    } else {
        Mat L = Mat::Zero(cs.n, cs.n);
        for (int i = 0; i < cs.d(); ++i)
            L.block(cs.blocks[i].x, cs.blocks[i].x, cs.blocks[i].n, cs.blocks[i].n)
                = fixed_lambda(i) * Mat::Identity(cs.blocks[i].n, cs.blocks[i].n);
        s.Lambda = AffMat::constant(L);
    }
    return s;
}

/// 1×1 affine expression 1ᵀ D 1 for a diagonal variable block.
inline AffMat sum_of(const VarMap& vm, int block)
{
    const auto& b = vm.blocks[block];
    AffMat a(1, 1);
    for (Eigen::Index k = 0; k < b.rows; ++k)
        a.embed(0, 0, AffMat::diag(b.offset + static_cast<int>(k), 1));
    return a;
}

inline AffMat scalar_const(double v) { return AffMat::constant(Mat::Constant(1, 1, v)); }

/// Place X at (r, c) and Xᵀ at (c, r).
inline void embed_pair(AffMat& M, Eigen::Index r, Eigen::Index c, const AffMat& X)
{
    M.embed(r, c, X);
    M.embed(c, r, X.transpose());
}

/// Side of the slack blocks: 2n with disturbance channels, n without.
inline Eigen::Index slack_dim(const ComposedSystem& cs) { return cs.p > 0 ? 2 * cs.n : cs.n; }

/// [ZᵀD_xZ, 0, -½(WᵀAᵀ + K̂ᵀBᵀ), 0; *, D_d, 0, -½H_d^{-T}Eᵀ; *, *, P] (disturbance rows and
/// the second copy of P omitted when p = 0).
inline Pencil invariance_block(const ComposedSystem& cs, const VarMap& vm, const SharedVars& sv, int j)
{
    const auto n = cs.n, p = cs.p;
    const auto& f = vm.facets[j];
    const Eigen::Index size = n + p + slack_dim(cs);
    AffMat M(size, size);
    M.embed(0, 0, cs.Z.transpose() * vm.affine(f.Dx) * cs.Z);
    embed_pair(M, 0, n + p, -0.5 * (sv.W.transpose() * Mat(cs.A.transpose()) + sv.Khat.transpose() * Mat(cs.B.transpose())));
    if (p > 0) {
        M.embed(n, n, vm.affine(f.Dd));
        const Mat HdinvT = cs.H_d.inverse().transpose();
        embed_pair(M, n, n + p + n, AffMat::constant(-0.5 * HdinvT * cs.E.transpose()));
    }
    M.embed(n + p, n + p, vm.affine(f.P));
    return Pencil::from_affine("eq14_" + std::to_string(j + 1), M);
}

/// [ZᵀD_sZ, -½WᵀH_sᵀe_k; *, e_kᵀh_s - 1ᵀD_s1]
inline Pencil state_block(const ComposedSystem& cs, const VarMap& vm, const SharedVars& sv, int k)
{
    const auto n = cs.n;
    AffMat M(n + 1, n + 1);
    M.embed(0, 0, cs.Z.transpose() * vm.affine(vm.Ds[k]) * cs.Z);
    embed_pair(M, 0, n, -0.5 * (sv.W.transpose() * Mat(cs.H_s.row(k).transpose())));
    M.embed(n, n, scalar_const(cs.h_s(k)) - sum_of(vm, vm.Ds[k]));
    return Pencil::from_affine("eq15_" + std::to_string(k + 1), M);
}

/// [ZᵀD_uZ, -½K̂ᵀH_uᵀe_l; *, e_lᵀh_u - 1ᵀD_u1]
inline Pencil input_block(const ComposedSystem& cs, const VarMap& vm, const SharedVars& sv, int l)
{
    const auto n = cs.n;
    AffMat M(n + 1, n + 1);
    M.embed(0, 0, cs.Z.transpose() * vm.affine(vm.Du[l]) * cs.Z);
    embed_pair(M, 0, n, -0.5 * (sv.Khat.transpose() * Mat(cs.H_u.row(l).transpose())));
    M.embed(n, n, scalar_const(cs.h_u(l)) - sum_of(vm, vm.Du[l]));
    return Pencil::from_affine("eq16_" + std::to_string(l + 1), M);
}

inline Pencil positivity_block(const VarMap& vm, int block, const std::string& label)
{
    return Pencil::from_affine(label, vm.affine(block), true);
}

/// c_j = [Zᵀe_j; Zᵀe_j], or Zᵀe_j without disturbance channels.
inline Mat facet_vector(const ComposedSystem& cs, int j)
{
    if (cs.p == 0)
        return cs.Z.row(j).transpose();
    Mat c(2 * cs.n, 1);
    c << cs.Z.row(j).transpose(), cs.Z.row(j).transpose();
    return c;
}

inline void finalize(LmiProblem& prob) { prob.var_group = prob.var_map.group_of_var(); }

} // namespace lmi

/// Assemble the separable-invariance feasibility problem: for every facet j
/// the pair [Γ_j, Ψ_j; *, Ξ_j] and the (6n+1) slack block ((3n+1) without disturbance), the invariance
/// block, then one block per state row and per input row, plus positivity of
/// every diagonal multiplier and of λ.
/// Fixed upper blocks of Θ_j = [Λ̄T1_j, Λ̄T2_j; Ω1_j, Ω2_j]. Empty means
/// T1 = T2 = I, the restriction used by default.
struct ThetaAnchor {
    std::vector<Mat> T1, T2;

    bool empty() const { return T1.empty(); }
};

inline LmiProblem build_problem(const ComposedSystem& cs, double eps, const ThetaAnchor& anchor = {})
{
    if (!(eps > 0.0))
        throw Error("build_problem: eps must be positive");
    for (int i = 0; i < cs.d(); ++i)
        if (cs.blocks[i].p > 0 && linalg::rank(cs.Hd_block(i)) < cs.blocks[i].p)
            throw Error("disturbance channels present but H_d missing or singular", i + 1, "H_d");

    if (!anchor.empty() && (anchor.T1.size() != static_cast<std::size_t>(cs.Nx) || anchor.T2.size() != anchor.T1.size()))
        throw Error("build_problem: Θ anchor needs one T1/T2 pair per facet");

    LmiProblem prob;
    prob.eps = eps;
    VarMap& vm = prob.var_map;
    const auto N = cs.Nx, p = cs.p;
    const Eigen::Index q = lmi::slack_dim(cs);
    const int Nint = static_cast<int>(N);
    lmi::add_shared_vars(cs, vm, true);
    for (int j = 0; j < Nint; ++j) {
        VarMap::Facet f;
        const std::string s = "_" + std::to_string(j + 1);
        f.Dx = vm.add("Dx" + s, VarKind::diag, N, 1, j);
        if (p > 0)
            f.Dd = vm.add("Dd" + s, VarKind::diag, p, 1, j);
        f.P = vm.add("P" + s, VarKind::sym, q, q, j);
        f.Gamma = vm.add("Gamma" + s, VarKind::sym, q, q, j);
        f.Xi = vm.add("Xi" + s, VarKind::sym, q, q, j);
        f.Psi = vm.add("Psi" + s, VarKind::full, q, q, j);
        f.Omega1 = vm.add("Omega1" + s, VarKind::full, q, q, j);
        f.Omega2 = vm.add("Omega2" + s, VarKind::full, q, q, j);
        vm.facets.push_back(f);
    }
    for (Eigen::Index k = 0; k < cs.Ns; ++k)
        vm.Ds.push_back(vm.add("Ds_" + std::to_string(k + 1), VarKind::diag, N, 1, Nint + static_cast<int>(k)));
    for (Eigen::Index l = 0; l < cs.Nu; ++l)
        vm.Du.push_back(vm.add("Du_" + std::to_string(l + 1), VarKind::diag, N, 1,
            Nint + static_cast<int>(cs.Ns + l)));
    vm.num_groups = static_cast<int>(N + cs.Ns + cs.Nu);

    const lmi::SharedVars sv = lmi::shared_affine(cs, vm);
    const AffMat Wbar = p > 0 ? AffMat::blkdiag({sv.W, sv.W}) : sv.W;
    const AffMat Lbar = p > 0 ? AffMat::blkdiag({sv.Lambda, sv.Lambda}) : sv.Lambda;
    const auto n2 = q;

    for (int j = 0; j < Nint; ++j) {
        const auto& f = vm.facets[j];
        const std::string s = "_" + std::to_string(j + 1);
        const AffMat Gamma = vm.affine(f.Gamma), Xi = vm.affine(f.Xi), Psi = vm.affine(f.Psi);
        const AffMat Om1 = vm.affine(f.Omega1), Om2 = vm.affine(f.Omega2), P = vm.affine(f.P);

        AffMat a(2 * n2, 2 * n2);
        a.embed(0, 0, Gamma);
        a.embed(0, n2, Psi);
        a.embed(n2, 0, Psi.transpose());
        a.embed(n2, n2, Xi);
        prob.blocks.push_back(Pencil::from_affine("eq13a" + s, a));

        const int owner = cs.row_owner_[j];
        const Mat c = lmi::facet_vector(cs, j);
        AffMat b(3 * n2 + 1, 3 * n2 + 1);
        AffMat WT1 = Wbar, WT2 = Wbar, LT1 = 2.0 * Lbar, LT2 = Lbar;
        if (!anchor.empty()) {
            WT1 = Wbar * anchor.T1[j];
            WT2 = Wbar * anchor.T2[j];
            LT1 = Lbar * anchor.T1[j];
            LT1 = LT1 + LT1.transpose();
            LT2 = Lbar * anchor.T2[j];
        }
        // row 0
        b.embed(0, 0, Xi - P);
        b.embed(0, n2, Om1 - WT1);
        b.embed(0, 2 * n2, Om2 - WT2);
        b.embed(0, 3 * n2, Psi.transpose() * c);
        // row 1
        b.embed(n2, 0, (Om1 - WT1).transpose());
        b.embed(n2, n2, LT1 - Gamma);
        b.embed(n2, 2 * n2, LT2 + Om1.transpose() - Psi);
        // row 2
        b.embed(2 * n2, 0, (Om2 - WT2).transpose());
        b.embed(2 * n2, n2, (LT2 + Om1.transpose() - Psi).transpose());
        b.embed(2 * n2, 2 * n2, Om2 + Om2.transpose() - Xi);
        // row 3
        b.embed(3 * n2, 0, (Psi.transpose() * c).transpose());
        AffMat scalar = AffMat::diag(vm.blocks[vm.lambda].offset + owner, 1) - lmi::sum_of(vm, f.Dx);
        if (f.Dd >= 0)
            scalar -= lmi::sum_of(vm, f.Dd);
        b.embed(3 * n2, 3 * n2, scalar);
        prob.blocks.push_back(Pencil::from_affine("eq13b" + s, b));

        prob.blocks.push_back(lmi::invariance_block(cs, vm, sv, j));
    }
    for (Eigen::Index k = 0; k < cs.Ns; ++k)
        prob.blocks.push_back(lmi::state_block(cs, vm, sv, static_cast<int>(k)));
    for (Eigen::Index l = 0; l < cs.Nu; ++l)
        prob.blocks.push_back(lmi::input_block(cs, vm, sv, static_cast<int>(l)));
    for (int j = 0; j < Nint; ++j) {
        const auto& f = vm.facets[j];
        prob.blocks.push_back(lmi::positivity_block(vm, f.Dx, "pd_Dx_" + std::to_string(j + 1)));
        if (f.Dd >= 0)
            prob.blocks.push_back(lmi::positivity_block(vm, f.Dd, "pd_Dd_" + std::to_string(j + 1)));
    }
    for (Eigen::Index k = 0; k < cs.Ns; ++k)
        prob.blocks.push_back(lmi::positivity_block(vm, vm.Ds[k], "pd_Ds_" + std::to_string(k + 1)));
    for (Eigen::Index l = 0; l < cs.Nu; ++l)
        prob.blocks.push_back(lmi::positivity_block(vm, vm.Du[l], "pd_Du_" + std::to_string(l + 1)));
    prob.blocks.push_back(lmi::positivity_block(vm, vm.lambda, "pd_lambda"));
    lmi::finalize(prob);
    return prob;
}

inline LmiProblem build_problem(const ComposedSystem& cs) { return build_problem(cs, default_eps(cs)); }

/// Σ_i trace(W_i) as a linear objective; maximizing it pushes the sets outward.
inline Vec trace_w_objective(const LmiProblem& prob)
{
    Vec c = Vec::Zero(prob.num_vars());
    for (int w : prob.var_map.W) {
        const auto& b = prob.var_map.blocks[w];
        for (Eigen::Index k = 0; k < b.rows; ++k)
            c(b.offset + k * b.cols + k) = 1.0;
    }
    return c;
}

struct BlockValue {
    Mat F;
    double min_eig = 0.0;
};

inline std::vector<BlockValue> eval_pencil(const LmiProblem& prob, const Vec& y)
{
    if (y.size() != prob.num_vars())
        throw Error("eval_pencil: y has " + std::to_string(y.size()) + " entries, problem has "
            + std::to_string(prob.num_vars()) + " variables");
    std::vector<BlockValue> out;
    out.reserve(prob.blocks.size());
    for (const auto& b : prob.blocks) {
        BlockValue v;
        v.F = b.eval(y);
        v.min_eig = b.diagonal ? (b.size ? v.F.diagonal().minCoeff() : 0.0) : linalg::min_eig(v.F);
        out.push_back(std::move(v));
    }
    return out;
}

/// min over blocks of λ_min(F_b(y)) - eps; feasible iff >= 0.
inline double min_margin(const LmiProblem& prob, const Vec& y)
{
    double m = std::numeric_limits<double>::infinity();
    for (const auto& v : eval_pencil(prob, y))
        m = std::min(m, v.min_eig);
    return m - prob.eps;
}

/// Extract (H_x, K, Λ) from a decision vector; H_x^i = W_i^{-1}, K = K̂·H_x.
inline SynthesisSolution recover(const ComposedSystem& cs, const LmiProblem& prob, const Vec& y)
{
    const VarMap& vm = prob.var_map;
    if (y.size() != prob.num_vars())
        throw Error("recover: decision vector length mismatch");
    if (static_cast<int>(vm.W.size()) != cs.d())
        throw Error("recover: problem has no W variables for this system");
    SynthesisSolution sol;
    sol.H_x = Mat::Zero(cs.n, cs.n);
    for (int i = 0; i < cs.d(); ++i) {
        const Mat Wi = vm.value(vm.W[i], y);
        const double c = linalg::cond(Wi);
        sol.W_cond.push_back(c);
        if (!(c <= 1e12))
            throw Error("recover: W block is numerically singular (condition number " + std::to_string(c) + ")",
                i + 1, "W");
        const auto& b = cs.blocks[i];
        sol.H_x.block(b.x, b.x, b.n, b.n) = Wi.inverse();
    }
    Mat Khat = Mat::Zero(cs.m, cs.n);
    for (const auto& [ij, blk] : vm.Khat)
        Khat.block(cs.blocks[ij.first].u, cs.blocks[ij.second].x, cs.blocks[ij.first].m, cs.blocks[ij.second].n)
            = vm.value(blk, y);
    sol.K = Khat * sol.H_x;
    if (vm.lambda >= 0)
        sol.Lambda = vm.value(vm.lambda, y).diagonal();
    else
        sol.Lambda = prob.fixed_lambda;
    sol.multipliers = y;
    sol.eps = prob.eps;
    for (int i = 0; i < cs.d(); ++i)
        sol.gen_sets.emplace_back(cs.Z_block(i), sol.Hx_block(cs, i));
    return sol;
}

/// Solution from explicit (H_x, K) blocks, without multipliers.
inline SynthesisSolution make_solution(const ComposedSystem& cs, const Mat& H_x, const Mat& K)
{
    if (H_x.rows() != cs.n || H_x.cols() != cs.n || K.rows() != cs.m || K.cols() != cs.n)
        throw Error("make_solution: H_x must be n×n and K m×n");
    SynthesisSolution sol;
    sol.H_x = H_x;
    sol.K = K;
    sol.Lambda = Vec::Ones(cs.d());
    for (int i = 0; i < cs.d(); ++i) {
        sol.W_cond.push_back(linalg::cond(sol.Hx_block(cs, i)));
        sol.gen_sets.emplace_back(cs.Z_block(i), sol.Hx_block(cs, i));
    }
    return sol;
}

/// Quadratic-form matrices whose positive definiteness certifies invariance
/// (per facet), state constraints (per row) and input constraints (per row).
struct SprocMatrices {
    std::vector<Mat> Lx, Ls, Lu;
};

inline SprocMatrices sproc_matrices(const ComposedSystem& cs, const LmiProblem& prob, const SynthesisSolution& sol)
{
    const VarMap& vm = prob.var_map;
    const Vec& y = sol.multipliers;
    if (y.size() != prob.num_vars())
        throw Error("sproc_matrices: solution carries no multipliers for this problem");
    SprocMatrices out;
    const auto n = cs.n, p = cs.p;
    const Mat ZH = cs.Z * sol.H_x;
    const Mat AK = cs.A + cs.B * sol.K;
    for (Eigen::Index j = 0; j < cs.Nx && j < static_cast<Eigen::Index>(vm.facets.size()); ++j) {
        const auto& f = vm.facets[j];
        const double lam = sol.Lambda(cs.row_owner_[j]);
        const Vec Dx = vm.value(f.Dx, y).diagonal() / lam;
        const Vec Dd = f.Dd >= 0 ? Vec(vm.value(f.Dd, y).diagonal() / lam) : Vec::Zero(p);
        const Vec row = ZH.row(j).transpose();
        Mat L = Mat::Zero(n + p + 1, n + p + 1);
        L.topLeftCorner(n, n) = ZH.transpose() * Dx.asDiagonal() * ZH;
        L.block(0, n + p, n, 1) = -0.5 * AK.transpose() * row;
        if (p > 0) {
            L.block(n, n, p, p) = cs.H_d.transpose() * Dd.asDiagonal() * cs.H_d;
            L.block(n, n + p, p, 1) = -0.5 * cs.E.transpose() * row;
        }
        L(n + p, n + p) = 1.0 - Dx.sum() - Dd.sum();
        out.Lx.push_back(linalg::symmetrize(Mat(L.triangularView<Eigen::Upper>())
            + Mat(L.triangularView<Eigen::StrictlyUpper>()).transpose()));
    }
    auto constraint_matrix = [&](const Vec& D, const Vec& a, double b) {
        Mat L = Mat::Zero(n + 1, n + 1);
        L.topLeftCorner(n, n) = ZH.transpose() * D.asDiagonal() * ZH;
        L.block(0, n, n, 1) = -0.5 * a;
        L.block(n, 0, 1, n) = -0.5 * a.transpose();
        L(n, n) = b - D.sum();
        return L;
    };
    for (Eigen::Index k = 0; k < cs.Ns && k < static_cast<Eigen::Index>(vm.Ds.size()); ++k)
        out.Ls.push_back(constraint_matrix(vm.value(vm.Ds[k], y).diagonal(), cs.H_s.row(k).transpose(), cs.h_s(k)));
    for (Eigen::Index l = 0; l < cs.Nu && l < static_cast<Eigen::Index>(vm.Du.size()); ++l)
        out.Lu.push_back(constraint_matrix(
            vm.value(vm.Du[l], y).diagonal(), (cs.H_u.row(l) * sol.K).transpose(), cs.h_u(l)));
    return out;
}

// ---------------------------------------------------------------------------
// Sparse triplet interchange:
//   sepinv-lmi 1
//   vars <N>
//   eps <eps>
//   group <var> <g>            (only for variables with g >= 0)
//   block <label> <size> <dense|diag>
//   T <label> <var|-1> <row> <col> <coeff>   (row <= col, -1 = constant)

namespace lmi {

inline std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace lmi

inline void write_triplets(std::ostream& os, const LmiProblem& prob)
{
    os << "sepinv-lmi 1\n";
    os << "vars " << prob.num_vars() << "\n";
    os << "eps " << lmi::fmt17(prob.eps) << "\n";
    for (int v = 0; v < prob.num_vars(); ++v)
        if (prob.var_group[v] >= 0)
            os << "group " << v << " " << prob.var_group[v] << "\n";
    for (const auto& b : prob.blocks)
        os << "block " << b.label << " " << b.size << " " << (b.diagonal ? "diag" : "dense") << "\n";
    for (const auto& b : prob.blocks) {
        for (const auto& e : b.constant)
            os << "T " << b.label << " -1 " << e.row << " " << e.col << " " << lmi::fmt17(e.value) << "\n";
        for (const auto& c : b.coeffs)
            os << "T " << b.label << " " << c.var << " " << c.row << " " << c.col << " " << lmi::fmt17(c.coeff)
               << "\n";
    }
}

inline LmiProblem read_triplets(std::istream& is)
{
    LmiProblem prob;
    std::string line;
    std::map<std::string, std::size_t> index;
    int nvars = -1;
    bool header = false;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        auto fail = [&](const std::string& why) {
            throw Error("triplet file line " + std::to_string(lineno) + ": " + why);
        };
        if (tag == "sepinv-lmi") {
            int ver = 0;
            ls >> ver;
            if (ver != 1)
                fail("unsupported version");
            header = true;
        } else if (!header) {
            fail("missing 'sepinv-lmi 1' header");
        } else if (tag == "vars") {
            ls >> nvars;
            if (!ls || nvars < 0)
                fail("bad variable count");
            prob.var_group.assign(nvars, -1);
        } else if (tag == "eps") {
            ls >> prob.eps;
        } else if (tag == "group") {
            int v = 0, g = 0;
            ls >> v >> g;
            if (!ls || v < 0 || v >= nvars)
                fail("bad group line");
            prob.var_group[v] = g;
            prob.var_map.num_groups = std::max(prob.var_map.num_groups, g + 1);
        } else if (tag == "block") {
            Pencil p;
            std::string kind;
            ls >> p.label >> p.size >> kind;
            if (!ls || p.size < 0 || (kind != "dense" && kind != "diag"))
                fail("bad block line");
            p.diagonal = kind == "diag";
            index[p.label] = prob.blocks.size();
            prob.blocks.push_back(std::move(p));
        } else if (tag == "T") {
            std::string label;
            int var = 0;
            Eigen::Index r = 0, c = 0;
            double v = 0.0;
            ls >> label >> var >> r >> c >> v;
            if (!ls)
                fail("bad triplet");
            auto it = index.find(label);
            if (it == index.end())
                fail("unknown block '" + label + "'");
            Pencil& p = prob.blocks[it->second];
            if (r > c)
                std::swap(r, c);
            if (r < 0 || c >= p.size || var < -1 || var >= nvars)
                fail("triplet index out of range");
            if (var < 0)
                p.constant.push_back({r, c, v});
            else
                p.coeffs.push_back({var, r, c, v});
        } else {
            fail("unknown tag '" + tag + "'");
        }
    }
    if (nvars < 0)
        throw Error("triplet file: missing 'vars' line");
    for (auto& b : prob.blocks)
        b.normalize();
    prob.var_map.size = nvars;
    return prob;
}

} // namespace sepinv
