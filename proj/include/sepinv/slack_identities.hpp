#pragma once

// Constructive witnesses for the three slack-variable matrix lemmas.

#include "sepinv/linalg.hpp"

#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace sepinv {

enum class LemmaKind { lemma1, lemma2, lemma3 };

struct LemmaWitness {
    LemmaKind kind = LemmaKind::lemma1;
    std::map<std::string, Mat> matrices;
    double min_eig = 0.0; ///< smallest eigenvalue over the witnessed blocks
};

struct Refusal {
    double eigenvalue = 0.0; ///< the violating eigenvalue
    std::string reason;
};

struct LemmaOutcome {
    std::optional<LemmaWitness> witness;
    Refusal refusal;

    explicit operator bool() const { return witness.has_value(); }
};

/// Thrown when a lemma's hypothesis holds but its conclusion does not.
class ConsistencyFailure : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

namespace slack {

inline Mat block2(const Mat& a, const Mat& b, const Mat& d)
{
    Mat M(a.rows() + d.rows(), a.cols() + d.cols());
    M << a, b, b.transpose(), d;
    return M;
}

inline Mat block3(const Mat& a, const Mat& b, const Mat& c, const Mat& e, const Mat& f, const Mat& g)
{
    return linalg::sym_blocks({{a, b, c}, {b.transpose(), e, f}, {c.transpose(), f.transpose(), g}});
}

inline void require_sym(const Mat& m, const char* name)
{
    if (m.rows() != m.cols() || !linalg::is_symmetric(m, 1e-12 * (1.0 + m.norm())))
        throw Error(std::string(name) + " must be symmetric");
}

inline void require(bool ok, const std::string& msg)
{
    if (!ok)
        throw Error(msg);
}

} // namespace slack

/// Given [R, AB; *, Z] ≻ 0, returns X with [R, A; *, X^-1] ≻ 0 and [X, B; *, Z] ≻ 0.
///
/// X = B Z^-1 Bᵀ + δI, with δ half of what R - A X Aᵀ ≻ 0 leaves room for.
inline LemmaOutcome lemma1_split(const Mat& R, const Mat& A, const Mat& B, const Mat& Z)
{
    slack::require_sym(R, "R");
    slack::require_sym(Z, "Z");
    slack::require(A.rows() == R.rows() && B.cols() == Z.rows() && A.cols() == B.rows(),
        "lemma1_split: block dimensions disagree");

    LemmaOutcome out;
    const Mat composite = slack::block2(R, A * B, Z);
    const double ev = linalg::min_eig(composite);
    if (!(ev > linalg::pd_threshold(composite))) {
        out.refusal = {ev, "composite matrix is not positive definite"};
        return out;
    }

    const Eigen::Index k = A.cols();
    const Mat ZinvBt = Z.llt().solve(B.transpose());
    const Mat X0 = linalg::symmetrize(B * ZinvBt);
    const Mat S = linalg::symmetrize(R - A * X0 * A.transpose());
    const double room = linalg::min_eig(S);
    const double a2 = A.size() == 0 ? 0.0 : A.squaredNorm();
    const double delta = a2 > 0.0 ? 0.5 * room / a2 : 1.0;
    const Mat X = X0 + delta * Mat::Identity(k, k);

    LemmaWitness w;
    w.kind = LemmaKind::lemma1;
    w.matrices["X"] = X;
    const Mat left = slack::block2(R, A, X.inverse());
    const Mat right = slack::block2(X, B, Z);
    w.matrices["left"] = left;
    w.matrices["right"] = right;
    w.min_eig = std::min(linalg::min_eig(linalg::symmetrize(left)), linalg::min_eig(right));
    out.witness = std::move(w);
    return out;
}

/// Given [CᵀXC, Y; *, Z] ≻ 0, returns Ψ = C^-1 X^-1, for which
/// [CΨ + ΨᵀCᵀ - X^-1, ΨᵀY; *, Z] is the congruence blkdiag(Ψ, I)ᵀ(·)blkdiag(Ψ, I)
/// of the hypothesis. The hypothesis is re-checked from the witness side.
inline LemmaOutcome lemma2_witness(const Mat& C, const Mat& X, const Mat& Y, const Mat& Z)
{
    slack::require(C.rows() == C.cols(), "lemma2_witness: C must be square");
    slack::require_sym(X, "X");
    slack::require_sym(Z, "Z");
    slack::require(X.rows() == C.rows() && Y.rows() == C.cols() && Y.cols() == Z.rows(),
        "lemma2_witness: block dimensions disagree");

    LemmaOutcome out;
    const Eigen::FullPivLU<Mat> lu(C);
    if (!lu.isInvertible())
        throw Error("lemma2_witness: C is singular");
    const double xev = linalg::min_eig(X);
    if (!(xev > linalg::pd_threshold(X))) {
        out.refusal = {xev, "X is not positive definite"};
        return out;
    }
    const Mat hyp = slack::block2(C.transpose() * X * C, Y, Z);
    const double hev = linalg::min_eig(linalg::symmetrize(hyp));
    if (!(hev > linalg::pd_threshold(hyp))) {
        out.refusal = {hev, "[CᵀXC, Y; *, Z] is not positive definite"};
        return out;
    }

    const Mat Xinv = X.inverse();
    const Mat Psi = lu.solve(Xinv);
    const Mat top = C * Psi + Psi.transpose() * C.transpose() - Xinv;
    const Mat blk = linalg::symmetrize(slack::block2(top, Psi.transpose() * Y, Z));

    LemmaWitness w;
    w.kind = LemmaKind::lemma2;
    w.matrices["Psi"] = Psi;
    w.matrices["block"] = blk;
    w.min_eig = linalg::min_eig(blk);
    if (w.min_eig > linalg::pd_threshold(blk) && !(hev > 0.0))
        throw ConsistencyFailure("lemma2_witness: witness holds but the hypothesis does not");
    out.witness = std::move(w);
    return out;
}

/// Statement-2 side of Lemma 2 for a given Ψ: min eigenvalue of
/// [CΨ + ΨᵀCᵀ - X^-1, ΨᵀY; *, Z].
inline double lemma2_split_min_eig(const Mat& C, const Mat& X, const Mat& Y, const Mat& Z, const Mat& Psi)
{
    const Mat top = C * Psi + Psi.transpose() * C.transpose() - X.inverse();
    return linalg::min_eig(linalg::symmetrize(slack::block2(top, Psi.transpose() * Y, Z)));
}

struct Lemma3Blocks {
    Mat Delta, hypothesis, conclusion;
};

/// Assembles Δ = [Γ, Y; *, Ξ], the hypothesis block and the conclusion block.
/// With add_xgx, XΓXᵀ is added to the hypothesis' top-left entry.
inline Lemma3Blocks lemma3_blocks(const Mat& X, const Mat& Y, const Mat& Z, const Mat& V, const Mat& W,
    const Mat& Theta, const Mat& Gamma, const Mat& Xi, bool add_xgx = false)
{
    const Eigen::Index a = Z.rows(), b = Gamma.rows(), c = W.rows();
    slack::require(Z.cols() == a && X.rows() == a && X.cols() == b && Y.rows() == b && Y.cols() == a
            && Xi.rows() == a && Xi.cols() == a && Gamma.cols() == b && V.rows() == a && V.cols() == c
            && W.cols() == c && Theta.rows() == a + b && Theta.cols() == a + b,
        "lemma3_check: block dimensions disagree");
    Lemma3Blocks out;
    out.Delta = slack::block2(Gamma, Y, Xi);
    Mat XI(a, a + b);
    XI << -X, Mat::Identity(a, a);
    Mat tl = Z + Xi;
    if (add_xgx)
        tl += X * Gamma * X.transpose();
    out.hypothesis = linalg::symmetrize(slack::block3(
        tl, XI * Theta, V, Theta + Theta.transpose() - out.Delta, Mat::Zero(a + b, c), W));
    out.conclusion = linalg::symmetrize(slack::block2(Z + X * Y + Y.transpose() * X.transpose(), V, W));
    return out;
}

/// True iff Δ ≻ 0 and the hypothesis block ≻ 0. When true, the conclusion
/// [Z + XY + YᵀXᵀ, V; *, W] ≻ 0 is asserted.
inline bool lemma3_check(const Mat& X, const Mat& Y, const Mat& Z, const Mat& V, const Mat& W,
    const Mat& Theta, const Mat& Gamma, const Mat& Xi, bool add_xgx = false)
{
    const auto blk = lemma3_blocks(X, Y, Z, V, W, Theta, Gamma, Xi, add_xgx);
    if (!linalg::is_pd(linalg::symmetrize(blk.Delta)) || !linalg::is_pd(blk.hypothesis))
        return false;
    const double ev = linalg::min_eig(blk.conclusion);
    if (!(ev > -1e-9 * (1.0 + blk.conclusion.norm())))
        throw ConsistencyFailure("lemma3_check: hypothesis holds but conclusion has eigenvalue "
            + std::to_string(ev));
    return true;
}

/// Reverse direction with XΓXᵀ added: if the conclusion holds, Θ = Δ and
/// Γ = Ξ = (σ_max(Y) + 1)I make the augmented hypothesis hold.
inline LemmaOutcome lemma3_reverse_witness(const Mat& X, const Mat& Y, const Mat& Z, const Mat& V, const Mat& W)
{
    const Eigen::Index a = Z.rows(), b = X.cols();
    LemmaOutcome out;
    const Mat concl = linalg::symmetrize(slack::block2(Z + X * Y + Y.transpose() * X.transpose(), V, W));
    const double cev = linalg::min_eig(concl);
    if (!(cev > linalg::pd_threshold(concl))) {
        out.refusal = {cev, "conclusion block is not positive definite"};
        return out;
    }
    const double s = Y.size() == 0 ? 0.0 : Eigen::JacobiSVD<Mat>(Y).singularValues()(0);
    const Mat Gamma = (s + 1.0) * Mat::Identity(b, b);
    const Mat Xi = (s + 1.0) * Mat::Identity(a, a);
    const Mat Delta = slack::block2(Gamma, Y, Xi);
    const auto blk = lemma3_blocks(X, Y, Z, V, W, Delta, Gamma, Xi, true);

    LemmaWitness w;
    w.kind = LemmaKind::lemma3;
    w.matrices["Theta"] = Delta;
    w.matrices["Gamma"] = Gamma;
    w.matrices["Xi"] = Xi;
    w.matrices["Delta"] = Delta;
    w.min_eig = std::min(linalg::min_eig(linalg::symmetrize(Delta)), linalg::min_eig(blk.hypothesis));
    out.witness = std::move(w);
    return out;
}

namespace rnd {

inline Mat normal(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat M(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i)
            M(i, j) = nd(rng);
    return M;
}

inline Mat sym(std::mt19937_64& rng, Eigen::Index n) { return linalg::symmetrize(normal(rng, n, n)); }

/// Symmetric normal sample shifted by (|λ_min| + 1)I.
inline Mat pd(std::mt19937_64& rng, Eigen::Index n)
{
    Mat S = sym(rng, n);
    if (n == 0)
        return S;
    S += (std::abs(linalg::min_eig(S)) + 1.0) * Mat::Identity(n, n);
    return S;
}

} // namespace rnd

} // namespace sepinv
