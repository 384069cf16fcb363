#pragma once

#include "sepinv/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace sepinv {

/// {x : H x <= h}
struct HPolytope {
    Mat H;
    Vec h;

    HPolytope() = default;
    HPolytope(Mat H_, Vec h_) : H(std::move(H_)), h(std::move(h_))
    {
        if (H.rows() != h.size())
            throw Error("HPolytope: H has " + std::to_string(H.rows()) + " rows but h has "
                + std::to_string(h.size()) + " entries");
        if (!H.allFinite() || !h.allFinite())
            throw Error("HPolytope: non-finite entries");
    }

    Eigen::Index dim() const { return H.cols(); }
    Eigen::Index rows() const { return H.rows(); }

    bool contains_point(const Vec& x, double tol = 1e-9) const
    {
        if (rows() == 0)
            return true;
        return ((H * x - h).array() <= tol).all();
    }

    /// Largest constraint residual max_k (H_k x - h_k); -inf for no rows.
    double max_residual(const Vec& x) const
    {
        if (rows() == 0)
            return -std::numeric_limits<double>::infinity();
        return (H * x - h).maxCoeff();
    }

    /// The canonical empty polytope in dimension n: 0·x <= -1.
    static HPolytope empty(Eigen::Index n)
    {
        return HPolytope(Mat::Zero(1, n), Vec::Constant(1, -1.0));
    }

    static HPolytope box(const Vec& lo, const Vec& hi)
    {
        const Eigen::Index n = lo.size();
        Mat H(2 * n, n);
        H << Mat::Identity(n, n), -Mat::Identity(n, n);
        Vec h(2 * n);
        h << hi, -lo;
        return HPolytope(H, h);
    }

    HPolytope intersect(const HPolytope& other) const
    {
        if (other.dim() != dim())
            throw Error("HPolytope::intersect: dimension mismatch");
        Mat H2(rows() + other.rows(), dim());
        H2 << H, other.H;
        Vec h2(rows() + other.rows());
        h2 << h, other.h;
        return HPolytope(H2, h2);
    }

    /// Image under x ↦ s·x for s > 0.
    HPolytope scaled(double s) const { return HPolytope(H, s * h); }
};

/// The symmetric candidate-set shape {x : -1 <= Z H x <= 1}.
struct GenSet {
    Mat Z;
    Mat H;

    GenSet() = default;
    GenSet(Mat Z_, Mat H_) : Z(std::move(Z_)), H(std::move(H_))
    {
        if (H.rows() != H.cols() || Z.cols() != H.rows())
            throw Error("GenSet: Z must be N×n and H n×n");
    }

    Eigen::Index dim() const { return H.cols(); }
    Mat facets() const { return Z * H; }

    HPolytope to_hpolytope() const
    {
        const Mat F = facets();
        Mat Hp(2 * F.rows(), F.cols());
        Hp << F, -F;
        return HPolytope(Hp, Vec::Ones(2 * F.rows()));
    }

    bool contains_point(const Vec& x, double tol = 1e-9) const
    {
        return (facets() * x).cwiseAbs().maxCoeff() <= 1.0 + tol;
    }
};

enum class LpStatus { optimal, infeasible, unbounded, numerical_failure };
enum class Sense { maximize, minimize };

inline const char* to_string(LpStatus s)
{
    switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::numerical_failure: return "numerical_failure";
    }
    return "?";
}

struct LpResult {
    LpStatus status = LpStatus::numerical_failure;
    std::optional<Vec> x_star;
    std::optional<double> value;
    int iterations = 0;

    bool optimal() const { return status == LpStatus::optimal; }
};

namespace lp {

inline constexpr double tol_feas = 1e-8;
inline constexpr double tol_pivot = 1e-10;
inline constexpr double tol_reduced_cost = 1e-10;

namespace detail {

/// Dense two-phase tableau simplex with Bland's rule, for
/// min c'z s.t. A z = b, z >= 0, b >= 0.
class Simplex {
public:
    Simplex(const Mat& A, const Vec& b, std::vector<int> basis)
        : rows_(A.rows()), cols_(A.cols()), basis_(std::move(basis))
    {
        T_ = Mat::Zero(rows_ + 1, cols_ + 1);
        T_.topLeftCorner(rows_, cols_) = A;
        T_.topRightCorner(rows_, 1) = b;
        max_iter_ = 200 * static_cast<int>(rows_ + cols_) + 1000;
    }

    /// Returns optimal/unbounded/numerical_failure for the given cost vector.
    /// Columns flagged in `blocked` never enter.
    LpStatus run(const Vec& cost, const std::vector<bool>& blocked)
    {
        // reduced costs: c_j - c_B' B^-1 A_j ; corner holds -c_B' x_B
        T_.row(rows_).setZero();
        T_.block(rows_, 0, 1, cols_) = cost.transpose();
        for (Eigen::Index i = 0; i < rows_; ++i) {
            const double cb = cost(basis_[i]);
            if (cb != 0.0)
                T_.row(rows_) -= cb * T_.row(i);
        }
        for (;;) {
            if (++iterations_ > max_iter_)
                return LpStatus::numerical_failure;
            Eigen::Index enter = -1;
            for (Eigen::Index j = 0; j < cols_; ++j) {
                if (blocked[j])
                    continue;
                if (T_(rows_, j) < -tol_reduced_cost) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0)
                return LpStatus::optimal;
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < rows_; ++i) {
                const double a = T_(i, enter);
                if (a > tol_pivot)
                    best = std::min(best, T_(i, cols_) / a);
            }
            if (!std::isfinite(best))
                return LpStatus::unbounded;
            // Bland: among minimum-ratio rows, leave with the smallest basic index
            Eigen::Index leave = -1;
            const double slack = 1e-12 * (1.0 + std::abs(best));
            for (Eigen::Index i = 0; i < rows_; ++i) {
                const double a = T_(i, enter);
                if (a <= tol_pivot || T_(i, cols_) / a > best + slack)
                    continue;
                if (leave < 0 || basis_[i] < basis_[leave])
                    leave = i;
            }
            pivot(leave, enter);
            if (!T_.allFinite())
                return LpStatus::numerical_failure;
        }
    }

    void pivot(Eigen::Index r, Eigen::Index c)
    {
        T_.row(r) /= T_(r, c);
        for (Eigen::Index i = 0; i <= rows_; ++i) {
            if (i == r)
                continue;
            const double f = T_(i, c);
            if (f != 0.0)
                T_.row(i) -= f * T_.row(r);
        }
        basis_[r] = static_cast<int>(c);
    }

    /// Pivot basic artificial variables out where possible.
    void expel_artificials(int first_art)
    {
        for (Eigen::Index i = 0; i < rows_; ++i) {
            if (basis_[i] < first_art)
                continue;
            Eigen::Index best = -1;
            double bestv = tol_pivot;
            for (Eigen::Index j = 0; j < first_art; ++j) {
                if (std::abs(T_(i, j)) > bestv) {
                    bestv = std::abs(T_(i, j));
                    best = j;
                }
            }
            if (best >= 0)
                pivot(i, best);
        }
    }

    Vec solution() const
    {
        Vec z = Vec::Zero(cols_);
        for (Eigen::Index i = 0; i < rows_; ++i)
            z(basis_[i]) = T_(i, cols_);
        return z;
    }

    double objective() const { return -T_(rows_, cols_); }
    const std::vector<int>& basis() const { return basis_; }
    int iterations() const { return iterations_; }

private:
    Eigen::Index rows_, cols_;
    std::vector<int> basis_;
    Mat T_;
    int iterations_ = 0;
    int max_iter_ = 0;
};

} // namespace detail

/// Optimize c·x over {x : Hx <= h} with x free.
///
/// Rows are normalized before the tableau is built; the returned point is
/// polished by re-solving the active set when that lowers the residual.
inline LpResult solve(const Vec& c, const HPolytope& P, Sense sense = Sense::maximize)
{
    const Eigen::Index n = P.dim();
    if (c.size() != n)
        throw Error("lp_solve: objective has " + std::to_string(c.size())
            + " entries, polytope dimension is " + std::to_string(n));

    LpResult res;
    // normalize rows; drop zero rows (or detect infeasibility)
    std::vector<Eigen::Index> keep;
    keep.reserve(P.rows());
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        const double nrm = P.H.row(i).norm();
        if (nrm <= 1e-14) {
            if (P.h(i) < -tol_feas) {
                res.status = LpStatus::infeasible;
                return res;
            }
            continue;
        }
        keep.push_back(i);
    }
    const Eigen::Index r = static_cast<Eigen::Index>(keep.size());
    Mat Hn(r, n);
    Vec hn(r);
    for (Eigen::Index k = 0; k < r; ++k) {
        const double nrm = P.H.row(keep[k]).norm();
        Hn.row(k) = P.H.row(keep[k]) / nrm;
        hn(k) = P.h(keep[k]) / nrm;
    }

    const Vec cmin = (sense == Sense::maximize) ? Vec(-c) : c;

    if (r == 0) {
        if (c.cwiseAbs().maxCoeff() > 0.0) {
            res.status = LpStatus::unbounded;
            return res;
        }
        res.status = LpStatus::optimal;
        res.x_star = Vec::Zero(n);
        res.value = 0.0;
        return res;
    }

    // columns: x+ (n), x- (n), slack (r), artificial (na)
    int na = 0;
    for (Eigen::Index i = 0; i < r; ++i)
        if (hn(i) < 0.0)
            ++na;
    const Eigen::Index ncols = 2 * n + r + na;
    Mat A = Mat::Zero(r, ncols);
    Vec b(r);
    std::vector<int> basis(r);
    int art = 0;
    for (Eigen::Index i = 0; i < r; ++i) {
        const double sgn = hn(i) < 0.0 ? -1.0 : 1.0;
        A.block(i, 0, 1, n) = sgn * Hn.row(i);
        A.block(i, n, 1, n) = -sgn * Hn.row(i);
        A(i, 2 * n + i) = sgn;
        b(i) = sgn * hn(i);
        if (sgn < 0.0) {
            const Eigen::Index col = 2 * n + r + art;
            A(i, col) = 1.0;
            basis[i] = static_cast<int>(col);
            ++art;
        } else {
            basis[i] = static_cast<int>(2 * n + i);
        }
    }

    detail::Simplex spx(A, b, basis);
    const int first_art = static_cast<int>(2 * n + r);
    std::vector<bool> blocked(ncols, false);
    if (na > 0) {
        Vec c1 = Vec::Zero(ncols);
        c1.tail(na).setOnes();
        const LpStatus s1 = spx.run(c1, blocked);
        if (s1 != LpStatus::optimal) {
            res.status = LpStatus::numerical_failure;
            res.iterations = spx.iterations();
            return res;
        }
        if (spx.objective() > tol_feas) {
            res.status = LpStatus::infeasible;
            res.iterations = spx.iterations();
            return res;
        }
        spx.expel_artificials(first_art);
        for (Eigen::Index j = first_art; j < ncols; ++j)
            blocked[j] = true;
    }
    Vec c2 = Vec::Zero(ncols);
    c2.head(n) = cmin;
    c2.segment(n, n) = -cmin;
    const LpStatus s2 = spx.run(c2, blocked);
    res.iterations = spx.iterations();
    if (s2 != LpStatus::optimal) {
        res.status = s2;
        return res;
    }

    const Vec z = spx.solution();
    Vec x = z.head(n) - z.segment(n, n);

    // polish on the active set
    std::vector<Eigen::Index> active;
    std::vector<bool> slack_basic(r, false);
    for (int bcol : spx.basis())
        if (bcol >= 2 * n && bcol < first_art)
            slack_basic[bcol - 2 * n] = true;
    for (Eigen::Index i = 0; i < r; ++i)
        if (!slack_basic[i])
            active.push_back(i);
    if (static_cast<Eigen::Index>(active.size()) >= n && n > 0) {
        Mat Ha(active.size(), n);
        Vec ha(active.size());
        for (std::size_t k = 0; k < active.size(); ++k) {
            Ha.row(k) = Hn.row(active[k]);
            ha(k) = hn(active[k]);
        }
        Eigen::ColPivHouseholderQR<Mat> qr(Ha);
        if (qr.rank() == n) {
            const Vec xp = qr.solve(ha);
            const double res_old = std::max(0.0, (Hn * x - hn).maxCoeff());
            const double res_new = std::max(0.0, (Hn * xp - hn).maxCoeff());
            if (xp.allFinite() && res_new <= res_old
                && std::abs(c.dot(xp) - c.dot(x)) <= 1e-9 * (1.0 + std::abs(c.dot(x))))
                x = xp;
        }
    }
    if (!x.allFinite()) {
        res.status = LpStatus::numerical_failure;
        return res;
    }
    if ((Hn * x - hn).maxCoeff() > tol_feas * (1.0 + hn.cwiseAbs().maxCoeff())) {
        res.status = LpStatus::numerical_failure;
        return res;
    }
    res.status = LpStatus::optimal;
    res.x_star = x;
    res.value = c.dot(x);
    return res;
}

} // namespace lp

inline LpResult lp_solve(const Vec& c, const HPolytope& P, Sense sense = Sense::maximize)
{
    return lp::solve(c, P, sense);
}

inline bool is_empty(const HPolytope& P)
{
    const LpResult r = lp_solve(Vec::Zero(P.dim()), P);
    if (r.status == LpStatus::numerical_failure)
        throw Error("is_empty: LP numerical failure");
    return r.status == LpStatus::infeasible;
}

/// max_{x∈P} dir·x. Throws for unbounded or empty P.
inline double support(const HPolytope& P, const Vec& dir)
{
    if (dir.size() != P.dim())
        throw Error("support: direction dimension mismatch");
    if (P.dim() == 0)
        return 0.0;
    const LpResult r = lp_solve(dir, P, Sense::maximize);
    switch (r.status) {
    case LpStatus::optimal: return *r.value;
    case LpStatus::unbounded: throw Error("support: set is unbounded in the given direction");
    case LpStatus::infeasible: throw Error("support: set is empty");
    case LpStatus::numerical_failure: break;
    }
    throw Error("support: LP numerical failure");
}

inline double support(const GenSet& S, const Vec& dir) { return support(S.to_hpolytope(), dir); }

struct Containment {
    bool contained = false;
    Vec margins;
};

/// margin_k = h_k - support(inner, H_k); contained iff all margins >= -tol.
template <typename Inner>
Containment contains(const HPolytope& outer, const Inner& inner, double tol = lp::tol_feas)
{
    if (outer.dim() != inner.dim())
        throw Error("contains: ambient dimension mismatch");
    Containment c;
    c.margins.resize(outer.rows());
    for (Eigen::Index k = 0; k < outer.rows(); ++k)
        c.margins(k) = outer.h(k) - support(inner, Vec(outer.H.row(k).transpose()));
    c.contained = outer.rows() == 0 || c.margins.minCoeff() >= -tol;
    return c;
}

/// True when every point of `inner` is in `outer`, treating an empty `inner` as contained.
inline bool subset_of(const HPolytope& inner, const HPolytope& outer, double tol = lp::tol_feas)
{
    if (is_empty(inner))
        return true;
    return contains(outer, inner, tol).contained;
}

inline constexpr double tol_vertex = 1e-7;

/// Vertices of a bounded polytope of dimension <= 3. Planar results are
/// returned in counter-clockwise order.
inline std::vector<Vec> enumerate_vertices(const HPolytope& P)
{
    const Eigen::Index n = P.dim();
    if (n > 3)
        throw Error("enumerate_vertices: dimension " + std::to_string(n) + " > 3 is unsupported");
    if (n == 0)
        return {};
    if (is_empty(P))
        return {};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (double s : {1.0, -1.0}) {
            Vec d = Vec::Zero(n);
            d(i) = s;
            const LpResult r = lp_solve(d, P);
            if (r.status == LpStatus::unbounded)
                throw Error("enumerate_vertices: polytope is unbounded");
        }
    }

    std::vector<Vec> verts;
    const Eigen::Index m = P.rows();
    std::vector<Eigen::Index> idx(n);
    const double scale = 1.0 + P.h.cwiseAbs().maxCoeff();

    auto try_subset = [&]() {
        Mat A(n, n);
        Vec b(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            A.row(k) = P.H.row(idx[k]);
            b(k) = P.h(idx[k]);
        }
        Eigen::FullPivLU<Mat> lu(A);
        lu.setThreshold(1e-12);
        if (lu.rank() < n)
            return;
        const Vec x = lu.solve(b);
        if (!x.allFinite())
            return;
        if ((P.H * x - P.h).maxCoeff() > 1e-9 * scale)
            return;
        for (const auto& v : verts)
            if ((v - x).norm() <= tol_vertex)
                return;
        verts.push_back(x);
    };

    // iterate all n-subsets of the rows
    std::vector<bool> pick(m, false);
    std::fill(pick.begin(), pick.begin() + std::min<Eigen::Index>(n, m), true);
    if (m < n)
        return {};
    do {
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < m; ++i)
            if (pick[i])
                idx[k++] = i;
        try_subset();
    } while (std::prev_permutation(pick.begin(), pick.end()));

    if (n == 2 && verts.size() > 2) {
        Vec center = Vec::Zero(2);
        for (const auto& v : verts)
            center += v;
        center /= static_cast<double>(verts.size());
        std::sort(verts.begin(), verts.end(), [&](const Vec& a, const Vec& b) {
            return std::atan2(a(1) - center(1), a(0) - center(0))
                < std::atan2(b(1) - center(1), b(0) - center(0));
        });
    } else if (n == 1) {
        std::sort(verts.begin(), verts.end(), [](const Vec& a, const Vec& b) { return a(0) < b(0); });
    }
    return verts;
}

inline std::vector<Vec> enumerate_vertices(const GenSet& S) { return enumerate_vertices(S.to_hpolytope()); }

/// Normalize rows, drop duplicates and redundant rows. A row is removed when
/// maximizing it over the remaining rows gives a value below h_k - 1e-9.
/// Returns HPolytope::empty(n) for an empty input.
inline HPolytope remove_redundancy(const HPolytope& P)
{
    const Eigen::Index n = P.dim();
    std::vector<Vec> rows;
    std::vector<double> rhs;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        const double nrm = P.H.row(i).norm();
        if (nrm <= 1e-12) {
            if (P.h(i) < -lp::tol_feas)
                return HPolytope::empty(n);
            continue;
        }
        Vec a = P.H.row(i).transpose() / nrm;
        double b = P.h(i) / nrm;
        bool dup = false;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if ((rows[k] - a).cwiseAbs().maxCoeff() <= 1e-12) {
                rhs[k] = std::min(rhs[k], b);
                dup = true;
                break;
            }
        }
        if (!dup) {
            rows.push_back(a);
            rhs.push_back(b);
        }
    }
    auto build = [&](const std::vector<bool>& alive, Eigen::Index skip) {
        Eigen::Index cnt = 0;
        for (std::size_t k = 0; k < rows.size(); ++k)
            if (alive[k] && static_cast<Eigen::Index>(k) != skip)
                ++cnt;
        Mat H(cnt, n);
        Vec h(cnt);
        Eigen::Index r = 0;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (!alive[k] || static_cast<Eigen::Index>(k) == skip)
                continue;
            H.row(r) = rows[k].transpose();
            h(r) = rhs[k];
            ++r;
        }
        return HPolytope(H, h);
    };
    std::vector<bool> alive(rows.size(), true);
    if (rows.empty())
        return HPolytope(Mat(0, n), Vec(0));
    if (is_empty(build(alive, -1)))
        return HPolytope::empty(n);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const HPolytope rest = build(alive, static_cast<Eigen::Index>(k));
        const LpResult r = lp_solve(rows[k], rest);
        if (r.status == LpStatus::optimal && *r.value < rhs[k] - 1e-9)
            alive[k] = false;
    }
    return build(alive, -1);
}

/// Fourier–Motzkin elimination of the coordinates in `drop`; the remaining
/// coordinates keep their relative order. Redundancy is removed after each
/// eliminated coordinate.
inline HPolytope fm_project(const HPolytope& P, std::vector<Eigen::Index> drop)
{
    const Eigen::Index n = P.dim();
    for (auto d : drop)
        if (d < 0 || d >= n)
            throw Error("fm_project: drop index " + std::to_string(d) + " out of range");
    std::sort(drop.begin(), drop.end());
    drop.erase(std::unique(drop.begin(), drop.end()), drop.end());

    HPolytope cur = remove_redundancy(P);
    // eliminate from the highest index so earlier indices stay valid
    for (auto it = drop.rbegin(); it != drop.rend(); ++it) {
        const Eigen::Index col = *it;
        const Eigen::Index dim = cur.dim();
        std::vector<Eigen::Index> pos, neg, zero;
        for (Eigen::Index i = 0; i < cur.rows(); ++i) {
            const double a = cur.H(i, col);
            if (a > 1e-12)
                pos.push_back(i);
            else if (a < -1e-12)
                neg.push_back(i);
            else
                zero.push_back(i);
        }
        const Eigen::Index out_rows = static_cast<Eigen::Index>(zero.size() + pos.size() * neg.size());
        Mat H(out_rows, dim - 1);
        Vec h(out_rows);
        auto strip = [&](const Eigen::RowVectorXd& row) {
            Eigen::RowVectorXd r(dim - 1);
            r << row.head(col), row.tail(dim - col - 1);
            return r;
        };
        Eigen::Index r = 0;
        for (auto i : zero) {
            H.row(r) = strip(cur.H.row(i));
            h(r) = cur.h(i);
            ++r;
        }
        for (auto p : pos) {
            for (auto q : neg) {
                const double ap = cur.H(p, col);
                const double aq = -cur.H(q, col);
                const Eigen::RowVectorXd comb = aq * cur.H.row(p) + ap * cur.H.row(q);
                H.row(r) = strip(comb);
                h(r) = aq * cur.h(p) + ap * cur.h(q);
                ++r;
            }
        }
        if (dim - 1 == 0) {
            // all that is left is a feasibility statement
            const bool feasible = out_rows == 0 || (h.array() >= -lp::tol_feas).all();
            return feasible ? HPolytope(Mat(0, 0), Vec(0)) : HPolytope::empty(0);
        }
        cur = remove_redundancy(HPolytope(H, h));
    }
    return cur;
}

} // namespace sepinv
