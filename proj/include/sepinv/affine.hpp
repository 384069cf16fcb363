#pragma once

#include "sepinv/linalg.hpp"

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

namespace sepinv {

/// A matrix whose entries are affine in the scalar decision variables:
/// M(y) = K + Σ_t coeff_t · y[var_t] · e_{r_t} e_{c_t}ᵀ.
class AffMat {
public:
    struct Term {
        Eigen::Index r, c;
        int var;
        double coeff;
    };

    AffMat() = default;
    AffMat(Eigen::Index rows, Eigen::Index cols) : k_(Mat::Zero(rows, cols)) {}

    static AffMat constant(const Mat& m)
    {
        AffMat a;
        a.k_ = m;
        return a;
    }

    /// A full rows×cols variable stored row-major from `offset`.
    static AffMat full(int offset, Eigen::Index rows, Eigen::Index cols)
    {
        AffMat a(rows, cols);
        a.t_.reserve(rows * cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j)
                a.t_.push_back({i, j, offset + static_cast<int>(i * cols + j), 1.0});
        return a;
    }

    /// Index of entry (i, j), i <= j, of a packed upper-triangular n×n variable.
    static int sym_index(int offset, Eigen::Index n, Eigen::Index i, Eigen::Index j)
    {
        if (i > j)
            std::swap(i, j);
        return offset + static_cast<int>(i * n - i * (i - 1) / 2 + (j - i));
    }

    /// A symmetric n×n variable, upper triangle packed row-major from `offset`.
    static AffMat sym(int offset, Eigen::Index n)
    {
        AffMat a(n, n);
        a.t_.reserve(n * n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                a.t_.push_back({i, j, sym_index(offset, n, i, j), 1.0});
        return a;
    }

    /// A diagonal n×n variable with entries at offset..offset+n-1.
    static AffMat diag(int offset, Eigen::Index n)
    {
        AffMat a(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            a.t_.push_back({i, i, offset + static_cast<int>(i), 1.0});
        return a;
    }

    Eigen::Index rows() const { return k_.rows(); }
    Eigen::Index cols() const { return k_.cols(); }
    const Mat& constant_part() const { return k_; }
    const std::vector<Term>& terms() const { return t_; }

    AffMat transpose() const
    {
        AffMat a;
        a.k_ = k_.transpose();
        a.t_.reserve(t_.size());
        for (const auto& t : t_)
            a.t_.push_back({t.c, t.r, t.var, t.coeff});
        return a;
    }

    AffMat& operator+=(const AffMat& o)
    {
        check_same(o);
        k_ += o.k_;
        t_.insert(t_.end(), o.t_.begin(), o.t_.end());
        return *this;
    }
    AffMat& operator-=(const AffMat& o)
    {
        check_same(o);
        k_ -= o.k_;
        t_.reserve(t_.size() + o.t_.size());
        for (const auto& t : o.t_)
            t_.push_back({t.r, t.c, t.var, -t.coeff});
        return *this;
    }
    AffMat& operator*=(double s)
    {
        k_ *= s;
        for (auto& t : t_)
            t.coeff *= s;
        return *this;
    }

    friend AffMat operator+(AffMat a, const AffMat& b) { return a += b; }
    friend AffMat operator-(AffMat a, const AffMat& b) { return a -= b; }
    friend AffMat operator*(double s, AffMat a) { return a *= s; }
    friend AffMat operator-(AffMat a) { return a *= -1.0; }
    friend AffMat operator+(AffMat a, const Mat& m) { return a += AffMat::constant(m); }
    friend AffMat operator-(AffMat a, const Mat& m) { return a -= AffMat::constant(m); }

    friend AffMat operator*(const Mat& m, const AffMat& x)
    {
        if (m.cols() != x.rows())
            throw Error("AffMat: left product dimension mismatch");
        AffMat a;
        a.k_ = m * x.k_;
        for (const auto& t : x.t_)
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                const double v = m(i, t.r);
                if (v != 0.0)
                    a.t_.push_back({i, t.c, t.var, v * t.coeff});
            }
        return a;
    }

    friend AffMat operator*(const AffMat& x, const Mat& m)
    {
        if (x.cols() != m.rows())
            throw Error("AffMat: right product dimension mismatch");
        AffMat a;
        a.k_ = x.k_ * m;
        for (const auto& t : x.t_)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                const double v = m(t.c, j);
                if (v != 0.0)
                    a.t_.push_back({t.r, j, t.var, v * t.coeff});
            }
        return a;
    }

    static AffMat blkdiag(const std::vector<AffMat>& parts)
    {
        Eigen::Index r = 0, c = 0;
        for (const auto& p : parts) {
            r += p.rows();
            c += p.cols();
        }
        AffMat a(r, c);
        r = c = 0;
        for (const auto& p : parts) {
            a.embed(r, c, p);
            r += p.rows();
            c += p.cols();
        }
        return a;
    }

    /// Add `src` into this matrix with its top-left corner at (r0, c0).
    void embed(Eigen::Index r0, Eigen::Index c0, const AffMat& src)
    {
        if (r0 + src.rows() > rows() || c0 + src.cols() > cols())
            throw Error("AffMat::embed: block does not fit");
        k_.block(r0, c0, src.rows(), src.cols()) += src.k_;
        for (const auto& t : src.t_)
            t_.push_back({t.r + r0, t.c + c0, t.var, t.coeff});
    }

    Mat eval(const Vec& y) const
    {
        Mat m = k_;
        for (const auto& t : t_)
            m(t.r, t.c) += t.coeff * y(t.var);
        return m;
    }

private:
    void check_same(const AffMat& o) const
    {
        if (o.rows() != rows() || o.cols() != cols())
            throw Error("AffMat: shape mismatch in sum");
    }

    Mat k_;
    std::vector<Term> t_;
};

} // namespace sepinv
