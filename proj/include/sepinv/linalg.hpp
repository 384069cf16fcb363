#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sepinv {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Error raised for malformed inputs and violated preconditions.
///
/// `subsystem` is 1-based when the failure can be attributed to a subsystem,
/// otherwise 0. `field` names the offending model field, if any.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, int subsystem = 0, std::string field = {})
        : std::runtime_error(what), subsystem_(subsystem), field_(std::move(field))
    {
    }

    int subsystem() const noexcept { return subsystem_; }
    const std::string& field() const noexcept { return field_; }

private:
    int subsystem_;
    std::string field_;
};

namespace linalg {

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

inline bool is_symmetric(const Mat& m, double tol = 1e-12)
{
    if (m.rows() != m.cols())
        return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

/// Smallest eigenvalue of the symmetric part of `m` (0 for an empty matrix).
inline double min_eig(const Mat& m)
{
    if (m.size() == 0)
        return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

/// PD threshold used by the lemma oracles: λ_min > 1e-10·(1 + ‖M‖_F).
inline double pd_threshold(const Mat& m) { return 1e-10 * (1.0 + m.norm()); }

inline bool is_pd(const Mat& m) { return min_eig(m) > pd_threshold(m); }

/// Assemble a symmetric matrix from a 2-D grid of blocks. Entries of `grid`
/// below the diagonal may be empty (0×0), in which case the transpose of the
/// mirrored block is used.
inline Mat sym_blocks(const std::vector<std::vector<Mat>>& grid)
{
    const std::size_t nb = grid.size();
    std::vector<Eigen::Index> sizes(nb, 0);
    for (std::size_t i = 0; i < nb; ++i)
        sizes[i] = grid[i][i].rows();
    Eigen::Index total = 0;
    std::vector<Eigen::Index> off(nb, 0);
    for (std::size_t i = 0; i < nb; ++i) {
        off[i] = total;
        total += sizes[i];
    }
    Mat out = Mat::Zero(total, total);
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t j = i; j < nb; ++j) {
            const Mat& b = grid[i][j];
            if (b.size() == 0)
                continue;
            if (b.rows() != sizes[i] || b.cols() != sizes[j])
                throw Error("sym_blocks: block size mismatch");
            out.block(off[i], off[j], sizes[i], sizes[j]) = b;
            if (i != j)
                out.block(off[j], off[i], sizes[j], sizes[i]) = b.transpose();
        }
    }
    return out;
}

inline Mat blkdiag(const std::vector<Mat>& blocks)
{
    Eigen::Index r = 0, c = 0;
    for (const auto& b : blocks) {
        r += b.rows();
        c += b.cols();
    }
    Mat out = Mat::Zero(r, c);
    r = c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

inline double cond(const Mat& m)
{
    if (m.size() == 0)
        return 1.0;
    Eigen::JacobiSVD<Mat> svd(m);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    if (smin <= 0.0)
        return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

inline Eigen::Index rank(const Mat& m, double tol = 1e-10)
{
    if (m.size() == 0)
        return 0;
    Eigen::ColPivHouseholderQR<Mat> qr(m);
    qr.setThreshold(tol);
    return qr.rank();
}

} // namespace linalg
} // namespace sepinv
