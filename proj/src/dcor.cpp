#include "csdis/dcor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "csdis/errors.hpp"

namespace csdis {

namespace {

using Index = Eigen::Index;

// Squared distances below this fraction of ‖x‖² + ‖y‖² are dominated by
// rounding in the Gram form.
constexpr double kRefineRatio = 1e-6;
constexpr double kNegativeGuard = -1e-12;
constexpr double kClampTolerance = 1e-9;

void require_finite(const Matrix& x, const char* what) {
    if (x.rows() < 2) throw ShapeError(std::string(what) + " needs at least 2 rows");
    if (x.cols() < 1) throw ShapeError(std::string(what) + " needs at least 1 column");
    if (!x.allFinite()) throw InputError(std::string(what) + " contains non-finite values");
}

void require_same_n(const Matrix& x, const Matrix& y) {
    if (x.rows() != y.rows())
        throw ShapeError("sample count mismatch: " + std::to_string(x.rows()) + " vs " + std::to_string(y.rows()));
}

Matrix column_centred(const Matrix& x) {
    Matrix c = x;
    c.rowwise() -= x.colwise().mean();
    return c;
}

double refined_distance(const Matrix& xc, Index i, Index j, double gram_sq, double ni, double nj) {
    if (gram_sq > kRefineRatio * (ni + nj)) return std::sqrt(gram_sq);
    return (xc.row(i) - xc.row(j)).norm();
}

// Distances from rows [begin, begin + rows) of xc to every row.
Matrix distance_block(const Matrix& xc, const Eigen::VectorXd& norms, Index begin, Index rows) {
    Matrix d = xc.middleRows(begin, rows) * xc.transpose();
    for (Index r = 0; r < rows; ++r) {
        const Index i = begin + r;
        for (Index j = 0; j < xc.rows(); ++j) {
            if (i == j) {
                d(r, j) = 0.0;
                continue;
            }
            const double sq = std::max(0.0, norms[i] + norms[j] - 2.0 * d(r, j));
            d(r, j) = refined_distance(xc, i, j, sq, norms[i], norms[j]);
        }
    }
    return d;
}

double clamp_unit(double v) {
    if (v > 1.0 && v <= 1.0 + kClampTolerance) return 1.0;
    if (v < 0.0 && v >= -kClampTolerance) return 0.0;
    return v;
}

double guarded_sqrt(double mean_product, const char* what) {
    if (mean_product < 0.0) {
        if (mean_product >= kNegativeGuard) return 0.0;
        throw NumericalError(std::string(what) + " squared is negative (" + std::to_string(mean_product) + ")");
    }
    return std::sqrt(mean_product);
}

DcorResult assemble(double mean_xy, double mean_xx, double mean_yy, std::size_t n) {
    DcorResult r;
    r.n = n;
    r.dcov_xy = guarded_sqrt(mean_xy, "dCov(X,Y)");
    r.dcov_xx = guarded_sqrt(mean_xx, "dCov(X,X)");
    r.dcov_yy = guarded_sqrt(mean_yy, "dCov(Y,Y)");
    if (r.dcov_xx == 0.0) throw DegenerateInput("first representation is constant across samples");
    if (r.dcov_yy == 0.0) throw DegenerateInput("second representation is constant across samples");
    r.dcor = clamp_unit(r.dcov_xy / std::sqrt(r.dcov_xx * r.dcov_yy));
    if (r.dcor < 0.0 || r.dcor > 1.0)
        throw NumericalError("distance correlation " + std::to_string(r.dcor) + " outside [0,1]");
    return r;
}

} // namespace

Matrix pairwise_distances(const Matrix& x) {
    require_finite(x, "pairwise_distances input");
    const Matrix xc = column_centred(x);
    const Eigen::VectorXd norms = xc.rowwise().squaredNorm();
    Matrix d = distance_block(xc, norms, 0, xc.rows());
    // mirror the upper triangle so the result is exactly symmetric
    for (Index i = 0; i < d.rows(); ++i)
        for (Index j = 0; j < i; ++j) d(i, j) = d(j, i);
    return d;
}

CenteredDistanceMatrix double_center(const Matrix& distances) {
    if (distances.rows() != distances.cols())
        throw ShapeError("double_center needs a square matrix, got " + std::to_string(distances.rows()) + "x" +
                         std::to_string(distances.cols()));
    if (!distances.allFinite()) throw InputError("distance matrix contains non-finite values");
    const Eigen::VectorXd row_mean = distances.rowwise().mean();
    const Eigen::RowVectorXd col_mean = distances.colwise().mean();
    const double grand = distances.mean();
    CenteredDistanceMatrix out;
    out.entries = distances;
    out.entries.colwise() -= row_mean;
    out.entries.rowwise() -= col_mean;
    out.entries.array() += grand;
    return out;
}

CenteredDistanceMatrix centered_distances(const Matrix& x) { return double_center(pairwise_distances(x)); }

double dcov(const CenteredDistanceMatrix& a, const CenteredDistanceMatrix& b) {
    if (a.n() != b.n()) throw ShapeError("sample count mismatch: " + std::to_string(a.n()) + " vs " + std::to_string(b.n()));
    const double n = static_cast<double>(a.n());
    return guarded_sqrt(a.entries.cwiseProduct(b.entries).sum() / (n * n), "dCov");
}

double dcov(const Matrix& x, const Matrix& y) {
    require_same_n(x, y);
    return dcov(centered_distances(x), centered_distances(y));
}

DcorResult dcor(const CenteredDistanceMatrix& a, const CenteredDistanceMatrix& b) {
    if (a.n() != b.n()) throw ShapeError("sample count mismatch: " + std::to_string(a.n()) + " vs " + std::to_string(b.n()));
    const double n2 = static_cast<double>(a.n()) * static_cast<double>(a.n());
    return assemble(a.entries.cwiseProduct(b.entries).sum() / n2, a.entries.squaredNorm() / n2,
                    b.entries.squaredNorm() / n2, a.n());
}

DcorResult dcor(const Matrix& x, const Matrix& y) {
    require_same_n(x, y);
    return dcor(centered_distances(x), centered_distances(y));
}

DcorResult dcor_blocked(const Matrix& x, const Matrix& y, std::size_t block) {
    require_finite(x, "dcor X");
    require_finite(y, "dcor Y");
    require_same_n(x, y);
    if (block < 1) throw ConfigError("block size must be >= 1");
    const Index n = x.rows();
    const Index step = static_cast<Index>(std::min<std::size_t>(block, static_cast<std::size_t>(n)));

    const Matrix xc = column_centred(x), yc = column_centred(y);
    const Eigen::VectorXd nx = xc.rowwise().squaredNorm(), ny = yc.rowwise().squaredNorm();

    // pass 1: row means (equal to column means by symmetry) and grand means
    Eigen::VectorXd mean_x(n), mean_y(n);
    for (Index begin = 0; begin < n; begin += step) {
        const Index rows = std::min(step, n - begin);
        mean_x.segment(begin, rows) = distance_block(xc, nx, begin, rows).rowwise().mean();
        mean_y.segment(begin, rows) = distance_block(yc, ny, begin, rows).rowwise().mean();
    }
    const double grand_x = mean_x.mean(), grand_y = mean_y.mean();

    // pass 2: centred products, reduced in block order
    double sum_xy = 0.0, sum_xx = 0.0, sum_yy = 0.0;
    for (Index begin = 0; begin < n; begin += step) {
        const Index rows = std::min(step, n - begin);
        Matrix a = distance_block(xc, nx, begin, rows);
        Matrix b = distance_block(yc, ny, begin, rows);
        a.colwise() -= mean_x.segment(begin, rows);
        a.rowwise() -= mean_x.transpose();
        a.array() += grand_x;
        b.colwise() -= mean_y.segment(begin, rows);
        b.rowwise() -= mean_y.transpose();
        b.array() += grand_y;
        sum_xy += a.cwiseProduct(b).sum();
        sum_xx += a.squaredNorm();
        sum_yy += b.squaredNorm();
    }
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    return assemble(sum_xy / n2, sum_xx / n2, sum_yy / n2, static_cast<std::size_t>(n));
}

} // namespace csdis
