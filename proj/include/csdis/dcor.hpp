#pragma once

#include <cstddef>

#include "csdis/tensor.hpp"

namespace csdis {

// Doubly centred Euclidean distance matrix (V-centring):
// a_ij = d_ij − mean_i(row) − mean_j(col) + grand mean.
struct CenteredDistanceMatrix {
    Matrix entries;

    std::size_t n() const noexcept { return static_cast<std::size_t>(entries.rows()); }
};

struct DcorResult {
    double dcor = 0.0;
    double dcov_xy = 0.0;
    double dcov_xx = 0.0;
    double dcov_yy = 0.0;
    std::size_t n = 0;
};

// Distances via sqrt(max(0, ‖x‖² + ‖y‖² − 2x·y)) on column-centred rows;
// pairs whose squared distance is lost to cancellation are recomputed from
// explicit differences. Diagonal is exactly zero and the result symmetric.
Matrix pairwise_distances(const Matrix& x);

CenteredDistanceMatrix double_center(const Matrix& distances);

CenteredDistanceMatrix centered_distances(const Matrix& x);

// sqrt(Σ_ij A_ij·B_ij / N²).
double dcov(const Matrix& x, const Matrix& y);
double dcov(const CenteredDistanceMatrix& a, const CenteredDistanceMatrix& b);

DcorResult dcor(const Matrix& x, const Matrix& y);
DcorResult dcor(const CenteredDistanceMatrix& a, const CenteredDistanceMatrix& b);

// Same estimator, streamed over row blocks: row means are accumulated in a
// first pass, centred products in a second, so only block × N slices of the
// distance matrices are resident. Block partial sums are reduced in block
// order. block > N is treated as N.
DcorResult dcor_blocked(const Matrix& x, const Matrix& y, std::size_t block);

} // namespace csdis
