#include <cmath>
#include <cstring>

#include "csdis/errors.hpp"
#include "csdis/hash.hpp"
#include "csdis/nn/decoder.hpp"
#include "csdis/rng.hpp"

namespace csdis::nn {

template <typename T>
void Parameter<T>::resize(Eigen::Index rows, Eigen::Index cols) {
    value = Mat<T>::Zero(rows, cols);
    grad = Mat<T>::Zero(rows, cols);
    adam_m = Mat<T>::Zero(rows, cols);
    adam_v = Mat<T>::Zero(rows, cols);
}

namespace {

using Index = Eigen::Index;

std::size_t channels_of(const Shape& s) { return s[0]; }
std::size_t spatial_of(const Shape& s) { return numel(s) / s[0]; }

// Patch geometry shared by conv (image = input, grid = output) and deconv
// (image = output, grid = input).
struct Geometry {
    std::size_t channels, h, w;
    std::size_t kh, kw, stride, pad;
    std::size_t gh, gw;
};

// Output columns ox whose input column ox·stride + kj − pad lies inside [0, w).
inline std::pair<long, long> valid_columns(const Geometry& g, std::size_t kj) {
    const long s = static_cast<long>(g.stride), pad = static_cast<long>(g.pad), k = static_cast<long>(kj);
    const long gw = static_cast<long>(g.gw), w = static_cast<long>(g.w);
    const long lo = std::min(gw, pad > k ? (pad - k + s - 1) / s : 0L);
    const long last = w + pad - k - 1;
    const long hi = last < 0 ? lo : std::max(lo, std::min(gw, last / s + 1));
    return {lo, hi};
}

// Strided taps read from phase planes: plane (py, px) of a channel holds
// x[py + s·r][px + s·q] for r < hs, q < ws, zero outside the image.
struct Phases {
    std::size_t s, hs, ws;
    explicit Phases(const Geometry& g)
        : s(g.stride), hs((g.h + g.stride - 1) / g.stride), ws((g.w + g.stride - 1) / g.stride) {}
    std::size_t plane_size() const { return hs * ws; }
    std::size_t offset(std::size_t c, std::size_t py, std::size_t px) const {
        return ((c * s + py) * s + px) * plane_size();
    }
};

// Phase index and phase-grid shift of a tap offset k − pad.
inline std::pair<std::size_t, long> tap_phase(std::size_t k, std::size_t pad, std::size_t s) {
    const long off = static_cast<long>(k) - static_cast<long>(pad);
    const long st = static_cast<long>(s);
    const long p = ((off % st) + st) % st;
    return {static_cast<std::size_t>(p), (off - p) / st};
}

template <typename T>
void split_phases(const Mat<T>& img, const Geometry& g, std::size_t b, std::vector<T>& out) {
    const Phases ph(g);
    out.assign(g.channels * ph.s * ph.s * ph.plane_size(), T(0));
    for (std::size_t c = 0; c < g.channels; ++c) {
        const T* src = img.row(static_cast<Index>(c)).data() + b * g.h * g.w;
        for (std::size_t y = 0; y < g.h; ++y) {
            const std::size_t py = y % ph.s, r = y / ph.s;
            for (std::size_t px = 0; px < ph.s; ++px) {
                T* dst = out.data() + ph.offset(c, py, px) + r * ph.ws;
                const T* row = src + y * g.w;
                for (std::size_t x = px, q = 0; x < g.w; x += ph.s, ++q) dst[q] = row[x];
            }
        }
    }
}

template <typename T>
void merge_phases(const std::vector<T>& in, const Geometry& g, std::size_t b, Mat<T>& img) {
    const Phases ph(g);
    for (std::size_t c = 0; c < g.channels; ++c) {
        T* dst = img.row(static_cast<Index>(c)).data() + b * g.h * g.w;
        for (std::size_t y = 0; y < g.h; ++y) {
            const std::size_t py = y % ph.s, r = y / ph.s;
            for (std::size_t px = 0; px < ph.s; ++px) {
                const T* src = in.data() + ph.offset(c, py, px) + r * ph.ws;
                T* row = dst + y * g.w;
                for (std::size_t x = px, q = 0; x < g.w; x += ph.s, ++q) row[x] += src[q];
            }
        }
    }
}

// Unfolds the patches of sample b (channel planes at column offset b·h·w)
// into cols, one row per (channel, ki, kj) tap and one column per grid cell.
template <typename T>
void im2col(const Mat<T>& img, const Geometry& g, std::size_t b, Mat<T>& cols, std::vector<T>& scratch) {
    cols.resize(static_cast<Index>(g.channels * g.kh * g.kw), static_cast<Index>(g.gh * g.gw));
    if (g.stride == 1) {
        const auto pad = static_cast<long>(g.pad);
        for (std::size_t c = 0; c < g.channels; ++c) {
            const T* src = img.row(static_cast<Index>(c)).data() + b * g.h * g.w;
            for (std::size_t ki = 0; ki < g.kh; ++ki) {
                for (std::size_t kj = 0; kj < g.kw; ++kj) {
                    T* dst = cols.row(static_cast<Index>((c * g.kh + ki) * g.kw + kj)).data();
                    const auto [lo, hi] = valid_columns(g, kj);
                    const long shift = static_cast<long>(kj) - pad;
                    for (std::size_t oy = 0; oy < g.gh; ++oy, dst += g.gw) {
                        const long iy = static_cast<long>(oy + ki) - pad;
                        if (iy < 0 || iy >= static_cast<long>(g.h)) {
                            std::fill(dst, dst + g.gw, T(0));
                            continue;
                        }
                        const T* row = src + static_cast<std::size_t>(iy) * g.w;
                        std::fill(dst, dst + lo, T(0));
                        if (hi > lo) std::memcpy(dst + lo, row + lo + shift, sizeof(T) * static_cast<std::size_t>(hi - lo));
                        std::fill(dst + hi, dst + g.gw, T(0));
                    }
                }
            }
        }
        return;
    }
    split_phases(img, g, b, scratch);
    const Phases ph(g);
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            const auto [py, dy] = tap_phase(ki, g.pad, g.stride);
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                const auto [px, dx] = tap_phase(kj, g.pad, g.stride);
                const T* plane = scratch.data() + ph.offset(c, py, px);
                T* dst = cols.row(static_cast<Index>((c * g.kh + ki) * g.kw + kj)).data();
                const long gw = static_cast<long>(g.gw);
                const long lo = std::min(gw, std::max(0L, -dx));
                const long hi = std::max(lo, std::min(gw, static_cast<long>(ph.ws) - dx));
                for (std::size_t oy = 0; oy < g.gh; ++oy, dst += g.gw) {
                    const long r = static_cast<long>(oy) + dy;
                    if (r < 0 || r >= static_cast<long>(ph.hs)) {
                        std::fill(dst, dst + g.gw, T(0));
                        continue;
                    }
                    const T* row = plane + static_cast<std::size_t>(r) * ph.ws;
                    std::fill(dst, dst + lo, T(0));
                    if (hi > lo) std::memcpy(dst + lo, row + lo + dx, sizeof(T) * static_cast<std::size_t>(hi - lo));
                    std::fill(dst + hi, dst + g.gw, T(0));
                }
            }
        }
    }
}

// Scatter-adds the columns of one sample back onto its image planes.
template <typename T>
void col2im(const Mat<T>& cols, const Geometry& g, std::size_t b, Mat<T>& img, std::vector<T>& scratch) {
    if (g.stride == 1) {
        const auto pad = static_cast<long>(g.pad);
        for (std::size_t c = 0; c < g.channels; ++c) {
            T* dst = img.row(static_cast<Index>(c)).data() + b * g.h * g.w;
            for (std::size_t ki = 0; ki < g.kh; ++ki) {
                for (std::size_t kj = 0; kj < g.kw; ++kj) {
                    const T* src = cols.row(static_cast<Index>((c * g.kh + ki) * g.kw + kj)).data();
                    const auto [lo, hi] = valid_columns(g, kj);
                    const long shift = static_cast<long>(kj) - pad;
                    for (std::size_t oy = 0; oy < g.gh; ++oy, src += g.gw) {
                        const long iy = static_cast<long>(oy + ki) - pad;
                        if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                        T* row = dst + static_cast<std::size_t>(iy) * g.w + shift;
                        for (long ox = lo; ox < hi; ++ox) row[ox] += src[ox];
                    }
                }
            }
        }
        return;
    }
    const Phases ph(g);
    scratch.assign(g.channels * ph.s * ph.s * ph.plane_size(), T(0));
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            const auto [py, dy] = tap_phase(ki, g.pad, g.stride);
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                const auto [px, dx] = tap_phase(kj, g.pad, g.stride);
                T* plane = scratch.data() + ph.offset(c, py, px);
                const T* src = cols.row(static_cast<Index>((c * g.kh + ki) * g.kw + kj)).data();
                const long gw = static_cast<long>(g.gw);
                const long lo = std::min(gw, std::max(0L, -dx));
                const long hi = std::max(lo, std::min(gw, static_cast<long>(ph.ws) - dx));
                for (std::size_t oy = 0; oy < g.gh; ++oy, src += g.gw) {
                    const long r = static_cast<long>(oy) + dy;
                    if (r < 0 || r >= static_cast<long>(ph.hs)) continue;
                    T* row = plane + static_cast<std::size_t>(r) * ph.ws + dx;
                    for (long ox = lo; ox < hi; ++ox) row[ox] += src[ox];
                }
            }
        }
    }
    merge_phases(scratch, g, b, img);
}

// Direct stride-1 convolution for layers with few channel pairs, where the
// im2col buffer would dwarf the arithmetic. Input planes are zero-padded
// once per sample; outputs are produced in register tiles of kTile columns
// for up to four output channels at a time.
constexpr std::size_t kTile = 16;
constexpr std::size_t kOcBlock = 4;

template <typename T>
void pad_planes(const T* src, std::size_t src_stride, std::size_t channels, std::size_t h, std::size_t w,
                std::size_t pad, std::vector<T>& padded) {
    const std::size_t hp = h + 2 * pad, wp = w + 2 * pad;
    padded.assign(channels * hp * wp, T(0));
    for (std::size_t c = 0; c < channels; ++c) {
        const T* plane = src + c * src_stride;
        T* dst = padded.data() + c * hp * wp + pad * wp + pad;
        for (std::size_t y = 0; y < h; ++y) std::copy_n(plane + y * w, w, dst + y * wp);
    }
}

// out[o][y][x] += Σ_{c,ki,kj} weight[o][c,ki,kj] · padded[c][y+ki][x+kj]
template <typename T, int OC>
void conv_tile_rows(const T* padded, std::size_t channels, std::size_t hp, std::size_t wp, const T* const* wrows,
                    std::size_t kh, std::size_t kw, T* const* outs, std::size_t gh, std::size_t gw) {
    const std::size_t full = gw - gw % kTile;
    for (std::size_t y = 0; y < gh; ++y) {
        for (std::size_t x0 = 0; x0 < full; x0 += kTile) {
            using V = Eigen::Array<T, kTile, 1>;
            V acc[OC];
            for (int oo = 0; oo < OC; ++oo) acc[oo] = Eigen::Map<const V>(outs[oo] + y * gw + x0);
            for (std::size_t c = 0; c < channels; ++c) {
                for (std::size_t ki = 0; ki < kh; ++ki) {
                    const T* prow = padded + c * hp * wp + (y + ki) * wp + x0;
                    const std::size_t tap0 = (c * kh + ki) * kw;
                    for (std::size_t kj = 0; kj < kw; ++kj) {
                        const V src = Eigen::Map<const V>(prow + kj);
                        for (int oo = 0; oo < OC; ++oo) acc[oo] += wrows[oo][tap0 + kj] * src;
                    }
                }
            }
            for (int oo = 0; oo < OC; ++oo) Eigen::Map<V>(outs[oo] + y * gw + x0) = acc[oo];
        }
        for (std::size_t x = full; x < gw; ++x) {
            for (int oo = 0; oo < OC; ++oo) {
                T sum = outs[oo][y * gw + x];
                for (std::size_t c = 0; c < channels; ++c)
                    for (std::size_t ki = 0; ki < kh; ++ki)
                        for (std::size_t kj = 0; kj < kw; ++kj)
                            sum += wrows[oo][(c * kh + ki) * kw + kj] * padded[c * hp * wp + (y + ki) * wp + x + kj];
                outs[oo][y * gw + x] = sum;
            }
        }
    }
}

// Accumulates a stride-1 correlation of each sample's channels (C × B·H·W
// layout) into out (O × B·gh·gw). weight is O × C·kh·kw.
template <typename T>
void direct_correlate(const Mat<T>& in, std::size_t channels, std::size_t h, std::size_t w, std::size_t pad,
                      const Mat<T>& weight, std::size_t kh, std::size_t kw, std::size_t gh, std::size_t gw,
                      std::size_t batch, Mat<T>& out) {
    const std::size_t hp = h + 2 * pad, wp = w + 2 * pad;
    const auto out_channels = static_cast<std::size_t>(weight.rows());
    std::vector<T> padded;
    for (std::size_t b = 0; b < batch; ++b) {
        pad_planes(in.data() + b * h * w, static_cast<std::size_t>(in.cols()), channels, h, w, pad, padded);
        for (std::size_t o = 0; o < out_channels; o += kOcBlock) {
            const std::size_t count = std::min<std::size_t>(kOcBlock, out_channels - o);
            const T* wrows[4];
            T* outs[4];
            for (std::size_t k = 0; k < count; ++k) {
                wrows[k] = weight.row(static_cast<Index>(o + k)).data();
                outs[k] = out.row(static_cast<Index>(o + k)).data() + b * gh * gw;
            }
            switch (count) {
            case 1: conv_tile_rows<T, 1>(padded.data(), channels, hp, wp, wrows, kh, kw, outs, gh, gw); break;
            case 2: conv_tile_rows<T, 2>(padded.data(), channels, hp, wp, wrows, kh, kw, outs, gh, gw); break;
            case 3: conv_tile_rows<T, 3>(padded.data(), channels, hp, wp, wrows, kh, kw, outs, gh, gw); break;
            default: conv_tile_rows<T, 4>(padded.data(), channels, hp, wp, wrows, kh, kw, outs, gh, gw); break;
            }
        }
    }
}

// grad_weight[o][c,ki,kj] = Σ_{b,y,x} grad_out[o][y][x] · padded_in[c][y+ki][x+kj]
template <typename T, std::size_t KW>
void weight_grad_rows(const T* gop, const T* plane, std::size_t wp, std::size_t ki, std::size_t gh, std::size_t gw,
                      double* sums) {
    const std::size_t full = gw - gw % kTile;
    using V = Eigen::Array<T, kTile, 1>;
    V acc[KW];
    for (auto& v : acc) v.setZero();
    double tail[KW] = {};
    for (std::size_t y = 0; y < gh; ++y) {
        const T* grow = gop + y * gw;
        const T* prow = plane + (y + ki) * wp;
        for (std::size_t x0 = 0; x0 < full; x0 += kTile) {
            const V gv = Eigen::Map<const V>(grow + x0);
            for (std::size_t kj = 0; kj < KW; ++kj) acc[kj] += gv * Eigen::Map<const V>(prow + x0 + kj);
        }
        for (std::size_t x = full; x < gw; ++x)
            for (std::size_t kj = 0; kj < KW; ++kj) tail[kj] += static_cast<double>(grow[x]) * prow[x + kj];
    }
    for (std::size_t kj = 0; kj < KW; ++kj) sums[kj] += tail[kj] + acc[kj].template cast<double>().sum();
}

template <typename T>
void weight_grad_dispatch(std::size_t kw, const T* gop, const T* plane, std::size_t wp, std::size_t ki,
                          std::size_t gh, std::size_t gw, double* sums) {
    switch (kw) {
    case 1: weight_grad_rows<T, 1>(gop, plane, wp, ki, gh, gw, sums); break;
    case 2: weight_grad_rows<T, 2>(gop, plane, wp, ki, gh, gw, sums); break;
    case 3: weight_grad_rows<T, 3>(gop, plane, wp, ki, gh, gw, sums); break;
    case 4: weight_grad_rows<T, 4>(gop, plane, wp, ki, gh, gw, sums); break;
    case 5: weight_grad_rows<T, 5>(gop, plane, wp, ki, gh, gw, sums); break;
    case 6: weight_grad_rows<T, 6>(gop, plane, wp, ki, gh, gw, sums); break;
    case 7: weight_grad_rows<T, 7>(gop, plane, wp, ki, gh, gw, sums); break;
    default: weight_grad_rows<T, 8>(gop, plane, wp, ki, gh, gw, sums); break;
    }
}

template <typename T>
void direct_weight_grad(const Mat<T>& in, const Mat<T>& grad_out, const Geometry& g, std::size_t batch,
                        Mat<T>& grad_weight) {
    const std::size_t hp = g.h + 2 * g.pad, wp = g.w + 2 * g.pad;
    const auto out_channels = static_cast<std::size_t>(grad_out.rows());
    Mat<double> total = Mat<double>::Zero(static_cast<Index>(out_channels),
                                                  static_cast<Index>(g.channels * g.kh * g.kw));
    std::vector<T> padded;
    for (std::size_t b = 0; b < batch; ++b) {
        pad_planes(in.data() + b * g.h * g.w, static_cast<std::size_t>(in.cols()), g.channels, g.h, g.w, g.pad, padded);
        for (std::size_t o = 0; o < out_channels; ++o) {
            const T* gop = grad_out.row(static_cast<Index>(o)).data() + b * g.gh * g.gw;
            for (std::size_t c = 0; c < g.channels; ++c)
                for (std::size_t ki = 0; ki < g.kh; ++ki)
                    weight_grad_dispatch(g.kw, gop, padded.data() + c * hp * wp, wp, ki, g.gh, g.gw,
                                         &total(static_cast<Index>(o), static_cast<Index>((c * g.kh + ki) * g.kw)));
        }
    }
    grad_weight = total.cast<T>();
}

// Weight (O × C·kh·kw) of a convolution re-indexed as the convolution that
// maps output gradients back to inputs: (C × O·kh·kw), taps flipped.
template <typename T>
Mat<T> flipped_transposed(const Mat<T>& weight, std::size_t channels, std::size_t kh, std::size_t kw) {
    const auto out_channels = static_cast<std::size_t>(weight.rows());
    Mat<T> f(static_cast<Index>(channels), static_cast<Index>(out_channels * kh * kw));
    for (std::size_t o = 0; o < out_channels; ++o)
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t ki = 0; ki < kh; ++ki)
                for (std::size_t kj = 0; kj < kw; ++kj)
                    f(static_cast<Index>(c), static_cast<Index>((o * kh + (kh - 1 - ki)) * kw + (kw - 1 - kj))) =
                        weight(static_cast<Index>(o), static_cast<Index>((c * kh + ki) * kw + kj));
    return f;
}

template <typename T>
Mat<T> row_sums(const Mat<T>& m) {
    return m.template cast<double>().rowwise().sum().template cast<T>();
}

template <typename T>
class Conv2d final : public Layer<T> {
public:
    Conv2d(const LayerSpec& spec, const Shape& in, const Shape& out)
        : geom_{in[0], in[1], in[2], spec.kernel_h, spec.kernel_w, spec.stride, spec.padding, out[1], out[2]},
          out_channels_(out[0]),
          direct_(spec.stride == 1 && spec.padding < spec.kernel_h && spec.padding < spec.kernel_w &&
                  spec.kernel_w <= 8 && in[0] * out[0] <= kDirectConvMaxChannelPairs) {
        weight_.name = "conv.weight";
        weight_.resize(static_cast<Index>(out_channels_), static_cast<Index>(in[0] * spec.kernel_h * spec.kernel_w));
        bias_.name = "conv.bias";
        bias_.resize(static_cast<Index>(out_channels_), 1);
    }

    void forward(const Mat<T>& in, Mat<T>& out, std::size_t batch) override {
        if (direct_) {
            out.resize(static_cast<Index>(out_channels_), static_cast<Index>(batch * geom_.gh * geom_.gw));
            for (Index o = 0; o < out.rows(); ++o) out.row(o).setConstant(bias_.value(o, 0));
            direct_correlate(in, geom_.channels, geom_.h, geom_.w, geom_.pad, weight_.value, geom_.kh, geom_.kw,
                             geom_.gh, geom_.gw, batch, out);
            return;
        }
        const auto grid = static_cast<Index>(geom_.gh * geom_.gw);
        out.resize(static_cast<Index>(out_channels_), static_cast<Index>(batch) * grid);
        for (std::size_t b = 0; b < batch; ++b) {
            im2col(in, geom_, b, cols_, scratch_);
            out.middleCols(static_cast<Index>(b) * grid, grid).noalias() = weight_.value * cols_;
        }
        out.colwise() += bias_.value.col(0);
    }

    void backward(const Mat<T>& in, const Mat<T>&, const Mat<T>& grad_out, Mat<T>* grad_in,
                  std::size_t batch) override {
        if (direct_) {
            direct_weight_grad(in, grad_out, geom_, batch, weight_.grad);
            bias_.grad = row_sums(grad_out);
            if (grad_in) {
                // full correlation of the output gradient with the flipped taps
                grad_in->setZero(static_cast<Index>(geom_.channels), static_cast<Index>(batch * geom_.h * geom_.w));
                direct_correlate(grad_out, out_channels_, geom_.gh, geom_.gw, geom_.kh - 1 - geom_.pad,
                                 flipped_transposed(weight_.value, geom_.channels, geom_.kh, geom_.kw), geom_.kh,
                                 geom_.kw, geom_.h, geom_.w, batch, *grad_in);
            }
            return;
        }
        const auto grid = static_cast<Index>(geom_.gh * geom_.gw);
        weight_.grad.setZero();
        bias_.grad = row_sums(grad_out);
        if (grad_in)
            grad_in->setZero(static_cast<Index>(geom_.channels), static_cast<Index>(batch * geom_.h * geom_.w));
        for (std::size_t b = 0; b < batch; ++b) {
            const auto g_b = grad_out.middleCols(static_cast<Index>(b) * grid, grid);
            im2col(in, geom_, b, cols_, scratch_);
            weight_.grad.noalias() += g_b * cols_.transpose();
            if (!grad_in) continue;
            dcols_.noalias() = weight_.value.transpose() * g_b;
            col2im(dcols_, geom_, b, *grad_in, scratch_);
        }
    }

    std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }

private:
    Geometry geom_;
    std::size_t out_channels_;
    bool direct_;
    Parameter<T> weight_, bias_;
    Mat<T> cols_, dcols_;
    std::vector<T> scratch_;
};

// Transposed convolution, realised as the input-gradient of a convolution
// that maps the output grid onto the input grid. Weight layout is
// (C_in × C_out·kh·kw).
template <typename T>
class Deconv2d final : public Layer<T> {
public:
    Deconv2d(const LayerSpec& spec, const Shape& in, const Shape& out)
        : geom_{out[0], out[1], out[2], spec.kernel_h, spec.kernel_w, spec.stride, spec.padding, in[1], in[2]},
          in_channels_(in[0]) {
        weight_.name = "deconv.weight";
        weight_.resize(static_cast<Index>(in_channels_), static_cast<Index>(out[0] * spec.kernel_h * spec.kernel_w));
        bias_.name = "deconv.bias";
        bias_.resize(static_cast<Index>(out[0]), 1);
    }

    void forward(const Mat<T>& in, Mat<T>& out, std::size_t batch) override {
        const auto grid = static_cast<Index>(geom_.gh * geom_.gw);
        out.setZero(static_cast<Index>(geom_.channels), static_cast<Index>(batch * geom_.h * geom_.w));
        for (std::size_t b = 0; b < batch; ++b) {
            cols_.noalias() = weight_.value.transpose() * in.middleCols(static_cast<Index>(b) * grid, grid);
            col2im(cols_, geom_, b, out, scratch_);
        }
        out.colwise() += bias_.value.col(0);
    }

    void backward(const Mat<T>& in, const Mat<T>&, const Mat<T>& grad_out, Mat<T>* grad_in,
                  std::size_t batch) override {
        const auto grid = static_cast<Index>(geom_.gh * geom_.gw);
        weight_.grad.setZero();
        bias_.grad = row_sums(grad_out);
        if (grad_in) grad_in->resize(static_cast<Index>(in_channels_), static_cast<Index>(batch) * grid);
        for (std::size_t b = 0; b < batch; ++b) {
            const auto in_b = in.middleCols(static_cast<Index>(b) * grid, grid);
            im2col(grad_out, geom_, b, cols_, scratch_);
            weight_.grad.noalias() += in_b * cols_.transpose();
            if (grad_in) grad_in->middleCols(static_cast<Index>(b) * grid, grid).noalias() = weight_.value * cols_;
        }
    }

    std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }

private:
    Geometry geom_;
    std::size_t in_channels_;
    Parameter<T> weight_, bias_;
    Mat<T> cols_;
    std::vector<T> scratch_;
};

template <typename T>
class FullyConnected final : public Layer<T> {
public:
    FullyConnected(const Shape& in, const Shape& out) {
        weight_.name = "fc.weight";
        weight_.resize(static_cast<Index>(out[0]), static_cast<Index>(in[0]));
        bias_.name = "fc.bias";
        bias_.resize(static_cast<Index>(out[0]), 1);
    }

    void forward(const Mat<T>& in, Mat<T>& out, std::size_t) override {
        out.noalias() = weight_.value * in;
        out.colwise() += bias_.value.col(0);
    }

    void backward(const Mat<T>& in, const Mat<T>&, const Mat<T>& grad_out, Mat<T>* grad_in,
                  std::size_t) override {
        weight_.grad.noalias() = grad_out * in.transpose();
        bias_.grad = row_sums(grad_out);
        if (grad_in) grad_in->noalias() = weight_.value.transpose() * grad_out;
    }

    std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }

private:
    Parameter<T> weight_, bias_;
};

// Per-sample, per-channel normalisation with no affine parameters.
template <typename T>
class InstanceNorm final : public Layer<T> {
public:
    explicit InstanceNorm(const Shape& in) : spatial_(spatial_of(in)) {}

    void forward(const Mat<T>& in, Mat<T>& out, std::size_t batch) override {
        out.resize(in.rows(), in.cols());
        inv_std_.resize(static_cast<std::size_t>(in.rows()) * batch);
        const auto n = static_cast<Index>(spatial_);
        for (Index c = 0; c < in.rows(); ++c) {
            for (std::size_t b = 0; b < batch; ++b) {
                const Vec x(in.row(c).data() + b * spatial_, n);
                const T mean = x.mean();
                const T inv = T(1) / std::sqrt((x - mean).square().mean() + T(kInstanceNormEps));
                inv_std_[static_cast<std::size_t>(c) * batch + b] = inv;
                OutVec(out.row(c).data() + b * spatial_, n) = (x - mean) * inv;
            }
        }
    }

    void backward(const Mat<T>&, const Mat<T>& out, const Mat<T>& grad_out, Mat<T>* grad_in,
                  std::size_t batch) override {
        if (!grad_in) return;
        grad_in->resize(out.rows(), out.cols());
        const auto count = static_cast<Index>(spatial_);
        for (Index c = 0; c < out.rows(); ++c) {
            for (std::size_t b = 0; b < batch; ++b) {
                const Vec y(out.row(c).data() + b * spatial_, count);
                const Vec dy(grad_out.row(c).data() + b * spatial_, count);
                const T mean_dy = dy.mean(), mean_dy_y = (dy * y).mean();
                const T inv = inv_std_[static_cast<std::size_t>(c) * batch + b];
                OutVec(grad_in->row(c).data() + b * spatial_, count) = inv * (dy - mean_dy - y * mean_dy_y);
            }
        }
    }

private:
    using Vec = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
    using OutVec = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;

    std::size_t spatial_;
    std::vector<T> inv_std_;
};

template <typename T>
class LeakyRelu final : public Layer<T> {
public:
    explicit LeakyRelu(double slope) : slope_(static_cast<T>(slope)) {}

    void forward(const Mat<T>& in, Mat<T>& out, std::size_t) override {
        if (slope_ <= T(1)) {
            out = in.cwiseMax(slope_ * in);
            return;
        }
        const T slope = slope_;
        out = in.unaryExpr([slope](T x) { return x > T(0) ? x : slope * x; });
    }

    void backward(const Mat<T>& in, const Mat<T>&, const Mat<T>& grad_out, Mat<T>* grad_in,
                  std::size_t) override {
        if (!grad_in) return;
        *grad_in = grad_out.array() * (slope_ + (T(1) - slope_) * (in.array() > T(0)).template cast<T>());
    }

private:
    T slope_;
};

template <typename T>
class Tanh final : public Layer<T> {
public:
    void forward(const Mat<T>& in, Mat<T>& out, std::size_t) override { out = in.array().tanh(); }

    void backward(const Mat<T>&, const Mat<T>& out, const Mat<T>& grad_out, Mat<T>* grad_in,
                  std::size_t) override {
        if (!grad_in) return;
        *grad_in = grad_out.array() * (T(1) - out.array().square());
    }
};

// Flatten and reshape keep the per-sample row-major element order and only
// move elements between channel-major layouts.
template <typename T>
class Reshape final : public Layer<T> {
public:
    Reshape(const Shape& in, const Shape& out)
        : in_c_(channels_of(in)), in_s_(spatial_of(in)), out_c_(channels_of(out)), out_s_(spatial_of(out)) {}

    void forward(const Mat<T>& in, Mat<T>& out, std::size_t batch) override {
        move(in, in_c_, in_s_, out, out_c_, out_s_, batch);
    }

    void backward(const Mat<T>&, const Mat<T>&, const Mat<T>& grad_out, Mat<T>* grad_in,
                  std::size_t batch) override {
        if (grad_in) move(grad_out, out_c_, out_s_, *grad_in, in_c_, in_s_, batch);
    }

private:
    static void move(const Mat<T>& src, std::size_t sc, std::size_t ss, Mat<T>& dst, std::size_t dc,
                     std::size_t ds, std::size_t batch) {
        if (sc == dc) {
            dst = src;
            return;
        }
        dst.resize(static_cast<Index>(dc), static_cast<Index>(batch * ds));
        const std::size_t n = sc * ss;
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t f = 0; f < n; ++f)
                dst(static_cast<Index>(f / ds), static_cast<Index>(b * ds + f % ds)) =
                    src(static_cast<Index>(f / ss), static_cast<Index>(b * ss + f % ss));
    }

    std::size_t in_c_, in_s_, out_c_, out_s_;
};

double kaiming_bound(double fan_in) {
    const double slope = kDefaultLeakySlope;
    const double gain = std::sqrt(2.0 / (1.0 + slope * slope));
    return gain * std::sqrt(3.0 / std::max(fan_in, 1.0));
}

double fan_in(const LayerSpec& spec, const Shape& in) {
    switch (spec.kind) {
    case LayerKind::Conv2d: return static_cast<double>(in[0] * spec.kernel_h * spec.kernel_w);
    case LayerKind::Deconv2d:
        // each output pixel sees about kh·kw/stride² taps per input channel
        return static_cast<double>(in[0] * spec.kernel_h * spec.kernel_w) /
               static_cast<double>(spec.stride * spec.stride);
    case LayerKind::FullyConnected: return static_cast<double>(in[0]);
    default: return 1.0;
    }
}

} // namespace

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& in, const Shape& out) {
    switch (spec.kind) {
    case LayerKind::Conv2d: return std::make_unique<Conv2d<T>>(spec, in, out);
    case LayerKind::Deconv2d: return std::make_unique<Deconv2d<T>>(spec, in, out);
    case LayerKind::FullyConnected: return std::make_unique<FullyConnected<T>>(in, out);
    case LayerKind::InstanceNorm: return std::make_unique<InstanceNorm<T>>(in);
    case LayerKind::LeakyRelu: return std::make_unique<LeakyRelu<T>>(spec.negative_slope);
    case LayerKind::Tanh: return std::make_unique<Tanh<T>>();
    case LayerKind::Flatten:
    case LayerKind::Reshape: return std::make_unique<Reshape<T>>(in, out);
    }
    throw ConfigError("unsupported layer kind");
}

template <typename T>
Mat<T> to_channel_major(std::span<const T> samples, const Shape& sample_shape, std::size_t batch) {
    const auto c = channels_of(sample_shape), s = spatial_of(sample_shape), n = c * s;
    if (samples.size() != n * batch)
        throw ShapeError("batch holds " + std::to_string(samples.size()) + " values, expected " +
                         std::to_string(n * batch) + " for " + std::to_string(batch) + " × " +
                         to_string(sample_shape));
    Mat<T> m(static_cast<Index>(c), static_cast<Index>(batch * s));
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t ch = 0; ch < c; ++ch)
            std::copy_n(samples.data() + b * n + ch * s, s, m.row(static_cast<Index>(ch)).data() + b * s);
    return m;
}

template <typename T>
void from_channel_major(const Mat<T>& m, const Shape& sample_shape, std::size_t batch, std::span<T> out) {
    const auto c = channels_of(sample_shape), s = spatial_of(sample_shape), n = c * s;
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t ch = 0; ch < c; ++ch)
            std::copy_n(m.row(static_cast<Index>(ch)).data() + b * s, s, out.data() + b * n + ch * s);
}

template <typename T>
Decoder<T>::Decoder(DecoderSpec spec, std::uint64_t init_seed) : spec_(std::move(spec)) {
    shapes_ = infer_shapes(spec_);
    CounterRng rng(init_seed, streams::kInit);
    Shape in = spec_.input_shape;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const auto& ls = spec_.layers[i];
        auto layer = make_layer<T>(ls, in, shapes_[i]);
        const double bound = kaiming_bound(fan_in(ls, in));
        for (auto* p : layer->parameters()) {
            // biases stay zero
            if (p->value.cols() == 1 && p->name.ends_with(".bias")) continue;
            for (Index k = 0; k < p->value.size(); ++k)
                p->value.data()[k] = static_cast<T>(rng.uniform(-bound, bound));
        }
        layers_.push_back(std::move(layer));
        in = shapes_[i];
    }
    activations_.resize(layers_.size() + 1);
    grads_.resize(layers_.size() + 1);
}

template <typename T>
std::vector<T> Decoder<T>::forward(std::span<const T> input, std::size_t batch) {
    if (batch == 0) throw ShapeError("empty batch");
    batch_ = batch;
    activations_[0] = to_channel_major(input, spec_.input_shape, batch);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->forward(activations_[i], activations_[i + 1], batch);
        if (!activations_[i + 1].allFinite())
            throw NumericalError("non-finite activation after layer " + std::to_string(i) + " (" +
                                 to_string(spec_.layers[i].kind) + ")");
    }
    std::vector<T> out(output_size() * batch);
    from_channel_major(activations_.back(), shapes_.back(), batch, std::span<T>(out));
    return out;
}

template <typename T>
std::vector<T> Decoder<T>::backward(std::span<const T> grad_output, bool want_input_grad) {
    if (batch_ == 0) throw ShapeError("backward called before forward");
    grads_.back() = to_channel_major(grad_output, shapes_.back(), batch_);
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const bool need = i > 0 || want_input_grad;
        layers_[i]->backward(activations_[i], activations_[i + 1], grads_[i + 1], need ? &grads_[i] : nullptr, batch_);
        if (!need) break;
        if (!grads_[i].allFinite()) throw NumericalError("non-finite gradient entering layer " + std::to_string(i));
    }
    if (!want_input_grad) return {};
    std::vector<T> out(input_size() * batch_);
    from_channel_major(grads_[0], spec_.input_shape, batch_, std::span<T>(out));
    return out;
}

template <typename T>
std::vector<Parameter<T>*> Decoder<T>::parameters() {
    std::vector<Parameter<T>*> all;
    for (auto& l : layers_)
        for (auto* p : l->parameters()) all.push_back(p);
    return all;
}

template <typename T>
std::size_t Decoder<T>::parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
    return n;
}

template <typename T>
void Decoder<T>::adam_step(const TrainConfig& config, std::uint64_t step) {
    if (step < 1) throw ConfigError("adam step index must be >= 1");
    const auto t = static_cast<double>(step);
    const T b1 = static_cast<T>(config.beta1), b2 = static_cast<T>(config.beta2);
    const T correct1 = static_cast<T>(1.0 - std::pow(config.beta1, t));
    const T correct2 = static_cast<T>(1.0 - std::pow(config.beta2, t));
    const T lr = static_cast<T>(config.learning_rate), eps = static_cast<T>(config.adam_epsilon);
    for (auto* p : parameters()) {
        p->adam_m = b1 * p->adam_m + (T(1) - b1) * p->grad;
        p->adam_v = b2 * p->adam_v.array() + (T(1) - b2) * p->grad.array().square();
        p->value.array() -= lr * (p->adam_m.array() / correct1) / ((p->adam_v.array() / correct2).sqrt() + eps);
    }
}

template <typename T>
std::uint64_t Decoder<T>::parameter_hash() {
    Fnv1a64 h;
    for (auto* p : parameters())
        h.update(std::span(reinterpret_cast<const std::uint8_t*>(p->value.data()),
                           static_cast<std::size_t>(p->value.size()) * sizeof(T)));
    return h.value();
}

template class Decoder<float>;
template class Decoder<double>;
template struct Parameter<float>;
template struct Parameter<double>;
template std::unique_ptr<Layer<float>> make_layer<float>(const LayerSpec&, const Shape&, const Shape&);
template std::unique_ptr<Layer<double>> make_layer<double>(const LayerSpec&, const Shape&, const Shape&);
template Mat<float> to_channel_major<float>(std::span<const float>, const Shape&, std::size_t);
template Mat<double> to_channel_major<double>(std::span<const double>, const Shape&, std::size_t);
template void from_channel_major<float>(const Mat<float>&, const Shape&, std::size_t, std::span<float>);
template void from_channel_major<double>(const Mat<double>&, const Shape&, std::size_t, std::span<double>);

} // namespace csdis::nn
