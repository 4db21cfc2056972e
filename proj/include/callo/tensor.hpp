#ifndef CALLO_TENSOR_HPP
#define CALLO_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "callo/error.hpp"
#include "callo/parallel.hpp"

namespace callo {

// Dense row-major N-dimensional array. Images and activations use the
// [height, width, channel] layout; batches prepend the sample axis.
// Instantiated with double (reference / gradient-check mode) and float
// (training speed mode).
template <class T>
class TensorT {
public:
    TensorT() = default; // empty sentinel, not a valid tensor until assigned

    explicit TensorT(std::vector<std::size_t> shape, T fill = T(0))
        : shape_(std::move(shape)) {
        data_.assign(checked_size(shape_), fill);
    }

    static TensorT from_data(std::vector<std::size_t> shape, std::vector<T> data) {
        TensorT t;
        const std::size_t n = checked_size(shape);
        if (n != data.size()) {
            throw DimensionError("tensor data length " + std::to_string(data.size()) +
                                 " does not match shape " + shape_string(shape));
        }
        t.shape_ = std::move(shape);
        t.data_ = std::move(data);
        return t;
    }

    bool empty() const { return shape_.empty(); }
    std::size_t rank() const { return shape_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }
    std::size_t size() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& operator()(std::size_t i) { return data_[i]; }
    const T& operator()(std::size_t i) const { return data_[i]; }
    T& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const T& operator()(std::size_t i, std::size_t j) const {
        return data_[i * shape_[1] + j];
    }
    T& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    T& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }
    const T& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    // Same data, new shape (sizes must agree).
    TensorT reshaped(std::vector<std::size_t> shape) const& {
        return from_data(std::move(shape), data_);
    }
    TensorT reshaped(std::vector<std::size_t> shape) && {
        return from_data(std::move(shape), std::move(data_));
    }

    template <class U>
    TensorT<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return TensorT<U>::from_data(shape_, std::move(out));
    }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

    void fill(T v) { data_.assign(data_.size(), v); }

    std::string shape_str() const { return shape_string(shape_); }

    static std::string shape_string(const std::vector<std::size_t>& s) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
        os << "]";
        return os.str();
    }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& shape) {
        if (shape.empty()) throw DimensionError("tensor rank must be >= 1");
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0) throw DimensionError("tensor extents must be >= 1, got " +
                                             shape_string(shape));
            n *= e;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<double>;
using TensorF = TensorT<float>;

enum class Padding { same, valid };

// ---------------------------------------------------------------------------
// Elementwise ops. Shapes must match exactly (scalars use the *_scalar forms).

namespace detail {
template <class T>
inline void require_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() +
                             " vs " + b.shape_str());
    }
}
} // namespace detail

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    detail::require_same_shape(a, b, "add");
    TensorT<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    detail::require_same_shape(a, b, "sub");
    TensorT<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    detail::require_same_shape(a, b, "mul");
    TensorT<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

template <class T>
TensorT<T> scale(const TensorT<T>& a, T s) {
    TensorT<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

template <class T>
TensorT<T> add_scalar(const TensorT<T>& a, T s) {
    TensorT<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s;
    return out;
}

// Gradient gate of ReLU: out[i] = b[i] where a[i] > 0, else 0.
template <class T>
TensorT<T> relu_mask(const TensorT<T>& a, const TensorT<T>& b) {
    detail::require_same_shape(a, b, "relu_mask");
    TensorT<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > T(0) ? b[i] : T(0);
    return out;
}

// y += alpha * x
template <class T>
void axpy(TensorT<T>& y, T alpha, const TensorT<T>& x) {
    detail::require_same_shape(y, x, "axpy");
    T* yp = y.data();
    const T* xp = x.data();
    for (std::size_t i = 0; i < y.size(); ++i) yp[i] += alpha * xp[i];
}

// ---------------------------------------------------------------------------
// matmul: c[i,j] = sum_k a[i,k] * b[k,j].
// The accumulation order per output element is k ascending regardless of the
// thread count (rows are partitioned across threads, never split).

template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("matmul requires rank-2 tensors, got " + a.shape_str() +
                             " and " + b.shape_str());
    }
    if (a.extent(1) != b.extent(0)) {
        throw DimensionError("matmul: inner extents mismatch " + a.shape_str() + " x " +
                             b.shape_str());
    }
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    TensorT<T> c({m, n}, T(0));
    const T* ap = a.data();
    const T* bp = b.data();
    T* cp = c.data();
    parallel_for(m, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            T* crow = cp + i * n;
            const T* arow = ap + i * k;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const T av = arow[kk];
                const T* brow = bp + kk * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
    return c;
}

// c = a^T * b with a:[k,m], b:[k,n] -> [m,n]. Accumulation order is k ascending.
template <class T>
TensorT<T> matmul_at(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(0) != b.extent(0)) {
        throw DimensionError("matmul_at: incompatible shapes " + a.shape_str() + " and " +
                             b.shape_str());
    }
    const std::size_t k = a.extent(0), m = a.extent(1), n = b.extent(1);
    TensorT<T> c({m, n}, T(0));
    const T* ap = a.data();
    const T* bp = b.data();
    T* cp = c.data();
    // Threads own disjoint row blocks of c; each block scans all of a and b.
    parallel_for(m, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T* arow = ap + kk * m;
            const T* brow = bp + kk * n;
            for (std::size_t i = i0; i < i1; ++i) {
                const T av = arow[i];
                T* crow = cp + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
    return c;
}

// c = a * b^T with a:[m,k], b:[n,k] -> [m,n]. b is transposed up front so the
// hot loop runs the same vectorizable row-update kernel as matmul (a scalar
// dot-product reduction would not auto-vectorize without reassociation).
// Accumulation order is k ascending.
template <class T>
TensorT<T> matmul_bt(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(1)) {
        throw DimensionError("matmul_bt: incompatible shapes " + a.shape_str() + " and " +
                             b.shape_str());
    }
    const std::size_t k = a.extent(1), n = b.extent(0);
    TensorT<T> bt({k, n});
    const T* bp = b.data();
    T* tp = bt.data();
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t kk = 0; kk < k; ++kk) tp[kk * n + j] = bp[j * k + kk];
    }
    return matmul(a, bt);
}

// ---------------------------------------------------------------------------
// 2-D convolution (cross-correlation convention: no kernel flip), implemented
// as im2col + matmul. `same` pads with zeros; an odd padding remainder goes to
// bottom/right.

struct ConvGeometry {
    std::size_t out_h = 0, out_w = 0;
    std::size_t pad_top = 0, pad_left = 0;
};

inline ConvGeometry conv2d_geometry(std::size_t h, std::size_t w, std::size_t kh,
                                    std::size_t kw, std::size_t stride, Padding padding) {
    if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
    ConvGeometry g;
    if (padding == Padding::same) {
        if (kh % 2 == 0 || kw % 2 == 0) {
            throw DimensionError("conv2d: same padding requires odd kernel extents, got " +
                                 std::to_string(kh) + "x" + std::to_string(kw));
        }
        g.out_h = (h + stride - 1) / stride;
        g.out_w = (w + stride - 1) / stride;
        const std::size_t need_h = (g.out_h - 1) * stride + kh;
        const std::size_t need_w = (g.out_w - 1) * stride + kw;
        g.pad_top = need_h > h ? (need_h - h) / 2 : 0;
        g.pad_left = need_w > w ? (need_w - w) / 2 : 0;
    } else {
        if (kh > h || kw > w) {
            throw DimensionError("conv2d: kernel " + std::to_string(kh) + "x" +
                                 std::to_string(kw) + " larger than input " +
                                 std::to_string(h) + "x" + std::to_string(w));
        }
        g.out_h = (h - kh) / stride + 1;
        g.out_w = (w - kw) / stride + 1;
    }
    return g;
}

// Patch matrix for a batch: row r = (b*out_h + oy)*out_w + ox holds the
// receptive field of output position (oy,ox) of sample b, laid out as
// (ky, kx, cin) ascending. Out-of-bounds taps read as zero.
template <class T>
TensorT<T> im2col(const TensorT<T>& input, std::size_t kh, std::size_t kw,
                  std::size_t stride, const ConvGeometry& g) {
    const std::size_t n = input.extent(0), h = input.extent(1), w = input.extent(2),
                      ci = input.extent(3);
    const std::size_t cols = kh * kw * ci;
    TensorT<T> out({n * g.out_h * g.out_w, cols}, T(0));
    const T* in = input.data();
    T* op = out.data();
    parallel_for(n * g.out_h, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            const std::size_t b = r / g.out_h;
            const std::size_t oy = r % g.out_h;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                T* dst = op + ((b * g.out_h + oy) * g.out_w + ox) * cols;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy * stride + ky) -
                        static_cast<std::ptrdiff_t>(g.pad_top);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox * stride + kx) -
                            static_cast<std::ptrdiff_t>(g.pad_left);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        const T* src = in + ((b * h + iy) * w + ix) * ci;
                        T* cell = dst + (ky * kw + kx) * ci;
                        for (std::size_t c = 0; c < ci; ++c) cell[c] = src[c];
                    }
                }
            }
        }
    });
    return out;
}

// Scatter-add of a patch-matrix gradient back onto the input layout.
template <class T>
TensorT<T> col2im(const TensorT<T>& cols_grad, std::size_t n, std::size_t h, std::size_t w,
                  std::size_t ci, std::size_t kh, std::size_t kw, std::size_t stride,
                  const ConvGeometry& g) {
    TensorT<T> out({n, h, w, ci}, T(0));
    const std::size_t cols = kh * kw * ci;
    const T* cp = cols_grad.data();
    T* op = out.data();
    // Parallel over samples: each thread writes a disjoint slice.
    parallel_for(n, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                    const T* src = cp + ((b * g.out_h + oy) * g.out_w + ox) * cols;
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy * stride + ky) -
                            static_cast<std::ptrdiff_t>(g.pad_top);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                static_cast<std::ptrdiff_t>(g.pad_left);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            T* dst = op + ((b * h + iy) * w + ix) * ci;
                            const T* cell = src + (ky * kw + kx) * ci;
                            for (std::size_t c = 0; c < ci; ++c) dst[c] += cell[c];
                        }
                    }
                }
            }
        }
    });
    return out;
}

// Batched convolution: input [n,h,w,cin], kernels [kh,kw,cin,cout].
template <class T>
TensorT<T> conv2d_batch(const TensorT<T>& input, const TensorT<T>& kernels,
                        std::size_t stride, Padding padding) {
    if (input.rank() != 4) {
        throw DimensionError("conv2d: input must be [n,h,w,cin], got " + input.shape_str());
    }
    if (kernels.rank() != 4) {
        throw DimensionError("conv2d: kernels must be [kh,kw,cin,cout], got " +
                             kernels.shape_str());
    }
    if (input.extent(3) != kernels.extent(2)) {
        throw DimensionError("conv2d: input channels " + input.shape_str() +
                             " do not match kernels " + kernels.shape_str());
    }
    const std::size_t n = input.extent(0), h = input.extent(1), w = input.extent(2);
    const std::size_t kh = kernels.extent(0), kw = kernels.extent(1),
                      ci = kernels.extent(2), co = kernels.extent(3);
    const ConvGeometry g = conv2d_geometry(h, w, kh, kw, stride, padding);
    TensorT<T> cols = im2col(input, kh, kw, stride, g);
    TensorT<T> kmat = kernels.reshaped({kh * kw * ci, co});
    TensorT<T> flat = matmul(cols, kmat);
    return std::move(flat).reshaped({n, g.out_h, g.out_w, co});
}

// Single-image convolution: input [h,w,cin] -> [h',w',cout]. Bias is owned by
// the layer, not added here.
template <class T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& kernels, std::size_t stride,
                  Padding padding) {
    if (input.rank() != 3) {
        throw DimensionError("conv2d: input must be [h,w,cin], got " + input.shape_str());
    }
    TensorT<T> batched =
        input.reshaped({1, input.extent(0), input.extent(1), input.extent(2)});
    TensorT<T> out = conv2d_batch(batched, kernels, stride, padding);
    return std::move(out).reshaped({out.extent(1), out.extent(2), out.extent(3)});
}

// ---------------------------------------------------------------------------
// Max pooling. Returns per-output argmax (flat index into the input tensor)
// for backward routing; ties resolve to the first hit in (y,x) scan order.

template <class T>
struct MaxPoolResult {
    TensorT<T> output;                // [h',w',c] or [n,h',w',c]
    std::vector<std::uint32_t> argmax; // one flat input index per output element
};

template <class T>
MaxPoolResult<T> maxpool2d_batch(const TensorT<T>& input, std::size_t window,
                                 std::size_t stride) {
    if (input.rank() != 4) {
        throw DimensionError("maxpool2d: input must be [n,h,w,c], got " + input.shape_str());
    }
    if (window < 1 || stride < 1) throw ConfigError("maxpool2d: window and stride must be >= 1");
    const std::size_t n = input.extent(0), h = input.extent(1), w = input.extent(2),
                      c = input.extent(3);
    if (window > h || window > w) {
        throw DimensionError("maxpool2d: window " + std::to_string(window) +
                             " exceeds input " + input.shape_str());
    }
    const std::size_t oh = (h - window) / stride + 1;
    const std::size_t ow = (w - window) / stride + 1;
    MaxPoolResult<T> res;
    res.output = TensorT<T>({n, oh, ow, c});
    res.argmax.assign(n * oh * ow * c, 0);
    const T* in = input.data();
    T* op = res.output.data();
    std::uint32_t* am = res.argmax.data();
    parallel_for(n, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        std::size_t best = ((b * h + oy * stride) * w + ox * stride) * c + ch;
                        T bv = in[best];
                        for (std::size_t ky = 0; ky < window; ++ky) {
                            for (std::size_t kx = 0; kx < window; ++kx) {
                                const std::size_t idx =
                                    ((b * h + oy * stride + ky) * w + ox * stride + kx) * c + ch;
                                if (in[idx] > bv) {
                                    bv = in[idx];
                                    best = idx;
                                }
                            }
                        }
                        const std::size_t o = ((b * oh + oy) * ow + ox) * c + ch;
                        op[o] = bv;
                        am[o] = static_cast<std::uint32_t>(best);
                    }
                }
            }
        }
    });
    return res;
}

template <class T>
MaxPoolResult<T> maxpool2d(const TensorT<T>& input, std::size_t window, std::size_t stride) {
    if (input.rank() != 3) {
        throw DimensionError("maxpool2d: input must be [h,w,c], got " + input.shape_str());
    }
    TensorT<T> batched =
        input.reshaped({1, input.extent(0), input.extent(1), input.extent(2)});
    MaxPoolResult<T> res = maxpool2d_batch(batched, window, stride);
    res.output = std::move(res.output)
                     .reshaped({res.output.extent(1), res.output.extent(2),
                                res.output.extent(3)});
    return res;
}

} // namespace callo

#endif // CALLO_TENSOR_HPP
