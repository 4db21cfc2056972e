#ifndef CALLO_NN_LAYERS_HPP
#define CALLO_NN_LAYERS_HPP

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "callo/error.hpp"
#include "callo/nn/losses.hpp"
#include "callo/nn/spec.hpp"
#include "callo/rng.hpp"
#include "callo/tensor.hpp"

namespace callo {

enum class Mode { train, infer };

// One network layer with explicit forward and backward passes. Forward in
// train mode caches whatever backward needs; infer mode caches nothing and
// never touches parameters, so a frozen network is safe to share.
template <class T>
class Layer {
public:
    explicit Layer(LayerSpec spec) : spec_(std::move(spec)) {}
    virtual ~Layer() = default;

    const LayerSpec& spec() const { return spec_; }
    const char* name() const { return layer_kind_name(spec_.kind); }

    virtual TensorT<T> forward(const TensorT<T>& x, Mode mode, Rng* rng) = 0;
    virtual TensorT<T> backward(const TensorT<T>& grad) = 0;

    virtual std::vector<TensorT<T>*> params() { return {}; }
    virtual std::vector<TensorT<T>*> grads() { return {}; }
    virtual void init_params(Rng&) {}

protected:
    void require_cache(bool have) const {
        if (!have) {
            throw StateError(std::string(name()) +
                             ": backward called without a preceding train-mode forward");
        }
    }

    LayerSpec spec_;
};

// ---------------------------------------------------------------------------

template <class T>
class ConvLayer final : public Layer<T> {
public:
    ConvLayer(LayerSpec spec, std::vector<std::size_t> in_shape)
        : Layer<T>(std::move(spec)), in_shape_(std::move(in_shape)) {
        const LayerSpec& s = this->spec_;
        geom_ = conv2d_geometry(in_shape_[0], in_shape_[1], s.kernel, s.kernel, s.stride,
                                s.padding);
        kernels_ = TensorT<T>({s.kernel, s.kernel, in_shape_[2], s.channels});
        bias_ = TensorT<T>({s.channels});
        dkernels_ = TensorT<T>(kernels_.shape());
        dbias_ = TensorT<T>(bias_.shape());
    }

    void init_params(Rng& rng) override {
        const LayerSpec& s = this->spec_;
        const double fan_in =
            static_cast<double>(s.kernel) * static_cast<double>(s.kernel) *
            static_cast<double>(in_shape_[2]);
        const double stddev = std::sqrt(2.0 / fan_in);
        for (std::size_t i = 0; i < kernels_.size(); ++i) {
            kernels_[i] = static_cast<T>(rng.normal(0.0, stddev));
        }
        bias_.fill(static_cast<T>(0.1));
    }

    TensorT<T> forward(const TensorT<T>& x, Mode mode, Rng*) override {
        const LayerSpec& s = this->spec_;
        const std::size_t n = x.extent(0);
        TensorT<T> cols = im2col(x, s.kernel, s.kernel, s.stride, geom_);
        TensorT<T> kmat =
            kernels_.reshaped({s.kernel * s.kernel * in_shape_[2], s.channels});
        TensorT<T> flat = matmul(cols, kmat); // [n*oh*ow, co]
        T* fp = flat.data();
        const T* bp = bias_.data();
        const std::size_t rows = flat.extent(0), co = s.channels;
        for (std::size_t r = 0; r < rows; ++r) {
            T* row = fp + r * co;
            for (std::size_t c = 0; c < co; ++c) row[c] += bp[c];
        }
        if (mode == Mode::train) {
            cols_ = std::move(cols);
            batch_ = n;
        }
        return std::move(flat).reshaped({n, geom_.out_h, geom_.out_w, co});
    }

    TensorT<T> backward(const TensorT<T>& grad) override {
        this->require_cache(!cols_.empty());
        const LayerSpec& s = this->spec_;
        const std::size_t co = s.channels;
        const std::size_t rows = batch_ * geom_.out_h * geom_.out_w;
        TensorT<T> gmat = grad.reshaped({rows, co});
        dkernels_ = matmul_at(cols_, gmat).reshaped(kernels_.shape());
        dbias_.fill(T(0));
        const T* gp = gmat.data();
        T* dbp = dbias_.data();
        for (std::size_t r = 0; r < rows; ++r) {
            const T* row = gp + r * co;
            for (std::size_t c = 0; c < co; ++c) dbp[c] += row[c];
        }
        TensorT<T> kmat = kernels_.reshaped({s.kernel * s.kernel * in_shape_[2], co});
        TensorT<T> dcols = matmul_bt(gmat, kmat);
        TensorT<T> dx = col2im(dcols, batch_, in_shape_[0], in_shape_[1], in_shape_[2],
                               s.kernel, s.kernel, s.stride, geom_);
        cols_ = TensorT<T>();
        return dx;
    }

    std::vector<TensorT<T>*> params() override { return {&kernels_, &bias_}; }
    std::vector<TensorT<T>*> grads() override { return {&dkernels_, &dbias_}; }

private:
    std::vector<std::size_t> in_shape_;
    ConvGeometry geom_;
    TensorT<T> kernels_, bias_, dkernels_, dbias_;
    TensorT<T> cols_;
    std::size_t batch_ = 0;
};

// ---------------------------------------------------------------------------

template <class T>
class MaxPoolLayer final : public Layer<T> {
public:
    MaxPoolLayer(LayerSpec spec, std::vector<std::size_t> in_shape)
        : Layer<T>(std::move(spec)), in_shape_(std::move(in_shape)) {}

    TensorT<T> forward(const TensorT<T>& x, Mode mode, Rng*) override {
        MaxPoolResult<T> res = maxpool2d_batch(x, this->spec_.window, this->spec_.stride);
        if (mode == Mode::train) {
            argmax_ = std::move(res.argmax);
            batch_ = x.extent(0);
            have_cache_ = true;
        }
        return std::move(res.output);
    }

    TensorT<T> backward(const TensorT<T>& grad) override {
        this->require_cache(have_cache_);
        TensorT<T> dx({batch_, in_shape_[0], in_shape_[1], in_shape_[2]}, T(0));
        T* dp = dx.data();
        const T* gp = grad.data();
        // argmax indices of sample b always land inside sample b's slice, so a
        // per-sample partition writes disjoint ranges.
        const std::size_t per_sample = grad.size() / batch_;
        parallel_for(batch_, [&](std::size_t b0, std::size_t b1) {
            for (std::size_t b = b0; b < b1; ++b) {
                for (std::size_t i = b * per_sample; i < (b + 1) * per_sample; ++i) {
                    dp[argmax_[i]] += gp[i];
                }
            }
        });
        have_cache_ = false;
        return dx;
    }

private:
    std::vector<std::size_t> in_shape_;
    std::vector<std::uint32_t> argmax_;
    std::size_t batch_ = 0;
    bool have_cache_ = false;
};

// ---------------------------------------------------------------------------

template <class T>
class ReluLayer final : public Layer<T> {
public:
    using Layer<T>::Layer;

    TensorT<T> forward(const TensorT<T>& x, Mode mode, Rng*) override {
        TensorT<T> out = x;
        T* p = out.data();
        for (std::size_t i = 0; i < out.size(); ++i) p[i] = p[i] > T(0) ? p[i] : T(0);
        if (mode == Mode::train) input_ = x;
        return out;
    }

    TensorT<T> backward(const TensorT<T>& grad) override {
        this->require_cache(!input_.empty());
        TensorT<T> dx = relu_mask(input_, grad);
        input_ = TensorT<T>();
        return dx;
    }

private:
    TensorT<T> input_;
};

// ---------------------------------------------------------------------------

// Inverted dropout: surviving units are scaled by 1/(1-p) at train time, so
// inference is the identity.
template <class T>
class DropoutLayer final : public Layer<T> {
public:
    using Layer<T>::Layer;

    TensorT<T> forward(const TensorT<T>& x, Mode mode, Rng* rng) override {
        const double p = this->spec_.p;
        if (mode == Mode::infer || p == 0.0) return x;
        if (rng == nullptr) {
            throw StateError("dropout: train-mode forward needs an RNG");
        }
        mask_ = TensorT<T>(x.shape());
        const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
        for (std::size_t i = 0; i < mask_.size(); ++i) {
            mask_[i] = rng->uniform() < p ? T(0) : keep_scale;
        }
        return mul(x, mask_);
    }

    TensorT<T> backward(const TensorT<T>& grad) override {
        if (this->spec_.p == 0.0) return grad;
        this->require_cache(!mask_.empty());
        TensorT<T> dx = mul(grad, mask_);
        mask_ = TensorT<T>();
        return dx;
    }

    const TensorT<T>& last_mask() const { return mask_; }

private:
    TensorT<T> mask_;
};

// ---------------------------------------------------------------------------

// Cross-channel local response normalization:
//   b_c = a_c / (k + alpha * sum_{c' in win(c)} a_{c'}^2)^beta
// with win(c) the n-wide channel window centered on c, clamped to [0,C).
template <class T>
class LrnLayer final : public Layer<T> {
public:
    using Layer<T>::Layer;

    TensorT<T> forward(const TensorT<T>& x, Mode mode, Rng*) override {
        const std::size_t c = x.extent(x.rank() - 1);
        const std::size_t positions = x.size() / c;
        const std::size_t half = this->spec_.lrn_n / 2;
        const T k = static_cast<T>(this->spec_.lrn_k);
        const T alpha = static_cast<T>(this->spec_.lrn_alpha);
        const double beta = this->spec_.lrn_beta;

        TensorT<T> out(x.shape());
        TensorT<T> denom(x.shape());   // s_c
        TensorT<T> denom_pb(x.shape()); // s_c^-beta
        const T* xp = x.data();
        T* op = out.data();
        T* sp = denom.data();
        T* pp = denom_pb.data();
        parallel_for(positions, [&](std::size_t p0, std::size_t p1) {
            for (std::size_t pos = p0; pos < p1; ++pos) {
                const T* a = xp + pos * c;
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t lo = ch >= half ? ch - half : 0;
                    const std::size_t hi = std::min(c - 1, ch + half);
                    T ss = T(0);
                    for (std::size_t j = lo; j <= hi; ++j) ss += a[j] * a[j];
                    const T s = k + alpha * ss;
                    const T spb = static_cast<T>(std::pow(static_cast<double>(s), -beta));
                    sp[pos * c + ch] = s;
                    pp[pos * c + ch] = spb;
                    op[pos * c + ch] = a[ch] * spb;
                }
            }
        });
        if (mode == Mode::train) {
            input_ = x;
            denom_ = std::move(denom);
            denom_pb_ = std::move(denom_pb);
        }
        return out;
    }

    TensorT<T> backward(const TensorT<T>& grad) override {
        this->require_cache(!input_.empty());
        const std::size_t c = input_.extent(input_.rank() - 1);
        const std::size_t positions = input_.size() / c;
        const std::size_t half = this->spec_.lrn_n / 2;
        const T alpha = static_cast<T>(this->spec_.lrn_alpha);
        const T beta = static_cast<T>(this->spec_.lrn_beta);

        TensorT<T> dx(input_.shape());
        const T* a = input_.data();
        const T* g = grad.data();
        const T* sp = denom_.data();
        const T* pp = denom_pb_.data();
        T* dp = dx.data();
        parallel_for(positions, [&](std::size_t p0, std::size_t p1) {
            for (std::size_t pos = p0; pos < p1; ++pos) {
                const std::size_t base = pos * c;
                for (std::size_t i = 0; i < c; ++i) {
                    const std::size_t lo = i >= half ? i - half : 0;
                    const std::size_t hi = std::min(c - 1, i + half);
                    // d b_j / d a_i sums over output channels j whose window
                    // includes i (the window relation is symmetric).
                    T acc = g[base + i] * pp[base + i];
                    T cross = T(0);
                    for (std::size_t j = lo; j <= hi; ++j) {
                        cross += g[base + j] * a[base + j] * pp[base + j] / sp[base + j];
                    }
                    acc -= T(2) * alpha * beta * a[base + i] * cross;
                    dp[base + i] = acc;
                }
            }
        });
        input_ = TensorT<T>();
        denom_ = TensorT<T>();
        denom_pb_ = TensorT<T>();
        return dx;
    }

private:
    TensorT<T> input_, denom_, denom_pb_;
};

// ---------------------------------------------------------------------------

template <class T>
class FlattenLayer final : public Layer<T> {
public:
    using Layer<T>::Layer;

    TensorT<T> forward(const TensorT<T>& x, Mode mode, Rng*) override {
        if (mode == Mode::train) {
            in_shape_ = x.shape();
            have_cache_ = true;
        }
        const std::size_t n = x.extent(0);
        return x.reshaped({n, x.size() / n});
    }

    TensorT<T> backward(const TensorT<T>& grad) override {
        this->require_cache(have_cache_);
        have_cache_ = false;
        return grad.reshaped(in_shape_);
    }

private:
    std::vector<std::size_t> in_shape_;
    bool have_cache_ = false;
};

// ---------------------------------------------------------------------------

template <class T>
class DenseLayer final : public Layer<T> {
public:
    DenseLayer(LayerSpec spec, std::vector<std::size_t> in_shape)
        : Layer<T>(std::move(spec)), in_dim_(in_shape[0]) {
        weights_ = TensorT<T>({in_dim_, this->spec_.units});
        bias_ = TensorT<T>({this->spec_.units});
        dweights_ = TensorT<T>(weights_.shape());
        dbias_ = TensorT<T>(bias_.shape());
    }

    void init_params(Rng& rng) override {
        const double stddev = std::sqrt(2.0 / static_cast<double>(in_dim_));
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            weights_[i] = static_cast<T>(rng.normal(0.0, stddev));
        }
        bias_.fill(static_cast<T>(0.1));
    }

    TensorT<T> forward(const TensorT<T>& x, Mode mode, Rng*) override {
        TensorT<T> out = matmul(x, weights_);
        const std::size_t n = out.extent(0), u = out.extent(1);
        T* op = out.data();
        const T* bp = bias_.data();
        for (std::size_t i = 0; i < n; ++i) {
            T* row = op + i * u;
            for (std::size_t j = 0; j < u; ++j) row[j] += bp[j];
        }
        if (mode == Mode::train) input_ = x;
        return out;
    }

    TensorT<T> backward(const TensorT<T>& grad) override {
        this->require_cache(!input_.empty());
        dweights_ = matmul_at(input_, grad);
        dbias_.fill(T(0));
        const std::size_t n = grad.extent(0), u = grad.extent(1);
        const T* gp = grad.data();
        T* dbp = dbias_.data();
        for (std::size_t i = 0; i < n; ++i) {
            const T* row = gp + i * u;
            for (std::size_t j = 0; j < u; ++j) dbp[j] += row[j];
        }
        TensorT<T> dx = matmul_bt(grad, weights_);
        input_ = TensorT<T>();
        return dx;
    }

    std::vector<TensorT<T>*> params() override { return {&weights_, &bias_}; }
    std::vector<TensorT<T>*> grads() override { return {&dweights_, &dbias_}; }

private:
    std::size_t in_dim_;
    TensorT<T> weights_, bias_, dweights_, dbias_;
    TensorT<T> input_;
};

// ---------------------------------------------------------------------------

// Standalone softmax layer (squared-error networks and interpretation tools;
// cross-entropy training uses the fused path in losses.hpp instead).
template <class T>
class SoftmaxLayer final : public Layer<T> {
public:
    using Layer<T>::Layer;

    TensorT<T> forward(const TensorT<T>& x, Mode mode, Rng*) override {
        TensorT<T> out = softmax(x);
        if (mode == Mode::train) output_ = out;
        return out;
    }

    TensorT<T> backward(const TensorT<T>& grad) override {
        this->require_cache(!output_.empty());
        const std::size_t n = output_.extent(0), k = output_.extent(1);
        TensorT<T> dx(output_.shape());
        for (std::size_t i = 0; i < n; ++i) {
            const T* p = output_.data() + i * k;
            const T* g = grad.data() + i * k;
            T dot = T(0);
            for (std::size_t j = 0; j < k; ++j) dot += g[j] * p[j];
            T* d = dx.data() + i * k;
            for (std::size_t j = 0; j < k; ++j) d[j] = p[j] * (g[j] - dot);
        }
        output_ = TensorT<T>();
        return dx;
    }

private:
    TensorT<T> output_;
};

// ---------------------------------------------------------------------------

template <class T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec,
                                     const std::vector<std::size_t>& in_shape) {
    switch (spec.kind) {
        case LayerKind::conv: return std::make_unique<ConvLayer<T>>(spec, in_shape);
        case LayerKind::maxpool: return std::make_unique<MaxPoolLayer<T>>(spec, in_shape);
        case LayerKind::relu: return std::make_unique<ReluLayer<T>>(spec);
        case LayerKind::lrn: return std::make_unique<LrnLayer<T>>(spec);
        case LayerKind::dropout: return std::make_unique<DropoutLayer<T>>(spec);
        case LayerKind::flatten: return std::make_unique<FlattenLayer<T>>(spec);
        case LayerKind::dense: return std::make_unique<DenseLayer<T>>(spec, in_shape);
        case LayerKind::softmax: return std::make_unique<SoftmaxLayer<T>>(spec);
    }
    throw ConfigError("unknown layer kind");
}

} // namespace callo

#endif // CALLO_NN_LAYERS_HPP
