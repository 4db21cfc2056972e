#ifndef CALLO_NN_NETWORK_HPP
#define CALLO_NN_NETWORK_HPP

#include <memory>
#include <string>
#include <vector>

#include "callo/nn/layers.hpp"
#include "callo/nn/spec.hpp"

namespace callo {

// A built network: validated topology plus live parameters and per-layer
// caches. Owned by a single trainer; inference on a frozen instance is safe
// from multiple threads.
template <class T>
class NetworkState {
public:
    explicit NetworkState(NetworkSpec spec, std::uint64_t seed = 42)
        : spec_(std::move(spec)) {
        layer_shapes_ = spec_.validate();
        std::vector<std::size_t> cur = spec_.input_shape;
        for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
            layers_.push_back(make_layer<T>(spec_.layers[i], cur));
            cur = layer_shapes_[i];
        }
        Rng rng(seed);
        for (auto& l : layers_) l->init_params(rng);
    }

    const NetworkSpec& spec() const { return spec_; }
    std::size_t layer_count() const { return layers_.size(); }
    Layer<T>& layer(std::size_t i) { return *layers_[i]; }
    const std::vector<std::size_t>& layer_output_shape(std::size_t i) const {
        return layer_shapes_[i];
    }

    // Batch forward pass: batch is [n, input_shape...]. Train mode caches
    // activations for backward and draws dropout masks from rng.
    TensorT<T> forward(const TensorT<T>& batch, Mode mode, Rng* rng = nullptr) {
        check_batch_shape(batch);
        TensorT<T> cur = batch;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            cur = layers_[i]->forward(cur, mode, rng);
            check_finite(cur, i);
        }
        backward_ready_ = (mode == Mode::train);
        return cur;
    }

    // Infer-mode forward that also returns every layer's output (for
    // activation dumps and dead-neuron probing).
    TensorT<T> forward_collect(const TensorT<T>& batch, std::vector<TensorT<T>>& outputs) {
        check_batch_shape(batch);
        outputs.clear();
        TensorT<T> cur = batch;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            cur = layers_[i]->forward(cur, Mode::infer, nullptr);
            check_finite(cur, i);
            outputs.push_back(cur);
        }
        return cur;
    }

    // Backpropagates the loss gradient through every layer; parameter
    // gradients are left in each layer's grad tensors. Returns the gradient
    // with respect to the input batch.
    TensorT<T> backward(const TensorT<T>& loss_grad) {
        if (!backward_ready_) {
            throw StateError("network backward requires a preceding train-mode forward");
        }
        TensorT<T> cur = loss_grad;
        for (std::size_t i = layers_.size(); i-- > 0;) {
            cur = layers_[i]->backward(cur);
        }
        backward_ready_ = false;
        return cur;
    }

    std::vector<TensorT<T>*> params() {
        std::vector<TensorT<T>*> out;
        for (auto& l : layers_) {
            for (TensorT<T>* p : l->params()) out.push_back(p);
        }
        return out;
    }

    std::vector<const TensorT<T>*> params() const {
        std::vector<const TensorT<T>*> out;
        for (const auto& l : layers_) {
            for (TensorT<T>* p : const_cast<Layer<T>&>(*l).params()) out.push_back(p);
        }
        return out;
    }

    std::vector<TensorT<T>*> grads() {
        std::vector<TensorT<T>*> out;
        for (auto& l : layers_) {
            for (TensorT<T>* g : l->grads()) out.push_back(g);
        }
        return out;
    }

private:
    void check_batch_shape(const TensorT<T>& batch) const {
        const auto& in = spec_.input_shape;
        bool ok = batch.rank() == in.size() + 1;
        if (ok) {
            for (std::size_t i = 0; i < in.size(); ++i) {
                ok = ok && batch.extent(i + 1) == in[i];
            }
        }
        if (!ok) {
            throw DimensionError("network: batch " + batch.shape_str() +
                                 " does not match input shape " +
                                 Tensor::shape_string(in));
        }
    }

    void check_finite(const TensorT<T>& t, std::size_t layer_idx) const {
        double acc = 0.0;
        const T* p = t.data();
        for (std::size_t i = 0; i < t.size(); ++i) acc += static_cast<double>(p[i]);
        if (!std::isfinite(acc)) {
            throw NumericError("non-finite activation after layer " +
                               std::to_string(layer_idx) + " (" +
                               layers_[layer_idx]->name() + ")");
        }
    }

    NetworkSpec spec_;
    std::vector<std::vector<std::size_t>> layer_shapes_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    bool backward_ready_ = false;
};

using Network = NetworkState<double>;
using NetworkF = NetworkState<float>;

} // namespace callo

#endif // CALLO_NN_NETWORK_HPP
