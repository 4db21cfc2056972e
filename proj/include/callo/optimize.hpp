#ifndef CALLO_OPTIMIZE_HPP
#define CALLO_OPTIMIZE_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "callo/error.hpp"
#include "callo/tensor.hpp"

namespace callo {

enum class OptimizerKind { sgd, adam };
enum class Precision { f32, f64 };

// Optimizer + loop hyperparameters. The learning rate decays continuously:
//   lr(step) = lr0 * decay_rate^(step / decay_steps)
// so decay_rate = 1 gives a constant rate.
struct TrainConfig {
    double lr0 = 1e-4;
    double decay_rate = 0.95;
    std::size_t decay_steps = 1000;
    std::size_t batch_size = 50;
    std::size_t max_steps = 0;
    OptimizerKind optimizer = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0; // coupled decay: lambda*w is added to the gradient
    std::uint64_t seed = 42;
    Precision precision = Precision::f64;
    std::size_t eval_every = 500;   // 0 = no periodic evaluation
    std::size_t eval_subset = 1000; // train-accuracy sample cap, 0 = full set
    std::size_t checkpoint_every = 0; // 0 = final checkpoint only

    void validate() const {
        if (lr0 <= 0.0) throw ConfigError("train: learning rate must be > 0");
        if (!(decay_rate > 0.0 && decay_rate <= 1.0)) {
            throw ConfigError("train: decay_rate must be in (0,1]");
        }
        if (decay_steps < 1) throw ConfigError("train: decay_steps must be >= 1");
        if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
            throw ConfigError("train: beta1/beta2 must be in [0,1)");
        }
        if (epsilon <= 0.0) throw ConfigError("train: epsilon must be > 0");
        if (weight_decay < 0.0) throw ConfigError("train: weight decay must be >= 0");
    }
};

inline double lr_schedule(std::size_t step, const TrainConfig& cfg) {
    return cfg.lr0 * std::pow(cfg.decay_rate,
                              static_cast<double>(step) / static_cast<double>(cfg.decay_steps));
}

// Plain gradient descent: w <- w - eta * grad.
template <class T>
void sgd_step(TensorT<T>& w, const TensorT<T>& grad, double eta) {
    detail::require_same_shape(w, grad, "sgd_step");
    if (eta <= 0.0) throw ConfigError("sgd_step: eta must be > 0");
    double probe = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) probe += static_cast<double>(grad[i]);
    if (!std::isfinite(probe)) throw NumericError("sgd_step: non-finite gradient");
    axpy(w, static_cast<T>(-eta), grad);
}

// Moment buffers for one parameter set. m and v start at zero; t counts
// completed steps, and the bias correction of the next update uses t+1, which
// makes the first-step corrected mean exactly equal the gradient.
template <class T>
struct AdamStateT {
    std::vector<TensorT<T>> m;
    std::vector<TensorT<T>> v;
    std::int64_t t = 0;

    static AdamStateT zeros_like(const std::vector<TensorT<T>*>& params) {
        AdamStateT st;
        for (const TensorT<T>* p : params) {
            st.m.emplace_back(p->shape());
            st.v.emplace_back(p->shape());
        }
        return st;
    }
};

using AdamState = AdamStateT<double>;

// One Adam update over the whole parameter set:
//   m <- b1*m + (1-b1)*g            v <- b2*v + (1-b2)*g^2
//   m^ = m/(1-b1^t)                 v^ = v/(1-b2^t)
//   w <- w - eta * m^ / (sqrt(v^) + eps)
template <class T>
void adam_step(const std::vector<TensorT<T>*>& params,
               const std::vector<const TensorT<T>*>& grads, AdamStateT<T>& state,
               const TrainConfig& cfg, double eta) {
    if (cfg.epsilon <= 0.0) throw ConfigError("adam_step: epsilon must be > 0");
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw DimensionError("adam_step: parameter/gradient/state count mismatch");
    }
    const std::int64_t t = state.t + 1;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double m_corr = 1.0 - std::pow(b1, static_cast<double>(t));
    const double v_corr = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t p = 0; p < params.size(); ++p) {
        TensorT<T>& w = *params[p];
        const TensorT<T>& g = *grads[p];
        detail::require_same_shape(w, g, "adam_step");
        TensorT<T>& m = state.m[p];
        TensorT<T>& v = state.v[p];
        T* wp = w.data();
        T* mp = m.data();
        T* vp = v.data();
        const T* gp = g.data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            mp[i] = static_cast<T>(b1 * mp[i] + (1.0 - b1) * gp[i]);
            vp[i] = static_cast<T>(b2 * vp[i] + (1.0 - b2) * gp[i] * gp[i]);
            const double mhat = mp[i] / m_corr;
            const double vhat = vp[i] / v_corr;
            wp[i] -= static_cast<T>(eta * mhat / (std::sqrt(vhat) + cfg.epsilon));
        }
    }
    state.t = t;
}

// Single-tensor convenience overload.
template <class T>
void adam_step(TensorT<T>& w, const TensorT<T>& grad, AdamStateT<T>& state,
               const TrainConfig& cfg, double eta) {
    std::vector<TensorT<T>*> ps = {&w};
    std::vector<const TensorT<T>*> gs = {&grad};
    adam_step(ps, gs, state, cfg, eta);
}

} // namespace callo

#endif // CALLO_OPTIMIZE_HPP
