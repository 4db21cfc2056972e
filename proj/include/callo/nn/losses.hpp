#ifndef CALLO_NN_LOSSES_HPP
#define CALLO_NN_LOSSES_HPP

#include <cmath>
#include <vector>

#include "callo/error.hpp"
#include "callo/tensor.hpp"

namespace callo {

// Row-wise stable softmax: shifts by the row max before exponentiating, so
// adding a constant to a row leaves the result unchanged. Accepts [n,k] or a
// single [k] row.
template <class T>
TensorT<T> softmax(const TensorT<T>& logits) {
    if (logits.rank() != 1 && logits.rank() != 2) {
        throw DimensionError("softmax: expected [n,k] or [k], got " + logits.shape_str());
    }
    const std::size_t n = logits.rank() == 2 ? logits.extent(0) : 1;
    const std::size_t k = logits.rank() == 2 ? logits.extent(1) : logits.extent(0);
    TensorT<T> out(logits.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = logits.data() + i * k;
        T* orow = out.data() + i * k;
        T mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        if (!std::isfinite(static_cast<double>(mx))) {
            throw NumericError("softmax: non-finite logits in row " + std::to_string(i));
        }
        T sum = T(0);
        for (std::size_t j = 0; j < k; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        for (std::size_t j = 0; j < k; ++j) orow[j] /= sum;
    }
    return out;
}

template <class T>
struct LossResult {
    double value = 0.0;
    TensorT<T> grad; // d loss / d network-output
};

inline void check_labels(const std::vector<int>& labels, std::size_t n, std::size_t k) {
    if (labels.size() != n) {
        throw DimensionError("loss: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(n) + " rows");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
            throw DataError("loss: label " + std::to_string(labels[i]) + " at row " +
                            std::to_string(i) + " out of range [0," + std::to_string(k) + ")");
        }
    }
}

// Mean cross-entropy with the softmax fused in:
//   loss = -(1/n) sum_i ln p[i, y_i],   d loss / d logits = (p - onehot) / n.
template <class T>
LossResult<T> cross_entropy_loss(const TensorT<T>& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) {
        throw DimensionError("cross_entropy_loss: expected [n,k] logits, got " +
                             logits.shape_str());
    }
    const std::size_t n = logits.extent(0), k = logits.extent(1);
    check_labels(labels, n, k);
    TensorT<T> p = softmax(logits);
    LossResult<T> res;
    res.grad = p;
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        // p is strictly positive by construction (exp of a finite shift)
        loss -= std::log(static_cast<double>(p(i, y)));
        res.grad(i, y) -= T(1);
    }
    for (std::size_t j = 0; j < res.grad.size(); ++j) res.grad[j] *= T(inv_n);
    res.value = loss * inv_n;
    return res;
}

// One-hot convenience overload.
template <class T>
LossResult<T> cross_entropy_loss(const TensorT<T>& logits, const TensorT<T>& onehot) {
    detail::require_same_shape(logits, onehot, "cross_entropy_loss");
    const std::size_t n = logits.extent(0), k = logits.extent(1);
    std::vector<int> labels(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (onehot(i, j) == T(1)) labels[i] = static_cast<int>(j);
        }
    }
    return cross_entropy_loss(logits, labels);
}

// Total squared error E = 1/2 sum (t - o)^2, gradient d E / d o = (o - t).
template <class T>
LossResult<T> squared_error_loss(const TensorT<T>& output, const TensorT<T>& target) {
    detail::require_same_shape(output, target, "squared_error_loss");
    LossResult<T> res;
    res.grad = TensorT<T>(output.shape());
    double e = 0.0;
    for (std::size_t i = 0; i < output.size(); ++i) {
        const double d = static_cast<double>(output[i]) - static_cast<double>(target[i]);
        e += d * d;
        res.grad[i] = static_cast<T>(d);
    }
    res.value = 0.5 * e;
    return res;
}

// L2 weight penalty (lambda/2) sum w^2 over all parameter tensors.
template <class T>
double l2_penalty(const std::vector<const TensorT<T>*>& params, double lambda) {
    if (lambda < 0.0) throw ConfigError("l2_penalty: lambda must be >= 0");
    double acc = 0.0;
    for (const TensorT<T>* w : params) {
        for (std::size_t i = 0; i < w->size(); ++i) {
            const double v = static_cast<double>((*w)[i]);
            acc += v * v;
        }
    }
    return 0.5 * lambda * acc;
}

// Adds the penalty gradient lambda*w onto existing parameter gradients.
template <class T>
void add_l2_gradient(const std::vector<TensorT<T>*>& params,
                     const std::vector<TensorT<T>*>& grads, double lambda) {
    if (lambda < 0.0) throw ConfigError("add_l2_gradient: lambda must be >= 0");
    if (params.size() != grads.size()) {
        throw DimensionError("add_l2_gradient: parameter/gradient count mismatch");
    }
    if (lambda == 0.0) return;
    for (std::size_t t = 0; t < params.size(); ++t) {
        axpy(*grads[t], static_cast<T>(lambda), *params[t]);
    }
}

} // namespace callo

#endif // CALLO_NN_LOSSES_HPP
