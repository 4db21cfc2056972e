#ifndef CALLO_TRAIN_HPP
#define CALLO_TRAIN_HPP

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "callo/datasets.hpp"
#include "callo/nn/checkpoint.hpp"
#include "callo/nn/losses.hpp"
#include "callo/nn/network.hpp"
#include "callo/optimize.hpp"

namespace callo {

struct StepRecord {
    std::size_t step = 0; // 1-based, after the update
    double lr = 0.0;
    double loss = 0.0;
};

struct EvalRecord {
    std::size_t step = 0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    bool has_val = false;
};

struct TrainHistory {
    std::vector<StepRecord> steps;
    std::vector<EvalRecord> evals;
    bool aborted = false;
    std::size_t abort_step = 0;
    std::string abort_reason;

    // Delimited log: step, lr, loss, train/val accuracy on eval steps.
    void write_tsv(std::ostream& os) const;
};

struct TrainCallbacks {
    std::function<void(const StepRecord&)> on_step;
    std::function<void(const EvalRecord&)> on_eval;
};

// Assembles batch [n, sample_shape...] from dataset rows.
template <class T>
TensorT<T> make_batch(const LabeledDataset& ds, const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> shape = ds.sample_shape();
    shape.insert(shape.begin(), idx.size());
    TensorT<T> batch(shape);
    const std::size_t per = batch.size() / idx.size();
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const TensorF& f = ds.features(idx[r]);
        if (f.size() != per) {
            throw DimensionError("batch: sample " + ds.id(idx[r]) + " has shape " +
                                 f.shape_str() + ", expected " +
                                 Tensor::shape_string(ds.sample_shape()));
        }
        T* dst = batch.data() + r * per;
        for (std::size_t i = 0; i < per; ++i) dst[i] = static_cast<T>(f[i]);
    }
    return batch;
}

template <class T>
TensorT<T> one_hot(const std::vector<int>& labels, std::size_t classes) {
    TensorT<T> t({labels.size(), classes}, T(0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        t(i, static_cast<std::size_t>(labels[i])) = T(1);
    }
    return t;
}

// Top-1 accuracy over (a prefix of) a dataset, batched infer-mode forwards.
template <class T>
double evaluate_accuracy(NetworkState<T>& net, const LabeledDataset& ds,
                         std::size_t batch_size = 100, std::size_t limit = 0) {
    if (ds.empty()) throw DataError("evaluate: empty dataset");
    const std::size_t n = limit == 0 ? ds.size() : std::min(limit, ds.size());
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < n; begin += batch_size) {
        const std::size_t end = std::min(n, begin + batch_size);
        std::vector<std::size_t> idx;
        for (std::size_t i = begin; i < end; ++i) idx.push_back(i);
        TensorT<T> batch = make_batch<T>(ds, idx);
        TensorT<T> logits = net.forward(batch, Mode::infer);
        const std::size_t k = logits.extent(1);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const T* row = logits.data() + r * k;
            std::size_t best = 0;
            for (std::size_t j = 1; j < k; ++j) {
                if (row[j] > row[best]) best = j;
            }
            if (static_cast<int>(best) == ds.label(idx[r])) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

// The training loop: seeded shuffled mini-batches (full permutation per
// epoch, last partial batch used), forward/backward/update for max_steps,
// periodic accuracy evaluation, checkpoints on schedule. A non-finite loss
// aborts the run and leaves the last scheduled checkpoint in place.
template <class T>
TrainHistory train_loop(NetworkState<T>& net, const LabeledDataset& train,
                        const LabeledDataset* val, const TrainConfig& cfg,
                        const std::string& checkpoint_path = {},
                        const TrainCallbacks& callbacks = {}) {
    cfg.validate();
    if (train.empty()) throw DataError("train: empty dataset");

    TrainHistory history;
    if (cfg.max_steps == 0) return history;

    Rng rng(cfg.seed);
    auto params = net.params();
    auto state = AdamStateT<T>::zeros_like(params);

    std::vector<std::size_t> order = identity_permutation(train.size());
    rng.shuffle(order);
    std::size_t cursor = 0;

    const std::size_t classes = net.spec().class_count();

    for (std::size_t step = 0; step < cfg.max_steps; ++step) {
        if (cursor >= order.size()) {
            rng.shuffle(order);
            cursor = 0;
        }
        const std::size_t take = std::min(cfg.batch_size, order.size() - cursor);
        std::vector<std::size_t> idx(order.begin() + cursor, order.begin() + cursor + take);
        cursor += take;

        const double lr = lr_schedule(step, cfg);
        double loss_value = 0.0;
        try {
            TensorT<T> batch = make_batch<T>(train, idx);
            std::vector<int> labels;
            for (std::size_t i : idx) labels.push_back(train.label(i));

            TensorT<T> logits = net.forward(batch, Mode::train, &rng);
            LossResult<T> loss;
            if (net.spec().loss == LossKind::cross_entropy) {
                loss = cross_entropy_loss(logits, labels);
            } else {
                loss = squared_error_loss(logits, one_hot<T>(labels, classes));
            }
            loss_value = loss.value;
            if (!std::isfinite(loss_value)) {
                throw NumericError("loss is not finite at step " + std::to_string(step + 1));
            }
            net.backward(loss.grad);

            auto grads = net.grads();
            if (cfg.weight_decay > 0.0) add_l2_gradient(params, grads, cfg.weight_decay);
            if (cfg.optimizer == OptimizerKind::adam) {
                std::vector<const TensorT<T>*> cgrads(grads.begin(), grads.end());
                adam_step(params, cgrads, state, cfg, lr);
            } else {
                for (std::size_t p = 0; p < params.size(); ++p) {
                    sgd_step(*params[p], *grads[p], lr);
                }
            }
        } catch (const NumericError& e) {
            history.aborted = true;
            history.abort_step = step + 1;
            history.abort_reason = e.what();
            break;
        }

        StepRecord rec{step + 1, lr, loss_value};
        history.steps.push_back(rec);
        if (callbacks.on_step) callbacks.on_step(rec);

        const bool last = step + 1 == cfg.max_steps;
        if ((cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) || last) {
            EvalRecord ev;
            ev.step = step + 1;
            ev.train_accuracy = evaluate_accuracy(net, train, cfg.batch_size, cfg.eval_subset);
            if (val != nullptr && !val->empty()) {
                ev.val_accuracy = evaluate_accuracy(net, *val, cfg.batch_size, cfg.eval_subset);
                ev.has_val = true;
            }
            history.evals.push_back(ev);
            if (callbacks.on_eval) callbacks.on_eval(ev);
        }
        if (!checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
            (step + 1) % cfg.checkpoint_every == 0) {
            save_checkpoint(checkpoint_path, net);
        }
    }

    if (!checkpoint_path.empty() && !history.aborted) {
        save_checkpoint(checkpoint_path, net);
    }
    return history;
}

} // namespace callo

#endif // CALLO_TRAIN_HPP
