#include <cstdio>
#include <filesystem>
#include <fstream>

#include "callo/train.hpp"
#include "common.hpp"

namespace cli {

using namespace callo;
namespace fs = std::filesystem;

namespace {

TrainConfig to_train_config(const TrainOptions& opt) {
    TrainConfig cfg;
    cfg.lr0 = opt.lr;
    cfg.decay_rate = opt.decay_rate;
    cfg.decay_steps = opt.decay_steps;
    cfg.batch_size = opt.batch;
    cfg.max_steps = opt.steps;
    cfg.optimizer = opt.optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
    cfg.beta1 = opt.beta1;
    cfg.beta2 = opt.beta2;
    cfg.epsilon = opt.epsilon;
    cfg.weight_decay = opt.weight_decay;
    cfg.seed = opt.seed;
    cfg.precision = opt.precision == "f32" ? Precision::f32 : Precision::f64;
    cfg.eval_every = opt.eval_every;
    cfg.eval_subset = opt.eval_subset;
    cfg.checkpoint_every = opt.checkpoint_every;
    return cfg;
}

template <class T>
int train_impl(const TrainOptions& opt, const NetworkSpec& spec, const TrainConfig& cfg,
               const LabeledDataset& train_ds, const LabeledDataset* val_ds) {
    NetworkState<T> net(spec, cfg.seed);
    const std::string ckpt = (fs::path(opt.out_dir) / "checkpoint.bin").string();

    TrainCallbacks callbacks;
    const std::size_t report_every = std::max<std::size_t>(1, cfg.max_steps / 20);
    callbacks.on_step = [&](const StepRecord& r) {
        if (r.step % report_every == 0 || r.step == cfg.max_steps) {
            std::printf("step %zu/%zu lr %.3g loss %.5f\n", r.step, cfg.max_steps, r.lr,
                        r.loss);
            std::fflush(stdout);
        }
    };
    callbacks.on_eval = [&](const EvalRecord& r) {
        if (r.has_val) {
            std::printf("step %zu train_acc %.4f val_acc %.4f\n", r.step, r.train_accuracy,
                        r.val_accuracy);
        } else {
            std::printf("step %zu train_acc %.4f\n", r.step, r.train_accuracy);
        }
        std::fflush(stdout);
    };

    TrainHistory history = train_loop(net, train_ds, val_ds, cfg, ckpt, callbacks);

    std::ofstream hist_out(fs::path(opt.out_dir) / "history.tsv");
    history.write_tsv(hist_out);

    if (history.aborted) {
        std::fprintf(stderr, "train: aborted at step %zu: %s (last scheduled checkpoint "
                             "kept)\n",
                     history.abort_step, history.abort_reason.c_str());
        return 3;
    }
    if (cfg.max_steps == 0) {
        // still record the initialization as the checkpoint
        save_checkpoint(ckpt, net);
    }
    std::printf("train: done, checkpoint at %s\n", ckpt.c_str());
    return 0;
}

} // namespace

int run_train(const TrainOptions& opt) {
    if (opt.out_dir.empty()) throw ConfigError("train: --out is required");
    NetworkSpec spec = resolve_network(opt.net);
    TrainConfig cfg = to_train_config(opt);
    cfg.validate();

    LabeledDataset train_ds = load_data(opt.data);
    if (opt.train_limit > 0) {
        train_ds = stratified_subsample(train_ds, opt.train_limit, opt.seed);
    }

    LabeledDataset val_store;
    const LabeledDataset* val_ds = nullptr;
    if (opt.val_fraction > 0.0) {
        SplitSpec split_spec;
        split_spec.train_fraction = 1.0 - opt.val_fraction;
        split_spec.seed = opt.seed;
        auto [tr, va] = split(train_ds, split_spec);
        train_ds = std::move(tr);
        val_store = std::move(va);
        val_ds = &val_store;
    } else if (opt.eval_on_test) {
        DataOptions test = opt.data;
        test.split = "test";
        val_store = load_data(test);
        val_ds = &val_store;
    }

    fs::create_directories(opt.out_dir);
    write_run_manifest(
        opt.out_dir, "train",
        {{"data", data_options_json(opt.data)},
         {"net", opt.net},
         {"net_hash", spec.hash()},
         {"steps", opt.steps},
         {"batch", opt.batch},
         {"lr", opt.lr},
         {"decay_rate", opt.decay_rate},
         {"decay_steps", opt.decay_steps},
         {"optimizer", opt.optimizer},
         {"beta1", opt.beta1},
         {"beta2", opt.beta2},
         {"epsilon", opt.epsilon},
         {"weight_decay", opt.weight_decay},
         {"seed", opt.seed},
         {"precision", opt.precision},
         {"val_fraction", opt.val_fraction},
         {"eval_on_test", opt.eval_on_test},
         {"eval_every", opt.eval_every},
         {"eval_subset", opt.eval_subset},
         {"checkpoint_every", opt.checkpoint_every},
         {"train_limit", opt.train_limit}});

    // the canonical network config ships next to the checkpoint
    std::ofstream net_out(fs::path(opt.out_dir) / "network.net");
    net_out << spec.canonical_text();

    if (cfg.precision == Precision::f32) {
        return train_impl<float>(opt, spec, cfg, train_ds, val_ds);
    }
    return train_impl<double>(opt, spec, cfg, train_ds, val_ds);
}

} // namespace cli
