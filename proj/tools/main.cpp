#include <cstdio>

#include <CLI11.hpp>

#include "callo/error.hpp"
#include "callo/parallel.hpp"
#include "common.hpp"

// Visual-recognition toolkit: image preprocessing into passport photos,
// from-scratch CNN training, kNN/PCA/LDA baselines, and model-interpretation
// tools. Exit codes: 0 success, 1 user/config error, 2 data error, 3 numeric
// failure.

int main(int argc, char** argv) {
    CLI::App app{"callosity - individual-animal visual recognition toolkit"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags are valid after the subcommand too

    int threads = 0;
    app.add_option("--threads", threads,
                   "worker thread cap (0 = hardware, 1 = bit-reproducible)");

    cli::PreprocessOptions pre;
    CLI::App* cmd_pre = app.add_subcommand(
        "preprocess", "segment, derotate, and crop images into passport photos");
    cmd_pre->add_option("--in", pre.in_dir, "input image directory")->required();
    cmd_pre->add_option("--out", pre.out_dir, "output directory")->required();
    cmd_pre->add_option("--out-size", pre.out_size, "passport side length (default 256)");
    cmd_pre->add_flag("--flip180", pre.flip180,
                      "rotate results half a turn (subject orientation is ambiguous)");
    cmd_pre->add_flag("--strict", pre.strict, "nonzero exit when any image hard-fails");

    cli::TrainOptions tr;
    CLI::App* cmd_tr = app.add_subcommand("train", "train a network");
    cli::add_data_options(cmd_tr, tr.data);
    cmd_tr->add_option("--net", tr.net, "preset name or network config path");
    cmd_tr->add_option("--out", tr.out_dir, "output directory")->required();
    cmd_tr->add_option("--steps", tr.steps, "optimizer steps");
    cmd_tr->add_option("--batch", tr.batch, "mini-batch size");
    cmd_tr->add_option("--lr", tr.lr, "initial learning rate");
    cmd_tr->add_option("--decay-rate", tr.decay_rate, "lr decay factor per decay-steps");
    cmd_tr->add_option("--decay-steps", tr.decay_steps, "lr decay interval");
    cmd_tr->add_option("--optimizer", tr.optimizer, "adam|sgd")
        ->check(CLI::IsMember({"adam", "sgd"}));
    cmd_tr->add_option("--beta1", tr.beta1, "adam first-moment decay");
    cmd_tr->add_option("--beta2", tr.beta2, "adam second-moment decay");
    cmd_tr->add_option("--epsilon", tr.epsilon, "adam epsilon");
    cmd_tr->add_option("--weight-decay", tr.weight_decay, "L2 penalty strength");
    cmd_tr->add_option("--seed", tr.seed, "run seed (default 42)");
    cmd_tr->add_option("--precision", tr.precision, "f32|f64 (default f64)")
        ->check(CLI::IsMember({"f32", "f64"}));
    cmd_tr->add_option("--val-fraction", tr.val_fraction,
                       "carve a stratified validation split from the training data");
    cmd_tr->add_flag("--eval-test", tr.eval_on_test,
                     "track the MNIST test pair during training");
    cmd_tr->add_option("--eval-every", tr.eval_every, "accuracy evaluation interval");
    cmd_tr->add_option("--eval-subset", tr.eval_subset,
                       "sample cap for periodic accuracy (0 = full)");
    cmd_tr->add_option("--checkpoint-every", tr.checkpoint_every,
                       "checkpoint interval (0 = final only)");
    cmd_tr->add_option("--train-limit", tr.train_limit,
                       "stratified subsample of the training data (0 = all)");

    cli::EvalOptions ev;
    CLI::App* cmd_ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    cli::add_data_options(cmd_ev, ev.data);
    cmd_ev->add_option("--net", ev.net, "preset name or network config path");
    cmd_ev->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
    cmd_ev->add_option("--out", ev.out_dir, "write confusion matrix and accuracy here");
    cmd_ev->add_option("--limit", ev.limit, "stratified subsample (0 = all)");

    cli::KnnOptions kn;
    CLI::App* cmd_kn = app.add_subcommand("knn", "kNN baselines with PCA/LDA reduction");
    cli::add_data_options(cmd_kn, kn.data);
    cmd_kn->add_option("--k", kn.ks, "k values (default 1 3 5)");
    cmd_kn->add_option("--variants", kn.variants,
                       "all or comma list of raw,pca,pca_lda,pca_lda_chebyshev");
    cmd_kn->add_option("--metric", kn.metric, "raw-variant metric")
        ->check(CLI::IsMember({"euclidean", "chebyshev", "minkowski"}));
    cmd_kn->add_option("--p", kn.p, "minkowski exponent (default 2)");
    cmd_kn->add_option("--pca-dim", kn.pca_dim, "PCA dimension (0 = by variance fraction)");
    cmd_kn->add_option("--pca-fraction", kn.pca_fraction,
                       "variance fraction for automatic PCA dimension");
    cmd_kn->add_option("--lda-dim", kn.lda_dim, "LDA dimension (0 = classes-1)");
    cmd_kn->add_option("--val-fraction", kn.val_fraction,
                       "validation fraction for manifest datasets");
    cmd_kn->add_option("--train-limit", kn.train_limit, "stratified train subsample");
    cmd_kn->add_option("--test-limit", kn.test_limit, "stratified validation subsample");
    cmd_kn->add_option("--repeats", kn.repeats,
                       "repeat the pipeline and verify identical reports");
    cmd_kn->add_option("--seed", kn.seed, "split/subsample seed");
    cmd_kn->add_option("--out", kn.out_dir, "write knn_report.tsv here");

    cli::SaliencyOptions sa;
    CLI::App* cmd_sa = app.add_subcommand("saliency", "occlusion saliency map");
    cmd_sa->add_option("--checkpoint", sa.checkpoint, "checkpoint path")->required();
    cmd_sa->add_option("--net", sa.net, "preset name or network config path");
    cmd_sa->add_option("--image", sa.image, "input image")->required();
    cmd_sa->add_option("--target", sa.target, "class index (-1 = predicted)");
    cmd_sa->add_option("--box", sa.box, "occlusion box (0 = scaled default)");
    cmd_sa->add_option("--stride", sa.stride, "grid stride (0 = box/2)");
    cmd_sa->add_flag("--occlude-mean", sa.occlude_mean,
                     "occlude with the image mean instead of 0");
    cmd_sa->add_option("--out", sa.out_dir, "output directory")->required();

    cli::ActivationsOptions ac;
    CLI::App* cmd_ac = app.add_subcommand("activations", "per-layer activation dumps");
    cmd_ac->add_option("--checkpoint", ac.checkpoint, "checkpoint path")->required();
    cmd_ac->add_option("--net", ac.net, "preset name or network config path");
    cmd_ac->add_option("--image", ac.image, "input image")->required();
    cmd_ac->add_option("--out", ac.out_dir, "output directory")->required();

    cli::ReportOptions re;
    CLI::App* cmd_re = app.add_subcommand("report", "summarize run artifacts");
    cmd_re->add_option("--history", re.history, "training history log");
    cmd_re->add_option("--knn", re.knn, "knn report file");

    int rc = 0;
    cmd_pre->callback([&] { rc = cli::run_preprocess(pre); });
    cmd_tr->callback([&] {
        callo::set_num_threads(threads);
        rc = cli::run_train(tr);
    });
    cmd_ev->callback([&] {
        callo::set_num_threads(threads);
        rc = cli::run_eval(ev);
    });
    cmd_kn->callback([&] {
        callo::set_num_threads(threads);
        rc = cli::run_knn(kn);
    });
    cmd_sa->callback([&] {
        callo::set_num_threads(threads);
        rc = cli::run_saliency(sa);
    });
    cmd_ac->callback([&] { rc = cli::run_activations(ac); });
    cmd_re->callback([&] { rc = cli::run_report(re); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const callo::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    }
    return rc;
}
