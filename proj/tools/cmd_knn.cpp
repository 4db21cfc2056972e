#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "callo/baseline.hpp"
#include "common.hpp"

namespace cli {

using namespace callo;
namespace fs = std::filesystem;

namespace {

std::vector<PipelineVariant> parse_variants(const std::string& spec) {
    if (spec == "all") {
        return {PipelineVariant::raw, PipelineVariant::pca, PipelineVariant::pca_lda,
                PipelineVariant::pca_lda_chebyshev};
    }
    std::vector<PipelineVariant> out;
    std::istringstream is(spec);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (tok == "raw") {
            out.push_back(PipelineVariant::raw);
        } else if (tok == "pca") {
            out.push_back(PipelineVariant::pca);
        } else if (tok == "pca_lda") {
            out.push_back(PipelineVariant::pca_lda);
        } else if (tok == "pca_lda_chebyshev") {
            out.push_back(PipelineVariant::pca_lda_chebyshev);
        } else {
            throw ConfigError("knn: unknown variant '" + tok + "'");
        }
    }
    if (out.empty()) throw ConfigError("knn: no variants selected");
    return out;
}

} // namespace

int run_knn(const KnnOptions& opt) {
    PipelineConfig cfg;
    cfg.ks = opt.ks;
    cfg.variants = parse_variants(opt.variants);
    cfg.pca_dim = opt.pca_dim;
    cfg.pca_fraction = opt.pca_fraction;
    cfg.lda_dim = opt.lda_dim;
    cfg.raw_metric = parse_metric(opt.metric);
    cfg.minkowski_p = opt.p;

    LabeledDataset train_ds, val_ds;
    if (!opt.data.mnist_dir.empty()) {
        // MNIST comes pre-split
        DataOptions train_opts = opt.data;
        train_opts.split = "train";
        train_ds = load_data(train_opts);
        DataOptions test_opts = opt.data;
        test_opts.split = "test";
        val_ds = load_data(test_opts);
    } else {
        LabeledDataset all = load_data(opt.data);
        SplitSpec split_spec;
        split_spec.train_fraction = 1.0 - opt.val_fraction;
        split_spec.seed = opt.seed;
        auto [tr, va] = split(all, split_spec);
        train_ds = std::move(tr);
        val_ds = std::move(va);
    }
    if (opt.train_limit > 0) {
        train_ds = stratified_subsample(train_ds, opt.train_limit, opt.seed);
    }
    if (opt.test_limit > 0) {
        val_ds = stratified_subsample(val_ds, opt.test_limit, opt.seed + 1);
    }

    std::printf("knn: %zu train / %zu validation samples, %zu classes\n", train_ds.size(),
                val_ds.size(), train_ds.class_count());

    PipelineReport report = baseline_pipeline(train_ds, val_ds, cfg);
    std::ostringstream first;
    report.write_tsv(first);

    // repeated-run mode demonstrates the zero-variance determinism claim
    bool identical = true;
    for (std::size_t r = 1; r < opt.repeats; ++r) {
        PipelineReport again = baseline_pipeline(train_ds, val_ds, cfg);
        std::ostringstream os;
        again.write_tsv(os);
        if (os.str() != first.str()) identical = false;
    }

    std::fputs(first.str().c_str(), stdout);
    if (opt.repeats > 1) {
        std::printf("repeats: %zu, identical: %s\n", opt.repeats, identical ? "yes" : "NO");
    }

    if (!opt.out_dir.empty()) {
        fs::create_directories(opt.out_dir);
        write_run_manifest(opt.out_dir, "knn",
                           {{"data", data_options_json(opt.data)},
                            {"ks", opt.ks},
                            {"variants", opt.variants},
                            {"metric", opt.metric},
                            {"p", opt.p},
                            {"pca_dim", opt.pca_dim},
                            {"pca_fraction", opt.pca_fraction},
                            {"lda_dim", opt.lda_dim},
                            {"val_fraction", opt.val_fraction},
                            {"train_limit", opt.train_limit},
                            {"test_limit", opt.test_limit},
                            {"repeats", opt.repeats},
                            {"seed", opt.seed}});
        std::ofstream out(fs::path(opt.out_dir) / "knn_report.tsv");
        out << first.str();
    }
    if (opt.repeats > 1 && !identical) {
        throw NumericError("knn: repeated runs disagreed; determinism contract violated");
    }
    return 0;
}

} // namespace cli
