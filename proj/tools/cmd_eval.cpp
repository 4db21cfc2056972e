#include <cstdio>
#include <filesystem>
#include <fstream>

#include "callo/train.hpp"
#include "common.hpp"

namespace cli {

using namespace callo;
namespace fs = std::filesystem;

int run_eval(const EvalOptions& opt) {
    if (opt.checkpoint.empty()) throw ConfigError("eval: --checkpoint is required");
    NetworkSpec spec = resolve_network(opt.net);
    Network net(spec, 1);
    load_checkpoint(opt.checkpoint, net);

    LabeledDataset ds = load_data(opt.data);
    if (opt.limit > 0) ds = stratified_subsample(ds, opt.limit, 42);

    const std::size_t classes = spec.class_count();
    std::vector<std::vector<std::size_t>> confusion(classes,
                                                    std::vector<std::size_t>(classes, 0));
    std::size_t correct = 0;
    const std::size_t batch_size = 100;
    for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
        const std::size_t end = std::min(ds.size(), begin + batch_size);
        std::vector<std::size_t> idx;
        for (std::size_t i = begin; i < end; ++i) idx.push_back(i);
        Tensor batch = make_batch<double>(ds, idx);
        Tensor logits = net.forward(batch, Mode::infer);
        const std::size_t k = logits.extent(1);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const double* row = logits.data() + r * k;
            std::size_t best = 0;
            for (std::size_t j = 1; j < k; ++j) {
                if (row[j] > row[best]) best = j;
            }
            const std::size_t truth = static_cast<std::size_t>(ds.label(idx[r]));
            confusion[truth][best]++;
            if (best == truth) ++correct;
        }
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
    std::printf("eval: accuracy %.4f (%zu/%zu)\n", accuracy, correct, ds.size());

    if (!opt.out_dir.empty()) {
        fs::create_directories(opt.out_dir);
        write_run_manifest(opt.out_dir, "eval",
                           {{"data", data_options_json(opt.data)},
                            {"net", opt.net},
                            {"checkpoint", opt.checkpoint},
                            {"limit", opt.limit}});
        std::ofstream out(fs::path(opt.out_dir) / "confusion.tsv");
        out << "truth\\predicted";
        for (std::size_t j = 0; j < classes; ++j) out << "\t" << ds.class_names()[j];
        out << "\n";
        for (std::size_t i = 0; i < classes; ++i) {
            out << ds.class_names()[i];
            for (std::size_t j = 0; j < classes; ++j) out << "\t" << confusion[i][j];
            out << "\n";
        }
        std::ofstream acc(fs::path(opt.out_dir) / "accuracy.txt");
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f\n", accuracy);
        acc << buf;
    }
    return 0;
}

} // namespace cli
