#ifndef CALLO_TOOLS_COMMON_HPP
#define CALLO_TOOLS_COMMON_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "callo/datasets.hpp"
#include "callo/nn/spec.hpp"

namespace cli {

// Shared dataset selection: either an MNIST IDX directory or a CSV manifest.
struct DataOptions {
    std::string mnist_dir;
    std::string manifest;
    std::string image_root = ".";
    std::string split = "train"; // which IDX pair to load
    std::size_t alpha_min = 0;   // 0 = no filter
    bool center_mean = false;    // subtract the per-dataset feature mean
};

void add_data_options(CLI::App* cmd, DataOptions& opts);
callo::LabeledDataset load_data(const DataOptions& opts);
nlohmann::json data_options_json(const DataOptions& opts);

// Resolves a preset name or a config-file path.
callo::NetworkSpec resolve_network(const std::string& net);

// Every run records its resolved configuration alongside its outputs.
void write_run_manifest(const std::string& out_dir, const std::string& command,
                        const nlohmann::json& resolved);

// Stratified subsample of ~total samples, deterministic in the seed.
callo::LabeledDataset stratified_subsample(const callo::LabeledDataset& ds,
                                           std::size_t total, std::uint64_t seed);

// ---------------------------------------------------------------------------

struct PreprocessOptions {
    std::string in_dir;
    std::string out_dir;
    std::size_t out_size = 256;
    bool flip180 = false;
    bool strict = false;
};

struct TrainOptions {
    DataOptions data;
    std::string net = "mnist";
    std::string out_dir;
    std::size_t steps = 1000;
    std::size_t batch = 50;
    double lr = 1e-4;
    double decay_rate = 0.95;
    std::size_t decay_steps = 1000;
    std::string optimizer = "adam";
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
    double weight_decay = 0.0;
    std::uint64_t seed = 42;
    std::string precision = "f64";
    double val_fraction = 0.0; // carve a stratified validation split when > 0
    bool eval_on_test = false; // MNIST: track the t10k pair during training
    std::size_t eval_every = 500;
    std::size_t eval_subset = 1000;
    std::size_t checkpoint_every = 0;
    std::size_t train_limit = 0; // stratified subsample caps (0 = all)
};

struct EvalOptions {
    DataOptions data;
    std::string net = "mnist";
    std::string checkpoint;
    std::string out_dir;
    std::size_t limit = 0;
};

struct KnnOptions {
    DataOptions data;
    std::vector<std::size_t> ks = {1, 3, 5};
    std::string variants = "all"; // or comma list: raw,pca,pca_lda,pca_lda_chebyshev
    std::string metric = "euclidean";
    double p = 2.0;
    std::size_t pca_dim = 0;
    double pca_fraction = 0.95;
    std::size_t lda_dim = 0;
    double val_fraction = 0.2;
    std::size_t train_limit = 0;
    std::size_t test_limit = 0;
    std::size_t repeats = 1;
    std::uint64_t seed = 42;
    std::string out_dir;
};

struct SaliencyOptions {
    std::string checkpoint;
    std::string net = "mnist";
    std::string image;
    int target = -1; // -1 = predicted class
    std::size_t box = 0;    // 0 = scaled default (16 at 256)
    std::size_t stride = 0; // 0 = box/2
    bool occlude_mean = false;
    std::string out_dir;
};

struct ActivationsOptions {
    std::string checkpoint;
    std::string net = "mnist";
    std::string image;
    std::string out_dir;
};

struct ReportOptions {
    std::string history;
    std::string knn;
};

int run_preprocess(const PreprocessOptions& opt);
int run_train(const TrainOptions& opt);
int run_eval(const EvalOptions& opt);
int run_knn(const KnnOptions& opt);
int run_saliency(const SaliencyOptions& opt);
int run_activations(const ActivationsOptions& opt);
int run_report(const ReportOptions& opt);

// Loads an image file and adapts it to the network input shape (grayscale
// reduction and bilinear resize as needed).
callo::Tensor load_image_for_network(const std::string& path,
                                     const std::vector<std::size_t>& input_shape);

} // namespace cli

#endif // CALLO_TOOLS_COMMON_HPP
