#include "common.hpp"

#include <filesystem>
#include <fstream>

#include "callo/baseline.hpp"
#include "callo/error.hpp"
#include "callo/image_io.hpp"
#include "callo/imaging.hpp"
#include "callo/rng.hpp"

namespace cli {

using namespace callo;
namespace fs = std::filesystem;

void add_data_options(CLI::App* cmd, DataOptions& opts) {
    cmd->add_option("--mnist", opts.mnist_dir,
                    "MNIST IDX directory (train-images-idx3-ubyte etc.)");
    cmd->add_option("--manifest", opts.manifest, "CSV manifest (filename,label)");
    cmd->add_option("--image-root", opts.image_root, "root directory for manifest images");
    cmd->add_option("--split", opts.split, "IDX pair to load: train|test")
        ->check(CLI::IsMember({"train", "test"}));
    cmd->add_option("--alpha-min", opts.alpha_min,
                    "keep only classes with at least this many samples (0 = off)");
    cmd->add_flag("--center-mean", opts.center_mean,
                  "subtract the dataset's own per-feature mean after loading");
}

LabeledDataset load_data(const DataOptions& opts) {
    LabeledDataset ds;
    if (!opts.mnist_dir.empty()) {
        const fs::path root(opts.mnist_dir);
        const bool test = opts.split == "test";
        const fs::path images = root / (test ? "t10k-images-idx3-ubyte" : "train-images-idx3-ubyte");
        const fs::path labels = root / (test ? "t10k-labels-idx1-ubyte" : "train-labels-idx1-ubyte");
        ds = load_mnist(images.string(), labels.string());
    } else if (!opts.manifest.empty()) {
        ds = load_manifest(opts.manifest, opts.image_root);
    } else {
        throw ConfigError("no dataset: pass --mnist DIR or --manifest CSV");
    }
    if (opts.alpha_min > 0) ds = alpha_filter(ds, opts.alpha_min);
    if (opts.center_mean) ds = centered_dataset(ds);
    return ds;
}

nlohmann::json data_options_json(const DataOptions& opts) {
    return {{"mnist", opts.mnist_dir},
            {"manifest", opts.manifest},
            {"image_root", opts.image_root},
            {"split", opts.split},
            {"alpha_min", opts.alpha_min},
            {"center_mean", opts.center_mean}};
}

NetworkSpec resolve_network(const std::string& net) {
    if (is_network_preset(net)) return network_preset(net);
    return load_network_spec(net);
}

void write_run_manifest(const std::string& out_dir, const std::string& command,
                        const nlohmann::json& resolved) {
    fs::create_directories(out_dir);
    nlohmann::json doc;
    doc["command"] = command;
    doc["config"] = resolved;
    std::ofstream out(fs::path(out_dir) / "run_manifest.json");
    if (!out) throw DataError("cannot write run manifest in " + out_dir);
    out << doc.dump(2) << "\n";
}

LabeledDataset stratified_subsample(const LabeledDataset& ds, std::size_t total,
                                    std::uint64_t seed) {
    if (total == 0 || total >= ds.size()) return ds;
    const double frac = static_cast<double>(total) / static_cast<double>(ds.size());
    std::vector<std::vector<std::size_t>> by_class(ds.class_count());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);
    }
    Rng rng(seed);
    std::vector<std::size_t> chosen;
    for (auto& idx : by_class) {
        if (idx.empty()) continue;
        rng.shuffle(idx);
        std::size_t take = static_cast<std::size_t>(
            frac * static_cast<double>(idx.size()) + 0.5);
        take = std::clamp<std::size_t>(take, 1, idx.size());
        for (std::size_t j = 0; j < take; ++j) chosen.push_back(idx[j]);
    }
    std::sort(chosen.begin(), chosen.end());
    LabeledDataset out(ds.class_names(), ds.provenance() + " | subsample(" +
                                             std::to_string(total) + ")");
    for (std::size_t i : chosen) out.add(ds.sample(i));
    return out;
}

Tensor load_image_for_network(const std::string& path,
                              const std::vector<std::size_t>& input_shape) {
    if (input_shape.size() != 3) {
        throw ConfigError("network input is not an image; cannot load " + path);
    }
    Tensor rgb = read_image(path); // [h,w,3]
    const std::size_t want_h = input_shape[0], want_w = input_shape[1],
                      want_c = input_shape[2];
    if (rgb.extent(0) != want_h || rgb.extent(1) != want_w) {
        rgb = resize_bilinear(rgb, want_h, want_w);
    }
    if (want_c == 3) return rgb;
    if (want_c == 1) {
        Tensor gray = rgb_to_gray(rgb);
        return std::move(gray).reshaped({want_h, want_w, 1});
    }
    throw ConfigError("unsupported network channel count " + std::to_string(want_c));
}

} // namespace cli
