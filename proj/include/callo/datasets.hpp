#ifndef CALLO_DATASETS_HPP
#define CALLO_DATASETS_HPP

#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "callo/tensor.hpp"

namespace callo {

// One labeled sample. Features are either eager (MNIST) or loaded on first
// access from `path` (manifest datasets keep pixels on disk until needed).
struct Sample {
    std::string id;
    int label = -1;
    TensorF features;
    std::string path;
};

class LabeledDataset {
public:
    LabeledDataset() = default;
    LabeledDataset(std::vector<std::string> class_names, std::string provenance)
        : class_names_(std::move(class_names)), provenance_(std::move(provenance)) {}

    // movable and copyable; the lazy-load mutex is per-instance
    LabeledDataset(LabeledDataset&& o) noexcept
        : samples_(std::move(o.samples_)), class_names_(std::move(o.class_names_)),
          provenance_(std::move(o.provenance_)) {}
    LabeledDataset& operator=(LabeledDataset&& o) noexcept {
        samples_ = std::move(o.samples_);
        class_names_ = std::move(o.class_names_);
        provenance_ = std::move(o.provenance_);
        return *this;
    }
    LabeledDataset(const LabeledDataset& o)
        : samples_(o.samples_), class_names_(o.class_names_), provenance_(o.provenance_) {}
    LabeledDataset& operator=(const LabeledDataset& o) {
        samples_ = o.samples_;
        class_names_ = o.class_names_;
        provenance_ = o.provenance_;
        return *this;
    }

    void add(Sample s);

    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    std::size_t class_count() const { return class_names_.size(); }
    const std::vector<std::string>& class_names() const { return class_names_; }
    const std::string& provenance() const { return provenance_; }

    int label(std::size_t i) const { return samples_[i].label; }
    const std::string& id(std::size_t i) const { return samples_[i].id; }
    const Sample& sample(std::size_t i) const { return samples_[i]; }

    // Lazy-loading accessor; cached after the first read.
    const TensorF& features(std::size_t i) const;

    std::vector<std::size_t> sample_shape() const;
    std::vector<std::size_t> class_histogram() const;

private:
    std::vector<Sample> samples_;
    std::vector<std::string> class_names_;
    std::string provenance_;
    mutable std::mutex load_mu_;
};

// MNIST IDX pair: big-endian headers, image magic 2051, label magic 2049,
// 28x28 pixels scaled to [0,1]. Malformed input is rejected, never repaired.
LabeledDataset load_mnist(const std::string& images_path, const std::string& labels_path);

// CSV manifest `filename,label` (header optional, no quoting); image files
// are resolved against `image_root`, existence is checked eagerly and pixels
// are loaded lazily.
LabeledDataset load_manifest(const std::string& csv_path, const std::string& image_root);

struct FilterReport {
    std::vector<std::string> kept_classes;
    std::vector<std::size_t> kept_counts;
    std::size_t dropped_classes = 0;
    std::size_t dropped_samples = 0;
};

// Keeps classes with >= min_count samples and reindexes the survivors
// densely (original class order preserved).
LabeledDataset alpha_filter(const LabeledDataset& ds, std::size_t min_count,
                            FilterReport* report = nullptr);

// Opt-in input centering: subtracts the dataset's own per-feature mean
// (features load eagerly as a consequence). Inputs are otherwise [0,1].
LabeledDataset centered_dataset(const LabeledDataset& ds);

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 42;
    bool stratified = true;
};

// Seeded, reproducible, disjoint and exhaustive split. Stratified mode keeps
// per-class train fractions within one sample of the target and requires at
// least two samples per class.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                const SplitSpec& spec);

} // namespace callo

#endif // CALLO_DATASETS_HPP
