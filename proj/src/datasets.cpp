#include "callo/datasets.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "callo/error.hpp"
#include "callo/image_io.hpp"
#include "callo/rng.hpp"

namespace callo {

void LabeledDataset::add(Sample s) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= class_names_.size()) {
        throw DataError("dataset: sample '" + s.id + "' has class index " +
                        std::to_string(s.label) + " outside the class table");
    }
    samples_.push_back(std::move(s));
}

const TensorF& LabeledDataset::features(std::size_t i) const {
    const Sample& s = samples_[i];
    if (!s.features.empty()) return s.features;
    std::lock_guard<std::mutex> lock(load_mu_);
    Sample& mut = const_cast<Sample&>(s);
    if (mut.features.empty()) {
        mut.features = read_image(mut.path).cast<float>();
    }
    return mut.features;
}

std::vector<std::size_t> LabeledDataset::sample_shape() const {
    if (samples_.empty()) throw DataError("dataset: empty, no sample shape");
    return features(0).shape();
}

std::vector<std::size_t> LabeledDataset::class_histogram() const {
    std::vector<std::size_t> counts(class_names_.size(), 0);
    for (const Sample& s : samples_) counts[static_cast<std::size_t>(s.label)]++;
    return counts;
}

namespace {

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError("idx: truncated header in " + path);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

} // namespace

LabeledDataset load_mnist(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw DataError("idx: cannot open " + images_path);
    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw DataError("idx: cannot open " + labels_path);

    const std::uint32_t img_magic = read_be_u32(imgs, images_path);
    if (img_magic != 2051) {
        throw DataError("idx: bad image magic " + std::to_string(img_magic) + " in " +
                        images_path + " (want 2051)");
    }
    const std::uint32_t n_images = read_be_u32(imgs, images_path);
    const std::uint32_t rows = read_be_u32(imgs, images_path);
    const std::uint32_t cols = read_be_u32(imgs, images_path);
    if (rows != 28 || cols != 28) {
        throw DataError("idx: expected 28x28 images in " + images_path + ", got " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    }

    const std::uint32_t lab_magic = read_be_u32(labs, labels_path);
    if (lab_magic != 2049) {
        throw DataError("idx: bad label magic " + std::to_string(lab_magic) + " in " +
                        labels_path + " (want 2049)");
    }
    const std::uint32_t n_labels = read_be_u32(labs, labels_path);
    if (n_images != n_labels) {
        throw DataError("idx: " + std::to_string(n_images) + " images vs " +
                        std::to_string(n_labels) + " labels");
    }

    std::vector<std::string> classes;
    for (int d = 0; d < 10; ++d) classes.push_back(std::to_string(d));
    LabeledDataset ds(std::move(classes), "mnist:" + images_path);

    std::vector<std::uint8_t> pixel_buf(784);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        imgs.read(reinterpret_cast<char*>(pixel_buf.data()), 784);
        if (!imgs) throw DataError("idx: truncated image data in " + images_path);
        char lab;
        labs.read(&lab, 1);
        if (!labs) throw DataError("idx: truncated label data in " + labels_path);
        const int label = static_cast<unsigned char>(lab);
        if (label > 9) {
            throw DataError("idx: label " + std::to_string(label) + " out of range in " +
                            labels_path);
        }
        Sample s;
        s.id = "mnist-" + std::to_string(i);
        s.label = label;
        s.features = TensorF({28, 28, 1});
        for (std::size_t p = 0; p < 784; ++p) {
            s.features[p] = static_cast<float>(pixel_buf[p]) / 255.0f;
        }
        ds.add(std::move(s));
    }
    return ds;
}

LabeledDataset load_manifest(const std::string& csv_path, const std::string& image_root) {
    std::ifstream in(csv_path);
    if (!in) throw DataError("manifest: cannot open " + csv_path);

    struct Row {
        std::string file, label;
        std::size_t line;
    };
    std::vector<Row> rows;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1 && line == "filename,label") continue; // optional header
        const auto comma = line.find(',');
        if (comma == std::string::npos || comma == 0 || comma + 1 >= line.size()) {
            throw DataError("manifest: malformed row at line " + std::to_string(line_no) +
                            " in " + csv_path + ": '" + line + "'");
        }
        Row r{line.substr(0, comma), line.substr(comma + 1), line_no};
        if (!seen.insert(r.file).second) {
            throw DataError("manifest: duplicate filename '" + r.file + "' at line " +
                            std::to_string(line_no) + " in " + csv_path);
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw DataError("manifest: no rows in " + csv_path);

    std::set<std::string> label_set;
    for (const Row& r : rows) label_set.insert(r.label);
    std::vector<std::string> classes(label_set.begin(), label_set.end());
    std::map<std::string, int> class_index;
    for (std::size_t i = 0; i < classes.size(); ++i) class_index[classes[i]] = static_cast<int>(i);

    LabeledDataset ds(std::move(classes), "manifest:" + csv_path);
    for (const Row& r : rows) {
        const std::filesystem::path p = std::filesystem::path(image_root) / r.file;
        if (!std::filesystem::exists(p)) {
            throw DataError("manifest: line " + std::to_string(r.line) + " references missing "
                            "file " + p.string());
        }
        Sample s;
        s.id = r.file;
        s.label = class_index[r.label];
        s.path = p.string();
        ds.add(std::move(s));
    }
    return ds;
}

LabeledDataset alpha_filter(const LabeledDataset& ds, std::size_t min_count,
                            FilterReport* report) {
    const std::vector<std::size_t> counts = ds.class_histogram();
    std::vector<int> remap(counts.size(), -1);
    std::vector<std::string> kept_names;
    FilterReport rep;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] >= min_count) {
            remap[c] = static_cast<int>(kept_names.size());
            kept_names.push_back(ds.class_names()[c]);
            rep.kept_classes.push_back(ds.class_names()[c]);
            rep.kept_counts.push_back(counts[c]);
        } else {
            rep.dropped_classes++;
            rep.dropped_samples += counts[c];
        }
    }
    if (kept_names.empty()) {
        throw DataError("alpha_filter: no class has " + std::to_string(min_count) +
                        " or more samples");
    }
    LabeledDataset out(std::move(kept_names), ds.provenance() + " | alpha_filter(min=" +
                                                  std::to_string(min_count) + ")");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Sample& s = ds.sample(i);
        if (remap[static_cast<std::size_t>(s.label)] < 0) continue;
        Sample copy = s;
        copy.label = remap[static_cast<std::size_t>(s.label)];
        out.add(std::move(copy));
    }
    if (report) *report = rep;
    return out;
}

LabeledDataset centered_dataset(const LabeledDataset& ds) {
    if (ds.empty()) throw DataError("centered_dataset: empty dataset");
    const std::size_t d = ds.features(0).size();
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const TensorF& f = ds.features(i);
        if (f.size() != d) {
            throw DimensionError("centered_dataset: sample " + ds.id(i) +
                                 " has inconsistent dimensions");
        }
        for (std::size_t j = 0; j < d; ++j) mean[j] += static_cast<double>(f[j]);
    }
    for (double& m : mean) m /= static_cast<double>(ds.size());

    LabeledDataset out(ds.class_names(), ds.provenance() + " | centered");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        Sample s;
        s.id = ds.id(i);
        s.label = ds.label(i);
        const TensorF& f = ds.features(i);
        s.features = TensorF(f.shape());
        for (std::size_t j = 0; j < d; ++j) {
            s.features[j] = f[j] - static_cast<float>(mean[j]);
        }
        out.add(std::move(s));
    }
    return out;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw ConfigError("split: train_fraction must be in (0,1)");
    }
    if (ds.size() < 2) throw DataError("split: need at least two samples");

    std::vector<bool> in_train(ds.size(), false);
    Rng rng(spec.seed);

    if (spec.stratified) {
        std::vector<std::vector<std::size_t>> by_class(ds.class_count());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);
        }
        std::vector<std::string> singletons;
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            if (by_class[c].size() == 1) singletons.push_back(ds.class_names()[c]);
        }
        if (!singletons.empty()) {
            std::string list;
            for (const auto& s : singletons) list += (list.empty() ? "" : ", ") + s;
            throw DataError("split: stratified needs >= 2 samples per class; offending "
                            "classes: " + list);
        }
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            auto& idx = by_class[c];
            if (idx.empty()) continue;
            rng.shuffle(idx);
            const double target = spec.train_fraction * static_cast<double>(idx.size());
            std::size_t n_train = static_cast<std::size_t>(target + 0.5);
            n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
            for (std::size_t j = 0; j < n_train; ++j) in_train[idx[j]] = true;
        }
    } else {
        std::vector<std::size_t> idx = identity_permutation(ds.size());
        rng.shuffle(idx);
        const double target = spec.train_fraction * static_cast<double>(idx.size());
        std::size_t n_train = static_cast<std::size_t>(target + 0.5);
        n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
        for (std::size_t j = 0; j < n_train; ++j) in_train[idx[j]] = true;
    }

    LabeledDataset train(ds.class_names(), ds.provenance() + " | split(train)");
    LabeledDataset val(ds.class_names(), ds.provenance() + " | split(val)");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        Sample copy = ds.sample(i);
        (in_train[i] ? train : val).add(std::move(copy));
    }
    return {std::move(train), std::move(val)};
}

} // namespace callo
