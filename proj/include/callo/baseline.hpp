#ifndef CALLO_BASELINE_HPP
#define CALLO_BASELINE_HPP

#include <ostream>
#include <string>
#include <vector>

#include "callo/datasets.hpp"
#include "callo/tensor.hpp"

namespace callo {

enum class Metric { euclidean, chebyshev, minkowski };

const char* metric_name(Metric m);
Metric parse_metric(const std::string& name);

// Row-major flattening of a grayscale image; invertible via reshape.
Tensor unroll(const Tensor& image); // [h,w] -> [h*w]

// Luma conversion for color feature vectors.
Tensor rgb_to_gray(const Tensor& img); // [h,w,3] -> [h,w]

double distance(const Tensor& a, const Tensor& b, Metric metric, double p = 2.0);

struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;
    int label = -1;
};

struct KnnResult {
    int label = -1;
    std::vector<Neighbor> neighbors;
};

// Exact k-nearest-neighbor classifier. Votes among the k closest rows; ties
// break to the tied class with the smallest summed distance, then to the
// smallest class id, so repeated runs are identical.
class KnnModel {
public:
    static KnnModel fit(Tensor data, std::vector<int> labels, std::size_t k, Metric metric,
                        double p = 2.0);

    KnnResult classify(const Tensor& query) const;
    std::vector<int> classify_batch(const Tensor& queries) const; // [m,d], parallel

    std::size_t size() const { return labels_.size(); }
    std::size_t dim() const { return data_.extent(1); }
    std::size_t k() const { return k_; }

private:
    Tensor data_; // [n,d]
    std::vector<int> labels_;
    std::size_t k_ = 1;
    Metric metric_ = Metric::euclidean;
    double p_ = 2.0;
};

// ---------------------------------------------------------------------------

struct PcaModel {
    Tensor mean;               // [d]
    Tensor components;         // [d,r], columns orthonormal
    Tensor explained_variance; // [r], descending
};

// Principal components of the sample covariance; uses the Gram (dual) trick
// when d >> n. r must satisfy 1 <= r <= min(n-1, d).
PcaModel pca_fit(const Tensor& data, std::size_t r);

// Smallest r whose components explain at least `fraction` of the variance.
PcaModel pca_fit_fraction(const Tensor& data, double fraction);

Tensor pca_transform(const PcaModel& model, const Tensor& x);        // [d] -> [r]
Tensor pca_transform_batch(const PcaModel& model, const Tensor& xs); // [n,d] -> [n,r]

// ---------------------------------------------------------------------------

struct LdaModel {
    Tensor projection;  // [r, out_dim]
    Tensor class_means; // [classes, out_dim]
};

// Fisher discriminant directions: eigenvectors of Sw^-1 Sb via ridge
// regularization (gamma = 1e-6 trace(Sw)/r) and symmetric whitening. Inputs
// are expected to be PCA-reduced so Sw is well conditioned.
LdaModel lda_fit(const Tensor& data, const std::vector<int>& labels, std::size_t out_dim,
                 std::size_t n_classes);

Tensor lda_transform(const LdaModel& model, const Tensor& x);
Tensor lda_transform_batch(const LdaModel& model, const Tensor& xs);

// ---------------------------------------------------------------------------

enum class PipelineVariant { raw, pca, pca_lda, pca_lda_chebyshev };

struct PipelineConfig {
    std::vector<std::size_t> ks = {1, 3, 5};
    std::vector<PipelineVariant> variants = {PipelineVariant::raw, PipelineVariant::pca,
                                             PipelineVariant::pca_lda,
                                             PipelineVariant::pca_lda_chebyshev};
    std::size_t pca_dim = 0;    // 0 = choose by pca_fraction
    double pca_fraction = 0.95;
    std::size_t lda_dim = 0;    // 0 = classes-1 (capped by the PCA dimension)
    Metric raw_metric = Metric::euclidean;
    double minkowski_p = 2.0;
};

struct PipelineReport {
    std::vector<std::size_t> ks;
    std::vector<std::string> variant_names;
    std::vector<std::vector<double>> accuracy; // [k_index][variant_index]
    std::size_t pca_dim_used = 0;
    std::size_t lda_dim_used = 0;

    void write_tsv(std::ostream& os) const;
};

// Fits PCA/LDA on train only, classifies the validation set for every
// (k, variant) cell. Deterministic: identical inputs give identical reports.
PipelineReport baseline_pipeline(const LabeledDataset& train, const LabeledDataset& val,
                                 const PipelineConfig& cfg);

// Dataset rows as a flat feature matrix (grayscale images unrolled, color
// converted to luma first).
Tensor feature_matrix(const LabeledDataset& ds);

} // namespace callo

#endif // CALLO_BASELINE_HPP
