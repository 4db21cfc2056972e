#include "callo/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "callo/error.hpp"
#include "callo/linalg.hpp"
#include "callo/parallel.hpp"

namespace callo {

const char* metric_name(Metric m) {
    switch (m) {
        case Metric::euclidean: return "euclidean";
        case Metric::chebyshev: return "chebyshev";
        case Metric::minkowski: return "minkowski";
    }
    return "?";
}

Metric parse_metric(const std::string& name) {
    if (name == "euclidean") return Metric::euclidean;
    if (name == "chebyshev") return Metric::chebyshev;
    if (name == "minkowski") return Metric::minkowski;
    throw ConfigError("unknown metric '" + name + "'");
}

Tensor unroll(const Tensor& image) {
    if (image.rank() != 2) {
        throw DimensionError("unroll: expected [h,w] grayscale, got " + image.shape_str());
    }
    return image.reshaped({image.size()});
}

Tensor rgb_to_gray(const Tensor& img) {
    if (img.rank() != 3 || img.extent(2) != 3) {
        throw DimensionError("rgb_to_gray: expected [h,w,3], got " + img.shape_str());
    }
    Tensor out({img.extent(0), img.extent(1)});
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double* px = img.data() + i * 3;
        out[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    }
    return out;
}

namespace {

double distance_raw(const double* a, const double* b, std::size_t d, Metric metric,
                    double p) {
    switch (metric) {
        case Metric::euclidean: {
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double diff = a[i] - b[i];
                acc += diff * diff;
            }
            return std::sqrt(acc);
        }
        case Metric::chebyshev: {
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) acc = std::max(acc, std::abs(a[i] - b[i]));
            return acc;
        }
        case Metric::minkowski: {
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) acc += std::pow(std::abs(a[i] - b[i]), p);
            return std::pow(acc, 1.0 / p);
        }
    }
    return 0.0;
}

} // namespace

double distance(const Tensor& a, const Tensor& b, Metric metric, double p) {
    if (a.rank() != 1 || b.rank() != 1 || a.size() != b.size()) {
        throw DimensionError("distance: length mismatch " + a.shape_str() + " vs " +
                             b.shape_str());
    }
    if (metric == Metric::minkowski && p < 1.0) {
        throw ConfigError("distance: minkowski p must be >= 1, got " + std::to_string(p));
    }
    return distance_raw(a.data(), b.data(), a.size(), metric, p);
}

KnnModel KnnModel::fit(Tensor data, std::vector<int> labels, std::size_t k, Metric metric,
                       double p) {
    if (data.rank() != 2) {
        throw DimensionError("knn: training data must be [n,d], got " + data.shape_str());
    }
    if (data.extent(0) != labels.size()) {
        throw DimensionError("knn: " + std::to_string(data.extent(0)) + " rows vs " +
                             std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) throw DataError("knn: empty training set");
    if (k < 1 || k > labels.size()) {
        throw ConfigError("knn: k must be in [1," + std::to_string(labels.size()) +
                          "], got " + std::to_string(k));
    }
    if (metric == Metric::minkowski && p < 1.0) {
        throw ConfigError("knn: minkowski p must be >= 1, got " + std::to_string(p));
    }
    for (int l : labels) {
        if (l < 0) throw DataError("knn: negative label");
    }
    KnnModel m;
    m.data_ = std::move(data);
    m.labels_ = std::move(labels);
    m.k_ = k;
    m.metric_ = metric;
    m.p_ = p;
    return m;
}

KnnResult KnnModel::classify(const Tensor& query) const {
    if (labels_.empty()) throw StateError("knn: model not fitted");
    if (query.rank() != 1 || query.size() != dim()) {
        throw DimensionError("knn: query length " + query.shape_str() +
                             " does not match model dimension " + std::to_string(dim()));
    }
    const std::size_t n = labels_.size(), d = dim();
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        dist[i] = {distance_raw(query.data(), data_.data() + i * d, d, metric_, p_), i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_),
                      dist.end());

    KnnResult res;
    std::map<int, std::pair<std::size_t, double>> votes; // label -> (count, summed dist)
    for (std::size_t j = 0; j < k_; ++j) {
        const auto& [dval, idx] = dist[j];
        res.neighbors.push_back({idx, dval, labels_[idx]});
        auto& v = votes[labels_[idx]];
        v.first++;
        v.second += dval;
    }
    std::size_t best_count = 0;
    double best_sum = 0.0;
    int best_label = -1;
    for (const auto& [label, v] : votes) {
        // majority, then smallest summed distance, then smallest class id
        // (map iteration is ascending by label, so '>'/'<' keep the first)
        const bool better = v.first > best_count ||
                            (v.first == best_count && v.second < best_sum);
        if (best_label < 0 || better) {
            best_count = v.first;
            best_sum = v.second;
            best_label = label;
        }
    }
    res.label = best_label;
    return res;
}

std::vector<int> KnnModel::classify_batch(const Tensor& queries) const {
    if (queries.rank() != 2 || queries.extent(1) != dim()) {
        throw DimensionError("knn: queries must be [m," + std::to_string(dim()) + "], got " +
                             queries.shape_str());
    }
    const std::size_t m = queries.extent(0);
    std::vector<int> out(m, -1);
    parallel_for(m, [&](std::size_t q0, std::size_t q1) {
        for (std::size_t q = q0; q < q1; ++q) {
            Tensor row = Tensor::from_data(
                {dim()}, std::vector<double>(queries.data() + q * dim(),
                                             queries.data() + (q + 1) * dim()));
            out[q] = classify(row).label;
        }
    });
    return out;
}

// ---------------------------------------------------------------------------

namespace {

Tensor centered(const Tensor& data, Tensor& mean_out) {
    const std::size_t n = data.extent(0), d = data.extent(1);
    mean_out = Tensor({d}, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) mean_out[j] += data(i, j);
    }
    for (std::size_t j = 0; j < d; ++j) mean_out[j] /= static_cast<double>(n);
    Tensor xc = data;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) xc(i, j) -= mean_out[j];
    }
    return xc;
}

PcaModel pca_fit_impl(const Tensor& data, std::size_t r, double fraction) {
    if (data.rank() != 2) {
        throw DimensionError("pca: data must be [n,d], got " + data.shape_str());
    }
    const std::size_t n = data.extent(0), d = data.extent(1);
    if (n < 2) throw DataError("pca: need at least two samples");
    const std::size_t r_max = std::min(n - 1, d);
    if (r != 0 && (r < 1 || r > r_max)) {
        throw ConfigError("pca: r must be in [1," + std::to_string(r_max) + "], got " +
                          std::to_string(r));
    }

    PcaModel model;
    Tensor xc = centered(data, model.mean);

    EigenResult eig;
    bool dual = d > n;
    if (dual) {
        // Gram trick: eigenvectors of X X^T / (n-1) map to covariance
        // eigenvectors through X^T u / sqrt((n-1) lambda).
        Tensor gram = matmul_bt(xc, xc);
        for (std::size_t i = 0; i < gram.size(); ++i) gram[i] /= static_cast<double>(n - 1);
        eig = jacobi_eigen(gram);
    } else {
        Tensor cov = matmul_at(xc, xc);
        for (std::size_t i = 0; i < cov.size(); ++i) cov[i] /= static_cast<double>(n - 1);
        eig = jacobi_eigen(cov);
    }

    double total = 0.0;
    for (std::size_t i = 0; i < eig.values.size(); ++i) {
        total += std::max(0.0, eig.values[i]);
    }
    if (total <= 1e-12) throw DegenerateDataError("pca: data has zero variance");

    if (r == 0) {
        if (!(fraction > 0.0 && fraction <= 1.0)) {
            throw ConfigError("pca: variance fraction must be in (0,1]");
        }
        double cum = 0.0;
        r = r_max;
        for (std::size_t i = 0; i < r_max; ++i) {
            cum += std::max(0.0, eig.values[i]);
            if (cum / total >= fraction) {
                r = i + 1;
                break;
            }
        }
    }

    model.components = Tensor({d, r});
    model.explained_variance = Tensor({r});
    for (std::size_t j = 0; j < r; ++j) {
        const double lambda = std::max(0.0, eig.values[j]);
        model.explained_variance[j] = lambda;
        if (dual) {
            // v = X^T u / sqrt((n-1) lambda)
            if (lambda <= 1e-14) {
                throw DegenerateDataError("pca: requested component " + std::to_string(j) +
                                          " has (near) zero variance");
            }
            const double scale = 1.0 / std::sqrt(lambda * static_cast<double>(n - 1));
            for (std::size_t i = 0; i < d; ++i) {
                double acc = 0.0;
                for (std::size_t s = 0; s < n; ++s) acc += xc(s, i) * eig.vectors(s, j);
                model.components(i, j) = acc * scale;
            }
        } else {
            for (std::size_t i = 0; i < d; ++i) model.components(i, j) = eig.vectors(i, j);
        }
    }
    return model;
}

} // namespace

PcaModel pca_fit(const Tensor& data, std::size_t r) {
    if (r == 0) throw ConfigError("pca: r must be >= 1");
    return pca_fit_impl(data, r, 0.0);
}

PcaModel pca_fit_fraction(const Tensor& data, double fraction) {
    return pca_fit_impl(data, 0, fraction);
}

Tensor pca_transform(const PcaModel& model, const Tensor& x) {
    if (x.rank() != 1 || x.size() != model.mean.size()) {
        throw DimensionError("pca_transform: input length " + x.shape_str() +
                             " does not match model dimension " +
                             std::to_string(model.mean.size()));
    }
    const std::size_t d = model.mean.size(), r = model.components.extent(1);
    Tensor out({r}, 0.0);
    for (std::size_t j = 0; j < r; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            acc += model.components(i, j) * (x[i] - model.mean[i]);
        }
        out[j] = acc;
    }
    return out;
}

Tensor pca_transform_batch(const PcaModel& model, const Tensor& xs) {
    if (xs.rank() != 2 || xs.extent(1) != model.mean.size()) {
        throw DimensionError("pca_transform: batch " + xs.shape_str() +
                             " does not match model dimension " +
                             std::to_string(model.mean.size()));
    }
    Tensor xc = xs;
    const std::size_t n = xs.extent(0), d = model.mean.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) xc(i, j) -= model.mean[j];
    }
    return matmul(xc, model.components);
}

// ---------------------------------------------------------------------------

LdaModel lda_fit(const Tensor& data, const std::vector<int>& labels, std::size_t out_dim,
                 std::size_t n_classes) {
    if (data.rank() != 2) {
        throw DimensionError("lda: data must be [n,r], got " + data.shape_str());
    }
    const std::size_t n = data.extent(0), r = data.extent(1);
    if (labels.size() != n) throw DimensionError("lda: label count mismatch");
    if (n_classes < 2) throw ConfigError("lda: need at least two classes");
    if (out_dim < 1 || out_dim > n_classes - 1) {
        throw ConfigError("lda: out_dim must be in [1," + std::to_string(n_classes - 1) +
                          "], got " + std::to_string(out_dim));
    }

    std::vector<std::size_t> counts(n_classes, 0);
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= n_classes) {
            throw DataError("lda: label " + std::to_string(l) + " out of range");
        }
        counts[static_cast<std::size_t>(l)]++;
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (counts[c] < 2) {
            throw DegenerateDataError("lda: class " + std::to_string(c) +
                                      " has fewer than two samples");
        }
    }

    Tensor class_mean({n_classes, r}, 0.0);
    Tensor grand({r}, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            class_mean(static_cast<std::size_t>(labels[i]), j) += data(i, j);
            grand[j] += data(i, j);
        }
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t j = 0; j < r; ++j) class_mean(c, j) /= static_cast<double>(counts[c]);
    }
    for (std::size_t j = 0; j < r; ++j) grand[j] /= static_cast<double>(n);

    Tensor sw({r, r}, 0.0), sb({r, r}, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = static_cast<std::size_t>(labels[i]);
        for (std::size_t a = 0; a < r; ++a) {
            const double da = data(i, a) - class_mean(c, a);
            for (std::size_t b = 0; b < r; ++b) {
                sw(a, b) += da * (data(i, b) - class_mean(c, b));
            }
        }
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t a = 0; a < r; ++a) {
            const double da = class_mean(c, a) - grand[a];
            for (std::size_t b = 0; b < r; ++b) {
                sb(a, b) += static_cast<double>(counts[c]) * da * (class_mean(c, b) - grand[b]);
            }
        }
    }

    // ridge: Sw + gamma I with gamma = 1e-6 trace(Sw)/r
    double trace = 0.0;
    for (std::size_t i = 0; i < r; ++i) trace += sw(i, i);
    const double gamma = 1e-6 * trace / static_cast<double>(r);
    for (std::size_t i = 0; i < r; ++i) sw(i, i) += gamma;

    // symmetric whitening W = U L^-1/2 U^T, then eigenvectors of W Sb W
    EigenResult swe = jacobi_eigen(sw);
    for (std::size_t i = 0; i < r; ++i) {
        if (swe.values[i] <= 0.0) {
            throw DegenerateDataError(
                "lda: within-class scatter is singular even after regularization; reduce "
                "the PCA dimension further");
        }
    }
    Tensor w({r, r}, 0.0);
    for (std::size_t a = 0; a < r; ++a) {
        for (std::size_t b = 0; b < r; ++b) {
            double acc = 0.0;
            for (std::size_t k = 0; k < r; ++k) {
                acc += swe.vectors(a, k) * swe.vectors(b, k) / std::sqrt(swe.values[k]);
            }
            w(a, b) = acc;
        }
    }

    Tensor m = matmul(matmul(w, sb), w);
    // symmetrize against rounding
    for (std::size_t a = 0; a < r; ++a) {
        for (std::size_t b = a + 1; b < r; ++b) {
            const double avg = 0.5 * (m(a, b) + m(b, a));
            m(a, b) = m(b, a) = avg;
        }
    }
    EigenResult me = jacobi_eigen(m);

    LdaModel model;
    model.projection = Tensor({r, out_dim});
    for (std::size_t j = 0; j < out_dim; ++j) {
        for (std::size_t a = 0; a < r; ++a) {
            double acc = 0.0;
            for (std::size_t k = 0; k < r; ++k) acc += w(a, k) * me.vectors(k, j);
            model.projection(a, j) = acc;
        }
    }
    model.class_means = matmul(class_mean, model.projection);
    return model;
}

Tensor lda_transform(const LdaModel& model, const Tensor& x) {
    if (x.rank() != 1 || x.size() != model.projection.extent(0)) {
        throw DimensionError("lda_transform: input length " + x.shape_str() +
                             " does not match projection " + model.projection.shape_str());
    }
    const std::size_t r = model.projection.extent(0), o = model.projection.extent(1);
    Tensor out({o}, 0.0);
    for (std::size_t j = 0; j < o; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < r; ++i) acc += model.projection(i, j) * x[i];
        out[j] = acc;
    }
    return out;
}

Tensor lda_transform_batch(const LdaModel& model, const Tensor& xs) {
    if (xs.rank() != 2 || xs.extent(1) != model.projection.extent(0)) {
        throw DimensionError("lda_transform: batch " + xs.shape_str() +
                             " does not match projection " + model.projection.shape_str());
    }
    return matmul(xs, model.projection);
}

// ---------------------------------------------------------------------------

Tensor feature_matrix(const LabeledDataset& ds) {
    if (ds.empty()) throw DataError("feature_matrix: empty dataset");
    const std::vector<std::size_t> shape = ds.sample_shape();
    auto to_row = [&](std::size_t i) -> Tensor {
        Tensor f = ds.features(i).cast<double>();
        if (f.rank() == 3 && f.extent(2) == 3) f = unroll(rgb_to_gray(f));
        else if (f.rank() == 3 && f.extent(2) == 1) f = std::move(f).reshaped({f.size()});
        else if (f.rank() == 2) f = unroll(f);
        else if (f.rank() != 1) {
            throw DimensionError("feature_matrix: unsupported sample shape " + f.shape_str());
        }
        return f;
    };
    const Tensor first = to_row(0);
    const std::size_t d = first.size();
    Tensor out({ds.size(), d});
    for (std::size_t i = 0; i < ds.size(); ++i) {
        Tensor row = to_row(i);
        if (row.size() != d) {
            throw DimensionError("feature_matrix: sample " + ds.id(i) +
                                 " has inconsistent dimensions");
        }
        for (std::size_t j = 0; j < d; ++j) out(i, j) = row[j];
    }
    (void)shape;
    return out;
}

namespace {

const char* variant_name(PipelineVariant v) {
    switch (v) {
        case PipelineVariant::raw: return "RAW";
        case PipelineVariant::pca: return "PCA";
        case PipelineVariant::pca_lda: return "PCA+LDA";
        case PipelineVariant::pca_lda_chebyshev: return "PCA+LDA-Chebyshev";
    }
    return "?";
}

double accuracy_of(const std::vector<int>& predicted, const LabeledDataset& val) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == val.label(i)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

} // namespace

void PipelineReport::write_tsv(std::ostream& os) const {
    os << "k";
    for (const auto& v : variant_names) os << "\t" << v;
    os << "\n";
    for (std::size_t i = 0; i < ks.size(); ++i) {
        os << ks[i];
        for (std::size_t j = 0; j < variant_names.size(); ++j) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4f", accuracy[i][j]);
            os << "\t" << buf;
        }
        os << "\n";
    }
}

PipelineReport baseline_pipeline(const LabeledDataset& train, const LabeledDataset& val,
                                 const PipelineConfig& cfg) {
    if (train.empty() || val.empty()) throw DataError("pipeline: empty split");
    const auto train_hist = train.class_histogram();
    const auto val_hist = val.class_histogram();
    for (std::size_t c = 0; c < val_hist.size(); ++c) {
        if (val_hist[c] > 0 && (c >= train_hist.size() || train_hist[c] == 0)) {
            throw DataError("pipeline: class '" + val.class_names()[c] +
                            "' present in validation but absent from training");
        }
    }
    for (std::size_t k : cfg.ks) {
        if (k < 1 || k > train.size()) {
            throw ConfigError("pipeline: k=" + std::to_string(k) + " out of range");
        }
    }

    const Tensor train_x = feature_matrix(train);
    const Tensor val_x = feature_matrix(val);
    std::vector<int> train_y, val_y;
    for (std::size_t i = 0; i < train.size(); ++i) train_y.push_back(train.label(i));
    for (std::size_t i = 0; i < val.size(); ++i) val_y.push_back(val.label(i));

    const bool needs_pca = std::any_of(cfg.variants.begin(), cfg.variants.end(),
                                       [](PipelineVariant v) { return v != PipelineVariant::raw; });
    PcaModel pca;
    Tensor train_pca, val_pca;
    if (needs_pca) {
        pca = cfg.pca_dim > 0 ? pca_fit(train_x, cfg.pca_dim)
                              : pca_fit_fraction(train_x, cfg.pca_fraction);
        train_pca = pca_transform_batch(pca, train_x);
        val_pca = pca_transform_batch(pca, val_x);
    }

    const bool needs_lda =
        std::any_of(cfg.variants.begin(), cfg.variants.end(), [](PipelineVariant v) {
            return v == PipelineVariant::pca_lda || v == PipelineVariant::pca_lda_chebyshev;
        });
    LdaModel lda;
    Tensor train_lda, val_lda;
    std::size_t lda_dim = 0;
    if (needs_lda) {
        const std::size_t classes = train.class_count();
        lda_dim = cfg.lda_dim > 0 ? cfg.lda_dim
                                  : std::min(classes - 1, train_pca.extent(1));
        lda = lda_fit(train_pca, train_y, lda_dim, classes);
        train_lda = lda_transform_batch(lda, train_pca);
        val_lda = lda_transform_batch(lda, val_pca);
    }

    PipelineReport report;
    report.ks = cfg.ks;
    report.pca_dim_used = needs_pca ? pca.components.extent(1) : 0;
    report.lda_dim_used = lda_dim;
    for (PipelineVariant v : cfg.variants) report.variant_names.push_back(variant_name(v));

    for (std::size_t k : cfg.ks) {
        std::vector<double> row;
        for (PipelineVariant v : cfg.variants) {
            const Tensor* tx = nullptr;
            const Tensor* vx = nullptr;
            Metric metric = Metric::euclidean;
            switch (v) {
                case PipelineVariant::raw:
                    tx = &train_x;
                    vx = &val_x;
                    metric = cfg.raw_metric;
                    break;
                case PipelineVariant::pca:
                    tx = &train_pca;
                    vx = &val_pca;
                    break;
                case PipelineVariant::pca_lda:
                    tx = &train_lda;
                    vx = &val_lda;
                    break;
                case PipelineVariant::pca_lda_chebyshev:
                    tx = &train_lda;
                    vx = &val_lda;
                    metric = Metric::chebyshev;
                    break;
            }
            KnnModel model = KnnModel::fit(*tx, train_y, k, metric, cfg.minkowski_p);
            row.push_back(accuracy_of(model.classify_batch(*vx), val));
        }
        report.accuracy.push_back(std::move(row));
    }
    return report;
}

} // namespace callo
