#include "callo/interpret.hpp"

#include <algorithm>
#include <cmath>

#include "callo/error.hpp"
#include "callo/nn/losses.hpp"

namespace callo {

Tensor class_probabilities(Network& net, const Tensor& batch) {
    Tensor out = net.forward(batch, Mode::infer);
    const bool ends_in_softmax =
        !net.spec().layers.empty() && net.spec().layers.back().kind == LayerKind::softmax;
    if (ends_in_softmax) return out;
    return softmax(out);
}

SaliencyMap saliency(Network& net, const Tensor& image, int target_class, std::size_t box,
                     std::size_t stride, double occlusion_value) {
    const auto& in_shape = net.spec().input_shape;
    if (in_shape.size() != 3) {
        throw ConfigError("saliency: network input must be an image [h,w,c]");
    }
    if (image.shape() != in_shape) {
        throw DimensionError("saliency: image " + image.shape_str() +
                             " does not match network input " +
                             Tensor::shape_string(in_shape));
    }
    const std::size_t h = image.extent(0), w = image.extent(1), c = image.extent(2);
    if (box < 1 || box > h || box > w) {
        throw ConfigError("saliency: box must be in [1," + std::to_string(std::min(h, w)) +
                          "], got " + std::to_string(box));
    }
    if (stride < 1) throw ConfigError("saliency: stride must be >= 1");
    const std::size_t classes = net.spec().class_count();
    if (target_class < 0 || static_cast<std::size_t>(target_class) >= classes) {
        throw ConfigError("saliency: target class " + std::to_string(target_class) +
                          " out of range [0," + std::to_string(classes) + ")");
    }

    Tensor batch1 = image.reshaped({1, h, w, c});
    const Tensor p0 = class_probabilities(net, batch1);

    SaliencyMap map;
    map.box = box;
    map.stride = stride;
    map.target_class = target_class;
    map.baseline_probability = p0(0, static_cast<std::size_t>(target_class));

    const std::size_t grid_h = (h + stride - 1) / stride;
    const std::size_t grid_w = (w + stride - 1) / stride;
    map.heat = Tensor({grid_h, grid_w}, 0.0);

    // evaluate occlusions in batches; grid order is row-major regardless
    const std::size_t batch_cap = 32;
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    cells.reserve(grid_h * grid_w);
    for (std::size_t gy = 0; gy < grid_h; ++gy) {
        for (std::size_t gx = 0; gx < grid_w; ++gx) cells.push_back({gy, gx});
    }
    for (std::size_t begin = 0; begin < cells.size(); begin += batch_cap) {
        const std::size_t end = std::min(cells.size(), begin + batch_cap);
        const std::size_t n = end - begin;
        Tensor occluded({n, h, w, c});
        for (std::size_t b = 0; b < n; ++b) {
            double* dst = occluded.data() + b * h * w * c;
            for (std::size_t i = 0; i < h * w * c; ++i) dst[i] = image[i];
            const auto [gy, gx] = cells[begin + b];
            const std::size_t y0 = gy * stride, x0 = gx * stride;
            for (std::size_t y = y0; y < std::min(h, y0 + box); ++y) {
                for (std::size_t x = x0; x < std::min(w, x0 + box); ++x) {
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        dst[(y * w + x) * c + ch] = occlusion_value;
                    }
                }
            }
        }
        Tensor probs = class_probabilities(net, occluded);
        for (std::size_t b = 0; b < n; ++b) {
            const auto [gy, gx] = cells[begin + b];
            map.heat(gy, gx) = map.baseline_probability -
                               probs(b, static_cast<std::size_t>(target_class));
        }
    }
    return map;
}

namespace {

// diverging blue (cold) -> white -> red (hot)
void heat_color(double t, double& r, double& g, double& b) {
    t = std::clamp(t, -1.0, 1.0);
    if (t >= 0.0) {
        r = 1.0;
        g = 1.0 - t;
        b = 1.0 - t;
    } else {
        r = 1.0 + t;
        g = 1.0 + t;
        b = 1.0;
    }
}

} // namespace

Tensor saliency_overlay(const SaliencyMap& map, const Tensor& image) {
    if (image.rank() != 3) {
        throw DimensionError("saliency_overlay: expected [h,w,c] image");
    }
    const std::size_t h = image.extent(0), w = image.extent(1);
    double peak = 0.0;
    for (std::size_t i = 0; i < map.heat.size(); ++i) {
        peak = std::max(peak, std::abs(map.heat[i]));
    }
    if (peak == 0.0) peak = 1.0;

    const std::size_t gh = map.heat.extent(0), gw = map.heat.extent(1);
    Tensor out({h, w, 3});
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            // bilinear sample of the heat grid at the pixel's cell coordinate
            const double gy = (static_cast<double>(y) + 0.5) / map.stride - 0.5;
            const double gx = (static_cast<double>(x) + 0.5) / map.stride - 0.5;
            const double cy = std::clamp(gy, 0.0, static_cast<double>(gh - 1));
            const double cx = std::clamp(gx, 0.0, static_cast<double>(gw - 1));
            const std::size_t y0 = static_cast<std::size_t>(cy);
            const std::size_t x0 = static_cast<std::size_t>(cx);
            const std::size_t y1 = std::min(gh - 1, y0 + 1);
            const std::size_t x1 = std::min(gw - 1, x0 + 1);
            const double fy = cy - static_cast<double>(y0);
            const double fx = cx - static_cast<double>(x0);
            const double v = (1 - fy) * ((1 - fx) * map.heat(y0, x0) + fx * map.heat(y0, x1)) +
                             fy * ((1 - fx) * map.heat(y1, x0) + fx * map.heat(y1, x1));
            double r, g, b;
            heat_color(v / peak, r, g, b);
            double gray = 0.0;
            for (std::size_t c = 0; c < image.extent(2); ++c) gray += image(y, x, c);
            gray /= static_cast<double>(image.extent(2));
            out(y, x, 0) = 0.5 * gray + 0.5 * r;
            out(y, x, 1) = 0.5 * gray + 0.5 * g;
            out(y, x, 2) = 0.5 * gray + 0.5 * b;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

ActivationDump dump_activations(Network& net, const Tensor& image) {
    const auto& in_shape = net.spec().input_shape;
    if (image.shape() != in_shape) {
        throw DimensionError("dump_activations: image " + image.shape_str() +
                             " does not match network input " +
                             Tensor::shape_string(in_shape));
    }
    std::vector<std::size_t> batch_shape = in_shape;
    batch_shape.insert(batch_shape.begin(), 1);
    std::vector<Tensor> outputs;
    net.forward_collect(image.reshaped(batch_shape), outputs);

    ActivationDump dump;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        if (outputs[i].rank() != 4) continue; // spatial layers only
        LayerActivations la;
        la.layer_index = i;
        la.layer_name = layer_kind_name(net.spec().layers[i].kind);
        const std::size_t hh = outputs[i].extent(1), ww = outputs[i].extent(2),
                          cc = outputs[i].extent(3);
        la.activations = std::move(outputs[i]).reshaped({hh, ww, cc});
        la.channel_mean.assign(cc, 0.0);
        la.channel_max.assign(cc, -1e300);
        for (std::size_t p = 0; p < hh * ww; ++p) {
            for (std::size_t c = 0; c < cc; ++c) {
                const double v = la.activations[p * cc + c];
                la.channel_mean[c] += v;
                la.channel_max[c] = std::max(la.channel_max[c], v);
            }
        }
        for (std::size_t c = 0; c < cc; ++c) {
            la.channel_mean[c] /= static_cast<double>(hh * ww);
        }
        dump.layers.push_back(std::move(la));
    }
    return dump;
}

Tensor activation_grid_image(const LayerActivations& layer) {
    const std::size_t h = layer.activations.extent(0), w = layer.activations.extent(1),
                      c = layer.activations.extent(2);
    const std::size_t cols = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(c))));
    const std::size_t rows = (c + cols - 1) / cols;
    const std::size_t gh = rows * h + (rows - 1), gw = cols * w + (cols - 1);
    Tensor grid({gh, gw}, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double lo = 1e300, hi = -1e300;
        for (std::size_t p = 0; p < h * w; ++p) {
            lo = std::min(lo, layer.activations[p * c + ch]);
            hi = std::max(hi, layer.activations[p * c + ch]);
        }
        const double span = hi - lo;
        const std::size_t ty = (ch / cols) * (h + 1), tx = (ch % cols) * (w + 1);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const double v = layer.activations(y, x, ch);
                grid(ty + y, tx + x) = span > 0.0 ? (v - lo) / span : 0.0;
            }
        }
    }
    return grid;
}

// ---------------------------------------------------------------------------

std::vector<DeadNeuronEntry> dead_neuron_report(Network& net, const Tensor& probes) {
    if (probes.rank() != net.spec().input_shape.size() + 1 || probes.extent(0) == 0) {
        throw DataError("dead_neuron_report: probe batch must be [n, input_shape...]");
    }
    const std::size_t n = probes.extent(0);
    const std::size_t per = probes.size() / n;

    // channel count per relu layer
    std::vector<std::size_t> relu_layers;
    std::vector<std::size_t> channel_counts;
    for (std::size_t i = 0; i < net.spec().layers.size(); ++i) {
        if (net.spec().layers[i].kind != LayerKind::relu) continue;
        const auto& shape = net.layer_output_shape(i);
        relu_layers.push_back(i);
        channel_counts.push_back(shape.back());
    }

    std::vector<std::vector<std::size_t>> activated(relu_layers.size());
    std::vector<std::vector<double>> max_act(relu_layers.size());
    for (std::size_t r = 0; r < relu_layers.size(); ++r) {
        activated[r].assign(channel_counts[r], 0);
        max_act[r].assign(channel_counts[r], 0.0);
    }

    const std::size_t chunk = 16;
    for (std::size_t begin = 0; begin < n; begin += chunk) {
        const std::size_t end = std::min(n, begin + chunk);
        std::vector<std::size_t> shape = net.spec().input_shape;
        shape.insert(shape.begin(), end - begin);
        Tensor batch(shape);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            batch[i] = probes[begin * per + i];
        }
        std::vector<Tensor> outputs;
        net.forward_collect(batch, outputs);
        for (std::size_t r = 0; r < relu_layers.size(); ++r) {
            const Tensor& out = outputs[relu_layers[r]];
            const std::size_t cc = channel_counts[r];
            const std::size_t rows = out.size() / ((end - begin) * cc);
            for (std::size_t b = 0; b < end - begin; ++b) {
                for (std::size_t c = 0; c < cc; ++c) {
                    bool any = false;
                    for (std::size_t p = 0; p < rows; ++p) {
                        const double v = out[(b * rows + p) * cc + c];
                        if (v > 0.0) {
                            any = true;
                            max_act[r][c] = std::max(max_act[r][c], v);
                        }
                    }
                    if (any) activated[r][c]++;
                }
            }
        }
    }

    std::vector<DeadNeuronEntry> report;
    for (std::size_t r = 0; r < relu_layers.size(); ++r) {
        for (std::size_t c = 0; c < channel_counts[r]; ++c) {
            DeadNeuronEntry e;
            e.layer_index = relu_layers[r];
            e.channel = c;
            e.activation_rate = static_cast<double>(activated[r][c]) / static_cast<double>(n);
            e.dead = max_act[r][c] == 0.0;
            report.push_back(e);
        }
    }
    return report;
}

} // namespace callo
