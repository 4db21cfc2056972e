#ifndef CALLO_INTERPRET_HPP
#define CALLO_INTERPRET_HPP

#include <string>
#include <vector>

#include "callo/nn/network.hpp"
#include "callo/tensor.hpp"

namespace callo {

// Occlusion saliency over a grid: heat[i,j] = p0 - p_occluded(i,j), so
// positive cells support the target class. Heat values are probability
// differences and stay within [-1, 1].
struct SaliencyMap {
    Tensor heat; // [grid_h, grid_w]
    std::size_t box = 0;
    std::size_t stride = 0;
    double baseline_probability = 0.0;
    int target_class = -1;
};

// Class probabilities for one image batch, respecting the network's output
// convention (logits under the fused cross-entropy, probabilities when the
// net ends in an explicit softmax).
Tensor class_probabilities(Network& net, const Tensor& batch);

// Occludes box-sized squares (intensity set to `occlusion_value`, zero by
// default) on a stride grid covering the whole image. The
// caller supplies a trained network; a freshly seeded one produces noise.
SaliencyMap saliency(Network& net, const Tensor& image, int target_class, std::size_t box,
                     std::size_t stride, double occlusion_value = 0.0);

// Full-resolution overlay: bilinear-upsampled heat through a blue->red
// diverging colormap, blended onto the grayscale image.
Tensor saliency_overlay(const SaliencyMap& map, const Tensor& image);

// ---------------------------------------------------------------------------

struct LayerActivations {
    std::size_t layer_index = 0;
    std::string layer_name;
    Tensor activations; // [h,w,c], raw values
    std::vector<double> channel_mean;
    std::vector<double> channel_max;
};

struct ActivationDump {
    std::vector<LayerActivations> layers; // one entry per spatial layer, in order
};

ActivationDump dump_activations(Network& net, const Tensor& image);

// Channels tiled into a square-ish grid, each tile min-max normalized to
// [0,1], one-pixel separators.
Tensor activation_grid_image(const LayerActivations& layer);

// ---------------------------------------------------------------------------

struct DeadNeuronEntry {
    std::size_t layer_index = 0; // the relu layer
    std::size_t channel = 0;
    double activation_rate = 0.0; // fraction of probes with any positive activation
    bool dead = false;            // never activates across the whole probe set
};

// One entry per post-ReLU channel, network order. `probes` is a batch
// [n, input_shape...].
std::vector<DeadNeuronEntry> dead_neuron_report(Network& net, const Tensor& probes);

} // namespace callo

#endif // CALLO_INTERPRET_HPP
