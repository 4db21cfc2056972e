#ifndef CALLO_NN_SPEC_HPP
#define CALLO_NN_SPEC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "callo/tensor.hpp"

namespace callo {

enum class LayerKind { conv, maxpool, relu, lrn, dropout, flatten, dense, softmax };
enum class LossKind { cross_entropy, squared_error };

const char* layer_kind_name(LayerKind k);
const char* loss_kind_name(LossKind k);

// Declarative description of one layer. Only the fields relevant to `kind`
// are meaningful.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;

    // conv
    std::size_t kernel = 0;
    std::size_t channels = 0;
    std::size_t stride = 1;
    Padding padding = Padding::same;

    // maxpool (stride shared with conv above, defaults to window)
    std::size_t window = 0;

    // dense
    std::size_t units = 0;

    // dropout
    double p = 0.0;

    // lrn
    double lrn_k = 2.0;
    std::size_t lrn_n = 5;
    double lrn_alpha = 1e-4;
    double lrn_beta = 0.75;

    static LayerSpec conv_layer(std::size_t kernel, std::size_t channels,
                                std::size_t stride = 1, Padding padding = Padding::same);
    static LayerSpec maxpool_layer(std::size_t window, std::size_t stride = 0);
    static LayerSpec relu_layer();
    static LayerSpec lrn_layer(double k = 2.0, std::size_t n = 5, double alpha = 1e-4,
                               double beta = 0.75);
    static LayerSpec dropout_layer(double p);
    static LayerSpec flatten_layer();
    static LayerSpec dense_layer(std::size_t units);
    static LayerSpec softmax_layer();

    // Per-layer parameter validation (dropout p in [0,1), units >= 1, ...).
    void validate() const;
};

// Whole-network topology: input shape, ordered layers, loss. Shape
// composition is validated eagerly; softmax+cross-entropy are fused, so an
// explicit softmax layer is rejected under the cross-entropy loss.
struct NetworkSpec {
    std::vector<std::size_t> input_shape; // [h,w,c] or [d]
    std::vector<LayerSpec> layers;
    LossKind loss = LossKind::cross_entropy;

    // Throws on invalid topology; returns the per-layer output shapes.
    std::vector<std::vector<std::size_t>> validate() const;

    std::vector<std::size_t> output_shape() const;
    std::size_t class_count() const;

    // Canonical config-file rendering; also the hashing basis for checkpoints.
    std::string canonical_text() const;
    std::uint64_t hash() const;
};

// Config file format: one directive per line, `#` comments.
//   input 28 28 1
//   loss cross_entropy
//   conv kernel=5 channels=32 stride=1 padding=same
//   relu
//   maxpool window=2 stride=2
//   ...
NetworkSpec parse_network_spec(const std::string& text);
NetworkSpec load_network_spec(const std::string& path);

// Built-in presets: "mnist", "dumbnet-simple", "deepsense-like".
bool is_network_preset(const std::string& name);
NetworkSpec network_preset(const std::string& name);
std::vector<std::string> network_preset_names();

} // namespace callo

#endif // CALLO_NN_SPEC_HPP
