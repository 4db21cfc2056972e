#include <cstdio>
#include <filesystem>
#include <fstream>

#include "callo/image_io.hpp"
#include "callo/interpret.hpp"
#include "callo/nn/checkpoint.hpp"
#include "common.hpp"

namespace cli {

using namespace callo;
namespace fs = std::filesystem;

int run_saliency(const SaliencyOptions& opt) {
    if (opt.checkpoint.empty()) throw ConfigError("saliency: --checkpoint is required");
    if (opt.image.empty()) throw ConfigError("saliency: --image is required");
    if (opt.out_dir.empty()) throw ConfigError("saliency: --out is required");

    NetworkSpec spec = resolve_network(opt.net);
    Network net(spec, 1);
    load_checkpoint(opt.checkpoint, net);

    Tensor image = load_image_for_network(opt.image, spec.input_shape);
    const std::size_t side = std::min(image.extent(0), image.extent(1));

    // default geometry: box 16 at 256 pixels, scaled proportionally
    std::size_t box = opt.box;
    if (box == 0) {
        box = std::max<std::size_t>(1, (16 * side + 128) / 256);
    }
    std::size_t stride = opt.stride;
    if (stride == 0) stride = std::max<std::size_t>(1, box / 2);

    int target = opt.target;
    if (target < 0) {
        Tensor probs = class_probabilities(
            net, image.reshaped({1, image.extent(0), image.extent(1), image.extent(2)}));
        target = 0;
        for (std::size_t j = 1; j < probs.extent(1); ++j) {
            if (probs(0, j) > probs(0, static_cast<std::size_t>(target))) {
                target = static_cast<int>(j);
            }
        }
    }

    double occlusion_value = 0.0;
    if (opt.occlude_mean) {
        for (std::size_t i = 0; i < image.size(); ++i) occlusion_value += image[i];
        occlusion_value /= static_cast<double>(image.size());
    }

    SaliencyMap map = saliency(net, image, target, box, stride, occlusion_value);

    fs::create_directories(opt.out_dir);
    write_run_manifest(opt.out_dir, "saliency",
                       {{"checkpoint", opt.checkpoint},
                        {"net", opt.net},
                        {"image", opt.image},
                        {"target", target},
                        {"box", box},
                        {"stride", stride},
                        {"occlude_mean", opt.occlude_mean}});

    // numeric dump for programmatic checks
    {
        std::ofstream out(fs::path(opt.out_dir) / "heat.tsv");
        char buf[40];
        for (std::size_t y = 0; y < map.heat.extent(0); ++y) {
            for (std::size_t x = 0; x < map.heat.extent(1); ++x) {
                std::snprintf(buf, sizeof(buf), "%.10g", map.heat(y, x));
                out << (x ? "\t" : "") << buf;
            }
            out << "\n";
        }
    }
    // normalized grayscale heat map
    {
        double peak = 0.0;
        for (std::size_t i = 0; i < map.heat.size(); ++i) {
            peak = std::max(peak, std::abs(map.heat[i]));
        }
        Tensor gray(map.heat.shape());
        for (std::size_t i = 0; i < gray.size(); ++i) {
            gray[i] = peak > 0.0 ? 0.5 + 0.5 * map.heat[i] / peak : 0.5;
        }
        write_pgm((fs::path(opt.out_dir) / "heat.pgm").string(), gray);
    }
    write_png_rgb((fs::path(opt.out_dir) / "overlay.png").string(),
                  saliency_overlay(map, image));

    std::printf("saliency: target %d baseline p=%.4f grid %zux%zu box %zu stride %zu\n",
                target, map.baseline_probability, map.heat.extent(0), map.heat.extent(1),
                box, stride);
    return 0;
}

int run_activations(const ActivationsOptions& opt) {
    if (opt.checkpoint.empty()) throw ConfigError("activations: --checkpoint is required");
    if (opt.image.empty()) throw ConfigError("activations: --image is required");
    if (opt.out_dir.empty()) throw ConfigError("activations: --out is required");

    NetworkSpec spec = resolve_network(opt.net);
    Network net(spec, 1);
    load_checkpoint(opt.checkpoint, net);

    Tensor image = load_image_for_network(opt.image, spec.input_shape);
    ActivationDump dump = dump_activations(net, image);

    fs::create_directories(opt.out_dir);
    write_run_manifest(opt.out_dir, "activations",
                       {{"checkpoint", opt.checkpoint},
                        {"net", opt.net},
                        {"image", opt.image}});

    std::ofstream stats(fs::path(opt.out_dir) / "activation_stats.tsv");
    stats << "layer_index\tlayer\tchannel\tmean\tmax\n";
    for (const LayerActivations& layer : dump.layers) {
        char name[64];
        std::snprintf(name, sizeof(name), "layer%02zu_%s", layer.layer_index,
                      layer.layer_name.c_str());
        write_png_gray((fs::path(opt.out_dir) / (std::string(name) + ".png")).string(),
                       activation_grid_image(layer));
        for (std::size_t c = 0; c < layer.channel_mean.size(); ++c) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%zu\t%s\t%zu\t%.8g\t%.8g\n", layer.layer_index,
                          layer.layer_name.c_str(), c, layer.channel_mean[c],
                          layer.channel_max[c]);
            stats << buf;
        }
    }
    std::printf("activations: %zu spatial layers dumped to %s\n", dump.layers.size(),
                opt.out_dir.c_str());
    return 0;
}

} // namespace cli
