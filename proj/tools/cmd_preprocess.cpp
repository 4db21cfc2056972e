#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "callo/error.hpp"
#include "callo/image_io.hpp"
#include "callo/imaging.hpp"
#include "common.hpp"

namespace cli {

using namespace callo;
namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm" ||
           ext == ".pgm";
}

} // namespace

int run_preprocess(const PreprocessOptions& opt) {
    if (!fs::is_directory(opt.in_dir)) {
        throw DataError("preprocess: input directory not found: " + opt.in_dir);
    }
    fs::create_directories(opt.out_dir);
    write_run_manifest(opt.out_dir, "preprocess",
                       {{"in", opt.in_dir},
                        {"out", opt.out_dir},
                        {"out_size", opt.out_size},
                        {"flip180", opt.flip180},
                        {"strict", opt.strict}});

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(opt.in_dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    std::size_t ok = 0, fallbacks = 0, failures = 0;
    for (const fs::path& file : files) {
        const std::string stem = file.stem().string();
        try {
            Tensor img = read_image(file.string());
            PassportResult res = passport_pipeline(img, opt.out_size, opt.flip180);
            write_png_rgb((fs::path(opt.out_dir) / (stem + "_passport.png")).string(),
                          res.image);
            Tensor mask_img({res.mask.h, res.mask.w});
            for (std::size_t i = 0; i < mask_img.size(); ++i) {
                mask_img[i] = res.mask.data[i] ? 1.0 : 0.0;
            }
            write_pgm((fs::path(opt.out_dir) / (stem + "_mask.pgm")).string(), mask_img);
            std::ofstream diag(fs::path(opt.out_dir) / (stem + "_diag.txt"));
            diag << diagnostics_text(res.diag);
            ++ok;
            if (res.diag.fallback) ++fallbacks;
        } catch (const Error& e) {
            ++failures;
            std::fprintf(stderr, "preprocess: %s: %s\n", file.string().c_str(), e.what());
        }
    }
    std::printf("preprocess: %zu processed, %zu ok, %zu threshold-fallbacks, %zu failed\n",
                files.size(), ok, fallbacks, failures);
    if (opt.strict && failures > 0) return 2;
    return 0;
}

} // namespace cli
