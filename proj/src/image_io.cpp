#include "callo/image_io.hpp"

#include <algorithm>
#include <cstdio>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "callo/error.hpp"

namespace callo {

namespace {

std::uint8_t to_byte(double v) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(clamped * 255.0 + 0.5);
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// ---- PPM / PGM -------------------------------------------------------------

// Reads one header token, skipping whitespace and '#' comments.
std::string pnm_token(std::istream& in, const std::string& path) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) throw DataError("pnm: truncated header in " + path);
    return tok;
}

Tensor read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path);
    const std::string magic = pnm_token(in, path);
    if (magic != "P6" && magic != "P5") {
        throw DataError("pnm: unsupported magic '" + magic + "' in " + path);
    }
    const std::size_t w = std::stoul(pnm_token(in, path));
    const std::size_t h = std::stoul(pnm_token(in, path));
    const unsigned long maxval = std::stoul(pnm_token(in, path));
    if (w == 0 || h == 0) throw DataError("pnm: zero dimensions in " + path);
    if (maxval == 0 || maxval > 255) {
        throw DataError("pnm: unsupported maxval " + std::to_string(maxval) + " in " + path);
    }
    const std::size_t channels = magic == "P6" ? 3 : 1;
    std::vector<std::uint8_t> raw(w * h * channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw DataError("pnm: truncated pixel data in " + path);
    }
    Tensor img({h, w, 3});
    const double mv = static_cast<double>(maxval);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            if (channels == 3) {
                for (std::size_t c = 0; c < 3; ++c) {
                    img(y, x, c) = raw[(y * w + x) * 3 + c] / mv;
                }
            } else {
                const double g = raw[y * w + x] / mv;
                img(y, x, 0) = img(y, x, 1) = img(y, x, 2) = g;
            }
        }
    }
    return img;
}

// ---- PNG -------------------------------------------------------------------

Tensor read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("cannot open image: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png: out of memory reading " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("png: out of memory reading " + path);
    }
    std::vector<std::uint8_t> raw;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("png: failed to decode " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    raw.assign(static_cast<std::size_t>(w) * h * 3, 0);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) {
        rows[y] = raw.data() + static_cast<std::size_t>(y) * w * 3;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor img({h, w, 3});
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = raw[i] / 255.0;
    return img;
}

// raw is prepared by the caller so nothing non-trivial lives across setjmp
void png_encode(const std::string& path, const std::vector<std::uint8_t>& raw,
                std::size_t h, std::size_t w, bool gray) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("cannot write image: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png: out of memory writing " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("png: out of memory writing " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("png: failed to encode " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 gray ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = raw.size() / h;
    for (std::size_t y = 0; y < h; ++y) {
        png_write_row(png, const_cast<png_bytep>(raw.data() + y * stride));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// ---- JPEG ------------------------------------------------------------------

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    JpegErrorMgr* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    longjmp(mgr->jump, 1);
}

Tensor read_jpeg(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("cannot open image: " + path);
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw DataError("jpeg: failed to decode " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const std::size_t w = cinfo.output_width, h = cinfo.output_height;
    Tensor img({h, w, 3});
    std::vector<std::uint8_t> row(w * 3);
    JSAMPROW rowp = row.data();
    for (std::size_t y = 0; y < h; ++y) {
        jpeg_read_scanlines(&cinfo, &rowp, 1);
        for (std::size_t i = 0; i < w * 3; ++i) img[y * w * 3 + i] = row[i] / 255.0;
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

} // namespace

Tensor read_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw DataError("cannot open image: " + path);
    unsigned char sig[8] = {0};
    probe.read(reinterpret_cast<char*>(sig), 8);
    probe.close();

    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (std::memcmp(sig, png_sig, 8) == 0) return read_png(path);
    if (sig[0] == 0xff && sig[1] == 0xd8) return read_jpeg(path);
    if (sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6')) return read_pnm(path);
    throw DataError("unrecognized image format: " + path);
}

void write_png_rgb(const std::string& path, const Tensor& img) {
    if (img.rank() != 3 || img.extent(2) != 3) {
        throw DimensionError("write_png_rgb: expected [h,w,3], got " + img.shape_str());
    }
    std::vector<std::uint8_t> raw(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) raw[i] = to_byte(img[i]);
    png_encode(path, raw, img.extent(0), img.extent(1), false);
}

void write_png_gray(const std::string& path, const Tensor& img) {
    if (img.rank() != 2) {
        throw DimensionError("write_png_gray: expected [h,w], got " + img.shape_str());
    }
    std::vector<std::uint8_t> raw(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) raw[i] = to_byte(img[i]);
    png_encode(path, raw, img.extent(0), img.extent(1), true);
}

void write_ppm(const std::string& path, const Tensor& img) {
    if (img.rank() != 3 || img.extent(2) != 3) {
        throw DimensionError("write_ppm: expected [h,w,3], got " + img.shape_str());
    }
    const std::size_t h = img.extent(0), w = img.extent(1);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write image: " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<std::uint8_t> raw(h * w * 3);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = to_byte(img[i]);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw DataError("write failed: " + path);
}

void write_pgm(const std::string& path, const Tensor& img) {
    if (img.rank() != 2) {
        throw DimensionError("write_pgm: expected [h,w], got " + img.shape_str());
    }
    const std::size_t h = img.extent(0), w = img.extent(1);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write image: " + path);
    out << "P5\n" << w << " " << h << "\n255\n";
    std::vector<std::uint8_t> raw(h * w);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = to_byte(img[i]);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw DataError("write failed: " + path);
}

} // namespace callo
