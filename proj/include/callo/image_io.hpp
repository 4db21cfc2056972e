#ifndef CALLO_IMAGE_IO_HPP
#define CALLO_IMAGE_IO_HPP

#include <string>

#include "callo/tensor.hpp"

namespace callo {

// Image files at the I/O boundary are 8-bit; in memory everything is a real
// tensor with channel values in [0,1]. Readers detect the format from the
// file signature (PNG, JPEG, PPM/PGM), grayscale sources are replicated to
// three channels.
Tensor read_image(const std::string& path); // -> [h,w,3]

void write_png_rgb(const std::string& path, const Tensor& img);  // [h,w,3]
void write_png_gray(const std::string& path, const Tensor& img); // [h,w]
void write_ppm(const std::string& path, const Tensor& img);      // [h,w,3], P6
void write_pgm(const std::string& path, const Tensor& img);      // [h,w], P5

} // namespace callo

#endif // CALLO_IMAGE_IO_HPP
