#ifndef CALLO_IMAGING_HPP
#define CALLO_IMAGING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "callo/tensor.hpp"

namespace callo {

// Images are [h,w,3] tensors with channel values in [0,1]; coordinates are
// (x = column, y = row), y growing downward. Angles are measured from +x
// toward +y.

struct BBox {
    std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0; // inclusive
    std::size_t width() const { return x1 - x0 + 1; }
    std::size_t height() const { return y1 - y0 + 1; }
};

struct RoiMask {
    std::size_t h = 0, w = 0;
    std::vector<std::uint8_t> data; // 0/1
    std::size_t pixel_count = 0;
    BBox bbox;

    std::uint8_t at(std::size_t y, std::size_t x) const { return data[y * w + x]; }
    std::uint8_t& at(std::size_t y, std::size_t x) { return data[y * w + x]; }
    void recompute_stats();
};

struct OrientationEstimate {
    double theta = 0.0;  // radians in (-pi/2, pi/2], major-axis direction
    double cx = 0.0, cy = 0.0;
    double major = 0.0, minor = 0.0; // equivalent-ellipse full axis lengths
    double confidence = 0.0;         // 1 - minor/major
    bool degenerate = false;         // collinear mass within tolerance
};

enum class Interp { nearest, bilinear };

// Hexcone conversion; H in [0,360), S = (max-min)/max (0 when max is 0).
Tensor rgb_to_hsv(const Tensor& img);
Tensor hsv_to_rgb(const Tensor& hsv);

// Saturation counts; bin b covers [b/bins, (b+1)/bins), S = 1 lands in the
// last bin. Counts sum to h*w.
std::vector<std::size_t> saturation_histogram(const Tensor& img, std::size_t bins = 256);

struct ThresholdResult {
    std::size_t bin = 0;
    bool fallback = false; // no two-peak structure; between-class-variance criterion used
    std::size_t peak_lo = 0, peak_hi = 0; // the two maxima (when not fallback)
    std::vector<double> smoothed;
};

// Valley between the two dominant modes of a smoothed histogram (moving
// average, window 9). Falls back to the between-class-variance threshold when
// fewer than two maxima survive smoothing.
ThresholdResult bimodal_threshold(const std::vector<std::size_t>& histogram);

struct SegmentationResult {
    RoiMask mask;
    ThresholdResult threshold;
    bool closing_applied = false;
};

// Foreground = saturation above the histogram valley, largest 4-connected
// component, then one binary closing (3x3, 2 iterations) to fill splash
// holes. The result is always a single connected component.
SegmentationResult segment_roi(const Tensor& img);

// Second-moment (inertia-equivalent) ellipse of the mask. Needs >= 16 pixels.
OrientationEstimate estimate_orientation(const RoiMask& mask);

// Rotation about the image center; the output canvas is sized to contain the
// rotated extent, out-of-bounds samples are black.
Tensor rotate_image(const Tensor& img, double theta, Interp interp = Interp::bilinear);
RoiMask rotate_mask(const RoiMask& mask, double theta);

Tensor resize_bilinear(const Tensor& img, std::size_t out_h, std::size_t out_w);

// Derotates so the major axis is horizontal, crops the mask-centered square
// with a 10% margin (clamped to bounds) and resizes to out_size^2. The
// head-left/head-right ambiguity is not resolved here; callers flip
// explicitly when they know the answer.
Tensor passport_crop(const Tensor& img, const RoiMask& mask,
                     const OrientationEstimate& orient, std::size_t out_size = 256);

// ---------------------------------------------------------------------------
// Augmentation filters. All deterministic; callers own any randomness.

Tensor hflip(const Tensor& img);
Tensor vflip(const Tensor& img);
Tensor aug_rotate(const Tensor& img, double theta); // same canvas, bilinear
Tensor aug_scale(const Tensor& img, double s);      // s in [0.5, 2]
Tensor aug_shift(const Tensor& img, int dx, int dy);
Tensor lowpass(const Tensor& img, double sigma);          // gaussian, sigma in (0,5]
Tensor highpass(const Tensor& img, double sigma = 2.0);   // img - lowpass, at mid-gray

// ---------------------------------------------------------------------------

struct PreprocessDiagnostics {
    std::size_t threshold_bin = 0;
    bool fallback = false;
    double theta_deg = 0.0;
    double confidence = 0.0;
    std::size_t mask_pixels = 0;
    bool closing_applied = false;
};

std::string diagnostics_text(const PreprocessDiagnostics& d);

struct PassportResult {
    Tensor image; // [out,out,3]
    RoiMask mask;
    PreprocessDiagnostics diag;
};

// Full passport pipeline: segment, orient, derotate, crop, resize. flip180
// spins the result half a turn (the up/down ambiguity is the caller's call).
PassportResult passport_pipeline(const Tensor& img, std::size_t out_size = 256,
                                 bool flip180 = false);

} // namespace callo

#endif // CALLO_IMAGING_HPP
