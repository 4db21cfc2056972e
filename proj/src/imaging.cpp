#include "callo/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>

#include "callo/error.hpp"

namespace callo {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_rgb(const Tensor& img, const char* op) {
    if (img.rank() != 3 || img.extent(2) != 3) {
        throw DimensionError(std::string(op) + ": expected [h,w,3], got " + img.shape_str());
    }
}

} // namespace

void RoiMask::recompute_stats() {
    pixel_count = 0;
    bool first = true;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            if (!data[y * w + x]) continue;
            ++pixel_count;
            if (first) {
                bbox = {x, y, x, y};
                first = false;
            } else {
                bbox.x0 = std::min(bbox.x0, x);
                bbox.y0 = std::min(bbox.y0, y);
                bbox.x1 = std::max(bbox.x1, x);
                bbox.y1 = std::max(bbox.y1, y);
            }
        }
    }
    if (first) bbox = {};
}

Tensor rgb_to_hsv(const Tensor& img) {
    require_rgb(img, "rgb_to_hsv");
    Tensor out(img.shape());
    const std::size_t n = img.extent(0) * img.extent(1);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = img[i * 3 + 0], g = img[i * 3 + 1], b = img[i * 3 + 2];
        const double mx = std::max({r, g, b});
        const double mn = std::min({r, g, b});
        const double delta = mx - mn;
        double h = 0.0;
        if (delta > 0.0) {
            if (mx == r) {
                h = 60.0 * std::fmod((g - b) / delta, 6.0);
            } else if (mx == g) {
                h = 60.0 * ((b - r) / delta + 2.0);
            } else {
                h = 60.0 * ((r - g) / delta + 4.0);
            }
            if (h < 0.0) h += 360.0;
        }
        out[i * 3 + 0] = h;
        out[i * 3 + 1] = mx > 0.0 ? delta / mx : 0.0;
        out[i * 3 + 2] = mx;
    }
    return out;
}

Tensor hsv_to_rgb(const Tensor& hsv) {
    require_rgb(hsv, "hsv_to_rgb");
    Tensor out(hsv.shape());
    const std::size_t n = hsv.extent(0) * hsv.extent(1);
    for (std::size_t i = 0; i < n; ++i) {
        const double h = hsv[i * 3 + 0], s = hsv[i * 3 + 1], v = hsv[i * 3 + 2];
        const double c = v * s;
        const double hp = h / 60.0;
        const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
        double r = 0, g = 0, b = 0;
        if (hp < 1) {
            r = c; g = x;
        } else if (hp < 2) {
            r = x; g = c;
        } else if (hp < 3) {
            g = c; b = x;
        } else if (hp < 4) {
            g = x; b = c;
        } else if (hp < 5) {
            r = x; b = c;
        } else {
            r = c; b = x;
        }
        const double m = v - c;
        out[i * 3 + 0] = r + m;
        out[i * 3 + 1] = g + m;
        out[i * 3 + 2] = b + m;
    }
    return out;
}

std::vector<std::size_t> saturation_histogram(const Tensor& img, std::size_t bins) {
    require_rgb(img, "saturation_histogram");
    if (bins < 2) throw ConfigError("saturation_histogram: need at least 2 bins");
    Tensor hsv = rgb_to_hsv(img);
    std::vector<std::size_t> hist(bins, 0);
    const std::size_t n = img.extent(0) * img.extent(1);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = hsv[i * 3 + 1];
        std::size_t b = static_cast<std::size_t>(s * static_cast<double>(bins));
        if (b >= bins) b = bins - 1;
        hist[b]++;
    }
    return hist;
}

namespace {

// Local maxima of the smoothed histogram as plateau runs; each run reports
// its midpoint. Boundary runs count when the single inner neighbor is lower.
std::vector<std::pair<double, std::size_t>> local_maxima(const std::vector<double>& s) {
    std::vector<std::pair<double, std::size_t>> peaks; // (value, bin)
    const std::size_t n = s.size();
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && s[j + 1] == s[i]) ++j;
        const bool left_ok = i == 0 || s[i - 1] < s[i];
        const bool right_ok = j + 1 == n || s[j + 1] < s[j];
        if (left_ok && right_ok && s[i] > 0.0) {
            peaks.push_back({s[i], (i + j) / 2});
        }
        i = j + 1;
    }
    return peaks;
}

// Between-class-variance (Otsu) threshold on the raw counts.
std::size_t otsu_threshold(const std::vector<std::size_t>& hist) {
    const std::size_t n = hist.size();
    double total = 0.0, total_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += static_cast<double>(hist[i]);
        total_mean += static_cast<double>(i) * static_cast<double>(hist[i]);
    }
    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    std::size_t best_bin = 0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
        w0 += static_cast<double>(hist[t]);
        sum0 += static_cast<double>(t) * static_cast<double>(hist[t]);
        const double w1 = total - w0;
        if (w0 <= 0.0 || w1 <= 0.0) continue;
        const double mu0 = sum0 / w0;
        const double mu1 = (total_mean - sum0) / w1;
        const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (var > best) {
            best = var;
            best_bin = t;
        }
    }
    return best_bin;
}

} // namespace

ThresholdResult bimodal_threshold(const std::vector<std::size_t>& histogram) {
    if (histogram.size() < 3) throw DataError("bimodal_threshold: histogram too small");
    double total = 0.0;
    for (std::size_t c : histogram) total += static_cast<double>(c);
    if (total == 0.0) throw DataError("bimodal_threshold: empty histogram");

    ThresholdResult res;
    const std::size_t n = histogram.size();
    res.smoothed.assign(n, 0.0);
    const std::ptrdiff_t half = 4; // window 9
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        double acc = 0.0;
        std::size_t cnt = 0;
        for (std::ptrdiff_t j = i - half; j <= i + half; ++j) {
            if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
            acc += static_cast<double>(histogram[static_cast<std::size_t>(j)]);
            ++cnt;
        }
        res.smoothed[static_cast<std::size_t>(i)] = acc / static_cast<double>(cnt);
    }

    auto peaks = local_maxima(res.smoothed);
    // two highest distinct maxima; ties prefer the lower bin
    std::stable_sort(peaks.begin(), peaks.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    if (peaks.size() >= 2) {
        std::size_t lo = peaks[0].second, hi = peaks[1].second;
        if (lo > hi) std::swap(lo, hi);
        if (hi > lo + 1) {
            res.peak_lo = lo;
            res.peak_hi = hi;
            std::size_t valley = lo + 1;
            for (std::size_t i = lo + 1; i < hi; ++i) {
                if (res.smoothed[i] < res.smoothed[valley]) valley = i;
            }
            res.bin = valley;
            return res;
        }
    }
    res.fallback = true;
    res.bin = otsu_threshold(histogram);
    return res;
}

namespace {

// Largest 4-connected component of a binary image; scan order breaks ties.
void keep_largest_component(RoiMask& mask) {
    const std::size_t h = mask.h, w = mask.w;
    std::vector<std::int32_t> label(h * w, -1);
    std::int32_t next = 0;
    std::size_t best_count = 0;
    std::int32_t best_label = -1;
    std::deque<std::size_t> queue;
    for (std::size_t start = 0; start < h * w; ++start) {
        if (!mask.data[start] || label[start] >= 0) continue;
        std::size_t count = 0;
        label[start] = next;
        queue.push_back(start);
        while (!queue.empty()) {
            const std::size_t cur = queue.front();
            queue.pop_front();
            ++count;
            const std::size_t y = cur / w, x = cur % w;
            const std::size_t neighbors[4] = {
                y > 0 ? cur - w : cur, y + 1 < h ? cur + w : cur,
                x > 0 ? cur - 1 : cur, x + 1 < w ? cur + 1 : cur};
            for (std::size_t nb : neighbors) {
                if (nb != cur && mask.data[nb] && label[nb] < 0) {
                    label[nb] = next;
                    queue.push_back(nb);
                }
            }
        }
        if (count > best_count) {
            best_count = count;
            best_label = next;
        }
        ++next;
    }
    for (std::size_t i = 0; i < h * w; ++i) {
        mask.data[i] = (mask.data[i] && label[i] == best_label) ? 1 : 0;
    }
    mask.recompute_stats();
}

RoiMask morph3x3(const RoiMask& mask, bool dilate) {
    RoiMask out = mask;
    for (std::size_t y = 0; y < mask.h; ++y) {
        for (std::size_t x = 0; x < mask.w; ++x) {
            std::uint8_t acc = dilate ? 0 : 1;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
                    const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
                    std::uint8_t v = 0; // outside the canvas counts as background
                    if (yy >= 0 && yy < static_cast<std::ptrdiff_t>(mask.h) && xx >= 0 &&
                        xx < static_cast<std::ptrdiff_t>(mask.w)) {
                        v = mask.data[static_cast<std::size_t>(yy) * mask.w +
                                      static_cast<std::size_t>(xx)];
                    }
                    if (dilate) {
                        acc = acc || v;
                    } else {
                        acc = acc && v;
                    }
                }
            }
            out.data[y * mask.w + x] = acc;
        }
    }
    return out;
}

} // namespace

SegmentationResult segment_roi(const Tensor& img) {
    require_rgb(img, "segment_roi");
    const std::size_t h = img.extent(0), w = img.extent(1);
    Tensor hsv = rgb_to_hsv(img);
    const std::size_t bins = 256;
    std::vector<std::size_t> hist(bins, 0);
    for (std::size_t i = 0; i < h * w; ++i) {
        std::size_t b = static_cast<std::size_t>(hsv[i * 3 + 1] * static_cast<double>(bins));
        if (b >= bins) b = bins - 1;
        hist[b]++;
    }

    SegmentationResult res;
    res.threshold = bimodal_threshold(hist);

    res.mask.h = h;
    res.mask.w = w;
    res.mask.data.assign(h * w, 0);
    const double cut = static_cast<double>(res.threshold.bin + 1) / static_cast<double>(bins);
    std::size_t fg = 0;
    for (std::size_t i = 0; i < h * w; ++i) {
        if (hsv[i * 3 + 1] >= cut) {
            res.mask.data[i] = 1;
            ++fg;
        }
    }
    if (fg == 0) {
        throw SegmentationError("segment_roi: no pixels above the saturation threshold");
    }

    keep_largest_component(res.mask);

    // closing (two dilations, two erosions) fills splash holes; an extra
    // largest-component pass guards against erosion splitting the blob
    RoiMask closed = morph3x3(morph3x3(res.mask, true), true);
    closed = morph3x3(morph3x3(closed, false), false);
    res.closing_applied = true;
    keep_largest_component(closed);
    if (closed.pixel_count == 0) {
        throw SegmentationError("segment_roi: foreground vanished during closing");
    }
    res.mask = std::move(closed);
    return res;
}

OrientationEstimate estimate_orientation(const RoiMask& mask) {
    if (mask.pixel_count < 16) {
        throw DataError("estimate_orientation: mask has " +
                        std::to_string(mask.pixel_count) + " pixels, need >= 16");
    }
    double sx = 0.0, sy = 0.0;
    for (std::size_t y = 0; y < mask.h; ++y) {
        for (std::size_t x = 0; x < mask.w; ++x) {
            if (!mask.at(y, x)) continue;
            sx += static_cast<double>(x);
            sy += static_cast<double>(y);
        }
    }
    const double n = static_cast<double>(mask.pixel_count);
    const double cx = sx / n, cy = sy / n;

    double mu20 = 0.0, mu02 = 0.0, mu11 = 0.0;
    for (std::size_t y = 0; y < mask.h; ++y) {
        for (std::size_t x = 0; x < mask.w; ++x) {
            if (!mask.at(y, x)) continue;
            const double dx = static_cast<double>(x) - cx;
            const double dy = static_cast<double>(y) - cy;
            mu20 += dx * dx;
            mu02 += dy * dy;
            mu11 += dx * dy;
        }
    }
    mu20 /= n;
    mu02 /= n;
    mu11 /= n;

    OrientationEstimate est;
    est.cx = cx;
    est.cy = cy;
    est.theta = 0.5 * std::atan2(2.0 * mu11, mu20 - mu02);
    if (est.theta <= -kPi / 2) est.theta += kPi;
    if (est.theta > kPi / 2) est.theta -= kPi;

    const double tr = mu20 + mu02;
    const double det = std::sqrt((mu20 - mu02) * (mu20 - mu02) + 4.0 * mu11 * mu11);
    const double l1 = std::max(0.0, 0.5 * (tr + det));
    const double l2 = std::max(0.0, 0.5 * (tr - det));
    est.major = 4.0 * std::sqrt(l1);
    est.minor = 4.0 * std::sqrt(l2);
    est.confidence = est.major > 0.0 ? 1.0 - est.minor / est.major : 0.0;
    est.degenerate = est.minor < 0.5; // sub-pixel thin: rasterization dominates
    return est;
}

namespace {

struct RotGeometry {
    std::size_t out_h, out_w;
    double cx_in, cy_in, cx_out, cy_out;
    double cos_t, sin_t;
};

RotGeometry rotation_geometry(std::size_t h, std::size_t w, double theta) {
    RotGeometry g;
    g.cos_t = std::cos(theta);
    g.sin_t = std::sin(theta);
    const double ow = std::abs(g.cos_t) * static_cast<double>(w) +
                      std::abs(g.sin_t) * static_cast<double>(h);
    const double oh = std::abs(g.sin_t) * static_cast<double>(w) +
                      std::abs(g.cos_t) * static_cast<double>(h);
    g.out_w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(ow)));
    g.out_h = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(oh)));
    g.cx_in = (static_cast<double>(w) - 1.0) / 2.0;
    g.cy_in = (static_cast<double>(h) - 1.0) / 2.0;
    g.cx_out = (static_cast<double>(g.out_w) - 1.0) / 2.0;
    g.cy_out = (static_cast<double>(g.out_h) - 1.0) / 2.0;
    return g;
}

double sample_bilinear(const Tensor& img, double y, double x, std::size_t c) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(img.extent(0));
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(img.extent(1));
    const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(std::floor(x));
    const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(std::floor(y));
    const double fx = x - static_cast<double>(x0);
    const double fy = y - static_cast<double>(y0);
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
            const std::ptrdiff_t yy = y0 + dy;
            const std::ptrdiff_t xx = x0 + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue; // black outside
            const double wgt = (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx);
            acc += wgt * img(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), c);
        }
    }
    return acc;
}

} // namespace

Tensor rotate_image(const Tensor& img, double theta, Interp interp) {
    require_rgb(img, "rotate_image");
    const std::size_t h = img.extent(0), w = img.extent(1);
    const RotGeometry g = rotation_geometry(h, w, theta);
    Tensor out({g.out_h, g.out_w, 3}, 0.0);
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            // inverse map: rotate the output coordinate back by -theta
            const double rx = static_cast<double>(ox) - g.cx_out;
            const double ry = static_cast<double>(oy) - g.cy_out;
            const double x = g.cos_t * rx + g.sin_t * ry + g.cx_in;
            const double y = -g.sin_t * rx + g.cos_t * ry + g.cy_in;
            if (interp == Interp::nearest) {
                const std::ptrdiff_t xi = static_cast<std::ptrdiff_t>(std::lround(x));
                const std::ptrdiff_t yi = static_cast<std::ptrdiff_t>(std::lround(y));
                if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(w) || yi < 0 ||
                    yi >= static_cast<std::ptrdiff_t>(h)) {
                    continue;
                }
                for (std::size_t c = 0; c < 3; ++c) {
                    out(oy, ox, c) = img(static_cast<std::size_t>(yi),
                                         static_cast<std::size_t>(xi), c);
                }
            } else {
                for (std::size_t c = 0; c < 3; ++c) {
                    out(oy, ox, c) = sample_bilinear(img, y, x, c);
                }
            }
        }
    }
    return out;
}

RoiMask rotate_mask(const RoiMask& mask, double theta) {
    const RotGeometry g = rotation_geometry(mask.h, mask.w, theta);
    RoiMask out;
    out.h = g.out_h;
    out.w = g.out_w;
    out.data.assign(g.out_h * g.out_w, 0);
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const double rx = static_cast<double>(ox) - g.cx_out;
            const double ry = static_cast<double>(oy) - g.cy_out;
            const double x = g.cos_t * rx + g.sin_t * ry + g.cx_in;
            const double y = -g.sin_t * rx + g.cos_t * ry + g.cy_in;
            const std::ptrdiff_t xi = static_cast<std::ptrdiff_t>(std::lround(x));
            const std::ptrdiff_t yi = static_cast<std::ptrdiff_t>(std::lround(y));
            if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(mask.w) || yi < 0 ||
                yi >= static_cast<std::ptrdiff_t>(mask.h)) {
                continue;
            }
            out.data[oy * g.out_w + ox] =
                mask.data[static_cast<std::size_t>(yi) * mask.w + static_cast<std::size_t>(xi)];
        }
    }
    out.recompute_stats();
    return out;
}

Tensor resize_bilinear(const Tensor& img, std::size_t out_h, std::size_t out_w) {
    require_rgb(img, "resize_bilinear");
    if (out_h < 1 || out_w < 1) throw ConfigError("resize: output extents must be >= 1");
    const double sy = static_cast<double>(img.extent(0)) / static_cast<double>(out_h);
    const double sx = static_cast<double>(img.extent(1)) / static_cast<double>(out_w);
    Tensor out({out_h, out_w, 3});
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            double y = (static_cast<double>(oy) + 0.5) * sy - 0.5;
            double x = (static_cast<double>(ox) + 0.5) * sx - 0.5;
            y = std::clamp(y, 0.0, static_cast<double>(img.extent(0) - 1));
            x = std::clamp(x, 0.0, static_cast<double>(img.extent(1) - 1));
            for (std::size_t c = 0; c < 3; ++c) {
                out(oy, ox, c) = sample_bilinear(img, y, x, c);
            }
        }
    }
    return out;
}

Tensor passport_crop(const Tensor& img, const RoiMask& mask,
                     const OrientationEstimate& orient, std::size_t out_size) {
    require_rgb(img, "passport_crop");
    if (mask.pixel_count == 0) throw SegmentationError("passport_crop: empty mask");
    if (out_size < 8) throw ConfigError("passport_crop: out_size too small");

    Tensor rot = rotate_image(img, -orient.theta, Interp::bilinear);
    RoiMask rmask = rotate_mask(mask, -orient.theta);
    if (rmask.pixel_count == 0) {
        throw SegmentationError("passport_crop: mask vanished during derotation");
    }

    // square side: max bbox extent plus a 10% margin, clamped to the canvas
    const std::size_t bw = rmask.bbox.width(), bh = rmask.bbox.height();
    std::size_t side = static_cast<std::size_t>(
        std::lround(1.1 * static_cast<double>(std::max(bw, bh))));
    side = std::max<std::size_t>(side, 8);
    side = std::min({side, rot.extent(0), rot.extent(1)});

    double mcx = 0.0, mcy = 0.0;
    for (std::size_t y = 0; y < rmask.h; ++y) {
        for (std::size_t x = 0; x < rmask.w; ++x) {
            if (!rmask.at(y, x)) continue;
            mcx += static_cast<double>(x);
            mcy += static_cast<double>(y);
        }
    }
    mcx /= static_cast<double>(rmask.pixel_count);
    mcy /= static_cast<double>(rmask.pixel_count);

    auto clamp_origin = [&](double center, std::size_t extent) {
        double o = center - static_cast<double>(side) / 2.0;
        o = std::clamp(o, 0.0, static_cast<double>(extent - side));
        return static_cast<std::size_t>(std::lround(o));
    };
    const std::size_t x0 = clamp_origin(mcx, rot.extent(1));
    const std::size_t y0 = clamp_origin(mcy, rot.extent(0));

    Tensor crop({side, side, 3});
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                crop(y, x, c) = rot(y0 + y, x0 + x, c);
            }
        }
    }
    return resize_bilinear(crop, out_size, out_size);
}

// ---------------------------------------------------------------------------

Tensor hflip(const Tensor& img) {
    require_rgb(img, "hflip");
    Tensor out(img.shape());
    const std::size_t h = img.extent(0), w = img.extent(1);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) out(y, x, c) = img(y, w - 1 - x, c);
        }
    }
    return out;
}

Tensor vflip(const Tensor& img) {
    require_rgb(img, "vflip");
    Tensor out(img.shape());
    const std::size_t h = img.extent(0), w = img.extent(1);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) out(y, x, c) = img(h - 1 - y, x, c);
        }
    }
    return out;
}

Tensor aug_rotate(const Tensor& img, double theta) {
    require_rgb(img, "aug_rotate");
    const std::size_t h = img.extent(0), w = img.extent(1);
    const double cx = (static_cast<double>(w) - 1.0) / 2.0;
    const double cy = (static_cast<double>(h) - 1.0) / 2.0;
    const double c = std::cos(theta), s = std::sin(theta);
    Tensor out(img.shape(), 0.0);
    for (std::size_t oy = 0; oy < h; ++oy) {
        for (std::size_t ox = 0; ox < w; ++ox) {
            const double rx = static_cast<double>(ox) - cx;
            const double ry = static_cast<double>(oy) - cy;
            const double x = c * rx + s * ry + cx;
            const double y = -s * rx + c * ry + cy;
            for (std::size_t ch = 0; ch < 3; ++ch) {
                out(oy, ox, ch) = sample_bilinear(img, y, x, ch);
            }
        }
    }
    return out;
}

Tensor aug_scale(const Tensor& img, double s) {
    require_rgb(img, "aug_scale");
    if (!(s >= 0.5 && s <= 2.0)) {
        throw ConfigError("aug_scale: s must be in [0.5, 2], got " + std::to_string(s));
    }
    const std::size_t h = img.extent(0), w = img.extent(1);
    const double cx = (static_cast<double>(w) - 1.0) / 2.0;
    const double cy = (static_cast<double>(h) - 1.0) / 2.0;
    Tensor out(img.shape(), 0.0);
    for (std::size_t oy = 0; oy < h; ++oy) {
        for (std::size_t ox = 0; ox < w; ++ox) {
            const double x = (static_cast<double>(ox) - cx) / s + cx;
            const double y = (static_cast<double>(oy) - cy) / s + cy;
            if (x < -0.5 || x > static_cast<double>(w) - 0.5 || y < -0.5 ||
                y > static_cast<double>(h) - 0.5) {
                continue;
            }
            for (std::size_t c = 0; c < 3; ++c) out(oy, ox, c) = sample_bilinear(img, y, x, c);
        }
    }
    return out;
}

Tensor aug_shift(const Tensor& img, int dx, int dy) {
    require_rgb(img, "aug_shift");
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(img.extent(0));
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(img.extent(1));
    Tensor out(img.shape(), 0.0);
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = x - dx;
            const std::ptrdiff_t sy = y - dy;
            if (sx < 0 || sx >= w || sy < 0 || sy >= h) continue;
            for (std::size_t c = 0; c < 3; ++c) {
                out(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) =
                    img(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), c);
            }
        }
    }
    return out;
}

Tensor lowpass(const Tensor& img, double sigma) {
    require_rgb(img, "lowpass");
    if (!(sigma > 0.0 && sigma <= 5.0)) {
        throw ConfigError("lowpass: sigma must be in (0,5], got " + std::to_string(sigma));
    }
    const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        kernel[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : kernel) v /= sum;

    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(img.extent(0));
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(img.extent(1));
    // separable passes, replicated edges
    Tensor tmp(img.shape());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                    const std::ptrdiff_t xx = std::clamp<std::ptrdiff_t>(x + k, 0, w - 1);
                    acc += kernel[static_cast<std::size_t>(k + radius)] *
                           img(static_cast<std::size_t>(y), static_cast<std::size_t>(xx), c);
                }
                tmp(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = acc;
            }
        }
    }
    Tensor out(img.shape());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                    const std::ptrdiff_t yy = std::clamp<std::ptrdiff_t>(y + k, 0, h - 1);
                    acc += kernel[static_cast<std::size_t>(k + radius)] *
                           tmp(static_cast<std::size_t>(yy), static_cast<std::size_t>(x), c);
                }
                out(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = acc;
            }
        }
    }
    return out;
}

Tensor highpass(const Tensor& img, double sigma) {
    Tensor low = lowpass(img, sigma);
    Tensor out(img.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::clamp(img[i] - low[i] + 0.5, 0.0, 1.0);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string diagnostics_text(const PreprocessDiagnostics& d) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "threshold_bin\t%zu\nfallback\t%d\ntheta_deg\t%.4f\nconfidence\t%.4f\n"
                  "mask_pixels\t%zu\nclosing_applied\t%d\n",
                  d.threshold_bin, d.fallback ? 1 : 0, d.theta_deg, d.confidence,
                  d.mask_pixels, d.closing_applied ? 1 : 0);
    return buf;
}

PassportResult passport_pipeline(const Tensor& img, std::size_t out_size, bool flip180) {
    SegmentationResult seg = segment_roi(img);
    OrientationEstimate orient = estimate_orientation(seg.mask);
    Tensor passport = passport_crop(img, seg.mask, orient, out_size);
    if (flip180) passport = hflip(vflip(passport));

    PassportResult res;
    res.image = std::move(passport);
    res.mask = std::move(seg.mask);
    res.diag.threshold_bin = seg.threshold.bin;
    res.diag.fallback = seg.threshold.fallback;
    res.diag.theta_deg = orient.theta * 180.0 / kPi;
    res.diag.confidence = orient.confidence;
    res.diag.mask_pixels = res.mask.pixel_count;
    res.diag.closing_applied = seg.closing_applied;
    return res;
}

} // namespace callo
