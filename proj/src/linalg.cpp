#include "callo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "callo/error.hpp"

namespace callo {

EigenResult jacobi_eigen(const Tensor& sym) {
    if (sym.rank() != 2 || sym.extent(0) != sym.extent(1)) {
        throw DimensionError("jacobi_eigen: need a square matrix, got " + sym.shape_str());
    }
    const std::size_t n = sym.extent(0);
    Tensor a = sym;
    Tensor v({n, n}, 0.0);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    double norm = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) norm += a[i] * a[i];
    const double tol = 1e-14 * std::max(1.0, std::sqrt(norm));

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        }
        if (std::sqrt(2.0 * off) < tol) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < tol * 1e-3) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    EigenResult res;
    res.values = Tensor({n});
    res.vectors = Tensor({n, n});
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        res.values[j] = a(src, src);
        // canonical sign: largest-magnitude entry positive
        std::size_t arg = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (std::abs(v(i, src)) > std::abs(v(arg, src))) arg = i;
        }
        const double flip = v(arg, src) < 0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) res.vectors(i, j) = flip * v(i, src);
    }
    return res;
}

} // namespace callo
