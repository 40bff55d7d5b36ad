#include "eeo/spectrum.hpp"

#include <cmath>

#include "eeo/errors.hpp"

namespace eeo {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place, stride-able so columns work too.
void fft_pow2(std::complex<double>* data, int n, int stride) {
    // Bit-reversal permutation.
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i * stride], data[j * stride]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / len;
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0);
            for (int k = 0; k < len / 2; ++k) {
                const std::complex<double> u = data[(i + k) * stride];
                const std::complex<double> v = data[(i + k + len / 2) * stride] * w;
                data[(i + k) * stride] = u + v;
                data[(i + k + len / 2) * stride] = u - v;
                w *= wlen;
            }
        }
    }
}

void dft_naive(std::complex<double>* data, int n, int stride) {
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        std::complex<double> acc(0.0);
        for (int t = 0; t < n; ++t) {
            const double ang = -2.0 * kPi * k * t / n;
            acc += data[t * stride] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[static_cast<std::size_t>(k)] = acc;
    }
    for (int k = 0; k < n; ++k) data[k * stride] = out[static_cast<std::size_t>(k)];
}

void transform_1d(std::complex<double>* data, int n, int stride) {
    if (is_pow2(n)) {
        fft_pow2(data, n, stride);
    } else {
        dft_naive(data, n, stride);
    }
}

std::vector<double> resize_grid(const std::vector<double>& in, int h, int w, int out_h, int out_w) {
    std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = std::max(0, std::min(h - 1, static_cast<int>(std::floor(fy))));
        const int y1 = std::min(h - 1, y0 + 1);
        const double wy = std::min(1.0, std::max(0.0, fy - y0));
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = std::max(0, std::min(w - 1, static_cast<int>(std::floor(fx))));
            const int x1 = std::min(w - 1, x0 + 1);
            const double wx = std::min(1.0, std::max(0.0, fx - x0));
            out[static_cast<std::size_t>(y) * out_w + x] =
                (1 - wy) * ((1 - wx) * in[static_cast<std::size_t>(y0) * w + x0] +
                            wx * in[static_cast<std::size_t>(y0) * w + x1]) +
                wy * ((1 - wx) * in[static_cast<std::size_t>(y1) * w + x0] +
                      wx * in[static_cast<std::size_t>(y1) * w + x1]);
        }
    }
    return out;
}

} // namespace

void dft_2d(std::vector<std::complex<double>>& grid, int h, int w) {
    if (grid.size() != static_cast<std::size_t>(h) * w) {
        throw ShapeError("dft_2d: grid size does not match extents");
    }
    for (int y = 0; y < h; ++y) transform_1d(grid.data() + static_cast<std::size_t>(y) * w, w, 1);
    for (int x = 0; x < w; ++x) transform_1d(grid.data() + x, h, w);
}

Tensor extract_spectrum(const ImageU8& img, int size) {
    if (img.height <= 0 || img.width <= 0 || img.pixels.empty()) {
        throw ValueError("extract_spectrum: empty image");
    }
    const int H = img.height, W = img.width;

    std::vector<std::complex<double>> grid(static_cast<std::size_t>(H) * W);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double g = 0.0;
            for (int c = 0; c < img.channels; ++c) g += img.at(y, x, c);
            grid[static_cast<std::size_t>(y) * W + x] = g / img.channels;
        }
    }
    dft_2d(grid, H, W);

    // log(1+|F|), DC moved to the center.
    std::vector<double> shifted(static_cast<std::size_t>(H) * W);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double mag = std::abs(grid[static_cast<std::size_t>(y) * W + x]);
            const int ys = (y + H / 2) % H;
            const int xs = (x + W / 2) % W;
            shifted[static_cast<std::size_t>(ys) * W + xs] = std::log1p(mag);
        }
    }

    const std::vector<double> resized = resize_grid(shifted, H, W, size, size);

    double sum = 0.0, sq = 0.0;
    for (double v : resized) {
        sum += v;
        sq += v * v;
    }
    const double n = static_cast<double>(resized.size());
    const double mean = sum / n;
    const double std = std::sqrt(std::max(0.0, sq / n - mean * mean));
    const double inv = 1.0 / (std + 1e-9);

    Tensor out({size, size});
    for (std::size_t i = 0; i < resized.size(); ++i) {
        out[i] = static_cast<float>((resized[i] - mean) * inv);
    }
    out.require_finite("spectrum feature");
    return out;
}

} // namespace eeo
