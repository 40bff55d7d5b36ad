#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>

#include "eeo/dataset.hpp"
#include "eeo/distortion.hpp"
#include "eeo/rng.hpp"
#include "eeo/errors.hpp"
#include "eeo/spectrum.hpp"

using namespace eeo;

namespace {

// O(n^2) reference DFT, independent of the radix-2 path.
std::vector<std::complex<double>> dft2_reference(const std::vector<std::complex<double>>& in,
                                                 int h, int w) {
    std::vector<std::complex<double>> out(in.size());
    for (int ky = 0; ky < h; ++ky) {
        for (int kx = 0; kx < w; ++kx) {
            std::complex<double> acc(0.0);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const double ang = -2.0 * M_PI * (static_cast<double>(ky) * y / h +
                                                      static_cast<double>(kx) * x / w);
                    acc += in[static_cast<std::size_t>(y) * w + x] *
                           std::complex<double>(std::cos(ang), std::sin(ang));
                }
            }
            out[static_cast<std::size_t>(ky) * w + kx] = acc;
        }
    }
    return out;
}

// Band-energy oracle: mean log-magnitude of the raw (unstandardized)
// centered spectrum outside a radius, computed straight from dft_2d.
double raw_band_mean(const ImageU8& img, double min_radius_frac) {
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
    const double cy = H / 2.0, cx = W / 2.0;
    double sum = 0.0;
    int count = 0;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const int ys = (y + H / 2) % H;
            const int xs = (x + W / 2) % W;
            const double r = std::hypot(ys - cy, xs - cx);
            if (r >= min_radius_frac * std::min(H, W) / 2.0) {
                sum += std::log1p(std::abs(grid[static_cast<std::size_t>(y) * W + x]));
                ++count;
            }
        }
    }
    return sum / count;
}

ImageU8 sample_image(int idx) { return render_shape_image(idx % 3, 77, static_cast<std::uint64_t>(idx)); }

} // namespace

TEST_CASE("radix-2 FFT matches the direct DFT") {
    Rng rng(5);
    const int h = 16, w = 16;  // power of two: exercises the fast path
    std::vector<std::complex<double>> grid(static_cast<std::size_t>(h) * w);
    for (auto& v : grid) v = {rng.uniform(-1.0, 1.0), 0.0};
    const auto want = dft2_reference(grid, h, w);
    auto got = grid;
    dft_2d(got, h, w);
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(std::abs(got[i] - want[i]) < 1e-9);
    }
}

TEST_CASE("non-power-of-two extents fall back to the direct transform") {
    Rng rng(6);
    const int h = 12, w = 10;
    std::vector<std::complex<double>> grid(static_cast<std::size_t>(h) * w);
    for (auto& v : grid) v = {rng.uniform(-1.0, 1.0), 0.0};
    const auto want = dft2_reference(grid, h, w);
    auto got = grid;
    dft_2d(got, h, w);
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(std::abs(got[i] - want[i]) < 1e-8);
    }
}

TEST_CASE("constant image concentrates at the centered DC bin") {
    ImageU8 flat(32, 32, 3);
    for (auto& p : flat.pixels) p = 200;
    const Tensor spec = extract_spectrum(flat, 32);
    // After the center shift, DC sits at (16,16); it must be the unique max.
    int best = 0;
    for (std::size_t i = 1; i < spec.size(); ++i) {
        if (spec[i] > spec[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    CHECK(best / 32 == 16);
    CHECK(best % 32 == 16);
}

TEST_CASE("blur lowers and noise raises the high-frequency band") {
    for (int idx = 0; idx < 6; ++idx) {
        const ImageU8 img = sample_image(idx);
        const double base = raw_band_mean(img, 0.6);
        CHECK(raw_band_mean(apply_blur(img, 5.0f), 0.6) < base);
        CHECK(raw_band_mean(apply_noise(img, 40.0f, 123 + idx), 0.6) > base);
    }
}

TEST_CASE("magnitude spectrum is invariant under circular translation") {
    const ImageU8 img = sample_image(1);
    ImageU8 shifted(img.height, img.width, img.channels);
    const int dy = 7, dx = 11;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                shifted.at((y + dy) % img.height, (x + dx) % img.width, c) = img.at(y, x, c);
            }
        }
    }
    const Tensor a = extract_spectrum(img);
    const Tensor b = extract_spectrum(shifted);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += a[i] * a[i];
    }
    CHECK(std::sqrt(num / den) < 1e-4);
}

TEST_CASE("extract_spectrum is pure and standardized") {
    const ImageU8 img = sample_image(2);
    const Tensor a = extract_spectrum(img);
    const Tensor b = extract_spectrum(img);
    CHECK(a == b);
    CHECK(a.shape() == Shape{64, 64});

    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += a[i];
        sq += static_cast<double>(a[i]) * a[i];
    }
    const double n = static_cast<double>(a.size());
    CHECK(std::abs(sum / n) < 1e-4);
    CHECK(sq / n == doctest::Approx(1.0).epsilon(1e-3));

    CHECK_THROWS_AS(extract_spectrum(ImageU8()), Error);
}
