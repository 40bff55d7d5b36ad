#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "eeo/tensor.hpp"

namespace eeo {

/// Interleaved 8-bit image, row-major, 1 (gray) or 3 (RGB) channels.
struct ImageU8 {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    ImageU8() = default;
    ImageU8(int h, int w, int c)
        : height(h), width(w), channels(c),
          pixels(static_cast<std::size_t>(h) * w * c, 0) {}

    std::uint8_t& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool operator==(const ImageU8&) const = default;
};

/// Decodes PNG or binary PPM/PGM from memory, sniffing the signature.
ImageU8 decode_image(const std::vector<std::uint8_t>& bytes);
ImageU8 load_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_ppm(const ImageU8& img);
void save_ppm(const ImageU8& img, const std::filesystem::path& path);

ImageU8 resize_bilinear(const ImageU8& img, int out_h, int out_w);

/// [C,H,W] float tensor scaled to [0,1].
Tensor image_to_tensor(const ImageU8& img);

/// Stacks equally-shaped images into a [N,C,H,W] batch.
Tensor images_to_batch(const std::vector<ImageU8>& images);

} // namespace eeo
