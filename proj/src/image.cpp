#include "eeo/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

#include "eeo/errors.hpp"

namespace eeo {

namespace {

struct PngReadState {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t offset;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t count) {
    auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (state->offset + count > state->size) {
        png_error(png, "unexpected end of PNG stream");
    }
    std::memcpy(out, state->data + state->offset, count);
    state->offset += count;
}

ImageU8 decode_png(const std::vector<std::uint8_t>& bytes) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("libpng initialization failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("libpng info initialization failed");
    }

    ImageU8 img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(FormatError::Code::Malformed, "malformed PNG data");
    }

    PngReadState state{bytes.data(), bytes.size(), 0};
    png_set_read_fn(png, &state, png_read_from_memory);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_packing(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY &&
        png_get_bit_depth(png, info) < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int c = static_cast<int>(png_get_channels(png, info));
    if (c != 1 && c != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(FormatError::Code::Malformed,
                          "unsupported PNG channel count " + std::to_string(c));
    }

    img = ImageU8(h, w, c);
    rows.resize(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) {
        rows[static_cast<std::size_t>(y)] = img.pixels.data() + static_cast<std::size_t>(y) * w * c;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

// Binary PPM (P6) and PGM (P5).
ImageU8 decode_pnm(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    auto next_token = [&]() -> std::string {
        std::string tok;
        while (pos < bytes.size()) {
            const char ch = static_cast<char>(bytes[pos]);
            if (ch == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(ch))) {
                if (!tok.empty()) return tok;
                ++pos;
            } else {
                tok.push_back(ch);
                ++pos;
            }
        }
        if (tok.empty()) throw FormatError(FormatError::Code::Truncated, "truncated PNM header");
        return tok;
    };

    const std::string magic = next_token();
    int channels = 0;
    if (magic == "P6") channels = 3;
    else if (magic == "P5") channels = 1;
    else throw FormatError(FormatError::Code::BadMagic, "unsupported PNM magic '" + magic + "'");

    const int w = std::stoi(next_token());
    const int h = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (w <= 0 || h <= 0) throw FormatError(FormatError::Code::Malformed, "non-positive PNM dimensions");
    if (maxval != 255) {
        throw FormatError(FormatError::Code::Malformed,
                          "only 8-bit PNM supported, maxval=" + std::to_string(maxval));
    }
    ++pos;  // single whitespace after maxval

    ImageU8 img(h, w, channels);
    if (bytes.size() - pos < img.pixels.size()) {
        throw FormatError(FormatError::Code::Truncated, "PNM pixel data truncated");
    }
    std::memcpy(img.pixels.data(), bytes.data() + pos, img.pixels.size());
    return img;
}

} // namespace

ImageU8 decode_image(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
        return decode_pnm(bytes);
    }
    throw FormatError(FormatError::Code::BadMagic, "unrecognized image signature (PNG/PPM supported)");
}

ImageU8 load_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open image file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return decode_image(bytes);
    } catch (const FormatError& e) {
        throw ConfigError("unreadable image file " + path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_ppm(const ImageU8& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw ValueError("encode_ppm supports 1 or 3 channels");
    }
    char header[64];
    const int n = std::snprintf(header, sizeof(header), "%s\n%d %d\n255\n",
                                img.channels == 3 ? "P6" : "P5", img.width, img.height);
    std::vector<std::uint8_t> out(header, header + n);
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

void save_ppm(const ImageU8& img, const std::filesystem::path& path) {
    const auto bytes = encode_ppm(img);
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw ConfigError("cannot write image file " + path.string());
    outf.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ImageU8 resize_bilinear(const ImageU8& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw ValueError("resize target must be positive");
    if (img.height == out_h && img.width == out_w) return img;
    ImageU8 out(out_h, out_w, img.channels);
    const double sy = static_cast<double>(img.height) / out_h;
    const double sx = static_cast<double>(img.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = std::max(0, std::min(img.height - 1, static_cast<int>(std::floor(fy))));
        const int y1 = std::min(img.height - 1, y0 + 1);
        const double wy = std::min(1.0, std::max(0.0, fy - y0));
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = std::max(0, std::min(img.width - 1, static_cast<int>(std::floor(fx))));
            const int x1 = std::min(img.width - 1, x0 + 1);
            const double wx = std::min(1.0, std::max(0.0, fx - x0));
            for (int c = 0; c < img.channels; ++c) {
                const double v =
                    (1 - wy) * ((1 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c)) +
                    wy * ((1 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c));
                out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::min(255.0, std::max(0.0, v))));
            }
        }
    }
    return out;
}

Tensor image_to_tensor(const ImageU8& img) {
    Tensor t({img.channels, img.height, img.width});
    float* d = t.data();
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                *d++ = static_cast<float>(img.at(y, x, c)) / 255.0f;
            }
        }
    }
    return t;
}

Tensor images_to_batch(const std::vector<ImageU8>& images) {
    if (images.empty()) throw ValueError("images_to_batch: empty batch");
    const ImageU8& first = images.front();
    Tensor batch({static_cast<int>(images.size()), first.channels, first.height, first.width});
    const std::size_t plane = static_cast<std::size_t>(first.channels) * first.height * first.width;
    for (std::size_t n = 0; n < images.size(); ++n) {
        const ImageU8& img = images[n];
        if (img.height != first.height || img.width != first.width || img.channels != first.channels) {
            throw ShapeError("images_to_batch: image " + std::to_string(n) + " has mismatched dimensions");
        }
        const Tensor t = image_to_tensor(img);
        std::copy(t.data(), t.data() + plane, batch.data() + n * plane);
    }
    return batch;
}

} // namespace eeo
