#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "eeo/errors.hpp"
#include "eeo/tensor.hpp"

namespace eeo {

/// Little-endian binary writer used by checkpoints, dataset caches and the
/// wire codec.
class BinaryWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void magic(const char m[5]) { buf_.insert(buf_.end(), m, m + 4); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void bytes(const std::uint8_t* data, std::size_t n) { buf_.insert(buf_.end(), data, data + n); }
    void tensor(const Tensor& t) {
        u32(static_cast<std::uint32_t>(t.rank()));
        for (int d : t.shape()) u32(static_cast<std::uint32_t>(d));
        for (std::size_t i = 0; i < t.size(); ++i) f32(t[i]);
    }

    const std::vector<std::uint8_t>& data() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }
    void to_file(const std::filesystem::path& path) const;

private:
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader; all reads throw FormatError::Truncated
/// past the end rather than returning partial objects.
class BinaryReader {
public:
    explicit BinaryReader(std::span<const std::uint8_t> data) : data_(data) {}
    static BinaryReader from_file(const std::filesystem::path& path);

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    void expect_magic(const char m[5]) {
        need(4);
        if (std::memcmp(data_.data() + pos_, m, 4) != 0) {
            throw FormatError(FormatError::Code::BadMagic,
                              std::string("bad magic, expected '") + m + "'");
        }
        pos_ += 4;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    void bytes(std::uint8_t* out, std::size_t n) {
        need(n);
        std::memcpy(out, data_.data() + pos_, n);
        pos_ += n;
    }
    Tensor tensor() {
        const std::uint32_t rank = u32();
        if (rank > 8) throw FormatError(FormatError::Code::Malformed, "tensor rank > 8");
        Shape shape;
        for (std::uint32_t i = 0; i < rank; ++i) {
            const std::uint32_t d = u32();
            if (d == 0 || d > (1u << 28)) {
                throw FormatError(FormatError::Code::LengthMismatch,
                                  "tensor dimension " + std::to_string(d) + " out of range");
            }
            shape.push_back(static_cast<int>(d));
        }
        const std::size_t n = shape_size(shape);
        if (remaining() < n * 4) {
            throw FormatError(FormatError::Code::LengthMismatch,
                              "tensor payload shorter than its shape " + shape_str(shape));
        }
        std::vector<float> data(n);
        for (std::size_t i = 0; i < n; ++i) data[i] = f32();
        return Tensor(std::move(shape), std::move(data));
    }

    std::size_t remaining() const { return data_.size() - pos_; }
    void expect_end() const {
        if (pos_ != data_.size()) {
            throw FormatError(FormatError::Code::LengthMismatch,
                              std::to_string(data_.size() - pos_) + " trailing bytes");
        }
    }

private:
    void need(std::size_t n) {
        if (pos_ + n > data_.size()) {
            throw FormatError(FormatError::Code::Truncated,
                              "input truncated at byte " + std::to_string(pos_));
        }
    }

    std::span<const std::uint8_t> data_;
    std::vector<std::uint8_t> owned_;
    std::size_t pos_ = 0;

    friend BinaryReader make_owning_reader(std::vector<std::uint8_t> bytes);
};

BinaryReader make_owning_reader(std::vector<std::uint8_t> bytes);

} // namespace eeo
