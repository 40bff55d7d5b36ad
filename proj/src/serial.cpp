#include "eeo/serial.hpp"

#include <fstream>

namespace eeo {

void BinaryWriter::to_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw ConfigError("short write to " + path.string());
}

BinaryReader BinaryReader::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open for reading: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return make_owning_reader(std::move(bytes));
}

BinaryReader make_owning_reader(std::vector<std::uint8_t> bytes) {
    BinaryReader r({});
    r.owned_ = std::move(bytes);
    r.data_ = r.owned_;
    return r;
}

} // namespace eeo
