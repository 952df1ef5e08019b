#include "hgfnd/matrix_io.hpp"

#include "hgfnd/error.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace hgfnd {
namespace {

std::uint32_t decode_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void encode_u32(std::uint32_t v, unsigned char* p) {
    p[0] = static_cast<unsigned char>(v & 0xFFu);
    p[1] = static_cast<unsigned char>((v >> 8) & 0xFFu);
    p[2] = static_cast<unsigned char>((v >> 16) & 0xFFu);
    p[3] = static_cast<unsigned char>((v >> 24) & 0xFFu);
}

} // namespace

FeatureMatrix read_matrix(std::istream& in) {
    std::array<unsigned char, 12> header{};
    if (!in.read(reinterpret_cast<char*>(header.data()), header.size())) {
        throw FormatError("matrix file: truncated header");
    }
    if (std::memcmp(header.data(), kMatrixMagic, 4) != 0) {
        throw FormatError("matrix file: bad magic (expected HGFD)");
    }
    const std::uint32_t rows = decode_u32(header.data() + 4);
    const std::uint32_t cols = decode_u32(header.data() + 8);

    FeatureMatrix m(rows, cols);
    const std::size_t count = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> payload(count * 4);
    if (count > 0 && !in.read(reinterpret_cast<char*>(payload.data()),
                              static_cast<std::streamsize>(payload.size()))) {
        throw FormatError("matrix file: truncated payload");
    }
    float* out = m.data();
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = std::bit_cast<float>(decode_u32(payload.data() + 4 * i));
    }
    return m;
}

FeatureMatrix read_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open matrix file " + path.string());
    }
    return read_matrix(in);
}

void write_matrix(std::ostream& out, const FeatureMatrix& m) {
    std::array<unsigned char, 12> header{};
    std::memcpy(header.data(), kMatrixMagic, 4);
    encode_u32(static_cast<std::uint32_t>(m.rows()), header.data() + 4);
    encode_u32(static_cast<std::uint32_t>(m.cols()), header.data() + 8);
    out.write(reinterpret_cast<const char*>(header.data()), header.size());

    const std::size_t count = static_cast<std::size_t>(m.size());
    std::vector<unsigned char> payload(count * 4);
    const float* in = m.data();
    for (std::size_t i = 0; i < count; ++i) {
        encode_u32(std::bit_cast<std::uint32_t>(in[i]), payload.data() + 4 * i);
    }
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
}

void write_matrix(const std::filesystem::path& path, const FeatureMatrix& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError("cannot create matrix file " + path.string());
    }
    write_matrix(out, m);
}

} // namespace hgfnd
