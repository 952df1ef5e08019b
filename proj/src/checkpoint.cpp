#include "hgfnd/checkpoint.hpp"

#include "hgfnd/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

namespace hgfnd {
namespace {

constexpr char kMagic[4] = {'H', 'G', 'C', 'K'};
constexpr std::uint32_t kMaxNameLength = 4096;
constexpr std::uint32_t kMaxTensors = 1u << 20;

template <typename U>
void put_le(std::ostream& out, U v) {
    unsigned char b[sizeof(U)];
    for (std::size_t k = 0; k < sizeof(U); ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xFFu);
    out.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <typename U>
U get_le(std::istream& in, const char* what) {
    unsigned char b[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(U))) throw FormatError(std::string("checkpoint truncated in ") + what);
    U v = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k) v |= static_cast<U>(b[k]) << (8 * k);
    return v;
}

template <typename Real>
using Bits = std::conditional_t<sizeof(Real) == 4, std::uint32_t, std::uint64_t>;

struct Header {
    std::uint32_t precision_bytes = 0;
    std::uint32_t tensors = 0;
};

Header read_header(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4)) throw FormatError("checkpoint truncated in header");
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a checkpoint (bad magic)");
    const auto version = get_le<std::uint32_t>(in, "header");
    if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    Header h;
    h.precision_bytes = get_le<std::uint32_t>(in, "header");
    if (h.precision_bytes != 4 && h.precision_bytes != 8) throw FormatError("checkpoint precision must be 4 or 8 bytes");
    h.tensors = get_le<std::uint32_t>(in, "header");
    if (h.tensors > kMaxTensors) throw FormatError("checkpoint tensor count is implausible");
    return h;
}

} // namespace

template <typename Real>
void save_checkpoint(std::ostream& out, const ModelParams<Real>& params) {
    out.write(kMagic, 4);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint32_t>(out, sizeof(Real));
    std::uint32_t count = 0;
    params.visit([&](const std::string&, const Matrix<Real>&) { ++count; });
    put_le<std::uint32_t>(out, count);
    params.visit([&](const std::string& name, const Matrix<Real>& m) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_le<std::uint32_t>(out, 2);
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
        for (Eigen::Index k = 0; k < m.size(); ++k) put_le(out, std::bit_cast<Bits<Real>>(m.data()[k]));
    });
    if (!out) throw FormatError("failed to write checkpoint");
}

template <typename Real>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<Real>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    save_checkpoint(out, params);
}

Precision checkpoint_precision(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path.string());
    return read_header(in).precision_bytes == 4 ? Precision::F32 : Precision::F64;
}

template <typename Real>
ModelParams<Real> load_checkpoint(std::istream& in, const std::optional<ModelDims>& expected) {
    const Header header = read_header(in);
    if (header.precision_bytes != sizeof(Real)) {
        throw ValidationError("checkpoint stores " + std::to_string(8 * header.precision_bytes) +
                              "-bit values but " + std::to_string(8 * sizeof(Real)) + "-bit were requested");
    }
    std::map<std::string, Matrix<Real>> tensors;
    for (std::uint32_t t = 0; t < header.tensors; ++t) {
        const auto len = get_le<std::uint32_t>(in, "tensor name");
        if (len == 0 || len > kMaxNameLength) throw FormatError("checkpoint tensor name length is implausible");
        std::string name(len, '\0');
        if (!in.read(name.data(), len)) throw FormatError("checkpoint truncated in tensor name");
        const auto rank = get_le<std::uint32_t>(in, "tensor rank");
        if (rank != 2) throw FormatError("checkpoint tensor " + name + " has rank " + std::to_string(rank));
        const auto rows = get_le<std::uint32_t>(in, "tensor dims");
        const auto cols = get_le<std::uint32_t>(in, "tensor dims");
        const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
        if (count > (1ull << 32)) throw FormatError("checkpoint tensor " + name + " is implausibly large");
        // Grown one value at a time so a corrupt size fails on truncation, not allocation.
        std::vector<Real> values;
        for (std::uint64_t k = 0; k < count; ++k) values.push_back(std::bit_cast<Real>(get_le<Bits<Real>>(in, name.c_str())));
        Matrix<Real> m(rows, cols);
        if (count > 0) std::memcpy(m.data(), values.data(), values.size() * sizeof(Real));
        if (!tensors.emplace(name, std::move(m)).second) throw FormatError("checkpoint repeats tensor " + name);
    }

    const auto find = [&](const std::string& name) -> const Matrix<Real>& {
        const auto it = tensors.find(name);
        if (it == tensors.end()) throw FormatError("checkpoint lacks tensor " + name);
        return it->second;
    };
    const auto& input = find("tree.input_weight");
    std::size_t layers = 0;
    while (tensors.count("layer" + std::to_string(layers) + ".w1")) ++layers;
    const ModelDims dims{static_cast<std::size_t>(input.rows()), static_cast<std::size_t>(input.cols()), layers};
    if (expected && !(*expected == dims)) {
        throw ShapeError("checkpoint dimensions (input " + std::to_string(dims.input_dim) + ", hidden " +
                         std::to_string(dims.hidden_dim) + ", layers " + std::to_string(dims.layers) +
                         ") differ from the configured model (input " + std::to_string(expected->input_dim) +
                         ", hidden " + std::to_string(expected->hidden_dim) + ", layers " +
                         std::to_string(expected->layers) + ")");
    }
    if (layers == 0) throw ShapeError("checkpoint has no attention layers");
    ModelParams<Real> params = ModelParams<Real>::zeros(dims);
    std::size_t used = 0;
    params.visit([&](const std::string& name, Matrix<Real>& m) {
        const auto& stored = find(name);
        if (stored.rows() != m.rows() || stored.cols() != m.cols()) {
            throw ShapeError("checkpoint tensor " + name + " is " + std::to_string(stored.rows()) + "x" +
                             std::to_string(stored.cols()) + ", expected " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()));
        }
        m = stored;
        ++used;
    });
    if (used != tensors.size()) throw FormatError("checkpoint contains unknown tensors");
    return params;
}

template <typename Real>
ModelParams<Real> load_checkpoint(const std::filesystem::path& path, const std::optional<ModelDims>& expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path.string());
    return load_checkpoint<Real>(in, expected);
}

#define HGFND_INSTANTIATE(Real)                                                                                       \
    template void save_checkpoint<Real>(std::ostream&, const ModelParams<Real>&);                                    \
    template void save_checkpoint<Real>(const std::filesystem::path&, const ModelParams<Real>&);                     \
    template ModelParams<Real> load_checkpoint<Real>(std::istream&, const std::optional<ModelDims>&);                \
    template ModelParams<Real> load_checkpoint<Real>(const std::filesystem::path&, const std::optional<ModelDims>&);

HGFND_INSTANTIATE(float)
HGFND_INSTANTIATE(double)
#undef HGFND_INSTANTIATE

} // namespace hgfnd
