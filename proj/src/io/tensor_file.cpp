#include "dseno/io/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dseno/io/text.hpp"

namespace dseno::io {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'N', 'T'};
constexpr std::size_t kFixedHeader = 8;

template <typename U>
void put_le(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const unsigned char* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
    return v;
}

template <Scalar T>
using Bits = std::conditional_t<std::is_same_v<T, float>, std::uint32_t, std::uint64_t>;

template <Scalar T>
Tensor<T> decode_payload(const unsigned char* p, Shape shape) {
    Tensor<T> t(std::move(shape));
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(t.raw(), p, t.size() * sizeof(T));
    } else {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::bit_cast<T>(get_le<Bits<T>>(p + i * sizeof(T)));
    }
    return t;
}

[[noreturn]] void corrupt(const std::string& source, const std::string& what) {
    throw DataError(Errc::corrupt_file, source + ": " + what);
}

TensorHeader parse_header(std::string_view bytes, const std::string& source, std::size_t& header_size) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < kFixedHeader) corrupt(source, "truncated header");
    if (std::memcmp(p, kMagic, 4) != 0) corrupt(source, "bad magic (not a DSNT tensor file)");
    const auto version = get_le<std::uint16_t>(p + 4);
    if (version != kTensorFileVersion) corrupt(source, "unsupported version " + std::to_string(version));
    const unsigned dtype = p[6];
    if (dtype > 1) corrupt(source, "unknown dtype " + std::to_string(dtype));
    const std::size_t rank = p[7];
    header_size = kFixedHeader + 8 * rank;
    if (bytes.size() < header_size) corrupt(source, "truncated header");
    TensorHeader h{static_cast<DType>(dtype), Shape(rank)};
    for (std::size_t i = 0; i < rank; ++i) {
        const auto d = get_le<std::uint64_t>(p + kFixedHeader + 8 * i);
        if (d == 0) corrupt(source, "zero extent on axis " + std::to_string(i));
        h.shape[i] = static_cast<std::size_t>(d);
    }
    return h;
}

}  // namespace

DType stored_dtype(const AnyTensor& t) noexcept {
    return std::holds_alternative<Tensor<float>>(t) ? DType::float32 : DType::float64;
}

const Shape& shape_of(const AnyTensor& t) noexcept {
    return std::visit([](const auto& x) -> const Shape& { return x.shape(); }, t);
}

template <Scalar T>
std::string encode_tensor(const Tensor<T>& t) {
    if (t.rank() > 255) throw ConfigError(Errc::shape_mismatch, "tensor rank above 255 cannot be stored");
    std::string out(kMagic, 4);
    out.reserve(kFixedHeader + 8 * t.rank() + t.size() * sizeof(T));
    put_le<std::uint16_t>(out, kTensorFileVersion);
    out.push_back(static_cast<char>(dtype_of<T>()));
    out.push_back(static_cast<char>(t.rank()));
    for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
    if constexpr (std::endian::native == std::endian::little) {
        out.append(reinterpret_cast<const char*>(t.raw()), t.size() * sizeof(T));
    } else {
        for (T v : t.data()) put_le(out, std::bit_cast<Bits<T>>(v));
    }
    return out;
}

AnyTensor decode_tensor(std::string_view bytes, const std::string& source) {
    std::size_t header_size = 0;
    TensorHeader h = parse_header(bytes, source, header_size);
    const std::size_t width = h.dtype == DType::float32 ? 4 : 8;
    const std::size_t expected = numel(h.shape) * width;
    const std::size_t found = bytes.size() - header_size;
    if (found < expected) {
        corrupt(source, "truncated payload: expected " + std::to_string(expected) + " bytes, found " +
                            std::to_string(found));
    }
    if (found > expected) corrupt(source, std::to_string(found - expected) + " trailing bytes after payload");
    const auto* payload = reinterpret_cast<const unsigned char*>(bytes.data()) + header_size;
    if (h.dtype == DType::float32) return decode_payload<float>(payload, std::move(h.shape));
    return decode_payload<double>(payload, std::move(h.shape));
}

template <Scalar T>
void write_tensor(const std::filesystem::path& path, const Tensor<T>& t) {
    const std::string bytes = encode_tensor(t);
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    write_text_file(tmp, bytes);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError(Errc::io_failure, "cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

AnyTensor read_tensor(const std::filesystem::path& path) {
    return decode_tensor(read_text_file(path), path.string());
}

TensorHeader read_tensor_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(Errc::io_failure, "cannot open " + path.string());
    std::string head(kFixedHeader + 8 * 255, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head.size()));
    head.resize(static_cast<std::size_t>(in.gcount()));
    std::size_t header_size = 0;
    return parse_header(head, path.string(), header_size);
}

template <Scalar T>
Tensor<T> read_tensor_as(const std::filesystem::path& path) {
    AnyTensor any = read_tensor(path);
    if (auto* exact = std::get_if<Tensor<T>>(&any)) return std::move(*exact);
    return std::visit([](const auto& t) { return t.template cast<T>(); }, any);
}

template <Scalar T>
Tensor<T> read_tensor_exact(const std::filesystem::path& path) {
    AnyTensor any = read_tensor(path);
    if (auto* exact = std::get_if<Tensor<T>>(&any)) return std::move(*exact);
    throw DataError(Errc::dtype_mismatch, path.string() + ": stored as " + std::string(to_string(stored_dtype(any))) +
                                              ", expected " + std::string(to_string(dtype_of<T>())));
}

#define DSENO_INSTANTIATE(T)                                               \
    template std::string encode_tensor(const Tensor<T>&);                  \
    template void write_tensor(const std::filesystem::path&, const Tensor<T>&); \
    template Tensor<T> read_tensor_as<T>(const std::filesystem::path&);    \
    template Tensor<T> read_tensor_exact<T>(const std::filesystem::path&);

DSENO_INSTANTIATE(float)
DSENO_INSTANTIATE(double)
#undef DSENO_INSTANTIATE

}  // namespace dseno::io
