#include "dseno/core/tensor.hpp"

#include <functional>
#include <numeric>

namespace dseno {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::shape_mismatch: return "shape mismatch";
        case Errc::even_kernel: return "even kernel size";
        case Errc::bad_dilation: return "non-positive dilation";
        case Errc::dtype_mismatch: return "dtype mismatch";
        case Errc::invalid_config: return "invalid configuration";
        case Errc::unknown_name: return "unknown name";
        case Errc::io_failure: return "i/o failure";
        case Errc::corrupt_file: return "corrupt file";
        case Errc::data_mismatch: return "data mismatch";
        case Errc::non_finite: return "non-finite value";
        case Errc::divergence: return "divergence";
    }
    return "unknown";
}

std::string_view to_string(DType dtype) noexcept {
    return dtype == DType::float32 ? "float32" : "float64";
}

std::size_t numel(const Shape& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + ")";
}

}  // namespace dseno
