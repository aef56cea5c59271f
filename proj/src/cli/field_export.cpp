#include "dseno/cli/field_export.hpp"

#include <algorithm>
#include <cmath>

#include "dseno/io/text.hpp"

namespace dseno::cli {

namespace fs = std::filesystem;

FieldFormat parse_field_format(const std::string& text) {
    if (text == "csv") return FieldFormat::csv;
    if (text == "pgm") return FieldFormat::pgm;
    throw ConfigError("unknown export format '" + text + "' (expected csv or pgm)");
}

std::string field_csv(std::span<const double> field, std::size_t h, std::size_t w) {
    std::string out;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            if (x) out += ',';
            out += io::format_double(field[y * w + x]);
        }
        out += '\n';
    }
    return out;
}

PgmImage field_pgm(std::span<const double> field, std::size_t h, std::size_t w) {
    PgmImage img;
    const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
    img.min = field.empty() ? 0.0 : *lo;
    img.max = field.empty() ? 0.0 : *hi;
    img.bytes = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    const double range = img.max - img.min;
    for (double v : field) {
        const long px = range > 0 ? std::lround(255.0 * (v - img.min) / range) : 0;
        img.bytes += static_cast<char>(static_cast<unsigned char>(std::clamp(px, 0L, 255L)));
    }
    return img;
}

std::vector<fs::path> export_fields(const Tensor<double>& truth, const Tensor<double>& pred, const fs::path& dir,
                                    const std::string& stem, FieldFormat format) {
    if (truth.shape() != pred.shape()) {
        throw DataError(Errc::shape_mismatch, "export: truth " + shape_string(truth.shape()) +
                                                  " and prediction " + shape_string(pred.shape()) + " differ");
    }
    const Shape& s = truth.shape();
    const bool batched = s.size() == 4 && s[0] == 1;
    if (s.size() != 3 && !batched) {
        throw DataError(Errc::shape_mismatch, "export expects (C, H, W) fields, got " + shape_string(s));
    }
    const std::size_t c = s[s.size() - 3], h = s[s.size() - 2], w = s[s.size() - 1], plane = h * w;

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError(Errc::io_failure, "cannot create " + dir.string() + ": " + ec.message());

    std::vector<fs::path> written;
    std::vector<double> error(plane);
    for (std::size_t k = 0; k < c; ++k) {
        const std::span<const double> t(truth.raw() + k * plane, plane);
        const std::span<const double> p(pred.raw() + k * plane, plane);
        for (std::size_t i = 0; i < plane; ++i) error[i] = std::abs(p[i] - t[i]);
        const std::pair<const char*, std::span<const double>> fields[] = {
            {"truth", t}, {"pred", p}, {"error", error}};
        for (const auto& [role, data] : fields) {
            const std::string base = stem + "_c" + std::to_string(k) + "_" + role;
            if (format == FieldFormat::csv) {
                written.push_back(dir / (base + ".csv"));
                io::write_text_file(written.back(), field_csv(data, h, w));
            } else {
                const PgmImage img = field_pgm(data, h, w);
                written.push_back(dir / (base + ".pgm"));
                io::write_text_file(written.back(), img.bytes);
                written.push_back(dir / (base + ".pgm.scale.txt"));
                io::write_text_file(written.back(),
                                    "min = " + io::format_double(img.min) + "\nmax = " + io::format_double(img.max) +
                                        "\npixel = round(255 * (value - min) / (max - min))\n");
            }
        }
    }
    return written;
}

}  // namespace dseno::cli
