#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dseno/core/tensor.hpp"

namespace dseno::cli {

enum class FieldFormat { csv, pgm };

FieldFormat parse_field_format(const std::string& text);

/// One line per grid row, comma-separated shortest round-trip decimals.
std::string field_csv(std::span<const double> field, std::size_t h, std::size_t w);

struct PgmImage {
    std::string bytes;  // binary P5, 8-bit, maxval 255
    double min = 0;
    double max = 0;
};

/// pixel = round(255 (v - min) / (max - min)); a constant field maps to 0.
PgmImage field_pgm(std::span<const double> field, std::size_t h, std::size_t w);

/// Writes <stem>_c<k>_{truth,pred,error}.<ext> for every channel k of the
/// (C, H, W) or (1, C, H, W) fields, where error = |pred - truth|. PGM files get
/// a <file>.scale.txt sidecar holding min and max. Returns the written paths.
std::vector<std::filesystem::path> export_fields(const Tensor<double>& truth, const Tensor<double>& pred,
                                                 const std::filesystem::path& dir, const std::string& stem,
                                                 FieldFormat format);

}  // namespace dseno::cli
