#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dseno/cli/run_config.hpp"

namespace dseno::cli {

/// Ablation axes, read from a key = value file:
///   rows       = Darcy-F, Darcy-F w/o SE     explicit table rows
///   benchmark  = airfoil                     axes below expand over this benchmark
///   depth      = A, B, C                     table depth letters
///   se         = on, off, pm                 default on
///   schedule   = main, alt                   default main
///   width      = 32, 48                      default: the benchmark width
///   resolution = 32, 64, 128, 256            resolution rows ("Darcy-64")
///   fno_modes  = 8, 16, 32                   FNO+ baseline rows
/// An empty file gives an empty matrix.
struct AblationMatrix {
    std::vector<std::string> rows;
    std::string benchmark;
    std::vector<std::string> depth;
    std::vector<std::string> se = {"on"};
    std::vector<std::string> schedule = {"main"};
    std::vector<std::size_t> width;
    std::vector<std::size_t> resolution;
    std::vector<std::size_t> fno_modes;
};

AblationMatrix parse_ablation_matrix_text(std::string_view text, const std::string& source);
AblationMatrix parse_ablation_matrix(const std::filesystem::path& path);

struct AblationCell {
    std::string name;
    ModelSpec spec;
};

/// Cells in file order: explicit rows, then depth x schedule x se x width,
/// then resolution rows, then FNO+ rows. Unknown row names throw
/// ConfigError(unknown_name).
std::vector<AblationCell> expand_matrix(const AblationMatrix& matrix);

struct AblationResult {
    std::string model;
    std::size_t blocks = 0;
    std::size_t params = 0;
    std::optional<double> rel_l2;
};

std::size_t block_count(const ModelSpec& spec);

/// Parameter count in millions with three decimals, e.g. "1.042".
std::string format_millions(std::size_t params);

/// Header "model,blocks,params,params_m,rel_l2"; rel_l2 is empty when not trained.
std::string ablation_csv(const std::vector<AblationResult>& rows);

}  // namespace dseno::cli
