#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dseno/cli/run_config.hpp"

namespace dseno::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

struct RunSummary {
    std::string model;
    std::string kind;
    std::size_t params = 0;
    std::size_t epochs = 0;
    double final_train_rel_l2 = 0;
    double final_test_rel_l2 = 0;
    double best_test_rel_l2 = 0;
    std::size_t best_epoch = 0;
};

/// Trains `spec` on the configured dataset and writes run.cfg, metrics.csv,
/// checkpoint/ and report.txt under cfg.out_dir. Progress lines go to `log`.
RunSummary run_training(const RunConfig& cfg, const ModelSpec& spec, bool resume, std::ostream& log);

/// Text of report.txt.
std::string format_report(const RunSummary& s, const RunConfig& cfg);

/// Entry point of the dseno tool. Diagnostics go to `err` as one line; the
/// return value is the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dseno::cli
