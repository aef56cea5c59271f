#include "dseno/model/config.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace dseno::model {

void ModelConfig::validate() const {
    if (in_channels == 0 || out_channels == 0 || width == 0 || proj_hidden == 0) {
        throw ConfigError("model '" + name + "': channel counts and widths must be positive");
    }
    if (blocks.empty()) throw ConfigError("model '" + name + "': needs at least one DS block");
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const DSBlockConfig& blk = blocks[b];
        const std::string where = "model '" + name + "' block " + std::to_string(b);
        if (blk.width != width) {
            throw ConfigError(Errc::shape_mismatch, where + ": width " + std::to_string(blk.width) +
                                                        " differs from model width " + std::to_string(width));
        }
        for (const ConvSpec* c : {&blk.conv1, &blk.conv2}) {
            if (c->kernel % 2 == 0) {
                throw ConfigError(Errc::even_kernel, where + ": kernel size " + std::to_string(c->kernel) +
                                                         " must be odd");
            }
        }
        if (blk.dilation.x <= 0 || blk.dilation.y <= 0) {
            throw ConfigError(Errc::bad_dilation, where + ": dilation must be positive");
        }
        if (blk.se) {
            if (blk.se->reduction == 0 || width % blk.se->reduction != 0) {
                throw ConfigError(where + ": SE reduction " + std::to_string(blk.se->reduction) +
                                  " must divide width " + std::to_string(width));
            }
            if (blk.pm_convs) throw ConfigError(where + ": PM convs are only allowed without SE");
        }
    }
}

std::size_t parameter_count(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t c = cfg.width;
    std::size_t total = cfg.in_channels * c + c;
    for (const DSBlockConfig& b : cfg.blocks) {
        total += c * c * b.conv1.kernel * b.conv1.kernel + (b.conv1.bias ? c : 0);
        total += c * c * b.conv2.kernel * b.conv2.kernel + (b.conv2.bias ? c : 0);
        if (b.se) {
            const std::size_t reduced = c / b.se->reduction;
            total += 2 * c * reduced + reduced + c;
        } else if (b.pm_convs) {
            total += 2 * (c * c + c);
        }
    }
    total += c * cfg.proj_hidden + cfg.proj_hidden + cfg.proj_hidden * cfg.out_channels + cfg.out_channels;
    return total;
}

ReceptiveField receptive_field(const ModelConfig& cfg) {
    ReceptiveField rf;
    for (const DSBlockConfig& b : cfg.blocks) {
        for (const ConvSpec* c : {&b.conv1, &b.conv2}) {
            const long k = static_cast<long>(c->kernel);
            rf.x += b.dilation.x * (k - 1);
            rf.y += b.dilation.y * (k - 1);
        }
    }
    return rf;
}

namespace {

struct Benchmark {
    std::size_t in_channels, out_channels, width;
    ConvSpec conv1, conv2;
    bool append_coords;
};

Benchmark benchmark_defaults(const std::string& name) {
    std::string key = name;
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (key == "airfoil") return {2, 1, 64, {3, true}, {5, false}, false};
    if (key == "pipe") return {2, 1, 96, {3, true}, {3, true}, false};
    if (key == "darcy") return {3, 1, 48, {3, true}, {5, false}, true};
    if (key == "ns" || key == "navier-stokes") return {10, 1, 64, {3, true}, {3, true}, false};
    throw ConfigError(Errc::unknown_name, "unknown benchmark '" + name + "' (expected airfoil, pipe, darcy or ns)");
}

struct Row {
    const char* benchmark;
    std::vector<int> dx;
    std::vector<int> dy;  // empty: same as dx
};

const std::map<std::string, Row>& rows() {
    static const std::map<std::string, Row> table = {
        {"Airfoil-A", {"airfoil", {16}, {6}}},
        {"Airfoil-B", {"airfoil", {16, 54}, {4, 10}}},
        {"Airfoil-C", {"airfoil", {16, 48, 2}, {1, 6, 4}}},
        {"Airfoil-D", {"airfoil", {16, 56, 30, 2}, {1, 2, 10, 4}}},
        {"Airfoil-E", {"airfoil", {16, 56, 36, 24, 1}, {1, 2, 10, 6, 1}}},
        {"Airfoil-F", {"airfoil", {16, 56, 42, 36, 24, 1}, {1, 2, 8, 12, 6, 1}}},
        {"Airfoil-G", {"airfoil", {16, 56, 42, 36, 32, 24, 1}, {1, 2, 8, 12, 6, 2, 1}}},
        {"Airfoil-G-alt", {"airfoil", {20, 52, 46, 38, 30, 20, 2}, {2, 4, 8, 10, 8, 4, 2}}},
        {"Pipe-A", {"pipe", {9}, {}}},
        {"Pipe-B", {"pipe", {23, 1}, {}}},
        {"Pipe-C", {"pipe", {23, 11, 1}, {}}},
        {"Pipe-D", {"pipe", {23, 15, 7, 1}, {}}},
        {"Pipe-E", {"pipe", {23, 15, 9, 3, 1}, {}}},
        {"Pipe-F", {"pipe", {25, 19, 11, 7, 3, 1}, {}}},
        {"Pipe-G", {"pipe", {23, 17, 13, 9, 7, 3, 1}, {}}},
        {"Pipe-G-alt", {"pipe", {25, 19, 11, 9, 5, 3, 1}, {}}},
        {"Darcy-A", {"darcy", {7}, {}}},
        {"Darcy-B", {"darcy", {1, 19}, {}}},
        {"Darcy-C", {"darcy", {1, 11, 19}, {}}},
        {"Darcy-D", {"darcy", {1, 7, 13, 19}, {}}},
        {"Darcy-E", {"darcy", {1, 5, 9, 13, 19}, {}}},
        {"Darcy-F", {"darcy", {1, 3, 5, 9, 13, 19}, {}}},
        {"Darcy-F-alt", {"darcy", {1, 3, 7, 11, 15, 21}, {}}},
        {"Darcy-32", {"darcy", {1, 2, 6}, {}}},
        {"Darcy-64", {"darcy", {1, 3, 5, 7, 9, 13, 15}, {}}},
        {"Darcy-128", {"darcy", {1, 5, 9, 15, 21, 27}, {}}},
        {"Darcy-256", {"darcy", {1, 5, 7, 15, 23, 39, 61}, {}}},
        {"NS-A", {"ns", {15, 25, 17, 13, 7, 5, 3, 1}, {}}},
        {"NS-A-alt", {"ns", {21, 27, 19, 11, 9, 7, 3, 1}, {}}},
    };
    return table;
}

// Rows whose SE-removal variants appear in the tables.
constexpr const char* kAblatedRows[] = {"Airfoil-G", "Pipe-G", "Darcy-F", "NS-A"};

bool strip_suffix(std::string& s, const std::string& suffix) {
    if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
        s.erase(s.size() - suffix.size());
        return true;
    }
    return false;
}

}  // namespace

ModelConfig benchmark_config(const std::string& benchmark, const std::vector<int>& dilation_x,
                             const std::vector<int>& dilation_y) {
    const Benchmark b = benchmark_defaults(benchmark);
    if (dilation_x.empty() || dilation_x.size() != dilation_y.size()) {
        throw ConfigError("dilation lists must be nonempty and of equal length (got " +
                          std::to_string(dilation_x.size()) + " and " + std::to_string(dilation_y.size()) + ")");
    }
    ModelConfig cfg;
    cfg.name = benchmark;
    cfg.in_channels = b.in_channels;
    cfg.out_channels = b.out_channels;
    cfg.width = b.width;
    cfg.append_coords = b.append_coords;
    for (std::size_t i = 0; i < dilation_x.size(); ++i) {
        DSBlockConfig blk;
        blk.width = b.width;
        blk.dilation = {dilation_x[i], dilation_y[i]};
        blk.conv1 = b.conv1;
        blk.conv2 = b.conv2;
        cfg.blocks.push_back(blk);
    }
    cfg.validate();
    return cfg;
}

ModelConfig without_se(ModelConfig cfg, bool parameter_matched) {
    for (DSBlockConfig& b : cfg.blocks) {
        b.se.reset();
        b.pm_convs = parameter_matched;
    }
    return cfg;
}

ModelConfig reconstruct_table_config(const std::string& name) {
    std::string base = name;
    bool no_se = false, pm = false;
    if (strip_suffix(base, " w/o SE (PM)") || strip_suffix(base, "-PM")) {
        no_se = pm = true;
    } else if (strip_suffix(base, " w/o SE") || strip_suffix(base, "-noSE")) {
        no_se = true;
    }
    const auto& table = rows();
    const auto it = table.find(base);
    if (it == table.end()) {
        throw ConfigError(Errc::unknown_name, "unknown table row '" + name + "'");
    }
    const Row& row = it->second;
    ModelConfig cfg = benchmark_config(row.benchmark, row.dx, row.dy.empty() ? row.dx : row.dy);
    if (no_se) cfg = without_se(std::move(cfg), pm);
    cfg.name = no_se ? base + (pm ? " w/o SE (PM)" : " w/o SE") : base;
    return cfg;
}

std::vector<std::string> table_row_names() {
    std::vector<std::string> names;
    for (const char* bench : {"Airfoil", "Pipe", "Darcy"}) {
        const int depth = std::string(bench) == "Darcy" ? 6 : 7;
        for (int i = 0; i < depth; ++i) names.push_back(std::string(bench) + "-" + char('A' + i));
    }
    names.push_back("NS-A");
    for (const char* r : kAblatedRows) {
        names.push_back(std::string(r) + " w/o SE");
        names.push_back(std::string(r) + " w/o SE (PM)");
        names.push_back(std::string(r) + "-alt");
    }
    for (const char* r : {"Darcy-32", "Darcy-64", "Darcy-128", "Darcy-256"}) names.emplace_back(r);
    return names;
}

}  // namespace dseno::model
