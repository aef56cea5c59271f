#include "dseno/cli/ablation.hpp"

#include <cstdio>

#include "dseno/io/text.hpp"

namespace dseno::cli {

namespace {

std::vector<std::string> parse_list(const std::string& value) {
    std::vector<std::string> out;
    for (const std::string& item : io::split(value, ',')) {
        std::string v = io::trim(item);
        if (!v.empty()) out.push_back(std::move(v));
    }
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& value, const std::string& what) {
    std::vector<std::size_t> out;
    for (const std::string& item : parse_list(value)) out.push_back(io::parse_size(item, what));
    return out;
}

void check_choices(const std::vector<std::string>& values, std::initializer_list<const char*> allowed,
                   const std::string& what) {
    for (const std::string& v : values) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || v == a;
        if (!ok) throw ConfigError("'" + what + "': unexpected value '" + v + "'");
    }
}

std::string benchmark_label(const std::string& benchmark) {
    if (benchmark == "airfoil") return "Airfoil";
    if (benchmark == "pipe") return "Pipe";
    if (benchmark == "darcy") return "Darcy";
    if (benchmark == "ns") return "NS";
    throw ConfigError(Errc::unknown_name, "unknown benchmark '" + benchmark + "' (expected airfoil, pipe, darcy or ns)");
}

ModelSpec with_width(ModelSpec spec, std::size_t width) {
    if (auto* m = std::get_if<model::ModelConfig>(&spec)) {
        m->width = width;
        for (auto& b : m->blocks) b.width = width;
        m->validate();
    } else {
        auto& f = std::get<fno::FNOPlusConfig>(spec);
        f.width = width;
        f.validate();
    }
    return spec;
}

std::size_t default_width(const ModelSpec& spec) {
    return std::visit([](const auto& c) { return c.width; }, spec);
}

}  // namespace

AblationMatrix parse_ablation_matrix_text(std::string_view text, const std::string& source) {
    AblationMatrix m;
    for (const io::KeyValue& kv : io::parse_key_values(text, source)) {
        const std::string where = source + ":" + std::to_string(kv.line);
        if (kv.key == "rows") {
            m.rows = parse_list(kv.value);
        } else if (kv.key == "benchmark") {
            m.benchmark = kv.value;
        } else if (kv.key == "depth") {
            m.depth = parse_list(kv.value);
        } else if (kv.key == "se") {
            m.se = parse_list(kv.value);
            check_choices(m.se, {"on", "off", "pm"}, where + ": se");
        } else if (kv.key == "schedule") {
            m.schedule = parse_list(kv.value);
            check_choices(m.schedule, {"main", "alt"}, where + ": schedule");
        } else if (kv.key == "width") {
            m.width = parse_size_list(kv.value, where + ": width");
        } else if (kv.key == "resolution") {
            m.resolution = parse_size_list(kv.value, where + ": resolution");
        } else if (kv.key == "fno_modes") {
            m.fno_modes = parse_size_list(kv.value, where + ": fno_modes");
        } else {
            throw ConfigError(where + ": unknown key '" + kv.key + "'");
        }
    }
    const bool axes = !m.depth.empty() || !m.resolution.empty() || !m.fno_modes.empty();
    if (axes && m.benchmark.empty()) throw ConfigError(source + ": depth, resolution and fno_modes need a benchmark");
    return m;
}

AblationMatrix parse_ablation_matrix(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_text_file(path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return parse_ablation_matrix_text(text, path.string());
}

std::vector<AblationCell> expand_matrix(const AblationMatrix& matrix) {
    std::vector<AblationCell> cells;
    for (const std::string& row : matrix.rows) cells.push_back({row, model_from_name(row)});
    if (!matrix.benchmark.empty()) {
        const std::string label = benchmark_label(matrix.benchmark);
        for (const std::string& d : matrix.depth) {
            for (const std::string& sched : matrix.schedule) {
                for (const std::string& se : matrix.se) {
                    std::string name = label + "-" + d + (sched == "alt" ? "-alt" : "");
                    if (se == "off") name += " w/o SE";
                    if (se == "pm") name += " w/o SE (PM)";
                    ModelSpec spec = model_from_name(name);
                    if (matrix.width.empty()) {
                        cells.push_back({name, std::move(spec)});
                        continue;
                    }
                    for (std::size_t w : matrix.width) {
                        if (w == default_width(spec)) {
                            cells.push_back({name, spec});
                        } else {
                            cells.push_back({name + " [w=" + std::to_string(w) + "]", with_width(spec, w)});
                        }
                    }
                }
            }
        }
        for (std::size_t r : matrix.resolution) {
            const std::string name = label + "-" + std::to_string(r);
            cells.push_back({name, model_from_name(name)});
        }
        for (std::size_t k : matrix.fno_modes) {
            const std::string name = "FNO+-" + label + "-m" + std::to_string(k);
            cells.push_back({name, model_from_name(name)});
        }
    }
    return cells;
}

std::size_t block_count(const ModelSpec& spec) {
    if (const auto* m = std::get_if<model::ModelConfig>(&spec)) return m->blocks.size();
    return std::get<fno::FNOPlusConfig>(spec).n_layers;
}

std::string format_millions(std::size_t params) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", static_cast<double>(params) / 1e6);
    return buf;
}

std::string ablation_csv(const std::vector<AblationResult>& rows) {
    std::string out = "model,blocks,params,params_m,rel_l2\n";
    for (const AblationResult& r : rows) {
        // Row names never contain commas or quotes, so no CSV quoting is needed.
        out += r.model + "," + std::to_string(r.blocks) + "," + std::to_string(r.params) + "," +
               format_millions(r.params) + "," + (r.rel_l2 ? io::format_double(*r.rel_l2) : "") + "\n";
    }
    return out;
}

}  // namespace dseno::cli
