#include "dseno/cli/run_config.hpp"

#include <functional>
#include <map>
#include <sstream>

#include "dseno/io/text.hpp"
#include "dseno/model/dseno.hpp"

namespace dseno::cli {

namespace fs = std::filesystem;

namespace {

std::string format_list(const std::vector<int>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out + "]";
}

DType parse_dtype(const std::string& value) {
    if (value == "float32") return DType::float32;
    if (value == "float64") return DType::float64;
    throw ConfigError("'dtype': expected float32 or float64, got '" + value + "'");
}

fs::path resolve_path(const std::string& value, const fs::path& base_dir) {
    if (value.empty()) return {};
    const fs::path p(value);
    return (p.is_absolute() ? p : base_dir / p).lexically_normal();
}

struct KeyHandler {
    std::function<void(RunConfig&, const std::string&, const fs::path&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, KeyHandler>& handlers() {
    using io::format_double;
    using io::parse_double;
    using io::parse_size;
    static const std::map<std::string, KeyHandler> table = {
        {"model", {[](RunConfig& c, const std::string& v, const fs::path&) { c.model = v; },
                   [](const RunConfig& c) { return c.model; }}},
        {"benchmark", {[](RunConfig& c, const std::string& v, const fs::path&) { c.benchmark = v; },
                       [](const RunConfig& c) { return c.benchmark; }}},
        {"dilations", {[](RunConfig& c, const std::string& v, const fs::path&) {
                           c.dilations = io::parse_int_list(v, "dilations");
                       },
                       [](const RunConfig& c) { return format_list(c.dilations); }}},
        {"dilations_y", {[](RunConfig& c, const std::string& v, const fs::path&) {
                             c.dilations_y = io::parse_int_list(v, "dilations_y");
                         },
                         [](const RunConfig& c) { return format_list(c.dilations_y); }}},
        {"se", {[](RunConfig& c, const std::string& v, const fs::path&) {
                    if (v != "on" && v != "off" && v != "pm") {
                        throw ConfigError("'se': expected on, off or pm, got '" + v + "'");
                    }
                    c.se = v;
                },
                [](const RunConfig& c) { return c.se; }}},
        {"padding", {[](RunConfig& c, const std::string& v, const fs::path&) {
                         c.padding = nn::padding_mode_from_string(v);
                     },
                     [](const RunConfig& c) { return nn::to_string(c.padding); }}},
        {"dtype", {[](RunConfig& c, const std::string& v, const fs::path&) { c.dtype = parse_dtype(v); },
                   [](const RunConfig& c) { return std::string(to_string(c.dtype)); }}},
        {"manifest", {[](RunConfig& c, const std::string& v, const fs::path& b) { c.manifest = resolve_path(v, b); },
                      [](const RunConfig& c) { return c.manifest.string(); }}},
        {"out_dir", {[](RunConfig& c, const std::string& v, const fs::path& b) { c.out_dir = resolve_path(v, b); },
                     [](const RunConfig& c) { return c.out_dir.string(); }}},
        {"n_train", {[](RunConfig& c, const std::string& v, const fs::path&) { c.n_train = parse_size(v, "n_train"); },
                     [](const RunConfig& c) { return std::to_string(c.n_train); }}},
        {"n_test", {[](RunConfig& c, const std::string& v, const fs::path&) { c.n_test = parse_size(v, "n_test"); },
                    [](const RunConfig& c) { return std::to_string(c.n_test); }}},
        {"data_stride", {[](RunConfig& c, const std::string& v, const fs::path&) {
                             c.data_stride = parse_size(v, "data_stride");
                         },
                         [](const RunConfig& c) { return std::to_string(c.data_stride); }}},
        {"epochs", {[](RunConfig& c, const std::string& v, const fs::path&) { c.train.epochs = parse_size(v, "epochs"); },
                    [](const RunConfig& c) { return std::to_string(c.train.epochs); }}},
        {"batch_size", {[](RunConfig& c, const std::string& v, const fs::path&) {
                            c.train.batch_size = parse_size(v, "batch_size");
                        },
                        [](const RunConfig& c) { return std::to_string(c.train.batch_size); }}},
        {"lr", {[](RunConfig& c, const std::string& v, const fs::path&) { c.train.lr = parse_double(v, "lr"); },
                [](const RunConfig& c) { return format_double(c.train.lr); }}},
        {"step_size", {[](RunConfig& c, const std::string& v, const fs::path&) {
                           c.train.step_size = parse_size(v, "step_size");
                       },
                       [](const RunConfig& c) { return std::to_string(c.train.step_size); }}},
        {"gamma", {[](RunConfig& c, const std::string& v, const fs::path&) { c.train.gamma = parse_double(v, "gamma"); },
                   [](const RunConfig& c) { return format_double(c.train.gamma); }}},
        {"weight_decay", {[](RunConfig& c, const std::string& v, const fs::path&) {
                              c.train.weight_decay = parse_double(v, "weight_decay");
                          },
                          [](const RunConfig& c) { return format_double(c.train.weight_decay); }}},
        {"seed", {[](RunConfig& c, const std::string& v, const fs::path&) { c.train.seed = parse_size(v, "seed"); },
                  [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
        {"grad_clip", {[](RunConfig& c, const std::string& v, const fs::path&) {
                           c.train.grad_clip = parse_double(v, "grad_clip");
                       },
                       [](const RunConfig& c) { return format_double(c.train.grad_clip); }}},
        {"checkpoint_every", {[](RunConfig& c, const std::string& v, const fs::path&) {
                                  c.train.checkpoint_every = parse_size(v, "checkpoint_every");
                              },
                              [](const RunConfig& c) { return std::to_string(c.train.checkpoint_every); }}},
    };
    return table;
}

}  // namespace

const std::vector<ConfigKey>& run_config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"model", "Darcy-C", "table row: D-SENO (\"Pipe-G\", \"NS-A w/o SE (PM)\", \"Darcy-128\") or FNO+ (\"FNO+-Darcy-m16\")"},
        {"benchmark", "", "airfoil, pipe, darcy or ns; when set, builds a custom D-SENO and ignores model"},
        {"dilations", "[]", "custom model: per-block dilation along x (and y unless dilations_y is set)"},
        {"dilations_y", "[]", "custom model: per-block dilation along y"},
        {"se", "on", "custom model: on, off (no SE) or pm (no SE, parameter-matched pointwise convs)"},
        {"padding", "zero", "zero or circular padding in every DS block"},
        {"dtype", "float32", "float32 or float64"},
        {"manifest", "", "dataset manifest; relative to the config file"},
        {"out_dir", "run", "output directory; relative to the config file"},
        {"n_train", "0", "training samples (0: manifest n_train)"},
        {"n_test", "0", "test samples (0: manifest n_test)"},
        {"data_stride", "1", "spatial subsampling stride"},
        {"epochs", "500", "training epochs"},
        {"batch_size", "20", "mini-batch size"},
        {"lr", "0.001", "initial learning rate"},
        {"step_size", "100", "epochs between learning-rate decays"},
        {"gamma", "0.5", "learning-rate decay factor"},
        {"weight_decay", "1e-04", "AdamW decoupled weight decay"},
        {"seed", "0", "initialization and shuffling seed"},
        {"grad_clip", "0", "global gradient-norm bound (0: off)"},
        {"checkpoint_every", "0", "save a checkpoint every k epochs (0: only at the end)"},
    };
    return keys;
}

RunConfig parse_run_config_text(std::string_view text, const fs::path& base_dir, const std::string& source) {
    RunConfig cfg;
    cfg.out_dir = resolve_path(cfg.out_dir.string(), base_dir);
    const auto& table = handlers();
    for (const io::KeyValue& kv : io::parse_key_values(text, source)) {
        const auto it = table.find(kv.key);
        if (it == table.end()) {
            throw ConfigError(source + ":" + std::to_string(kv.line) + ": unknown key '" + kv.key + "'");
        }
        try {
            it->second.set(cfg, kv.value, base_dir);
        } catch (const ConfigError& e) {
            throw ConfigError(e.code(), source + ":" + std::to_string(kv.line) + ": " + e.what());
        }
    }
    cfg.train.validate();
    if (cfg.data_stride == 0) throw ConfigError(source + ": 'data_stride' must be positive");
    return cfg;
}

RunConfig parse_run_config(const fs::path& path) {
    std::string text;
    try {
        text = io::read_text_file(path);
    } catch (const DataError& e) {
        // An unreadable config is a configuration problem, not a data one.
        throw ConfigError(e.what());
    }
    return parse_run_config_text(text, fs::absolute(path).parent_path(), path.string());
}

std::string format_run_config(const RunConfig& cfg) {
    RunConfig abs = cfg;
    if (!abs.manifest.empty()) abs.manifest = fs::absolute(abs.manifest).lexically_normal();
    if (!abs.out_dir.empty()) abs.out_dir = fs::absolute(abs.out_dir).lexically_normal();
    std::ostringstream out;
    for (const ConfigKey& k : run_config_keys()) out << k.key << " = " << handlers().at(k.key).get(abs) << '\n';
    return out.str();
}

ModelSpec model_from_name(const std::string& name) {
    if (name.rfind("FNO+", 0) == 0) return fno::reconstruct_fno_config(name);
    return model::reconstruct_table_config(name);
}

ModelSpec resolve_model(const RunConfig& cfg) {
    ModelSpec spec;
    if (!cfg.benchmark.empty()) {
        model::ModelConfig m =
            model::benchmark_config(cfg.benchmark, cfg.dilations, cfg.dilations_y.empty() ? cfg.dilations : cfg.dilations_y);
        if (cfg.se != "on") m = model::without_se(std::move(m), cfg.se == "pm");
        m.name = "custom-" + cfg.benchmark;
        spec = std::move(m);
    } else {
        spec = model_from_name(cfg.model);
    }
    if (auto* m = std::get_if<model::ModelConfig>(&spec)) {
        for (auto& b : m->blocks) b.padding_mode = cfg.padding;
        m->dtype = cfg.dtype;
        m->validate();
    } else {
        auto& f = std::get<fno::FNOPlusConfig>(spec);
        f.dtype = cfg.dtype;
        f.validate();
    }
    return spec;
}

std::size_t parameter_count(const ModelSpec& spec) {
    return std::visit([](const auto& c) { return parameter_count(c); }, spec);
}

std::string model_name(const ModelSpec& spec) {
    return std::visit([](const auto& c) { return c.name; }, spec);
}

template <Scalar T>
std::unique_ptr<nn::NeuralOperator<T>> instantiate(const ModelSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    if (const auto* m = std::get_if<model::ModelConfig>(&spec)) {
        auto net = std::make_unique<model::DSENO<T>>(*m);
        net->init_uniform(rng);
        return net;
    }
    auto net = std::make_unique<fno::FNOPlus<T>>(std::get<fno::FNOPlusConfig>(spec));
    net->init_uniform(rng);
    return net;
}

template std::unique_ptr<nn::NeuralOperator<float>> instantiate<float>(const ModelSpec&, std::uint64_t);
template std::unique_ptr<nn::NeuralOperator<double>> instantiate<double>(const ModelSpec&, std::uint64_t);

}  // namespace dseno::cli
