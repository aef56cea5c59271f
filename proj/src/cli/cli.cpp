#include "dseno/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dseno/cli/ablation.hpp"
#include "dseno/cli/field_export.hpp"
#include "dseno/io/dataset.hpp"
#include "dseno/io/text.hpp"

namespace dseno::cli {

namespace fs = std::filesystem;

namespace {

template <Scalar T>
io::Dataset<T> load_run_data(const RunConfig& cfg) {
    if (cfg.manifest.empty()) throw ConfigError("run config sets no manifest");
    const io::Manifest manifest = io::parse_manifest(cfg.manifest);
    return io::load_dataset<T>(manifest, {cfg.n_train, cfg.n_test, cfg.data_stride});
}

std::string metrics_line(const train::EpochMetrics& m) {
    return std::to_string(m.epoch) + "," + io::format_double(m.lr) + "," + io::format_double(m.train_rel_l2) + "," +
           io::format_double(m.test_rel_l2) + "," + io::format_double(m.wall_seconds) + "\n";
}

void make_dirs(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError(Errc::io_failure, "cannot create " + dir.string() + ": " + ec.message());
}

template <Scalar T>
RunSummary train_typed(const RunConfig& cfg, const ModelSpec& spec, bool resume, std::ostream& log) {
    const io::Dataset<T> data = load_run_data<T>(cfg);
    const auto model = instantiate<T>(spec, cfg.train.seed);
    const std::string config_text = format_run_config(cfg);
    const fs::path ckpt = cfg.out_dir / "checkpoint";
    make_dirs(cfg.out_dir);
    io::write_text_file(cfg.out_dir / "run.cfg", config_text);

    train::Trainer<T> trainer(*model, data, cfg.train);
    if (resume) {
        // Resuming may extend the epoch count; every other key must match the stored run.
        const fs::path stored_path = ckpt / "config.cfg";
        if (!fs::exists(stored_path)) throw DataError(Errc::io_failure, "no checkpoint to resume: " + stored_path.string());
        const std::string stored_text = io::read_text_file(stored_path);
        RunConfig stored = parse_run_config_text(stored_text, ckpt, stored_path.string());
        stored.train.epochs = cfg.train.epochs;
        if (format_run_config(stored) != config_text) {
            throw ConfigError("cannot resume: " + stored_path.string() + " differs from the run config beyond epochs");
        }
        trainer.load_checkpoint(ckpt, stored_text);
        if (trainer.epoch() > cfg.train.epochs) {
            throw ConfigError("cannot resume: checkpoint is at epoch " + std::to_string(trainer.epoch()) +
                              ", past the requested " + std::to_string(cfg.train.epochs));
        }
    }

    const fs::path metrics_path = cfg.out_dir / "metrics.csv";
    std::string metrics = "epoch,lr,train_rel_l2,test_rel_l2,wall_seconds\n";
    for (const auto& m : trainer.history()) metrics += metrics_line(m);
    io::write_text_file(metrics_path, metrics);
    std::ofstream metrics_out(metrics_path, std::ios::app);

    const std::size_t total = cfg.train.epochs;
    while (trainer.epoch() < total) {
        const train::EpochMetrics m = trainer.run_epoch();
        metrics_out << metrics_line(m) << std::flush;
        log << "epoch " << m.epoch << "/" << total << "  lr " << m.lr << "  train " << m.train_rel_l2 << "  test "
            << m.test_rel_l2 << "  (" << m.wall_seconds << " s)\n"
            << std::flush;
        const std::size_t every = cfg.train.checkpoint_every;
        if (every > 0 && m.epoch % every == 0 && m.epoch < total) trainer.save_checkpoint(ckpt, config_text);
    }
    if (!metrics_out) throw DataError(Errc::io_failure, "cannot write " + metrics_path.string());
    trainer.save_checkpoint(ckpt, config_text);

    RunSummary s;
    s.model = model_name(spec);
    s.kind = model->kind();
    s.params = parameter_count(spec);
    s.epochs = trainer.epoch();
    s.final_train_rel_l2 = trainer.evaluate_train();
    s.final_test_rel_l2 = trainer.evaluate_test();
    s.best_test_rel_l2 = s.final_test_rel_l2;
    s.best_epoch = s.epochs;
    for (const auto& m : trainer.history()) {
        if (m.test_rel_l2 < s.best_test_rel_l2) {
            s.best_test_rel_l2 = m.test_rel_l2;
            s.best_epoch = m.epoch;
        }
    }
    io::write_text_file(cfg.out_dir / "report.txt", format_report(s, cfg));
    return s;
}

/// A trained model with its data, restored from a checkpoint directory.
template <Scalar T>
struct Restored {
    RunConfig cfg;
    io::Dataset<T> data;
    std::unique_ptr<nn::NeuralOperator<T>> model;
    std::unique_ptr<train::Trainer<T>> trainer;
};

RunConfig checkpoint_config(const fs::path& dir, std::string& text) {
    const fs::path path = dir / "config.cfg";
    if (!fs::exists(path)) throw DataError(Errc::io_failure, "checkpoint has no config: " + path.string());
    text = io::read_text_file(path);
    return parse_run_config_text(text, dir, path.string());
}

template <Scalar T>
Restored<T> restore(const fs::path& dir, const RunConfig& cfg, const std::string& text) {
    Restored<T> r{cfg, load_run_data<T>(cfg), instantiate<T>(resolve_model(cfg), cfg.train.seed), nullptr};
    r.trainer = std::make_unique<train::Trainer<T>>(*r.model, r.data, cfg.train);
    r.trainer->load_checkpoint(dir, text);
    return r;
}

template <Scalar T>
int evaluate_typed(const fs::path& dir, const RunConfig& cfg, const std::string& text, std::ostream& out) {
    const Restored<T> r = restore<T>(dir, cfg, text);
    out << "model: " << model_name(resolve_model(cfg)) << '\n'
        << "epoch: " << r.trainer->epoch() << '\n'
        << "train_rel_l2: " << io::format_double(r.trainer->evaluate_train()) << '\n'
        << "test_rel_l2: " << io::format_double(r.trainer->evaluate_test()) << '\n';
    return kExitOk;
}

template <Scalar T>
Tensor<double> to_double(const Tensor<T>& t) {
    Tensor<double> out(t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<double>(t[i]);
    return out;
}

template <Scalar T>
int export_typed(const fs::path& dir, const RunConfig& cfg, const std::string& text, std::size_t sample,
                 const std::string& split, FieldFormat format, const fs::path& out_dir, std::ostream& out) {
    const Restored<T> r = restore<T>(dir, cfg, text);
    const bool test = split == "test";
    const Tensor<T>& inputs = test ? r.data.test_inputs : r.data.train_inputs;
    const Tensor<T>& targets = test ? r.data.test_targets : r.data.train_targets;
    const std::size_t n = inputs.empty() ? 0 : inputs.dim(0);
    if (sample >= n) {
        throw ConfigError("sample " + std::to_string(sample) + " out of range: the " + split + " split holds " +
                          std::to_string(n) + " samples");
    }
    const Tensor<T> x = io::slice_samples(inputs, sample, sample + 1);
    const Tensor<T> y = io::slice_samples(targets, sample, sample + 1);
    Tensor<T> pred;
    if (r.data.frame_channels > 0) {
        const std::size_t horizon = y.dim(1) / r.data.frame_channels;
        pred = train::rollout_eval(*r.model, x, y, r.data.target_norm, horizon).predicted;
    } else {
        pred = train::predict_fields(*r.model, x, r.data.input_norm, r.data.target_norm, 1);
    }
    const auto files =
        export_fields(to_double(y), to_double(pred), out_dir, split + "_sample_" + std::to_string(sample), format);
    for (const fs::path& f : files) out << f.string() << '\n';
    return kExitOk;
}

std::string list_text(const std::vector<int>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s + "]";
}

void print_inspect(const ModelSpec& spec, std::ostream& out) {
    const std::size_t params = parameter_count(spec);
    out << "model: " << model_name(spec) << '\n';
    if (const auto* m = std::get_if<model::ModelConfig>(&spec)) {
        const model::ReceptiveField rf = model::receptive_field(*m);
        std::vector<int> dx, dy;
        for (const auto& b : m->blocks) {
            dx.push_back(b.dilation.x);
            dy.push_back(b.dilation.y);
        }
        out << "kind: dseno\n"
            << "params: " << params << " (" << format_millions(params) << "M)\n"
            << "rf: " << rf.y << " × " << rf.x << '\n'
            << "channels: " << m->in_channels << " -> " << m->out_channels << ", width " << m->width << '\n'
            << "dilations_y: " << list_text(dy) << '\n'
            << "dilations_x: " << list_text(dx) << '\n'
            << "block  dil_y  dil_x  k1  k2  se\n";
        for (std::size_t i = 0; i < m->blocks.size(); ++i) {
            const auto& b = m->blocks[i];
            char line[96];
            std::snprintf(line, sizeof line, "%5zu  %5d  %5d  %2zu  %2zu  %s\n", i + 1, b.dilation.y, b.dilation.x,
                          b.conv1.kernel, b.conv2.kernel, b.se ? "on" : (b.pm_convs ? "pm" : "off"));
            out << line;
        }
    } else {
        const auto& f = std::get<fno::FNOPlusConfig>(spec);
        out << "kind: fno+\n"
            << "params: " << params << " (" << format_millions(params) << "M)\n"
            << "rf: global\n"
            << "channels: " << f.in_channels << " -> " << f.out_channels << ", width " << f.width << '\n'
            << "layers: " << f.n_layers << '\n'
            << "modes: " << f.modes << '\n';
    }
}

std::string cell_dir_name(const std::string& name) {
    std::string s;
    for (char c : name) s += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
    return s;
}

int run_ablation(const fs::path& matrix_path, bool dry_run, const std::optional<fs::path>& config,
                 const std::optional<fs::path>& csv_path, std::ostream& out, std::ostream& err) {
    const std::vector<AblationCell> cells = expand_matrix(parse_ablation_matrix(matrix_path));
    std::optional<RunConfig> base;
    if (!dry_run && !cells.empty()) {
        if (!config) throw ConfigError("ablate needs --config unless --dry-run is given");
        base = parse_run_config(*config);
    }
    std::vector<AblationResult> rows;
    for (const AblationCell& cell : cells) {
        AblationResult r{cell.name, block_count(cell.spec), parameter_count(cell.spec), std::nullopt};
        if (base) {
            RunConfig cfg = *base;
            cfg.model = cell.name;
            cfg.benchmark.clear();
            cfg.out_dir = base->out_dir / cell_dir_name(cell.name);
            ModelSpec spec = cell.spec;
            std::visit([&](auto& c) { c.dtype = cfg.dtype; }, spec);
            err << "== " << cell.name << '\n';
            r.rel_l2 = run_training(cfg, spec, false, err).final_test_rel_l2;
        }
        rows.push_back(std::move(r));
    }
    const std::string csv = ablation_csv(rows);
    if (csv_path) {
        io::write_text_file(*csv_path, csv);
    } else {
        out << csv;
    }
    return kExitOk;
}

}  // namespace

RunSummary run_training(const RunConfig& cfg, const ModelSpec& spec, bool resume, std::ostream& log) {
    return cfg.dtype == DType::float32 ? train_typed<float>(cfg, spec, resume, log)
                                       : train_typed<double>(cfg, spec, resume, log);
}

std::string format_report(const RunSummary& s, const RunConfig& cfg) {
    std::ostringstream r;
    r << "model: " << s.model << '\n'
      << "kind: " << s.kind << '\n'
      << "dtype: " << to_string(cfg.dtype) << '\n'
      << "params: " << s.params << " (" << format_millions(s.params) << "M)\n"
      << "seed: " << cfg.train.seed << '\n'
      << "epochs: " << s.epochs << '\n'
      << "final_train_rel_l2: " << io::format_double(s.final_train_rel_l2) << '\n'
      << "final_test_rel_l2: " << io::format_double(s.final_test_rel_l2) << '\n'
      << "best_test_rel_l2: " << io::format_double(s.best_test_rel_l2) << '\n'
      << "best_epoch: " << s.best_epoch << '\n';
    return r.str();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"D-SENO and FNO+ neural operators: training, evaluation, ablation, inspection and export"};
    app.require_subcommand(1);

    auto* train_cmd = app.add_subcommand("train", "train a model from a run config");
    fs::path train_config, train_out;
    std::optional<std::uint64_t> train_seed;
    std::optional<std::size_t> train_epochs;
    bool resume = false;
    train_cmd->add_option("--config", train_config, "run config file")->required();
    train_cmd->add_option("--seed", train_seed, "override seed");
    train_cmd->add_option("--out", train_out, "override out_dir");
    train_cmd->add_option("--epochs", train_epochs, "override epochs");
    train_cmd->add_flag("--resume", resume, "continue from out_dir/checkpoint");

    auto* eval_cmd = app.add_subcommand("evaluate", "report train and test relative L2 of a checkpoint");
    fs::path eval_ckpt;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint directory")->required();

    auto* ablate_cmd = app.add_subcommand("ablate", "parameter counts (and errors) over an ablation matrix");
    fs::path matrix;
    bool dry_run = false;
    std::optional<fs::path> ablate_config, ablate_out;
    ablate_cmd->add_option("--matrix", matrix, "ablation matrix file")->required();
    ablate_cmd->add_flag("--dry-run", dry_run, "count parameters only");
    ablate_cmd->add_option("--config", ablate_config, "base run config for training each cell");
    ablate_cmd->add_option("--out", ablate_out, "CSV path (default: stdout)");

    auto* export_cmd = app.add_subcommand("export", "write truth, prediction and error fields of one sample");
    fs::path export_ckpt;
    std::size_t sample = 0;
    std::string format = "csv", split = "test";
    std::optional<fs::path> export_out;
    export_cmd->add_option("--checkpoint", export_ckpt, "checkpoint directory")->required();
    export_cmd->add_option("--sample", sample, "sample index")->required();
    export_cmd->add_option("--format", format, "csv or pgm")->check(CLI::IsMember({"csv", "pgm"}));
    export_cmd->add_option("--split", split, "test or train")->check(CLI::IsMember({"test", "train"}));
    export_cmd->add_option("--out", export_out, "output directory (default: <checkpoint>/../export)");

    auto* inspect_cmd = app.add_subcommand("inspect", "parameter count, receptive field and dilations");
    std::optional<fs::path> inspect_config;
    std::optional<std::string> inspect_model;
    auto* inspect_config_opt = inspect_cmd->add_option("--config", inspect_config, "run config file");
    auto* inspect_model_opt = inspect_cmd->add_option("--model", inspect_model, "table row name");
    inspect_config_opt->excludes(inspect_model_opt);

    auto* keys_cmd = app.add_subcommand("keys", "list run config keys with their defaults");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*train_cmd) {
            RunConfig cfg = parse_run_config(train_config);
            if (train_seed) cfg.train.seed = *train_seed;
            if (train_epochs) cfg.train.epochs = *train_epochs;
            if (!train_out.empty()) cfg.out_dir = fs::absolute(train_out);
            cfg.train.validate();
            const RunSummary s = run_training(cfg, resolve_model(cfg), resume, out);
            out << format_report(s, cfg);
            return kExitOk;
        }
        if (*eval_cmd) {
            std::string text;
            const RunConfig cfg = checkpoint_config(eval_ckpt, text);
            return cfg.dtype == DType::float32 ? evaluate_typed<float>(eval_ckpt, cfg, text, out)
                                               : evaluate_typed<double>(eval_ckpt, cfg, text, out);
        }
        if (*ablate_cmd) return run_ablation(matrix, dry_run, ablate_config, ablate_out, out, err);
        if (*export_cmd) {
            std::string text;
            const RunConfig cfg = checkpoint_config(export_ckpt, text);
            const fs::path dir = export_out ? *export_out : fs::absolute(export_ckpt).parent_path() / "export";
            const FieldFormat f = parse_field_format(format);
            return cfg.dtype == DType::float32 ? export_typed<float>(export_ckpt, cfg, text, sample, split, f, dir, out)
                                               : export_typed<double>(export_ckpt, cfg, text, sample, split, f, dir, out);
        }
        if (*inspect_cmd) {
            if (!inspect_config && !inspect_model) throw ConfigError("inspect needs --config or --model");
            print_inspect(inspect_model ? model_from_name(*inspect_model) : resolve_model(parse_run_config(*inspect_config)),
                          out);
            return kExitOk;
        }
        if (*keys_cmd) {
            for (const ConfigKey& k : run_config_keys()) {
                out << k.key << " = " << k.default_value << "    # " << k.help << '\n';
            }
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
    return kExitConfig;
}

}  // namespace dseno::cli
