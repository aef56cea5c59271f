#include <doctest.h>

#include <fstream>
#include <sstream>

#include "dseno/cli/ablation.hpp"
#include "dseno/cli/cli.hpp"
#include "dseno/cli/field_export.hpp"
#include "dseno/io/manifest.hpp"
#include "dseno/io/tensor_file.hpp"
#include "dseno/io/text.hpp"
#include "synthetic.hpp"
#include "tempdir.hpp"

using namespace dseno;
using namespace dseno::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "dseno");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

std::string slurp(const fs::path& p) { return io::read_text_file(p); }

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

/// 10 Darcy samples on a 17x17 grid: 6 train, 4 test.
struct DarcyFixture {
    testing::TempDir dir{"dseno-cli"};
    fs::path manifest = dir / "darcy.manifest";

    DarcyFixture() {
        const auto pairs = testing::synthetic_darcy(10, 17, 3);
        io::write_tensor(dir / "a.dsnt", pairs.inputs);
        io::write_tensor(dir / "u.dsnt", pairs.targets);
        io::Manifest m;
        m.name = "darcy-small";
        m.n_train = 6;
        m.n_test = 4;
        m.inputs = dir / "a.dsnt";
        m.targets = dir / "u.dsnt";
        m.mesh = {17, 17};
        m.input_channels = {"a"};
        m.target_channels = {"u"};
        m.append_coords = true;
        io::write_text_file(manifest, io::format_manifest(m, dir.path()));
    }

    fs::path config(const std::string& name, const std::string& extra) const {
        const fs::path p = dir / name;
        io::write_text_file(p, "manifest = darcy.manifest\nout_dir = out-" + name + "\nbatch_size = 3\n" + extra);
        return p;
    }
};

}  // namespace

TEST_CASE("run config defaults, echo and rejection") {
    const RunConfig defaults = parse_run_config_text("", "/base", "empty");
    std::istringstream echo(format_run_config(defaults));
    std::size_t i = 0;
    for (std::string line; std::getline(echo, line); ++i) {
        REQUIRE(i < run_config_keys().size());
        const ConfigKey& k = run_config_keys()[i];
        CAPTURE(line);
        CHECK(line.rfind(k.key + " = ", 0) == 0);
        // Paths are echoed absolute; every other key prints its documented default.
        if (k.key != "out_dir") CHECK(line == k.key + " = " + k.default_value);
    }
    CHECK(i == run_config_keys().size());
    CHECK(defaults.out_dir == fs::path("/base/run"));

    const std::string text =
        "# comment\nmodel = NS-A w/o SE (PM)\ndtype = float64\nmanifest = data/ns.manifest\nepochs = 7\nlr = 0.0025\n"
        "seed = 42\ngrad_clip = 1.5\ndilations_y = [1,2]\npadding = circular\n";
    const RunConfig cfg = parse_run_config_text(text, "/runs", "cfg");
    CHECK(cfg.model == "NS-A w/o SE (PM)");
    CHECK(cfg.dtype == DType::float64);
    CHECK(cfg.manifest == fs::path("/runs/data/ns.manifest"));
    CHECK(cfg.train.epochs == 7);
    CHECK(cfg.train.seed == 42);
    CHECK(cfg.padding == nn::PaddingMode::circular);
    const std::string once = format_run_config(cfg);
    CHECK(format_run_config(parse_run_config_text(once, "/elsewhere", "echo")) == once);

    CHECK_THROWS_AS(parse_run_config_text("modle = Darcy-C\n", "/", "typo"), ConfigError);
    CHECK_THROWS_AS(parse_run_config_text("epochs = many\n", "/", "bad"), ConfigError);
    CHECK_THROWS_AS(parse_run_config_text("se = maybe\n", "/", "bad"), ConfigError);
    CHECK_THROWS_AS(parse_run_config_text("batch_size = 0\n", "/", "bad"), ConfigError);
    CHECK_THROWS_AS(parse_run_config_text("lr = 1\nlr = 2\n", "/", "dup"), ConfigError);
}

TEST_CASE("model resolution") {
    RunConfig cfg;
    cfg.model = "Darcy-F";
    CHECK(parameter_count(resolve_model(cfg)) == 505121);
    cfg.model = "FNO+-Darcy-m8";
    CHECK(std::holds_alternative<fno::FNOPlusConfig>(resolve_model(cfg)));
    cfg.benchmark = "darcy";
    cfg.dilations = {1, 11, 19};
    CHECK(parameter_count(resolve_model(cfg)) == parameter_count(model_from_name("Darcy-C")));
    cfg.se = "pm";
    CHECK(parameter_count(resolve_model(cfg)) == parameter_count(model_from_name("Darcy-C w/o SE (PM)")));
    cfg.dilations_y = {1};
    CHECK_THROWS_AS(resolve_model(cfg), ConfigError);
    cfg.benchmark = "heat";
    CHECK_THROWS_AS(resolve_model(cfg), ConfigError);
}

TEST_CASE("inspect") {
    for (const std::string& name : model::table_row_names()) {
        CAPTURE(name);
        const Result r = run({"inspect", "--model", name});
        REQUIRE(r.code == 0);
        const std::size_t n = parameter_count(model_from_name(name));
        CHECK(contains(r.out, "params: " + std::to_string(n) + " (" + format_millions(n) + "M)"));
    }
    CHECK(contains(run({"inspect", "--model", "Pipe-G"}).out, "rf: 293 × 293"));
    const std::string ns = run({"inspect", "--model", "NS-A"}).out;
    CHECK(contains(ns, "dilations_x: [15,25,17,13,7,5,3,1]"));
    CHECK(contains(ns, "dilations_y: [15,25,17,13,7,5,3,1]"));
    CHECK(contains(run({"inspect", "--model", "FNO+-Darcy-m32"}).out, "kind: fno+"));

    testing::TempDir dir("dseno-inspect");
    io::write_text_file(dir / "c.cfg", "benchmark = pipe\ndilations = [2, 1]\nse = off\n");
    const Result custom = run({"inspect", "--config", (dir / "c.cfg").string()});
    CHECK(custom.code == 0);
    // Each DS block adds 2 (k - 1) l per axis with k = 3.
    CHECK(contains(custom.out, "rf: 13 × 13"));
    CHECK(contains(custom.out, "off"));

    const Result unknown = run({"inspect", "--model", "Darcy-Q"});
    CHECK(unknown.code == kExitConfig);
    CHECK(contains(unknown.err, "Darcy-Q"));
    CHECK(lines_of(unknown.err).size() == 1);
    CHECK(run({"inspect"}).code == kExitConfig);
    CHECK(run({"frobnicate"}).code == kExitConfig);
}

TEST_CASE("ablation matrix expansion") {
    const auto m = parse_ablation_matrix_text(
        "benchmark = darcy\ndepth = F\nse = on, off, pm\nschedule = main, alt\n", "m");
    const auto cells = expand_matrix(m);
    std::vector<std::string> names;
    for (const auto& c : cells) names.push_back(c.name);
    CHECK(names == std::vector<std::string>{"Darcy-F", "Darcy-F w/o SE", "Darcy-F w/o SE (PM)", "Darcy-F-alt",
                                            "Darcy-F-alt w/o SE", "Darcy-F-alt w/o SE (PM)"});
    CHECK(parameter_count(cells[2].spec) == parameter_count(cells[0].spec));
    CHECK(parameter_count(cells[5].spec) == parameter_count(cells[3].spec));

    const auto widths = expand_matrix(parse_ablation_matrix_text("benchmark = darcy\ndepth = A\nwidth = 48, 32\n", "w"));
    REQUIRE(widths.size() == 2);
    CHECK(widths[0].name == "Darcy-A");
    CHECK(widths[1].name == "Darcy-A [w=32]");
    CHECK(parameter_count(widths[1].spec) < parameter_count(widths[0].spec));

    CHECK(expand_matrix(parse_ablation_matrix_text("", "empty")).empty());
    CHECK_THROWS_AS(parse_ablation_matrix_text("depth = A\n", "nobench"), ConfigError);
    CHECK_THROWS_AS(parse_ablation_matrix_text("benchmark = ns\nse = maybe\n", "se"), ConfigError);
    CHECK_THROWS_AS(parse_ablation_matrix_text("axes = 3\n", "unknown"), ConfigError);
    CHECK_THROWS_AS(expand_matrix(parse_ablation_matrix_text("benchmark = airfoil\ndepth = A\nschedule = alt\n", "x")),
                    ConfigError);

    CHECK(format_millions(1042177) == "1.042");
    CHECK(format_millions(88961) == "0.089");
    CHECK(ablation_csv({{"Darcy-A", 1, 88961, 0.25}}) == "model,blocks,params,params_m,rel_l2\nDarcy-A,1,88961,0.089,0.25\n");
}

TEST_CASE("ablate command") {
    testing::TempDir dir("dseno-ablate");
    io::write_text_file(dir / "airfoil.txt", "benchmark = airfoil\ndepth = A, B, C, D, E, F, G\n");
    const Result r = run({"ablate", "--matrix", (dir / "airfoil.txt").string(), "--dry-run"});
    REQUIRE(r.code == 0);
    const auto rows = lines_of(r.out);
    REQUIRE(rows.size() == 8);
    CHECK(rows[0] == "model,blocks,params,params_m,rel_l2");
    CHECK(rows[1].rfind("Airfoil-A,1,", 0) == 0);
    CHECK(rows[7].rfind("Airfoil-G,7,", 0) == 0);

    io::write_text_file(dir / "res.txt", "benchmark = darcy\nresolution = 32, 64, 128, 256\n");
    const auto res = lines_of(run({"ablate", "--matrix", (dir / "res.txt").string(), "--dry-run"}).out);
    REQUIRE(res.size() == 5);
    const char* expected_m[] = {"0.256", "0.588", "0.505", "0.588"};
    for (int i = 0; i < 4; ++i) CHECK(contains(res[i + 1], std::string(",") + expected_m[i] + ","));

    io::write_text_file(dir / "empty.txt", "# nothing\n");
    const Result empty = run({"ablate", "--matrix", (dir / "empty.txt").string()});
    CHECK(empty.code == 0);
    CHECK(empty.out == "model,blocks,params,params_m,rel_l2\n");

    io::write_text_file(dir / "bad.txt", "rows = Darcy-F, Darcy-Z\n");
    const Result bad = run({"ablate", "--matrix", (dir / "bad.txt").string(), "--dry-run"});
    CHECK(bad.code == kExitConfig);
    CHECK(contains(bad.err, "Darcy-Z"));
    CHECK(run({"ablate", "--matrix", (dir / "missing.txt").string()}).code == kExitConfig);

    const fs::path csv = dir / "out.csv";
    CHECK(run({"ablate", "--matrix", (dir / "res.txt").string(), "--dry-run", "--out", csv.string()}).code == 0);
    CHECK(lines_of(slurp(csv)).size() == 5);
}

TEST_CASE("train, evaluate and export") {
    DarcyFixture fx;
    const fs::path cfg = fx.config("c.cfg", "model = Darcy-C\nepochs = 2\nseed = 5\n");
    const Result r = run({"train", "--config", cfg.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const fs::path out = fx.dir / "out-c.cfg";
    const auto metrics = lines_of(slurp(out / "metrics.csv"));
    REQUIRE(metrics.size() == 3);
    CHECK(metrics[0] == "epoch,lr,train_rel_l2,test_rel_l2,wall_seconds");
    CHECK(metrics[1].rfind("1,0.001,", 0) == 0);
    const std::string report = slurp(out / "report.txt");
    CHECK(contains(report, "params: 255857"));
    CHECK(contains(report, "epochs: 2"));
    CHECK(contains(report, "seed: 5"));
    CHECK(slurp(out / "run.cfg") == slurp(out / "checkpoint" / "config.cfg"));

    // The echoed config reproduces the run.
    const fs::path again = fx.dir / "again";
    REQUIRE(run({"train", "--config", (out / "run.cfg").string(), "--out", again.string()}).code == 0);
    CHECK(slurp(again / "checkpoint" / "history.csv") == slurp(out / "checkpoint" / "history.csv"));
    for (const auto& e : fs::directory_iterator(out / "checkpoint" / "params")) {
        CHECK(slurp(e.path()) == slurp(again / "checkpoint" / "params" / e.path().filename()));
    }

    const Result ev = run({"evaluate", "--checkpoint", (out / "checkpoint").string()});
    REQUIRE(ev.code == 0);
    const auto final_test = report.substr(report.find("final_test_rel_l2: ") + 19);
    CHECK(contains(ev.out, "test_rel_l2: " + final_test.substr(0, final_test.find('\n'))));
    CHECK(contains(ev.out, "epoch: 2"));

    const fs::path exp = fx.dir / "exp";
    const Result ex = run({"export", "--checkpoint", (out / "checkpoint").string(), "--sample", "3", "--out",
                           exp.string()});
    REQUIRE(ex.code == 0);
    const auto truth = lines_of(slurp(exp / "test_sample_3_c0_truth.csv"));
    REQUIRE(truth.size() == 17);
    for (const auto& line : truth) CHECK(io::split(line, ',').size() == 17);
    const auto pred = lines_of(slurp(exp / "test_sample_3_c0_pred.csv"));
    const auto err = lines_of(slurp(exp / "test_sample_3_c0_error.csv"));
    for (std::size_t y = 0; y < 17; ++y) {
        const auto t = io::split(truth[y], ','), p = io::split(pred[y], ','), e = io::split(err[y], ',');
        for (std::size_t x = 0; x < 17; ++x) {
            CHECK(io::parse_double(e[x], "e") == std::abs(io::parse_double(p[x], "p") - io::parse_double(t[x], "t")));
        }
    }
    CHECK(run({"export", "--checkpoint", (out / "checkpoint").string(), "--sample", "3", "--format", "pgm", "--out",
               exp.string()})
              .code == 0);
    CHECK(fs::exists(exp / "test_sample_3_c0_pred.pgm.scale.txt"));
    const Result range = run({"export", "--checkpoint", (out / "checkpoint").string(), "--sample", "4"});
    CHECK(range.code == kExitConfig);
    CHECK(contains(range.err, "out of range"));
    CHECK(run({"export", "--checkpoint", (out / "checkpoint").string(), "--sample", "0", "--format", "png"}).code ==
          kExitConfig);
}

TEST_CASE("zero-epoch override reports untrained metrics") {
    DarcyFixture fx;
    const Result r = run({"train", "--config", fx.config("f.cfg", "model = Darcy-F\n").string(), "--epochs", "0"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(contains(r.out, "params: 505121"));
    CHECK(contains(r.out, "epochs: 0"));
    CHECK(lines_of(slurp(fx.dir / "out-f.cfg" / "metrics.csv")).size() == 1);
}

TEST_CASE("resume continues bitwise") {
    DarcyFixture fx;
    const fs::path cfg = fx.config("r.cfg", "model = Darcy-A\nepochs = 3\nseed = 2\n");
    REQUIRE(run({"train", "--config", cfg.string(), "--out", (fx.dir / "full").string()}).code == 0);
    REQUIRE(run({"train", "--config", cfg.string(), "--out", (fx.dir / "part").string(), "--epochs", "1"}).code == 0);
    const Result resumed = run({"train", "--config", cfg.string(), "--out", (fx.dir / "part").string(), "--resume"});
    INFO(resumed.err);
    REQUIRE(resumed.code == 0);
    CHECK(slurp(fx.dir / "full" / "checkpoint" / "history.csv") == slurp(fx.dir / "part" / "checkpoint" / "history.csv"));
    // Metadata agrees except for the config hash, which covers out_dir.
    auto meta = [](const fs::path& p) {
        auto lines = lines_of(slurp(p / "checkpoint" / "checkpoint.txt"));
        std::erase_if(lines, [](const std::string& l) { return l.rfind("config_hash", 0) == 0; });
        return lines;
    };
    CHECK(meta(fx.dir / "full") == meta(fx.dir / "part"));
    for (const char* sub : {"params", "adam_m", "adam_v"}) {
        for (const auto& e : fs::directory_iterator(fx.dir / "full" / "checkpoint" / sub)) {
            CHECK(slurp(e.path()) == slurp(fx.dir / "part" / "checkpoint" / sub / e.path().filename()));
        }
    }
    CHECK(lines_of(slurp(fx.dir / "part" / "metrics.csv")).size() == 4);

    const Result other = run({"train", "--config", cfg.string(), "--out", (fx.dir / "part").string(), "--seed", "9",
                              "--resume"});
    CHECK(other.code == kExitConfig);
    CHECK(run({"train", "--config", cfg.string(), "--out", (fx.dir / "none").string(), "--resume"}).code == kExitData);
}

TEST_CASE("error exit codes") {
    DarcyFixture fx;
    fs::remove(fx.dir / "u.dsnt");
    const Result missing = run({"train", "--config", fx.config("m.cfg", "epochs = 1\n").string()});
    CHECK(missing.code == kExitData);
    CHECK(contains(missing.err, (fx.dir / "u.dsnt").string()));

    DarcyFixture ok;
    const Result diverge =
        run({"train", "--config", ok.config("d.cfg", "model = Darcy-A\nepochs = 5\nlr = 1e30\n").string()});
    CHECK(diverge.code == kExitNumeric);
    CHECK(lines_of(diverge.err).size() == 1);

    const Result typo = run({"train", "--config", ok.config("t.cfg", "epoch = 1\n").string()});
    CHECK(typo.code == kExitConfig);
    CHECK(contains(typo.err, "epoch"));
    CHECK(run({"train", "--config", (ok.dir / "absent.cfg").string()}).code == kExitConfig);
    CHECK(run({"train"}).code == kExitConfig);
    CHECK(run({"train", "--config", ok.config("n.cfg", "manifest =\n").string()}).code == kExitConfig);
}

TEST_CASE("field export formats") {
    // An identity predictor has an identically zero error field.
    Tensor<double> truth({2, 3, 4});
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = 0.1 * static_cast<double>(i) - 0.7;
    testing::TempDir dir("dseno-export");
    const auto files = export_fields(truth, truth, dir.path(), "s", FieldFormat::csv);
    CHECK(files.size() == 6);
    CHECK(slurp(dir / "s_c1_error.csv") == "0,0,0,0\n0,0,0,0\n0,0,0,0\n");
    CHECK(slurp(dir / "s_c0_truth.csv") == field_csv({truth.raw(), 12}, 3, 4));

    CHECK(field_csv(std::vector<double>{1, 0.5, -2, 1e-300}, 2, 2) == "1,0.5\n-2,1e-300\n");

    // A linear ramp covers 0..255 monotonically, with pixel k = round(255 k / (n - 1)).
    std::vector<double> ramp(256 * 3);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = -4.0 + 0.25 * static_cast<double>(i % 256);
    const PgmImage img = field_pgm(ramp, 3, 256);
    const std::string header = "P5\n256 3\n255\n";
    REQUIRE(img.bytes.size() == header.size() + ramp.size());
    CHECK(img.bytes.substr(0, header.size()) == header);
    CHECK(img.min == -4.0);
    CHECK(img.max == -4.0 + 0.25 * 255);
    for (std::size_t i = 0; i < ramp.size(); ++i) {
        CHECK(static_cast<unsigned char>(img.bytes[header.size() + i]) == i % 256);
    }
    const PgmImage flat = field_pgm(std::vector<double>(6, 2.5), 2, 3);
    CHECK(flat.bytes.substr(flat.bytes.size() - 6) == std::string(6, '\0'));

    export_fields(truth, truth, dir.path(), "p", FieldFormat::pgm);
    const std::string scale = slurp(dir / "p_c0_truth.pgm.scale.txt");
    CHECK(contains(scale, "min = -0.7"));
    CHECK(contains(scale, "max = " + io::format_double(0.1 * 11 - 0.7)));

    CHECK_THROWS_AS(export_fields(truth, Tensor<double>({2, 3, 5}), dir.path(), "x", FieldFormat::csv), DataError);
    CHECK(parse_field_format("pgm") == FieldFormat::pgm);
    CHECK_THROWS_AS(parse_field_format("png"), ConfigError);
}

TEST_CASE("ablate trains each cell when not a dry run") {
    DarcyFixture fx;
    io::write_text_file(fx.dir / "m.txt", "rows = Darcy-A, Darcy-A w/o SE\n");
    const fs::path base = fx.config("base.cfg", "epochs = 1\n");
    const Result r = run({"ablate", "--matrix", (fx.dir / "m.txt").string(), "--config", base.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto rows = lines_of(r.out);
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 1; i < 3; ++i) {
        const auto cols = io::split(rows[i], ',');
        REQUIRE(cols.size() == 5);
        const double err = io::parse_double(cols[4], "rel_l2");
        CHECK(err > 0.0);
        CHECK(std::isfinite(err));
    }
    CHECK(fs::exists(fx.dir / "out-base.cfg" / "Darcy_A_w_o_SE" / "report.txt"));
    CHECK(run({"ablate", "--matrix", (fx.dir / "m.txt").string()}).code == kExitConfig);
}
