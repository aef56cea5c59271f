#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "../support/model_grad.hpp"
#include "../support/oracles.hpp"
#include "dseno/model/config.hpp"
#include "dseno/model/dseno.hpp"
#include "dseno/nn/ops.hpp"

using namespace dseno;
using namespace dseno::model;

namespace {

// Counts worked out by hand from the layer shapes (lift, blocks, 128-wide head).
const std::map<std::string, std::size_t> kExpectedCounts = {
    {"Airfoil-A", 156289},  {"Airfoil-B", 303937},  {"Airfoil-C", 451585},     {"Airfoil-D", 599233},
    {"Airfoil-E", 746881},  {"Airfoil-F", 894529},  {"Airfoil-G", 1042177},    {"Airfoil-G w/o SE", 983937},
    {"Pipe-G", 1305761},    {"Pipe-G w/o SE", 1175393}, {"Darcy-A", 89681},    {"Darcy-B", 172769},
    {"Darcy-C", 255857},    {"Darcy-D", 338945},    {"Darcy-E", 422033},       {"Darcy-F", 505121},
    {"Darcy-F w/o SE", 476897}, {"NS-A", 666561},   {"NS-A w/o SE", 600001},   {"Darcy-64", 588209},
};

ModelConfig small_config(bool se, bool pm, Dilation d = {2, 3}) {
    ModelConfig cfg;
    cfg.name = "small";
    cfg.in_channels = 2;
    cfg.out_channels = 2;
    cfg.width = 4;
    cfg.proj_hidden = 5;
    for (int b = 0; b < 2; ++b) {
        DSBlockConfig blk;
        blk.width = 4;
        blk.dilation = b == 0 ? d : Dilation{1, 2};
        blk.conv1 = {3, true};
        blk.conv2 = {5, false};
        if (!se) blk.se.reset();
        blk.pm_convs = pm;
        cfg.blocks.push_back(blk);
    }
    return cfg;
}

template <typename T>
void zero_all(nn::NeuralOperator<T>& m) {
    for (auto* p : m.parameters()) p->value.fill(T{0});
}

}  // namespace

TEST_CASE("parameter counts of table rows") {
    for (const auto& [name, expected] : kExpectedCounts) {
        CAPTURE(name);
        CHECK(parameter_count(reconstruct_table_config(name)) == expected);
    }
    SUBCASE("PM rows equal their SE rows") {
        for (const char* base : {"Airfoil-G", "Pipe-G", "Darcy-F", "NS-A"}) {
            CAPTURE(base);
            CHECK(parameter_count(reconstruct_table_config(std::string(base) + " w/o SE (PM)")) ==
                  parameter_count(reconstruct_table_config(base)));
            CHECK(parameter_count(reconstruct_table_config(std::string(base) + "-alt")) ==
                  parameter_count(reconstruct_table_config(base)));
        }
    }
}

TEST_CASE("closed-form count equals the instantiated parameter total") {
    for (const std::string& name : table_row_names()) {
        CAPTURE(name);
        const ModelConfig cfg = reconstruct_table_config(name);
        DSENO<float> m(cfg);
        CHECK(m.parameter_total() == parameter_count(cfg));
    }
    for (bool se : {true, false}) {
        for (bool pm : {false, true}) {
            if (se && pm) continue;
            DSENO<double> m(small_config(se, pm));
            CHECK(m.parameter_total() == parameter_count(m.config()));
        }
    }
    ModelConfig r2 = small_config(true, false);
    for (auto& b : r2.blocks) b.se->reduction = 2;
    DSENO<double> m(r2);
    CHECK(m.parameter_total() == parameter_count(r2));
}

TEST_CASE("receptive field") {
    ModelConfig one = benchmark_config("pipe", {1}, {1});
    CHECK(receptive_field(one) == ReceptiveField{5, 5});
    CHECK(receptive_field(reconstruct_table_config("Pipe-G")) == ReceptiveField{293, 293});
    CHECK(receptive_field(reconstruct_table_config("Darcy-F")) == ReceptiveField{301, 301});
    // 2*(16+56+42+36+32+24+1) + 4*(...) per axis with k1=3, k2=5.
    CHECK(receptive_field(reconstruct_table_config("Airfoil-G")) == ReceptiveField{1 + 6 * 207, 1 + 6 * 32});
    ModelConfig reversed = reconstruct_table_config("Darcy-F");
    std::reverse(reversed.blocks.begin(), reversed.blocks.end());
    CHECK(receptive_field(reversed) == receptive_field(reconstruct_table_config("Darcy-F")));
    ModelConfig a = benchmark_config("darcy", {3}, {3}), b = benchmark_config("darcy", {5, 7}, {5, 7});
    ModelConfig ab = benchmark_config("darcy", {3, 5, 7}, {3, 5, 7});
    CHECK(receptive_field(ab).x == receptive_field(a).x + receptive_field(b).x - 1);
}

TEST_CASE("table row reconstruction") {
    const ModelConfig f = reconstruct_table_config("Darcy-F");
    CHECK(f.blocks.size() == 6);
    CHECK(f.width == 48);
    CHECK(f.in_channels == 3);
    const int dar[] = {1, 3, 5, 9, 13, 19};
    for (std::size_t i = 0; i < 6; ++i) CHECK(f.blocks[i].dilation == Dilation{dar[i], dar[i]});

    const ModelConfig g = reconstruct_table_config("Airfoil-G");
    const int gx[] = {16, 56, 42, 36, 32, 24, 1}, gy[] = {1, 2, 8, 12, 6, 2, 1};
    for (std::size_t i = 0; i < 7; ++i) CHECK(g.blocks[i].dilation == Dilation{gx[i], gy[i]});
    CHECK(g.blocks[0].conv2 == ConvSpec{5, false});

    const ModelConfig ns = reconstruct_table_config("NS-A");
    CHECK(ns.blocks.size() == 8);
    CHECK(ns.in_channels == 10);
    CHECK(ns.blocks[1].dilation == Dilation{25, 25});

    const ModelConfig pm = reconstruct_table_config("Pipe-G-PM");
    CHECK(pm.name == "Pipe-G w/o SE (PM)");
    CHECK_FALSE(pm.blocks[0].se.has_value());
    CHECK(pm.blocks[0].pm_convs);
    CHECK(reconstruct_table_config("NS-A-noSE") == reconstruct_table_config("NS-A w/o SE"));

    try {
        reconstruct_table_config("Darcy-Z");
        FAIL("expected unknown_name");
    } catch (const ConfigError& e) {
        CHECK(e.code() == Errc::unknown_name);
    }
}

TEST_CASE("config validation") {
    ModelConfig cfg = small_config(true, false);
    cfg.blocks[1].width = 5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config(true, false);
    cfg.blocks[0].se->reduction = 3;
    CHECK_THROWS_AS(DSENO<double>{cfg}, ConfigError);
    cfg = small_config(true, true);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config(true, false);
    cfg.blocks.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config(true, false);
    cfg.blocks[0].conv2.kernel = 4;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("SE gating") {
    std::mt19937_64 rng(1);
    auto u = random_tensor<double>({2, 6, 5, 4}, rng, 3.0);
    SqueezeExcite<double> se("se", 6, SEConfig{2});
    SUBCASE("zero weights halve the input exactly") {
        auto out = se.forward(u);
        for (std::size_t i = 0; i < u.size(); ++i) CHECK(out[i] == 0.5 * u[i]);
    }
    SUBCASE("saturated bias passes the input") {
        se.expand.bias->value.fill(20.0);
        auto out = se.forward(u);
        for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(out[i] - u[i]) <= 1e-8 * std::abs(u[i]));
    }
    SUBCASE("matches a straight-line evaluation") {
        se.init_uniform(rng);
        auto out = se.forward(u);
        const auto& w1 = se.reduce.weight.value;
        const auto& b1 = se.reduce.bias->value;
        const auto& w2 = se.expand.weight.value;
        const auto& b2 = se.expand.bias->value;
        for (std::size_t n = 0; n < 2; ++n) {
            double z[6] = {}, zh[3] = {};
            for (std::size_t c = 0; c < 6; ++c) {
                for (double v : u.plane(n, c)) z[c] += v;
                z[c] /= 20.0;
            }
            for (std::size_t r = 0; r < 3; ++r) {
                double acc = b1[r];
                for (std::size_t c = 0; c < 6; ++c) acc += w1[r * 6 + c] * z[c];
                zh[r] = 0.5 * acc * (1.0 + std::erf(acc / std::sqrt(2.0)));
            }
            for (std::size_t c = 0; c < 6; ++c) {
                double acc = b2[c];
                for (std::size_t r = 0; r < 3; ++r) acc += w2[c * 3 + r] * zh[r];
                const double s = 1.0 / (1.0 + std::exp(-acc));
                CHECK(s > 0.0);
                CHECK(s < 1.0);
                for (std::size_t p = 0; p < 20; ++p) {
                    CHECK(out.plane(n, c)[p] == doctest::Approx(s * u.plane(n, c)[p]).epsilon(1e-13));
                }
            }
        }
    }
}

TEST_CASE("DS block") {
    std::mt19937_64 rng(2);
    DSBlockConfig cfg;
    cfg.width = 4;
    cfg.dilation = {2, 3};
    cfg.conv1 = {3, true};
    cfg.conv2 = {3, true};
    auto x = random_tensor<double>({1, 4, 8, 8}, rng, 2.0);

    SUBCASE("zero convs leave GELU of the input") {
        DSBlock<double> blk("b", cfg);
        blk.se->init_uniform(rng);
        const auto y = blk.forward(x);
        const auto want = nn::gelu(x);
        CHECK(oracle::max_abs_diff(y, want) <= 1e-12);
        CHECK(blk.forward_with_grad(x).output == y);
    }
    SUBCASE("zero input and zero biases give zero") {
        DSBlock<double> blk("b", cfg);
        blk.init_uniform(rng);
        blk.conv1.bias->value.fill(0.0);
        blk.conv2.bias->value.fill(0.0);
        CHECK(oracle::max_abs(blk.forward(Tensor<double>({1, 4, 8, 8}))) == 0.0);
    }
    SUBCASE("equals the composition of primitive ops") {
        DSBlock<double> blk("b", cfg);
        blk.init_uniform(rng);
        Tensor<double> h = nn::conv2d_dilated_forward(nn::gelu(nn::conv2d_dilated_forward(x, blk.conv1)), blk.conv2);
        Tensor<double> z = nn::global_avg_pool(h);
        Tensor<double> s = nn::sigmoid(nn::pointwise_conv(
            nn::gelu(nn::pointwise_conv(z, blk.se->reduce.weight.value, &blk.se->reduce.bias->value)),
            blk.se->expand.weight.value, &blk.se->expand.bias->value));
        Tensor<double> want = nn::gelu(nn::add(nn::scale_channels(h, s), x));
        CHECK(blk.forward(x) == want);
        CHECK(blk.forward_with_grad(x).output == want);
    }
    SUBCASE("width mismatch") {
        DSBlock<double> blk("b", cfg);
        CHECK_THROWS_AS(blk.forward(Tensor<double>({1, 3, 8, 8})), ConfigError);
    }
}

TEST_CASE("D-SENO forward contract") {
    std::mt19937_64 rng(3);
    SUBCASE("zero weights and head bias beta give a constant field") {
        DSENO<double> m(small_config(true, false));
        m.init_uniform(rng);
        zero_all(m);
        m.head2.bias->value.fill(0.75);
        auto y = m.forward(random_tensor<double>({2, 2, 7, 9}, rng));
        for (double v : y.data()) CHECK(v == 0.75);
    }
    SUBCASE("Darcy-F keeps the grid and follows the input resolution") {
        DSENO<float> m(reconstruct_table_config("Darcy-F"));
        m.init_uniform(rng);
        CHECK(m.forward(random_tensor<float>({1, 3, 85, 85}, rng)).shape() == Shape{1, 1, 85, 85});
        CHECK(m.forward(random_tensor<float>({1, 3, 128, 128}, rng)).shape() == Shape{1, 1, 128, 128});
    }
    SUBCASE("channel mismatch") {
        DSENO<float> m(reconstruct_table_config("Darcy-A"));
        CHECK_THROWS_AS(m.forward(Tensor<float>({1, 1, 16, 16})), ConfigError);
    }
    SUBCASE("forward_with_grad output equals forward") {
        DSENO<double> m(small_config(false, true));
        m.init_uniform(rng);
        auto x = random_tensor<double>({2, 2, 6, 6}, rng);
        CHECK(m.forward_with_grad(x).output == m.forward(x));
    }
}

TEST_CASE("default initialization keeps outputs finite") {
    const char* rows[] = {"Airfoil-C", "Pipe-C", "Darcy-F", "NS-A"};
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const ModelConfig cfg = reconstruct_table_config(rows[seed % 4]);
        DSENO<float> m(cfg);
        std::mt19937_64 rng(seed);
        m.init_uniform(rng);
        auto y = m.forward(random_tensor<float>({1, cfg.in_channels, 12, 10}, rng, 3.0));
        CHECK(y.all_finite());
    }
}

TEST_CASE("model gradients agree with finite differences") {
    std::mt19937_64 rng(4);
    for (auto [se, pm] : {std::pair{true, false}, std::pair{false, false}, std::pair{false, true}}) {
        CAPTURE(se);
        CAPTURE(pm);
        DSENO<double> m(small_config(se, pm));
        testing::randomize_parameters(m, rng);
        auto report = testing::check_model_gradients(m, random_tensor<double>({1, 2, 8, 8}, rng), rng, {.tolerance = 1e-5});
        CAPTURE(report.worst);
        CHECK(report.max_rel_error <= 1e-5);
    }
    SUBCASE("circular padding") {
        ModelConfig cfg = small_config(true, false);
        for (auto& b : cfg.blocks) b.padding_mode = PaddingMode::circular;
        DSENO<double> m(cfg);
        testing::randomize_parameters(m, rng);
        auto report = testing::check_model_gradients(m, random_tensor<double>({2, 2, 8, 8}, rng), rng, {.tolerance = 1e-5});
        CAPTURE(report.worst);
        CHECK(report.max_rel_error <= 1e-5);
    }
}

TEST_CASE("anisotropic dilation breaks axis symmetry") {
    std::mt19937_64 rng(5);
    DSENO<double> m(reconstruct_table_config("Airfoil-A"));
    m.init_uniform(rng);
    auto x = random_tensor<double>({1, 2, 20, 20}, rng);
    Tensor<double> xt(x.shape());
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 20; ++i)
            for (std::size_t j = 0; j < 20; ++j) xt(0, c, j, i) = x(0, c, i, j);
    auto y = m.forward(x), yt = m.forward(xt);
    double diff = 0.0;
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 20; ++j) diff = std::max(diff, std::abs(y(0, 0, i, j) - yt(0, 0, j, i)));
    CHECK(diff > 1e-6);
}
