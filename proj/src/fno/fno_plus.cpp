#include "dseno/fno/fno_plus.hpp"

#include <map>

#include "dseno/model/dseno.hpp"
#include "dseno/nn/ops.hpp"

namespace dseno::fno {

namespace {

template <typename T>
void check_weight(const Tensor<T>& weight) {
    if (weight.rank() != 5 || weight.dim(4) != 2) {
        throw ConfigError(Errc::shape_mismatch,
                          "spectral weight must be (C_in, C_out, m1, m2, 2), got " + shape_string(weight.shape()));
    }
}

void check_modes(Modes m, std::size_t h, std::size_t w) {
    if (m.m1 > h || m.m2 > w / 2 + 1) {
        throw ConfigError(Errc::shape_mismatch, "spectral modes (" + std::to_string(m.m1) + "," +
                                                    std::to_string(m.m2) + ") exceed the spectrum of a " +
                                                    std::to_string(h) + "x" + std::to_string(w) + " grid");
    }
}

template <typename T>
Complex weight_at(const Tensor<T>& w, std::size_t c, std::size_t o, std::size_t p, std::size_t q) {
    const std::size_t c_out = w.dim(1), m1 = w.dim(2), m2 = w.dim(3);
    const std::size_t base = (((c * c_out + o) * m1 + p) * m2 + q) * 2;
    return {static_cast<double>(w[base]), static_cast<double>(w[base + 1])};
}

}  // namespace

template <Scalar T>
Modes modes_of(const Tensor<T>& weight) {
    check_weight(weight);
    return {weight.dim(2), weight.dim(3)};
}

template <Scalar T>
Tensor<T> spectral_conv(const Tensor<T>& input, const Tensor<T>& weight) {
    require_rank4(input, "spectral_conv input");
    const Modes m = modes_of(weight);
    const std::size_t n = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
    if (weight.dim(0) != c_in) {
        throw ConfigError(Errc::shape_mismatch, "spectral weight " + shape_string(weight.shape()) +
                                                    " does not accept input " + shape_string(input.shape()));
    }
    check_modes(m, h, w);
    const std::size_t c_out = weight.dim(1);
    const Spectrum f = rfft2(input);
    Spectrum g(n, c_out, h, w);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t o = 0; o < c_out; ++o)
            for (std::size_t p = 0; p < m.m1; ++p)
                for (std::size_t q = 0; q < m.m2; ++q) {
                    Complex acc{};
                    for (std::size_t c = 0; c < c_in; ++c) acc += f.at(s, c, p, q) * weight_at(weight, c, o, p, q);
                    g.at(s, o, p, q) = acc;
                }
    Tensor<T> out = irfft2<T>(g);
    require_finite(out, "spectral_conv output");
    return out;
}

template <Scalar T>
SpectralGrads<T> spectral_conv_backward(const Tensor<T>& input, const Tensor<T>& weight,
                                        const Tensor<T>& grad_out) {
    require_rank4(input, "spectral_conv input");
    const Modes m = modes_of(weight);
    const std::size_t n = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::size_t c_out = weight.dim(1);
    if (grad_out.shape() != Shape{n, c_out, h, w}) {
        throw ConfigError(Errc::shape_mismatch, "spectral_conv grad_out " + shape_string(grad_out.shape()) +
                                                    " does not match output " + shape_string({n, c_out, h, w}));
    }
    check_modes(m, h, w);
    const Spectrum f = rfft2(input);
    const Spectrum gg = irfft2_adjoint(grad_out);
    Spectrum gf(n, c_in, h, w);
    Tensor<T> gw(weight.shape());
    for (std::size_t p = 0; p < m.m1; ++p)
        for (std::size_t q = 0; q < m.m2; ++q)
            for (std::size_t c = 0; c < c_in; ++c)
                for (std::size_t o = 0; o < c_out; ++o) {
                    const Complex wv = weight_at(weight, c, o, p, q);
                    Complex acc{};
                    for (std::size_t s = 0; s < n; ++s) {
                        acc += gg.at(s, o, p, q) * std::conj(f.at(s, c, p, q));
                        gf.at(s, c, p, q) += gg.at(s, o, p, q) * std::conj(wv);
                    }
                    const std::size_t base = (((c * c_out + o) * m.m1 + p) * m.m2 + q) * 2;
                    gw[base] = static_cast<T>(acc.real());
                    gw[base + 1] = static_cast<T>(acc.imag());
                }
    SpectralGrads<T> grads{rfft2_adjoint<T>(gf), std::move(gw)};
    require_finite(grads.input, "spectral_conv input gradient");
    return grads;
}

template <Scalar T>
SpectralConv<T>::SpectralConv(const std::string& name, std::size_t in_channels, std::size_t out_channels,
                              Modes modes)
    : weight(name + ".weight", Tensor<T>({in_channels, out_channels, modes.m1, modes.m2, 2})) {}

template <Scalar T>
void SpectralConv<T>::init_uniform(std::mt19937_64& rng) {
    const double scale = 1.0 / static_cast<double>(weight.value.dim(0) * weight.value.dim(1));
    std::uniform_real_distribution<double> dist(0.0, scale);
    for (T& v : weight.value.data()) v = static_cast<T>(dist(rng));
}

template <Scalar T>
Tensor<T> SpectralConv<T>::backward(const Tensor<T>& input, const Tensor<T>& grad_out) {
    SpectralGrads<T> g = spectral_conv_backward(input, weight.value, grad_out);
    add_inplace(weight.grad, g.weight);
    return std::move(g.input);
}

void FNOPlusConfig::validate() const {
    if (in_channels == 0 || out_channels == 0 || width == 0 || proj_hidden == 0) {
        throw ConfigError("FNO+ '" + name + "': channel counts and widths must be positive");
    }
    if (n_layers == 0) throw ConfigError("FNO+ '" + name + "': needs at least one spectral layer");
    if (modes == 0) throw ConfigError("FNO+ '" + name + "': modes must be positive");
}

std::size_t parameter_count(const FNOPlusConfig& cfg) {
    cfg.validate();
    const std::size_t c = cfg.width;
    const std::size_t layer = 2 * c * c * cfg.modes * cfg.modes + c * c + c;
    return cfg.in_channels * c + c + cfg.n_layers * layer + c * cfg.proj_hidden + cfg.proj_hidden +
           cfg.proj_hidden * cfg.out_channels + cfg.out_channels;
}

namespace {

struct FnoBenchmark {
    const char* label;
    std::size_t in_channels, width;
    std::vector<std::size_t> modes;
};

const std::vector<FnoBenchmark>& fno_benchmarks() {
    static const std::vector<FnoBenchmark> rows = {
        {"Airfoil", 2, 64, {8, 16, 24}},
        {"Pipe", 2, 96, {8, 16, 32}},
        {"Darcy", 3, 48, {8, 16, 32, 42, 64, 128}},
        {"NS", 10, 64, {8, 16, 32}},
    };
    return rows;
}

}  // namespace

FNOPlusConfig reconstruct_fno_config(const std::string& name) {
    for (const FnoBenchmark& b : fno_benchmarks()) {
        for (std::size_t m : b.modes) {
            if (name == std::string("FNO+-") + b.label + "-m" + std::to_string(m)) {
                FNOPlusConfig cfg;
                cfg.name = name;
                cfg.in_channels = b.in_channels;
                cfg.width = b.width;
                cfg.modes = m;
                return cfg;
            }
        }
    }
    throw ConfigError(Errc::unknown_name, "unknown FNO+ row '" + name + "'");
}

std::vector<std::string> fno_row_names() {
    std::vector<std::string> names;
    for (const FnoBenchmark& b : fno_benchmarks()) {
        for (std::size_t m : b.modes) names.push_back(std::string("FNO+-") + b.label + "-m" + std::to_string(m));
    }
    return names;
}

template <Scalar T>
FNOPlus<T>::FNOPlus(FNOPlusConfig cfg)
    : lift("lift", cfg.in_channels, cfg.width),
      head1("head.hidden", cfg.width, cfg.proj_hidden),
      head2("head.out", cfg.proj_hidden, cfg.out_channels),
      cfg_(std::move(cfg)) {
    cfg_.validate();
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
        spectral.emplace_back("layer" + std::to_string(l) + ".spectral", cfg_.width, cfg_.width,
                              Modes{cfg_.modes, cfg_.modes});
        mixing.emplace_back("layer" + std::to_string(l) + ".pointwise", cfg_.width, cfg_.width);
    }
}

template <Scalar T>
void FNOPlus<T>::init_uniform(std::mt19937_64& rng) {
    lift.init_uniform(rng);
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
        spectral[l].init_uniform(rng);
        mixing[l].init_uniform(rng);
    }
    head1.init_uniform(rng);
    head2.init_uniform(rng);
}

template <Scalar T>
void FNOPlus<T>::check_input(const Tensor<T>& input) const {
    require_rank4(input, "FNO+ input");
    if (input.dim(1) != cfg_.in_channels) {
        throw ConfigError(Errc::shape_mismatch, "FNO+ '" + cfg_.name + "' expects " +
                                                    std::to_string(cfg_.in_channels) + " input channels, got " +
                                                    shape_string(input.shape()));
    }
    check_modes({cfg_.modes, cfg_.modes}, input.dim(2), input.dim(3));
}

template <Scalar T>
Tensor<T> FNOPlus<T>::forward(const Tensor<T>& input) const {
    check_input(input);
    Tensor<T> x = lift.forward(input);
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
        Tensor<T> y = spectral[l].forward(x);
        add_inplace(y, mixing[l].forward(x));
        x = l + 1 < cfg_.n_layers ? nn::gelu(y) : std::move(y);
    }
    return model::head_forward(head1, head2, x);
}

template <Scalar T>
Pass<T> FNOPlus<T>::forward_with_grad(const Tensor<T>& input) {
    check_input(input);
    // layer_in[l] feeds layer l; pre_act[l] is the sum before GELU.
    auto layer_in = std::make_shared<std::vector<Tensor<T>>>();
    auto pre_act = std::make_shared<std::vector<Tensor<T>>>();
    Tensor<T> x = lift.forward(input);
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
        Tensor<T> y = spectral[l].forward(x);
        add_inplace(y, mixing[l].forward(x));
        layer_in->push_back(std::move(x));
        if (l + 1 < cfg_.n_layers) {
            x = nn::gelu(y);
            pre_act->push_back(std::move(y));
        } else {
            x = std::move(y);
        }
    }
    Pass<T> head = model::head_forward_with_grad(head1, head2, x);
    auto backward = [this, input, layer_in, pre_act, head_back = std::move(head.backward)](const Tensor<T>& grad_out) {
        Tensor<T> g = head_back(grad_out);
        for (std::size_t l = cfg_.n_layers; l-- > 0;) {
            if (l + 1 < cfg_.n_layers) g = nn::gelu_backward((*pre_act)[l], g);
            const Tensor<T>& xin = (*layer_in)[l];
            Tensor<T> gx = spectral[l].backward(xin, g);
            add_inplace(gx, mixing[l].backward(xin, g));
            g = std::move(gx);
        }
        return lift.backward(input, g);
    };
    return {std::move(head.output), std::move(backward)};
}

template <Scalar T>
std::vector<Parameter<T>*> FNOPlus<T>::parameters() {
    std::vector<Parameter<T>*> ps{&lift.weight, &*lift.bias};
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
        ps.push_back(&spectral[l].weight);
        ps.push_back(&mixing[l].weight);
        ps.push_back(&*mixing[l].bias);
    }
    for (nn::Pointwise<T>* p : {&head1, &head2}) {
        ps.push_back(&p->weight);
        ps.push_back(&*p->bias);
    }
    return ps;
}

#define DSENO_INSTANTIATE(T)                                                                        \
    template Modes modes_of(const Tensor<T>&);                                                      \
    template Tensor<T> spectral_conv(const Tensor<T>&, const Tensor<T>&);                           \
    template SpectralGrads<T> spectral_conv_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
    template class SpectralConv<T>;                                                                 \
    template class FNOPlus<T>;

DSENO_INSTANTIATE(float)
DSENO_INSTANTIATE(double)
#undef DSENO_INSTANTIATE

}  // namespace dseno::fno
