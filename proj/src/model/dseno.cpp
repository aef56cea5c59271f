#include "dseno/model/dseno.hpp"

#include "dseno/nn/ops.hpp"

namespace dseno::model {

using namespace dseno::nn;

template <Scalar T>
SqueezeExcite<T>::SqueezeExcite(const std::string& name, std::size_t channels, const SEConfig& cfg)
    : reduce(name + ".reduce", channels, channels / cfg.reduction),
      expand(name + ".expand", channels / cfg.reduction, channels) {
    if (cfg.reduction == 0 || channels % cfg.reduction != 0) {
        throw ConfigError("SE reduction " + std::to_string(cfg.reduction) + " must divide " +
                          std::to_string(channels) + " channels");
    }
}

template <Scalar T>
void SqueezeExcite<T>::init_uniform(std::mt19937_64& rng) {
    reduce.init_uniform(rng);
    expand.init_uniform(rng);
}

template <Scalar T>
Tensor<T> SqueezeExcite<T>::gate(const Tensor<T>& u) const {
    return sigmoid(expand.forward(gelu(reduce.forward(global_avg_pool(u)))));
}

template <Scalar T>
Tensor<T> SqueezeExcite<T>::forward(const Tensor<T>& u) const {
    return scale_channels(u, gate(u));
}

template <Scalar T>
Pass<T> SqueezeExcite<T>::forward_with_grad(const Tensor<T>& u) {
    Tensor<T> z = global_avg_pool(u);
    Tensor<T> a = reduce.forward(z);
    Tensor<T> g = gelu(a);
    Tensor<T> b = expand.forward(g);
    Tensor<T> s = sigmoid(b);
    Tensor<T> out = scale_channels(u, s);
    auto backward = [this, u, z = std::move(z), a = std::move(a), g = std::move(g), b = std::move(b),
                     s = std::move(s)](const Tensor<T>& grad_out) {
        ScaleGrads<T> sg = scale_channels_backward(u, s, grad_out);
        Tensor<T> gg = expand.backward(g, sigmoid_backward(b, sg.scale));
        Tensor<T> gz = reduce.backward(z, gelu_backward(a, gg));
        add_inplace(sg.input, global_avg_pool_backward(u.shape(), gz));
        return std::move(sg.input);
    };
    return {std::move(out), std::move(backward)};
}

template <Scalar T>
std::vector<Parameter<T>*> SqueezeExcite<T>::parameters() {
    return {&reduce.weight, &*reduce.bias, &expand.weight, &*expand.bias};
}

template <Scalar T>
DSBlock<T>::DSBlock(const std::string& name, const DSBlockConfig& cfg)
    : conv1(name + ".conv1", cfg.width, cfg.width, cfg.conv1.kernel, cfg.conv1.kernel, cfg.conv1.bias,
            cfg.dilation, cfg.padding_mode),
      conv2(name + ".conv2", cfg.width, cfg.width, cfg.conv2.kernel, cfg.conv2.kernel, cfg.conv2.bias,
            cfg.dilation, cfg.padding_mode),
      cfg_(cfg) {
    if (cfg.se && cfg.pm_convs) throw ConfigError("DS block '" + name + "': PM convs require SE to be absent");
    if (cfg.se) se.emplace(name + ".se", cfg.width, *cfg.se);
    if (cfg.pm_convs) {
        pm1.emplace(name + ".pm1", cfg.width, cfg.width);
        pm2.emplace(name + ".pm2", cfg.width, cfg.width);
    }
}

template <Scalar T>
void DSBlock<T>::init_uniform(std::mt19937_64& rng) {
    conv1.init_uniform(rng);
    conv2.init_uniform(rng);
    if (se) se->init_uniform(rng);
    if (pm1) {
        pm1->init_uniform(rng);
        pm2->init_uniform(rng);
    }
}

template <Scalar T>
void DSBlock<T>::check_input(const Tensor<T>& x) const {
    require_rank4(x, "DS block input");
    if (x.dim(1) != cfg_.width) {
        throw ConfigError(Errc::shape_mismatch, "DS block of width " + std::to_string(cfg_.width) +
                                                    " got input " + shape_string(x.shape()));
    }
}

template <Scalar T>
Tensor<T> DSBlock<T>::forward(const Tensor<T>& x) const {
    check_input(x);
    Tensor<T> h = conv2d_dilated_forward(gelu(conv2d_dilated_forward(x, conv1)), conv2);
    if (pm1) h = pm2->forward(gelu(pm1->forward(h)));
    if (se) h = se->forward(h);
    add_inplace(h, x);
    return gelu(h);
}

template <Scalar T>
Pass<T> DSBlock<T>::forward_with_grad(const Tensor<T>& x) {
    check_input(x);
    Tensor<T> a1 = conv2d_dilated_forward(x, conv1);
    Tensor<T> g1 = gelu(a1);
    Tensor<T> h = conv2d_dilated_forward(g1, conv2);
    std::optional<Tensor<T>> pm_in, pm_mid;
    if (pm1) {
        pm_in = h;
        pm_mid = pm1->forward(h);
        h = pm2->forward(gelu(*pm_mid));
    }
    std::optional<Pass<T>> se_pass;
    if (se) {
        se_pass = se->forward_with_grad(h);
        h = se_pass->output;
        se_pass->output = Tensor<T>();
    }
    add_inplace(h, x);
    Tensor<T> out = gelu(h);
    auto backward = [this, x, a1 = std::move(a1), g1 = std::move(g1), pm_in = std::move(pm_in),
                     pm_mid = std::move(pm_mid), se_pass = std::move(se_pass),
                     s = std::move(h)](const Tensor<T>& grad_out) {
        Tensor<T> gs = gelu_backward(s, grad_out);
        Tensor<T> gh = se_pass ? se_pass->backward(gs) : gs;
        if (pm1) {
            Tensor<T> gq = pm2->backward(gelu(*pm_mid), gh);
            gh = pm1->backward(*pm_in, gelu_backward(*pm_mid, gq));
        }
        Tensor<T> gg1 = accumulate_conv_backward(conv2, g1, gh);
        Tensor<T> gx = accumulate_conv_backward(conv1, x, gelu_backward(a1, gg1));
        add_inplace(gx, gs);
        return gx;
    };
    return {std::move(out), std::move(backward)};
}

template <Scalar T>
std::vector<Parameter<T>*> DSBlock<T>::parameters() {
    std::vector<Parameter<T>*> ps{&conv1.weight};
    if (conv1.bias) ps.push_back(&*conv1.bias);
    ps.push_back(&conv2.weight);
    if (conv2.bias) ps.push_back(&*conv2.bias);
    if (pm1) {
        for (Pointwise<T>* p : {&*pm1, &*pm2}) {
            ps.push_back(&p->weight);
            ps.push_back(&*p->bias);
        }
    }
    if (se) {
        for (Parameter<T>* p : se->parameters()) ps.push_back(p);
    }
    return ps;
}

template <Scalar T>
Tensor<T> head_forward(const Pointwise<T>& h1, const Pointwise<T>& h2, const Tensor<T>& x) {
    return h2.forward(gelu(h1.forward(x)));
}

template <Scalar T>
Pass<T> head_forward_with_grad(Pointwise<T>& h1, Pointwise<T>& h2, const Tensor<T>& x) {
    Tensor<T> a = h1.forward(x);
    Tensor<T> g = gelu(a);
    Tensor<T> out = h2.forward(g);
    auto backward = [&h1, &h2, x, a = std::move(a), g = std::move(g)](const Tensor<T>& grad_out) {
        return h1.backward(x, gelu_backward(a, h2.backward(g, grad_out)));
    };
    return {std::move(out), std::move(backward)};
}

template <Scalar T>
DSENO<T>::DSENO(ModelConfig cfg)
    : lift("lift", cfg.in_channels, cfg.width),
      head1("head.hidden", cfg.width, cfg.proj_hidden),
      head2("head.out", cfg.proj_hidden, cfg.out_channels),
      cfg_(std::move(cfg)) {
    cfg_.validate();
    blocks.reserve(cfg_.blocks.size());
    for (std::size_t b = 0; b < cfg_.blocks.size(); ++b) {
        blocks.emplace_back("block" + std::to_string(b), cfg_.blocks[b]);
    }
}

template <Scalar T>
void DSENO<T>::init_uniform(std::mt19937_64& rng) {
    lift.init_uniform(rng);
    for (DSBlock<T>& b : blocks) b.init_uniform(rng);
    head1.init_uniform(rng);
    head2.init_uniform(rng);
}

template <Scalar T>
Tensor<T> DSENO<T>::forward(const Tensor<T>& input) const {
    require_rank4(input, "D-SENO input");
    if (input.dim(1) != cfg_.in_channels) {
        throw ConfigError(Errc::shape_mismatch, "model '" + cfg_.name + "' expects " +
                                                    std::to_string(cfg_.in_channels) + " input channels, got " +
                                                    shape_string(input.shape()));
    }
    Tensor<T> x = lift.forward(input);
    for (const DSBlock<T>& b : blocks) x = b.forward(x);
    return head_forward(head1, head2, x);
}

template <Scalar T>
Pass<T> DSENO<T>::forward_with_grad(const Tensor<T>& input) {
    require_rank4(input, "D-SENO input");
    if (input.dim(1) != cfg_.in_channels) {
        throw ConfigError(Errc::shape_mismatch, "model '" + cfg_.name + "' expects " +
                                                    std::to_string(cfg_.in_channels) + " input channels, got " +
                                                    shape_string(input.shape()));
    }
    auto stages = std::make_shared<std::vector<Pass<T>>>();
    Tensor<T> x = lift.forward(input);
    for (DSBlock<T>& b : blocks) {
        stages->push_back(b.forward_with_grad(x));
        x = std::move(stages->back().output);
        stages->back().output = Tensor<T>();
    }
    Pass<T> head = head_forward_with_grad(head1, head2, x);
    Tensor<T> out = std::move(head.output);
    auto backward = [this, input, stages, head_back = std::move(head.backward)](const Tensor<T>& grad_out) {
        Tensor<T> g = head_back(grad_out);
        for (auto it = stages->rbegin(); it != stages->rend(); ++it) g = it->backward(g);
        return lift.backward(input, g);
    };
    return {std::move(out), std::move(backward)};
}

template <Scalar T>
std::vector<Parameter<T>*> DSENO<T>::parameters() {
    std::vector<Parameter<T>*> ps{&lift.weight, &*lift.bias};
    for (DSBlock<T>& b : blocks) {
        for (Parameter<T>* p : b.parameters()) ps.push_back(p);
    }
    for (Pointwise<T>* p : {&head1, &head2}) {
        ps.push_back(&p->weight);
        ps.push_back(&*p->bias);
    }
    return ps;
}

#define DSENO_INSTANTIATE(T)                                                                     \
    template class SqueezeExcite<T>;                                                             \
    template class DSBlock<T>;                                                                   \
    template class DSENO<T>;                                                                     \
    template Tensor<T> head_forward(const Pointwise<T>&, const Pointwise<T>&, const Tensor<T>&); \
    template Pass<T> head_forward_with_grad(Pointwise<T>&, Pointwise<T>&, const Tensor<T>&);

DSENO_INSTANTIATE(float)
DSENO_INSTANTIATE(double)
#undef DSENO_INSTANTIATE

}  // namespace dseno::model
