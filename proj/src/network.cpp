#include "lesen/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "lesen/rng.hpp"

namespace lesen {

void NetworkConfig::validate() const {
    if (in_channels_per_modality < 1)
        throw std::invalid_argument("NetworkConfig.in_channels_per_modality must be >= 1");
    if (depth < 2) throw std::invalid_argument("NetworkConfig.depth must be >= 2");
    if (base_width < 4) throw std::invalid_argument("NetworkConfig.base_width must be >= 4");
    if (n_classes < 2) throw std::invalid_argument("NetworkConfig.n_classes must be >= 2");
}

Tensor& ModelState::find(const std::string& name) {
    for (auto& e : entries)
        if (e.name == name) return e.value;
    throw std::runtime_error("ModelState has no parameter named " + name);
}

const Tensor& ModelState::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return e.value;
    throw std::runtime_error("ModelState has no parameter named " + name);
}

bool ModelState::same_structure(const ModelState& other) const {
    if (entries.size() != other.entries.size()) return false;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].name != other.entries[i].name ||
            entries[i].value.shape != other.entries[i].value.shape)
            return false;
    return true;
}

bool is_trainable_param(const std::string& name) {
    auto ends_with = [&](const char* suffix) {
        std::string_view s(suffix);
        return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    return !ends_with(".running_mean") && !ends_with(".running_var");
}

namespace {

struct Arch {
    // Channel plan per scale; fused skip width depends on the attention flag.
    static int enc_ch(const NetworkConfig& c, int scale) { return c.base_width << scale; }
    static int bottleneck_ch(const NetworkConfig& c) { return c.base_width << c.depth; }
    static int skip_ch(const NetworkConfig& c, int scale) {
        return (c.use_spatial_attention ? 3 : 2) * enc_ch(c, scale);
    }
};

void add_conv(ModelState& s, const std::string& prefix, int out_ch, int in_ch, int k) {
    s.entries.push_back({prefix + ".w", Tensor({out_ch, in_ch, k, k})});
    s.entries.push_back({prefix + ".b", Tensor({out_ch})});
}

void add_norm(ModelState& s, const std::string& prefix, int ch) {
    s.entries.push_back({prefix + ".gamma", Tensor({ch}, 1.0)});
    s.entries.push_back({prefix + ".beta", Tensor({ch})});
    s.entries.push_back({prefix + ".running_mean", Tensor({ch})});
    s.entries.push_back({prefix + ".running_var", Tensor({ch}, 1.0)});
}

ModelState build_structure(const NetworkConfig& c) {
    ModelState s;
    for (int i = 0; i < c.depth; ++i) {
        const int in = i == 0 ? c.in_channels_per_modality : Arch::enc_ch(c, i - 1);
        const int out = Arch::enc_ch(c, i);
        for (const char* stream : {"a", "b"}) {
            const std::string p = std::string("enc_") + stream + std::to_string(i);
            add_conv(s, p + ".conv", out, in, 3);
            add_norm(s, p + ".norm", out);
        }
        if (c.use_spatial_attention) {
            const std::string p = "att" + std::to_string(i);
            add_conv(s, p + ".conv1", out, 2 * out, 1);
            add_conv(s, p + ".conv2", 1, out, 1);
        }
    }
    const int cb = Arch::bottleneck_ch(c);
    add_conv(s, "bottleneck.conv", cb, 2 * Arch::enc_ch(c, c.depth - 1), 3);
    add_norm(s, "bottleneck.norm", cb);
    for (int i = c.depth - 1; i >= 0; --i) {
        const int up = i == c.depth - 1 ? cb : Arch::enc_ch(c, i + 1);
        const std::string p = "dec" + std::to_string(i);
        add_conv(s, p + ".conv", Arch::enc_ch(c, i), up + Arch::skip_ch(c, i), 3);
        add_norm(s, p + ".norm", Arch::enc_ch(c, i));
    }
    add_conv(s, "head", c.n_classes, Arch::enc_ch(c, 0), 1);
    return s;
}

}  // namespace

ModelState init_state(const NetworkConfig& config, std::uint64_t seed) {
    config.validate();
    ModelState s = build_structure(config);
    for (auto& e : s.entries) {
        if (e.value.shape.size() != 4) continue;  // only conv kernels get random init
        auto rng = make_rng(derive_seed(seed, e.name));
        const int fan_in = e.value.shape[1] * e.value.shape[2] * e.value.shape[3];
        std::normal_distribution<double> he(0.0, std::sqrt(2.0 / fan_in));
        for (double& v : e.value.data) v = he(rng);
    }
    return s;
}

NetworkGraph::NetworkGraph(Tape& tape, ModelState& state, const NetworkConfig& config,
                           bool trainable)
    : tape_(tape), state_(state), config_(config), trainable_(trainable) {
    config_.validate();
}

VarId NetworkGraph::param(const std::string& name) {
    auto it = leaves_.find(name);
    if (it != leaves_.end()) return it->second;
    const Tensor& v = state_.find(name);
    VarId id = trainable_ && is_trainable_param(name) ? tape_.leaf(v) : tape_.constant(v);
    leaves_[name] = id;
    return id;
}

VarId NetworkGraph::conv_block(VarId x, const std::string& prefix, bool training,
                               bool update_stats) {
    VarId c = tape_.conv2d(x, param(prefix + ".conv.w"), param(prefix + ".conv.b"));
    Tensor* rm = &state_.find(prefix + ".norm.running_mean");
    Tensor* rv = &state_.find(prefix + ".norm.running_var");
    VarId n = tape_.instance_norm(c, param(prefix + ".norm.gamma"), param(prefix + ".norm.beta"),
                                  training, training && !update_stats ? nullptr : rm,
                                  training && !update_stats ? nullptr : rv);
    return tape_.relu(n);
}

std::pair<VarId, VarId> spatial_attention(Tape& tape, VarId f_a, VarId f_b, VarId w1, VarId b1,
                                          VarId w2, VarId b2) {
    VarId cat = tape.concat_ch({f_a, f_b});
    VarId h = tape.relu(tape.conv2d(cat, w1, b1));
    VarId w = tape.sigmoid(tape.conv2d(h, w2, b2));
    VarId g = tape.gate_blend(w, f_a, f_b);
    VarId fused = tape.concat_ch({f_a, f_b, g});
    return {w, fused};
}

VarId NetworkGraph::forward(const Tensor& x_a, const Tensor& x_b, bool training,
                            bool update_stats) {
    if (!x_a.same_shape(x_b)) throw std::invalid_argument("forward: modality shape mismatch");
    if (x_a.shape.size() != 2) throw std::invalid_argument("forward: inputs must be rank-2");
    const int H = x_a.shape[0], W = x_a.shape[1];
    const int div = 1 << config_.depth;
    if (H % div != 0 || W % div != 0)
        throw std::invalid_argument("forward: spatial dims must be divisible by 2^depth");

    Tensor ta({1, H, W}), tb({1, H, W});
    ta.data = x_a.data;
    tb.data = x_b.data;
    VarId fa = tape_.constant(std::move(ta));
    VarId fb = tape_.constant(std::move(tb));

    std::vector<VarId> skips(config_.depth);
    for (int i = 0; i < config_.depth; ++i) {
        const std::string si = std::to_string(i);
        fa = conv_block(fa, "enc_a" + si, training, update_stats);
        fb = conv_block(fb, "enc_b" + si, training, update_stats);
        if (config_.use_spatial_attention) {
            auto [w, fused] =
                spatial_attention(tape_, fa, fb, param("att" + si + ".conv1.w"),
                                  param("att" + si + ".conv1.b"), param("att" + si + ".conv2.w"),
                                  param("att" + si + ".conv2.b"));
            (void)w;
            skips[i] = fused;
        } else {
            skips[i] = tape_.concat_ch({fa, fb});
        }
        fa = tape_.avg_pool2(fa);
        fb = tape_.avg_pool2(fb);
    }

    VarId d = conv_block(tape_.concat_ch({fa, fb}), "bottleneck", training, update_stats);
    for (int i = config_.depth - 1; i >= 0; --i) {
        d = tape_.upsample2(d);
        d = conv_block(tape_.concat_ch({d, skips[i]}), "dec" + std::to_string(i), training,
                       update_stats);
    }
    VarId logits = tape_.conv2d(d, param("head.w"), param("head.b"));
    VarId prob = tape_.softmax_ch(logits);
    if (!all_finite(tape_.val(prob)))
        throw std::runtime_error("forward produced non-finite activations");
    return prob;
}

Tensor forward(const ModelState& state, const NetworkConfig& config, const Tensor& x_a,
               const Tensor& x_b, bool instance_stats) {
    Tape tape;
    // neither mode mutates the state; the const_cast only feeds the graph
    NetworkGraph graph(tape, const_cast<ModelState&>(state), config, /*trainable=*/false);
    VarId prob = graph.forward(x_a, x_b, /*training=*/instance_stats, /*update_stats=*/false);
    return tape.val(prob);
}

void check_probability_map(const Tensor& prob) {
    if (prob.shape.size() != 3) throw std::invalid_argument("probability map must be (K,H,W)");
    const int K = prob.shape[0];
    const std::size_t n = static_cast<std::size_t>(prob.shape[1]) * prob.shape[2];
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int c = 0; c < K; ++c) {
            const double v = prob.data[c * n + i];
            if (v < 0.0) throw std::runtime_error("probability map has negative entry");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-5)
            throw std::runtime_error("probability map pixel does not sum to 1");
    }
}

}  // namespace lesen
