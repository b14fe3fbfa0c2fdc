#include "lesen/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lesen {

namespace {

void expect(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

// Matching single-sweep backward for one channel pair: scatters the input
// gradient and accumulates the nine weight-gradient dots in registers.
template <bool NeedX, bool NeedW>
void conv3_bwd_cc(const double* go, const double* ip, double* gip, const double* wp, double* wacc,
                  int H, int W) {
    for (int y = 0; y < H; ++y) {
        const std::size_t row = static_cast<std::size_t>(y) * W;
        const double* gorow = go + row;
        const double* r0 = y > 0 ? ip + row - W : nullptr;
        const double* r1 = ip + row;
        const double* r2 = y + 1 < H ? ip + row + W : nullptr;
        double* g0 = (NeedX && y > 0) ? gip + row - W : nullptr;
        double* g1 = NeedX ? gip + row : nullptr;
        double* g2 = (NeedX && y + 1 < H) ? gip + row + W : nullptr;
        for (int x = 0; x < W; ++x) {
            const double g = gorow[x];
            const int xl = x - 1, xr = x + 1;
            const bool hl = xl >= 0, hr = xr < W;
            if (NeedX) {
                if (g0) {
                    if (hl) g0[xl] += wp[0] * g;
                    g0[x] += wp[1] * g;
                    if (hr) g0[xr] += wp[2] * g;
                }
                if (hl) g1[xl] += wp[3] * g;
                g1[x] += wp[4] * g;
                if (hr) g1[xr] += wp[5] * g;
                if (g2) {
                    if (hl) g2[xl] += wp[6] * g;
                    g2[x] += wp[7] * g;
                    if (hr) g2[xr] += wp[8] * g;
                }
            }
            if (NeedW) {
                if (r0) {
                    if (hl) wacc[0] += g * r0[xl];
                    wacc[1] += g * r0[x];
                    if (hr) wacc[2] += g * r0[xr];
                }
                if (hl) wacc[3] += g * r1[xl];
                wacc[4] += g * r1[x];
                if (hr) wacc[5] += g * r1[xr];
                if (r2) {
                    if (hl) wacc[6] += g * r2[xl];
                    wacc[7] += g * r2[x];
                    if (hr) wacc[8] += g * r2[xr];
                }
            }
        }
    }
}

}  // namespace

VarId Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::leaf(Tensor value) { return push(std::move(value), true, nullptr); }
VarId Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Tensor& Tape::grad(VarId id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape);
    return n.grad;
}

void Tape::backward(VarId scalar_id) {
    expect(nodes_[scalar_id].value.size() == 1, "backward expects a scalar node");
    grad(scalar_id)[0] = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.back && !n.grad.empty()) n.back(*this);
    }
}

VarId Tape::conv2d(VarId xi, VarId wi, VarId bi) {
    const Tensor& x = val(xi);
    const Tensor& w = val(wi);
    const Tensor& b = val(bi);
    expect(x.shape.size() == 3 && w.shape.size() == 4, "conv2d: bad ranks");
    expect(w.shape[1] == x.shape[0], "conv2d: channel mismatch");
    expect(w.shape[2] == w.shape[3] && w.shape[2] % 2 == 1, "conv2d: kernel must be odd square");
    expect(b.shape.size() == 1 && b.shape[0] == w.shape[0], "conv2d: bias mismatch");
    const int Ci = x.shape[0], H = x.shape[1], W = x.shape[2];
    const int Co = w.shape[0], K = w.shape[2], P = K / 2;

    Tensor out({Co, H, W});
    for (int co = 0; co < Co; ++co) {
        double* op = &out.data[static_cast<std::size_t>(co) * H * W];
        for (std::size_t p = 0; p < static_cast<std::size_t>(H) * W; ++p) op[p] = b[co];
        for (int ci = 0; ci < Ci; ++ci) {
            const double* ip = &x.data[static_cast<std::size_t>(ci) * H * W];
            for (int ky = 0; ky < K; ++ky)
                for (int kx = 0; kx < K; ++kx) {
                    const double wv =
                        w.data[((static_cast<std::size_t>(co) * Ci + ci) * K + ky) * K + kx];
                    const int dy = ky - P, dx = kx - P;
                    const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    for (int y = y0; y < y1; ++y) {
                        double* orow = op + static_cast<std::size_t>(y) * W;
                        const double* irow = ip + static_cast<std::size_t>(y + dy) * W + dx;
                        for (int xx = x0; xx < x1; ++xx) orow[xx] += wv * irow[xx];
                    }
                }
        }
    }

    bool rg = requires_grad(xi) || requires_grad(wi) || requires_grad(bi);
    VarId id = push(std::move(out), rg, nullptr);
    if (rg)
        nodes_[id].back = [xi, wi, bi, id, Ci, H, W, Co, K, P](Tape& t) {
            const Tensor& go = t.nodes_[id].grad;
            const Tensor& x = t.val(xi);
            const Tensor& w = t.val(wi);
            const bool need_x = t.requires_grad(xi);
            const bool need_w = t.requires_grad(wi);
            const bool need_b = t.requires_grad(bi);
            Tensor* gx = need_x ? &t.grad(xi) : nullptr;
            Tensor* gw = need_w ? &t.grad(wi) : nullptr;
            Tensor* gb = need_b ? &t.grad(bi) : nullptr;
            for (int co = 0; co < Co; ++co) {
                const double* gop = &go.data[static_cast<std::size_t>(co) * H * W];
                if (need_b) {
                    double s = 0.0;
                    for (std::size_t p = 0; p < static_cast<std::size_t>(H) * W; ++p) s += gop[p];
                    (*gb)[co] += s;
                }
                for (int ci = 0; ci < Ci; ++ci) {
                    const double* ip = &x.data[static_cast<std::size_t>(ci) * H * W];
                    double* gip = need_x ? &gx->data[static_cast<std::size_t>(ci) * H * W] : nullptr;
                    if (K == 3) {
                        const std::size_t widx = (static_cast<std::size_t>(co) * Ci + ci) * 9;
                        double wacc[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
                        if (need_x && need_w)
                            conv3_bwd_cc<true, true>(gop, ip, gip, &w.data[widx], wacc, H, W);
                        else if (need_x)
                            conv3_bwd_cc<true, false>(gop, ip, gip, &w.data[widx], wacc, H, W);
                        else if (need_w)
                            conv3_bwd_cc<false, true>(gop, ip, gip, &w.data[widx], wacc, H, W);
                        if (need_w)
                            for (int k = 0; k < 9; ++k) gw->data[widx + k] += wacc[k];
                        continue;
                    }
                    for (int ky = 0; ky < K; ++ky)
                        for (int kx = 0; kx < K; ++kx) {
                            const std::size_t widx =
                                ((static_cast<std::size_t>(co) * Ci + ci) * K + ky) * K + kx;
                            const double wv = w.data[widx];
                            const int dy = ky - P, dx = kx - P;
                            const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                            const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                            double wacc = 0.0;
                            for (int y = y0; y < y1; ++y) {
                                const double* gorow = gop + static_cast<std::size_t>(y) * W;
                                const double* irow =
                                    ip + static_cast<std::size_t>(y + dy) * W + dx;
                                if (need_x) {
                                    double* girow =
                                        gip + static_cast<std::size_t>(y + dy) * W + dx;
                                    for (int xx = x0; xx < x1; ++xx) {
                                        girow[xx] += wv * gorow[xx];
                                        wacc += gorow[xx] * irow[xx];
                                    }
                                } else {
                                    for (int xx = x0; xx < x1; ++xx) wacc += gorow[xx] * irow[xx];
                                }
                            }
                            if (need_w) gw->data[widx] += wacc;
                        }
                }
            }
        };
    return id;
}

VarId Tape::instance_norm(VarId xi, VarId gi, VarId bi, bool training, Tensor* running_mean,
                          Tensor* running_var, double momentum, double eps) {
    const Tensor& x = val(xi);
    const Tensor& gamma = val(gi);
    const Tensor& beta = val(bi);
    expect(x.shape.size() == 3, "instance_norm: expects (C,H,W)");
    const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    expect(gamma.shape == std::vector<int>{C} && beta.shape == std::vector<int>{C},
           "instance_norm: gamma/beta shape mismatch");
    const std::size_t n = static_cast<std::size_t>(H) * W;

    std::vector<double> mean(C), inv_std(C);
    if (training) {
        for (int c = 0; c < C; ++c) {
            const double* p = &x.data[c * n];
            double mu = 0.0;
            for (std::size_t i = 0; i < n; ++i) mu += p[i];
            mu /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) var += (p[i] - mu) * (p[i] - mu);
            var /= static_cast<double>(n);
            mean[c] = mu;
            inv_std[c] = 1.0 / std::sqrt(var + eps);
            if (running_mean && running_var) {
                (*running_mean)[c] = momentum * (*running_mean)[c] + (1.0 - momentum) * mu;
                (*running_var)[c] = momentum * (*running_var)[c] + (1.0 - momentum) * var;
            }
        }
    } else {
        expect(running_mean && running_var, "instance_norm: eval mode needs running stats");
        for (int c = 0; c < C; ++c) {
            mean[c] = (*running_mean)[c];
            inv_std[c] = 1.0 / std::sqrt((*running_var)[c] + eps);
        }
    }

    Tensor out(x.shape);
    for (int c = 0; c < C; ++c) {
        const double* p = &x.data[c * n];
        double* o = &out.data[c * n];
        const double g = gamma[c], bb = beta[c], mu = mean[c], is = inv_std[c];
        for (std::size_t i = 0; i < n; ++i) o[i] = g * (p[i] - mu) * is + bb;
    }

    bool rg = requires_grad(xi) || requires_grad(gi) || requires_grad(bi);
    VarId id = push(std::move(out), rg, nullptr);
    if (rg)
        nodes_[id].back = [xi, gi, bi, id, C, n, mean, inv_std, training](Tape& t) {
            const Tensor& go = t.nodes_[id].grad;
            const Tensor& x = t.val(xi);
            const Tensor& gamma = t.val(gi);
            Tensor& gx = t.grad(xi);
            Tensor& gg = t.grad(gi);
            Tensor& gb = t.grad(bi);
            for (int c = 0; c < C; ++c) {
                const double* p = &x.data[c * n];
                const double* g = &go.data[c * n];
                double* gxp = &gx.data[c * n];
                const double mu = mean[c], is = inv_std[c], ga = gamma[c];
                double sum_go = 0.0, sum_go_xhat = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double xhat = (p[i] - mu) * is;
                    sum_go += g[i];
                    sum_go_xhat += g[i] * xhat;
                }
                gg[c] += sum_go_xhat;
                gb[c] += sum_go;
                if (training) {
                    const double inv_n = 1.0 / static_cast<double>(n);
                    for (std::size_t i = 0; i < n; ++i) {
                        const double xhat = (p[i] - mu) * is;
                        gxp[i] +=
                            ga * is * (g[i] - inv_n * sum_go - xhat * inv_n * sum_go_xhat);
                    }
                } else {
                    for (std::size_t i = 0; i < n; ++i) gxp[i] += ga * is * g[i];
                }
            }
        };
    return id;
}

VarId Tape::relu(VarId xi) {
    const Tensor& x = val(xi);
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    bool rg = requires_grad(xi);
    VarId id = push(std::move(out), rg, nullptr);
    if (rg)
        nodes_[id].back = [xi, id](Tape& t) {
            const Tensor& go = t.nodes_[id].grad;
            const Tensor& x = t.val(xi);
            Tensor& gx = t.grad(xi);
            for (std::size_t i = 0; i < x.size(); ++i)
                if (x[i] > 0.0) gx[i] += go[i];
        };
    return id;
}

VarId Tape::sigmoid(VarId xi) {
    const Tensor& x = val(xi);
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
    bool rg = requires_grad(xi);
    VarId id = push(std::move(out), rg, nullptr);
    if (rg)
        nodes_[id].back = [xi, id](Tape& t) {
            const Tensor& go = t.nodes_[id].grad;
            const Tensor& y = t.val(id);
            Tensor& gx = t.grad(xi);
            for (std::size_t i = 0; i < y.size(); ++i) gx[i] += go[i] * y[i] * (1.0 - y[i]);
        };
    return id;
}

VarId Tape::avg_pool2(VarId xi) {
    const Tensor& x = val(xi);
    expect(x.shape.size() == 3 && x.shape[1] % 2 == 0 && x.shape[2] % 2 == 0,
           "avg_pool2: spatial dims must be even");
    const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    Tensor out({C, H / 2, W / 2});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H / 2; ++y)
            for (int xx = 0; xx < W / 2; ++xx)
                out.at(c, y, xx) = 0.25 * (x.at(c, 2 * y, 2 * xx) + x.at(c, 2 * y, 2 * xx + 1) +
                                           x.at(c, 2 * y + 1, 2 * xx) +
                                           x.at(c, 2 * y + 1, 2 * xx + 1));
    bool rg = requires_grad(xi);
    VarId id = push(std::move(out), rg, nullptr);
    if (rg)
        nodes_[id].back = [xi, id, C, H, W](Tape& t) {
            const Tensor& go = t.nodes_[id].grad;
            Tensor& gx = t.grad(xi);
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < H / 2; ++y)
                    for (int xx = 0; xx < W / 2; ++xx) {
                        const double g = 0.25 * go.at(c, y, xx);
                        gx.at(c, 2 * y, 2 * xx) += g;
                        gx.at(c, 2 * y, 2 * xx + 1) += g;
                        gx.at(c, 2 * y + 1, 2 * xx) += g;
                        gx.at(c, 2 * y + 1, 2 * xx + 1) += g;
                    }
        };
    return id;
}

VarId Tape::upsample2(VarId xi) {
    const Tensor& x = val(xi);
    expect(x.shape.size() == 3, "upsample2: expects (C,H,W)");
    const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    Tensor out({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < 2 * H; ++y)
            for (int xx = 0; xx < 2 * W; ++xx) out.at(c, y, xx) = x.at(c, y / 2, xx / 2);
    bool rg = requires_grad(xi);
    VarId id = push(std::move(out), rg, nullptr);
    if (rg)
        nodes_[id].back = [xi, id, C, H, W](Tape& t) {
            const Tensor& go = t.nodes_[id].grad;
            Tensor& gx = t.grad(xi);
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < 2 * H; ++y)
                    for (int xx = 0; xx < 2 * W; ++xx) gx.at(c, y / 2, xx / 2) += go.at(c, y, xx);
        };
    return id;
}

VarId Tape::concat_ch(const std::vector<VarId>& xs) {
    expect(!xs.empty(), "concat_ch: empty input list");
    const int H = val(xs[0]).shape[1], W = val(xs[0]).shape[2];
    int C = 0;
    bool rg = false;
    for (VarId v : xs) {
        const Tensor& t = val(v);
        expect(t.shape.size() == 3 && t.shape[1] == H && t.shape[2] == W,
               "concat_ch: spatial shape mismatch");
        C += t.shape[0];
        rg = rg || requires_grad(v);
    }
    Tensor out({C, H, W});
    std::size_t off = 0;
    for (VarId v : xs) {
        const Tensor& t = val(v);
        std::copy(t.data.begin(), t.data.end(), out.data.begin() + off);
        off += t.size();
    }
    VarId id = push(std::move(out), rg, nullptr);
    if (rg)
        nodes_[id].back = [xs, id](Tape& t) {
            const Tensor& go = t.nodes_[id].grad;
            std::size_t off = 0;
            for (VarId v : xs) {
                const std::size_t sz = t.val(v).size();
                if (t.requires_grad(v)) {
                    Tensor& gx = t.grad(v);
                    for (std::size_t i = 0; i < sz; ++i) gx[i] += go[off + i];
                }
                off += sz;
            }
        };
    return id;
}

VarId Tape::gate_blend(VarId wi, VarId fai, VarId fbi) {
    const Tensor& w = val(wi);
    const Tensor& fa = val(fai);
    const Tensor& fb = val(fbi);
    expect(fa.same_shape(fb), "gate_blend: stream shape mismatch");
    expect(w.shape.size() == 3 && w.shape[0] == 1 && w.shape[1] == fa.shape[1] &&
               w.shape[2] == fa.shape[2],
           "gate_blend: gate must be (1,H,W)");
    const int C = fa.shape[0];
    const std::size_t n = static_cast<std::size_t>(fa.shape[1]) * fa.shape[2];
    Tensor out(fa.shape);
    for (int c = 0; c < C; ++c)
        for (std::size_t i = 0; i < n; ++i)
            out.data[c * n + i] =
                w.data[i] * fa.data[c * n + i] + (1.0 - w.data[i]) * fb.data[c * n + i];
    bool rg = requires_grad(wi) || requires_grad(fai) || requires_grad(fbi);
    VarId id = push(std::move(out), rg, nullptr);
    if (rg)
        nodes_[id].back = [wi, fai, fbi, id, C, n](Tape& t) {
            const Tensor& go = t.nodes_[id].grad;
            const Tensor& w = t.val(wi);
            const Tensor& fa = t.val(fai);
            const Tensor& fb = t.val(fbi);
            if (t.requires_grad(wi)) {
                Tensor& gw = t.grad(wi);
                for (std::size_t i = 0; i < n; ++i) {
                    double s = 0.0;
                    for (int c = 0; c < C; ++c)
                        s += go.data[c * n + i] * (fa.data[c * n + i] - fb.data[c * n + i]);
                    gw.data[i] += s;
                }
            }
            if (t.requires_grad(fai)) {
                Tensor& g = t.grad(fai);
                for (int c = 0; c < C; ++c)
                    for (std::size_t i = 0; i < n; ++i)
                        g.data[c * n + i] += go.data[c * n + i] * w.data[i];
            }
            if (t.requires_grad(fbi)) {
                Tensor& g = t.grad(fbi);
                for (int c = 0; c < C; ++c)
                    for (std::size_t i = 0; i < n; ++i)
                        g.data[c * n + i] += go.data[c * n + i] * (1.0 - w.data[i]);
            }
        };
    return id;
}

VarId Tape::softmax_ch(VarId xi) {
    const Tensor& x = val(xi);
    expect(x.shape.size() == 3, "softmax_ch: expects (C,H,W)");
    const int C = x.shape[0];
    const std::size_t n = static_cast<std::size_t>(x.shape[1]) * x.shape[2];
    Tensor out(x.shape);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = x.data[i];
        for (int c = 1; c < C; ++c) mx = std::max(mx, x.data[c * n + i]);
        double z = 0.0;
        for (int c = 0; c < C; ++c) {
            const double e = std::exp(x.data[c * n + i] - mx);
            out.data[c * n + i] = e;
            z += e;
        }
        for (int c = 0; c < C; ++c) out.data[c * n + i] /= z;
    }
    bool rg = requires_grad(xi);
    VarId id = push(std::move(out), rg, nullptr);
    if (rg)
        nodes_[id].back = [xi, id, C, n](Tape& t) {
            const Tensor& go = t.nodes_[id].grad;
            const Tensor& y = t.val(id);
            Tensor& gx = t.grad(xi);
            for (std::size_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (int c = 0; c < C; ++c) dot += go.data[c * n + i] * y.data[c * n + i];
                for (int c = 0; c < C; ++c)
                    gx.data[c * n + i] += y.data[c * n + i] * (go.data[c * n + i] - dot);
            }
        };
    return id;
}

VarId Tape::supervised_loss(VarId pi, const Tensor& target, double dice_smooth) {
    const Tensor& p = val(pi);
    expect(p.shape.size() == 3 && p.shape[0] == 2, "supervised_loss: expects (2,H,W)");
    expect(target.shape == std::vector<int>{p.shape[1], p.shape[2]},
           "supervised_loss: target shape mismatch");
    const std::size_t n = target.size();
    for (double v : target.data)
        expect(v == 0.0 || v == 1.0, "supervised_loss: target must be binary");

    double ce = 0.0, inter = 0.0, psum = 0.0, gsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = target.data[i];
        const double pf = p.data[n + i];  // foreground channel
        const double pt = g > 0.5 ? pf : p.data[i];
        ce -= std::log(std::max(pt, 1e-300));
        inter += pf * g;
        psum += pf;
        gsum += g;
    }
    ce /= static_cast<double>(n);
    const double denom = psum + gsum + dice_smooth;
    const double dice = (2.0 * inter + dice_smooth) / denom;
    Tensor out({1});
    out[0] = ce + (1.0 - dice);

    bool rg = requires_grad(pi);
    VarId id = push(std::move(out), rg, nullptr);
    if (rg)
        nodes_[id].back = [pi, id, target, dice_smooth, n, inter, denom](Tape& t) {
            const double gl = t.nodes_[id].grad[0];
            const Tensor& p = t.val(pi);
            Tensor& gp = t.grad(pi);
            const double inv_n = 1.0 / static_cast<double>(n);
            const double num = 2.0 * inter + dice_smooth;
            for (std::size_t i = 0; i < n; ++i) {
                const double g = target.data[i];
                // cross-entropy: -log p of the target class
                if (g > 0.5)
                    gp.data[n + i] += gl * (-inv_n / std::max(p.data[n + i], 1e-300));
                else
                    gp.data[i] += gl * (-inv_n / std::max(p.data[i], 1e-300));
                // soft Dice complement, foreground channel only
                gp.data[n + i] += gl * (num - 2.0 * g * denom) / (denom * denom);
            }
        };
    return id;
}

VarId Tape::mean_of(const std::vector<VarId>& xs) {
    expect(!xs.empty(), "mean_of: empty input list");
    Tensor out(val(xs[0]).shape);
    bool rg = false;
    for (VarId v : xs) {
        expect(val(v).same_shape(out), "mean_of: shape mismatch");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += val(v)[i];
        rg = rg || requires_grad(v);
    }
    const double inv_m = 1.0 / static_cast<double>(xs.size());
    for (double& v : out.data) v *= inv_m;
    VarId id = push(std::move(out), rg, nullptr);
    if (rg)
        nodes_[id].back = [xs, id, inv_m](Tape& t) {
            const Tensor& go = t.nodes_[id].grad;
            for (VarId v : xs)
                if (t.requires_grad(v)) {
                    Tensor& gx = t.grad(v);
                    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += inv_m * go[i];
                }
        };
    return id;
}

VarId Tape::mse_to(VarId xi, Tensor target) {
    const Tensor& x = val(xi);
    expect(x.same_shape(target), "mse_to: shape mismatch");
    const std::size_t n = x.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - target[i];
        s += d * d;
    }
    Tensor out({1});
    out[0] = s / static_cast<double>(n);
    bool rg = requires_grad(xi);
    VarId id = push(std::move(out), rg, nullptr);
    if (rg)
        nodes_[id].back = [xi, id, target = std::move(target), n](Tape& t) {
            const double gl = t.nodes_[id].grad[0];
            const Tensor& x = t.val(xi);
            Tensor& gx = t.grad(xi);
            const double c = 2.0 * gl / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) gx[i] += c * (x[i] - target[i]);
        };
    return id;
}

VarId Tape::affine(const std::vector<std::pair<double, VarId>>& terms) {
    Tensor out({1});
    bool rg = false;
    for (const auto& [a, v] : terms) {
        expect(val(v).size() == 1, "affine: all terms must be scalars");
        out[0] += a * val(v)[0];
        rg = rg || requires_grad(v);
    }
    VarId id = push(std::move(out), rg, nullptr);
    if (rg)
        nodes_[id].back = [terms, id](Tape& t) {
            const double gl = t.nodes_[id].grad[0];
            for (const auto& [a, v] : terms)
                if (t.requires_grad(v)) t.grad(v)[0] += a * gl;
        };
    return id;
}

}  // namespace lesen
