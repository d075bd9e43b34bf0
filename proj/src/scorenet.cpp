#include "sr/scorenet.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <stdexcept>

namespace sr {

namespace {

struct Tens {
    std::size_t c = 0, h = 0, w = 0;
    std::vector<double> v;
    Tens() = default;
    Tens(std::size_t c_, std::size_t h_, std::size_t w_) : c(c_), h(h_), w(w_), v(c_ * h_ * w_, 0.0) {}
    double& at(std::size_t ch, std::size_t y, std::size_t x) { return v[(ch * h + y) * w + x]; }
    double at(std::size_t ch, std::size_t y, std::size_t x) const { return v[(ch * h + y) * w + x]; }
    std::size_t size() const { return c * h * w; }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Normalized binomial filter [1 2 1]/4 (outer product in 2-D).
constexpr double kBinom[3] = {0.25, 0.5, 0.25};

} // namespace

struct ScoreNet::Tape::Impl {
    std::vector<Tens> val;
    std::vector<Tens> grd;
    std::vector<std::function<void(Impl&, const double*, std::vector<double>&)>> back;
};

ScoreNet::Tape::Tape() : impl(std::make_unique<Impl>()) {}
ScoreNet::Tape::~Tape() = default;

using TapeData = ScoreNet::Tape::Impl;

struct ScoreNet::Slices {
    struct S {
        std::size_t off, n;
    };
    std::vector<S> v;
    bool building = false;
};

namespace {

// Forward-pass context: tape, parameters, slice cursor.
struct Ctx {
    TapeData* t;
    std::vector<double>* params;           // mutable only while building
    ScoreNet::Slices* slices;
    RngState* rng;                         // only while building
    std::size_t cursor = 0;
    bool record = false;

    const double* w() const { return params->data(); }
};

enum class Init { He, Zero };

std::size_t fetch_param(Ctx& c, std::size_t n, Init kind, double fan_in = 1.0) {
    if (c.slices->building) {
        const std::size_t off = c.params->size();
        c.params->resize(off + n);
        if (kind == Init::He) {
            const double std = std::sqrt(1.0 / fan_in);
            for (std::size_t i = 0; i < n; ++i) (*c.params)[off + i] = std * c.rng->normal();
        }
        c.slices->v.push_back({off, n});
        ++c.cursor;
        return off;
    }
    const auto& s = c.slices->v.at(c.cursor++);
    if (s.n != n) throw std::logic_error("ScoreNet: parameter slice mismatch");
    return s.off;
}

std::size_t new_tensor(Ctx& c, std::size_t ch, std::size_t h, std::size_t w) {
    c.t->val.emplace_back(ch, h, w);
    return c.t->val.size() - 1;
}

Tens& grad_of(TapeData& t, std::size_t id) {
    if (t.grd[id].size() == 0) {
        const Tens& v = t.val[id];
        t.grd[id] = Tens(v.c, v.h, v.w);
    }
    return t.grd[id];
}

// --- convolution (stride 1, zero padding (k-1)/2) ------------------------

std::size_t conv(Ctx& c, std::size_t in, std::size_t cout, std::size_t k, Init init = Init::He) {
    const Tens& x = c.t->val[in];
    const std::size_t cin = x.c, H = x.h, W = x.w, pad = (k - 1) / 2;
    const std::size_t woff = fetch_param(c, cout * cin * k * k, init,
                                         static_cast<double>(cin * k * k));
    const std::size_t boff = fetch_param(c, cout, Init::Zero);
    const std::size_t out = new_tensor(c, cout, H, W);
    Tens& y = c.t->val[out];
    const double* wp = c.w();
    for (std::size_t oc = 0; oc < cout; ++oc) {
        for (std::size_t ic = 0; ic < cin; ++ic) {
            const double* ker = wp + woff + (oc * cin + ic) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const long dy = static_cast<long>(ky) - static_cast<long>(pad);
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const long dx = static_cast<long>(kx) - static_cast<long>(pad);
                    const double kv = ker[ky * k + kx];
                    if (kv == 0.0) continue;
                    const long y0 = std::max(0L, -dy), y1 = std::min<long>(H, static_cast<long>(H) - dy);
                    const long x0 = std::max(0L, -dx), x1 = std::min<long>(W, static_cast<long>(W) - dx);
                    for (long yy = y0; yy < y1; ++yy) {
                        const double* xr = &x.v[(ic * H + static_cast<std::size_t>(yy + dy)) * W];
                        double* yr = &y.v[(oc * H + static_cast<std::size_t>(yy)) * W];
                        for (long xx = x0; xx < x1; ++xx)
                            yr[xx] += kv * xr[xx + dx];
                    }
                }
            }
        }
        const double b = wp[boff + oc];
        for (std::size_t i = 0; i < H * W; ++i) y.v[oc * H * W + i] += b;
    }
    if (c.record) {
        c.t->back.push_back([in, out, cout, cin, H, W, k, pad, woff, boff](
                                TapeData& t, const double* wp2, std::vector<double>& g) {
            const Tens& gy = t.grd[out];
            if (gy.size() == 0) return;
            const Tens& x2 = t.val[in];
            Tens& gx = grad_of(t, in);
            for (std::size_t oc = 0; oc < cout; ++oc) {
                double gb = 0.0;
                for (std::size_t i = 0; i < H * W; ++i) gb += gy.v[oc * H * W + i];
                g[boff + oc] += gb;
                for (std::size_t ic = 0; ic < cin; ++ic) {
                    const double* ker = wp2 + woff + (oc * cin + ic) * k * k;
                    double* gker = g.data() + woff + (oc * cin + ic) * k * k;
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        const long dy = static_cast<long>(ky) - static_cast<long>(pad);
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long dx = static_cast<long>(kx) - static_cast<long>(pad);
                            const long y0 = std::max(0L, -dy),
                                       y1 = std::min<long>(H, static_cast<long>(H) - dy);
                            const long x0 = std::max(0L, -dx),
                                       x1 = std::min<long>(W, static_cast<long>(W) - dx);
                            double gw = 0.0;
                            const double kv = ker[ky * k + kx];
                            for (long yy = y0; yy < y1; ++yy) {
                                const double* xr =
                                    &x2.v[(ic * H + static_cast<std::size_t>(yy + dy)) * W];
                                double* gxr =
                                    &gx.v[(ic * H + static_cast<std::size_t>(yy + dy)) * W];
                                const double* gyr = &gy.v[(oc * H + static_cast<std::size_t>(yy)) * W];
                                for (long xx = x0; xx < x1; ++xx) {
                                    gw += gyr[xx] * xr[xx + dx];
                                    gxr[xx + dx] += kv * gyr[xx];
                                }
                            }
                            gker[ky * k + kx] += gw;
                        }
                    }
                }
            }
        });
    }
    return out;
}

// --- pointwise -----------------------------------------------------------

std::size_t silu(Ctx& c, std::size_t in) {
    const Tens& x = c.t->val[in];
    const std::size_t out = new_tensor(c, x.c, x.h, x.w);
    Tens& y = c.t->val[out];
    for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] * sigmoid(x.v[i]);
    if (c.record) {
        c.t->back.push_back([in, out](TapeData& t, const double*, std::vector<double>&) {
            const Tens& gy = t.grd[out];
            if (gy.size() == 0) return;
            const Tens& x2 = t.val[in];
            Tens& gx = grad_of(t, in);
            for (std::size_t i = 0; i < x2.size(); ++i) {
                const double s = sigmoid(x2.v[i]);
                gx.v[i] += gy.v[i] * s * (1.0 + x2.v[i] * (1.0 - s));
            }
        });
    }
    return out;
}

std::size_t add(Ctx& c, std::size_t a, std::size_t b) {
    const Tens& xa = c.t->val[a];
    const Tens& xb = c.t->val[b];
    const std::size_t out = new_tensor(c, xa.c, xa.h, xa.w);
    Tens& y = c.t->val[out];
    for (std::size_t i = 0; i < y.size(); ++i) y.v[i] = xa.v[i] + xb.v[i];
    if (c.record) {
        c.t->back.push_back([a, b, out](TapeData& t, const double*, std::vector<double>&) {
            const Tens& gy = t.grd[out];
            if (gy.size() == 0) return;
            Tens& ga = grad_of(t, a);
            Tens& gb = grad_of(t, b);
            for (std::size_t i = 0; i < gy.size(); ++i) {
                ga.v[i] += gy.v[i];
                gb.v[i] += gy.v[i];
            }
        });
    }
    return out;
}

std::size_t concat(Ctx& c, std::size_t a, std::size_t b) {
    const Tens& xa = c.t->val[a];
    const Tens& xb = c.t->val[b];
    const std::size_t out = new_tensor(c, xa.c + xb.c, xa.h, xa.w);
    Tens& y = c.t->val[out];
    std::memcpy(y.v.data(), xa.v.data(), xa.size() * sizeof(double));
    std::memcpy(y.v.data() + xa.size(), xb.v.data(), xb.size() * sizeof(double));
    if (c.record) {
        const std::size_t na = xa.size();
        c.t->back.push_back([a, b, out, na](TapeData& t, const double*, std::vector<double>&) {
            const Tens& gy = t.grd[out];
            if (gy.size() == 0) return;
            Tens& ga = grad_of(t, a);
            Tens& gb = grad_of(t, b);
            for (std::size_t i = 0; i < na; ++i) ga.v[i] += gy.v[i];
            for (std::size_t i = 0; i < gb.size(); ++i) gb.v[i] += gy.v[na + i];
        });
    }
    return out;
}

// --- binomial down/upsampling -------------------------------------------

std::size_t blurpool(Ctx& c, std::size_t in) {
    const Tens& x = c.t->val[in];
    const std::size_t H = x.h, W = x.w, Ho = H / 2, Wo = W / 2;
    const std::size_t out = new_tensor(c, x.c, Ho, Wo);
    Tens& y = c.t->val[out];
    for (std::size_t ch = 0; ch < x.c; ++ch)
        for (std::size_t oy = 0; oy < Ho; ++oy)
            for (std::size_t ox = 0; ox < Wo; ++ox) {
                double acc = 0.0;
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const long iy = static_cast<long>(2 * oy) + ky - 1;
                        const long ix = static_cast<long>(2 * ox) + kx - 1;
                        if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W))
                            continue;
                        acc += kBinom[ky] * kBinom[kx] *
                               x.at(ch, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                    }
                y.at(ch, oy, ox) = acc;
            }
    if (c.record) {
        c.t->back.push_back([in, out, H, W, Ho, Wo](TapeData& t, const double*,
                                                    std::vector<double>&) {
            const Tens& gy = t.grd[out];
            if (gy.size() == 0) return;
            Tens& gx = grad_of(t, in);
            for (std::size_t ch = 0; ch < gx.c; ++ch)
                for (std::size_t oy = 0; oy < Ho; ++oy)
                    for (std::size_t ox = 0; ox < Wo; ++ox) {
                        const double g = gy.at(ch, oy, ox);
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx) {
                                const long iy = static_cast<long>(2 * oy) + ky - 1;
                                const long ix = static_cast<long>(2 * ox) + kx - 1;
                                if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) ||
                                    ix >= static_cast<long>(W))
                                    continue;
                                gx.at(ch, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                                    kBinom[ky] * kBinom[kx] * g;
                            }
                    }
        });
    }
    return out;
}

// Nearest x2 upsample followed by the binomial blur.
std::size_t blurup(Ctx& c, std::size_t in) {
    const Tens& x = c.t->val[in];
    const std::size_t H = x.h, W = x.w, Ho = 2 * H, Wo = 2 * W;
    const std::size_t out = new_tensor(c, x.c, Ho, Wo);
    Tens& y = c.t->val[out];
    for (std::size_t ch = 0; ch < x.c; ++ch)
        for (std::size_t oy = 0; oy < Ho; ++oy)
            for (std::size_t ox = 0; ox < Wo; ++ox) {
                double acc = 0.0;
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const long uy = static_cast<long>(oy) + ky - 1;
                        const long ux = static_cast<long>(ox) + kx - 1;
                        if (uy < 0 || ux < 0 || uy >= static_cast<long>(Ho) || ux >= static_cast<long>(Wo))
                            continue;
                        acc += kBinom[ky] * kBinom[kx] *
                               x.at(ch, static_cast<std::size_t>(uy / 2), static_cast<std::size_t>(ux / 2));
                    }
                y.at(ch, oy, ox) = acc;
            }
    if (c.record) {
        c.t->back.push_back([in, out, Ho, Wo](TapeData& t, const double*, std::vector<double>&) {
            const Tens& gy = t.grd[out];
            if (gy.size() == 0) return;
            Tens& gx = grad_of(t, in);
            for (std::size_t ch = 0; ch < gx.c; ++ch)
                for (std::size_t oy = 0; oy < Ho; ++oy)
                    for (std::size_t ox = 0; ox < Wo; ++ox) {
                        const double g = gy.at(ch, oy, ox);
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx) {
                                const long uy = static_cast<long>(oy) + ky - 1;
                                const long ux = static_cast<long>(ox) + kx - 1;
                                if (uy < 0 || ux < 0 || uy >= static_cast<long>(Ho) ||
                                    ux >= static_cast<long>(Wo))
                                    continue;
                                gx.at(ch, static_cast<std::size_t>(uy / 2),
                                      static_cast<std::size_t>(ux / 2)) += kBinom[ky] * kBinom[kx] * g;
                            }
                    }
        });
    }
    return out;
}

std::size_t nearest_up(Ctx& c, std::size_t in) {
    const Tens& x = c.t->val[in];
    const std::size_t out = new_tensor(c, x.c, 2 * x.h, 2 * x.w);
    Tens& y = c.t->val[out];
    for (std::size_t ch = 0; ch < x.c; ++ch)
        for (std::size_t oy = 0; oy < 2 * x.h; ++oy)
            for (std::size_t ox = 0; ox < 2 * x.w; ++ox)
                y.at(ch, oy, ox) = x.at(ch, oy / 2, ox / 2);
    if (c.record) {
        c.t->back.push_back([in, out](TapeData& t, const double*, std::vector<double>&) {
            const Tens& gy = t.grd[out];
            if (gy.size() == 0) return;
            Tens& gx = grad_of(t, in);
            for (std::size_t ch = 0; ch < gx.c; ++ch)
                for (std::size_t oy = 0; oy < gy.h; ++oy)
                    for (std::size_t ox = 0; ox < gy.w; ++ox)
                        gx.at(ch, oy / 2, ox / 2) += gy.at(ch, oy, ox);
        });
    }
    return out;
}

// --- conditioning --------------------------------------------------------

// Dense layer on a (n,1,1) vector tensor.
std::size_t dense(Ctx& c, std::size_t in, std::size_t nout) {
    const Tens& x = c.t->val[in];
    const std::size_t nin = x.size();
    const std::size_t woff = fetch_param(c, nout * nin, Init::He, static_cast<double>(nin));
    const std::size_t boff = fetch_param(c, nout, Init::Zero);
    const std::size_t out = new_tensor(c, nout, 1, 1);
    Tens& y = c.t->val[out];
    const double* wp = c.w();
    for (std::size_t o = 0; o < nout; ++o) {
        double acc = wp[boff + o];
        for (std::size_t i = 0; i < nin; ++i) acc += wp[woff + o * nin + i] * x.v[i];
        y.v[o] = acc;
    }
    if (c.record) {
        c.t->back.push_back([in, out, nin, nout, woff, boff](TapeData& t, const double* wp2,
                                                             std::vector<double>& g) {
            const Tens& gy = t.grd[out];
            if (gy.size() == 0) return;
            const Tens& x2 = t.val[in];
            Tens& gx = grad_of(t, in);
            for (std::size_t o = 0; o < nout; ++o) {
                const double go = gy.v[o];
                g[boff + o] += go;
                for (std::size_t i = 0; i < nin; ++i) {
                    g[woff + o * nin + i] += go * x2.v[i];
                    gx.v[i] += go * wp2[woff + o * nin + i];
                }
            }
        });
    }
    return out;
}

// x + per-channel bias computed as dense(emb); the sigma conditioning path.
std::size_t emb_bias_add(Ctx& c, std::size_t x_id, std::size_t emb_id) {
    const Tens& x = c.t->val[x_id];
    const std::size_t bias = dense(c, emb_id, x.c);
    const std::size_t out = new_tensor(c, x.c, x.h, x.w);
    Tens& y = c.t->val[out];
    const Tens& bv = c.t->val[bias];
    for (std::size_t ch = 0; ch < x.c; ++ch)
        for (std::size_t i = 0; i < x.h * x.w; ++i)
            y.v[ch * x.h * x.w + i] = x.v[ch * x.h * x.w + i] + bv.v[ch];
    if (c.record) {
        c.t->back.push_back([x_id, bias, out](TapeData& t, const double*, std::vector<double>&) {
            const Tens& gy = t.grd[out];
            if (gy.size() == 0) return;
            Tens& gx = grad_of(t, x_id);
            Tens& gb = grad_of(t, bias);
            const std::size_t hw = gx.h * gx.w;
            for (std::size_t ch = 0; ch < gx.c; ++ch) {
                double acc = 0.0;
                for (std::size_t i = 0; i < hw; ++i) {
                    gx.v[ch * hw + i] += gy.v[ch * hw + i];
                    acc += gy.v[ch * hw + i];
                }
                gb.v[ch] += acc;
            }
        });
    }
    return out;
}

// --- group normalization (optional; couples all pixels) ------------------

std::size_t groupnorm(Ctx& c, std::size_t in, std::size_t groups) {
    const Tens& x = c.t->val[in];
    const std::size_t C = x.c, hw = x.h * x.w;
    groups = std::min(groups, C);
    while (C % groups != 0) --groups;
    const std::size_t goff = fetch_param(c, C, Init::Zero); // gamma - 1 stored
    const std::size_t boff = fetch_param(c, C, Init::Zero);
    const std::size_t out = new_tensor(c, C, x.h, x.w);
    Tens& y = c.t->val[out];
    const std::size_t cpg = C / groups;
    const double eps = 1e-5;
    const double* wp = c.w();
    std::vector<double> mu(groups), istd(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        double m = 0.0, m2 = 0.0;
        const std::size_t n = cpg * hw;
        for (std::size_t ch = g * cpg; ch < (g + 1) * cpg; ++ch)
            for (std::size_t i = 0; i < hw; ++i) {
                const double v = x.v[ch * hw + i];
                m += v;
                m2 += v * v;
            }
        m /= static_cast<double>(n);
        const double var = m2 / static_cast<double>(n) - m * m;
        mu[g] = m;
        istd[g] = 1.0 / std::sqrt(var + eps);
    }
    for (std::size_t ch = 0; ch < C; ++ch) {
        const std::size_t g = ch / cpg;
        const double gamma = 1.0 + wp[goff + ch], beta = wp[boff + ch];
        for (std::size_t i = 0; i < hw; ++i)
            y.v[ch * hw + i] = gamma * (x.v[ch * hw + i] - mu[g]) * istd[g] + beta;
    }
    if (c.record) {
        c.t->back.push_back([in, out, C, hw, cpg, goff, boff, mu, istd](
                                TapeData& t, const double* wp2, std::vector<double>& g) {
            const Tens& gy = t.grd[out];
            if (gy.size() == 0) return;
            const Tens& x2 = t.val[in];
            Tens& gx = grad_of(t, in);
            const std::size_t groups = C / cpg;
            for (std::size_t gr = 0; gr < groups; ++gr) {
                const std::size_t n = cpg * hw;
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (std::size_t ch = gr * cpg; ch < (gr + 1) * cpg; ++ch) {
                    const double gamma = 1.0 + wp2[goff + ch];
                    double dg = 0.0, db = 0.0;
                    for (std::size_t i = 0; i < hw; ++i) {
                        const double xhat = (x2.v[ch * hw + i] - mu[gr]) * istd[gr];
                        const double dxhat = gy.v[ch * hw + i] * gamma;
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                        dg += gy.v[ch * hw + i] * xhat;
                        db += gy.v[ch * hw + i];
                    }
                    g[goff + ch] += dg;
                    g[boff + ch] += db;
                }
                for (std::size_t ch = gr * cpg; ch < (gr + 1) * cpg; ++ch) {
                    const double gamma = 1.0 + wp2[goff + ch];
                    for (std::size_t i = 0; i < hw; ++i) {
                        const double xhat = (x2.v[ch * hw + i] - mu[gr]) * istd[gr];
                        const double dxhat = gy.v[ch * hw + i] * gamma;
                        gx.v[ch * hw + i] += istd[gr] * (dxhat - sum_dxhat / static_cast<double>(n) -
                                                         xhat * sum_dxhat_xhat / static_cast<double>(n));
                    }
                }
            }
        });
    }
    return out;
}

// --- single-head dot-product attention over flattened space --------------

std::size_t attend(Ctx& c, std::size_t q_id, std::size_t k_id, std::size_t v_id) {
    const Tens& q = c.t->val[q_id];
    const Tens& k = c.t->val[k_id];
    const Tens& v = c.t->val[v_id];
    const std::size_t C = q.c, n = q.h * q.w;
    const double scale = 1.0 / std::sqrt(static_cast<double>(C));
    const std::size_t out = new_tensor(c, C, q.h, q.w);
    Tens& y = c.t->val[out];
    std::vector<double> A(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t ch = 0; ch < C; ++ch) s += q.v[ch * n + i] * k.v[ch * n + j];
            A[i * n + j] = s * scale;
            mx = std::max(mx, A[i * n + j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            A[i * n + j] = std::exp(A[i * n + j] - mx);
            z += A[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) A[i * n + j] /= z;
    }
    for (std::size_t ch = 0; ch < C; ++ch)
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += A[i * n + j] * v.v[ch * n + j];
            y.v[ch * n + i] = acc;
        }
    if (c.record) {
        c.t->back.push_back([q_id, k_id, v_id, out, C, n, scale, A](
                                TapeData& t, const double*, std::vector<double>&) {
            const Tens& gy = t.grd[out];
            if (gy.size() == 0) return;
            const Tens& q2 = t.val[q_id];
            const Tens& k2 = t.val[k_id];
            const Tens& v2 = t.val[v_id];
            Tens& gq = grad_of(t, q_id);
            Tens& gk = grad_of(t, k_id);
            Tens& gv = grad_of(t, v_id);
            std::vector<double> dA(n * n, 0.0);
            for (std::size_t ch = 0; ch < C; ++ch)
                for (std::size_t i = 0; i < n; ++i) {
                    const double go = gy.v[ch * n + i];
                    for (std::size_t j = 0; j < n; ++j) {
                        gv.v[ch * n + j] += A[i * n + j] * go;
                        dA[i * n + j] += go * v2.v[ch * n + j];
                    }
                }
            for (std::size_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += A[i * n + j] * dA[i * n + j];
                for (std::size_t j = 0; j < n; ++j) {
                    const double ds = A[i * n + j] * (dA[i * n + j] - dot) * scale;
                    for (std::size_t ch = 0; ch < C; ++ch) {
                        gq.v[ch * n + i] += ds * k2.v[ch * n + j];
                        gk.v[ch * n + j] += ds * q2.v[ch * n + i];
                    }
                }
            }
        });
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Network assembly
// ---------------------------------------------------------------------------

namespace {

struct NetBuilder {
    const NetConfig& cfg;
    Ctx& ctx;
    std::size_t emb;

    std::size_t channels(std::size_t level) const {
        return level == 1 ? cfg.base_channels : cfg.deep_channels;
    }

    std::size_t resblock(std::size_t in, std::size_t cin, std::size_t cout) {
        std::size_t h = in;
        if (cfg.group_norm) h = groupnorm(ctx, h, 32);
        h = silu(ctx, h);
        h = conv(ctx, h, cout, 3);
        h = emb_bias_add(ctx, h, emb);
        if (cfg.group_norm) h = groupnorm(ctx, h, 32);
        h = silu(ctx, h);
        h = conv(ctx, h, cout, 3);
        std::size_t sc = cin == cout ? in : conv(ctx, in, cout, 1);
        return add(ctx, h, sc);
    }

    std::size_t down(std::size_t in, std::size_t cout) {
        std::size_t h = silu(ctx, in);
        h = conv(ctx, h, cout, 3);
        h = blurpool(ctx, h);
        h = silu(ctx, h);
        h = conv(ctx, h, cout, 3);
        std::size_t sc = conv(ctx, blurpool(ctx, in), cout, 1);
        return add(ctx, h, sc);
    }

    std::size_t up(std::size_t in, std::size_t cout) {
        std::size_t h = silu(ctx, in);
        h = conv(ctx, h, cout, 3);
        h = blurup(ctx, h);
        std::size_t sc = conv(ctx, nearest_up(ctx, in), cout, 1);
        return add(ctx, h, sc);
    }

    std::size_t attention_block(std::size_t in, std::size_t C) {
        std::size_t q = conv(ctx, in, C, 1);
        std::size_t k = conv(ctx, in, C, 1);
        std::size_t v = conv(ctx, in, C, 1);
        std::size_t o = attend(ctx, q, k, v);
        o = conv(ctx, o, C, 1, Init::Zero);
        return add(ctx, in, o);
    }

    std::size_t run(std::size_t xin) {
        const std::size_t d = cfg.depth, b = cfg.blocks_per_stage;
        std::size_t h = conv(ctx, xin, channels(1), 3);
        std::vector<std::size_t> enc_in(d, 0);
        std::vector<std::vector<std::size_t>> enc_rb(d);
        for (std::size_t j = 1; j + 1 <= d; ++j) {
            enc_in[j] = h;
            for (std::size_t r = 0; r < b; ++r) {
                h = resblock(h, channels(j), channels(j));
                enc_rb[j].push_back(h);
            }
            h = down(h, channels(j + 1));
        }
        const std::size_t CL = channels(d);
        const std::size_t lat_in = h;
        std::vector<std::size_t> lat_rb;
        for (std::size_t r = 0; r < b + 1; ++r) {
            h = resblock(h, CL, CL);
            lat_rb.push_back(h);
        }
        if (cfg.attention) h = attention_block(h, CL);
        h = resblock(h, CL, CL);
        for (std::size_t m = 1; m <= b; ++m)
            h = resblock(concat(ctx, h, lat_rb[b - m]), 2 * CL, CL);
        h = resblock(concat(ctx, h, lat_in), 2 * CL, CL);
        for (std::size_t j = d; j-- > 1;) {
            h = up(h, channels(j));
            h = resblock(concat(ctx, h, enc_in[j]), 2 * channels(j), channels(j));
            for (std::size_t m = 1; m <= b; ++m)
                h = resblock(concat(ctx, h, enc_rb[j][b - m]), 2 * channels(j), channels(j));
        }
        h = conv(ctx, h, channels(1), 3);
        h = conv(ctx, h, 1, 1, Init::Zero);
        return h;
    }
};

} // namespace

ScoreNet::ScoreNet(NetConfig cfg, std::size_t rows, std::size_t cols, RngState& rng)
    : cfg_(cfg), rows_(rows), cols_(cols), slices_(std::make_unique<Slices>()) {
    cfg_.validate();
    const std::size_t div = std::size_t{1} << (cfg_.depth - 1);
    if (rows % div != 0 || cols % div != 0)
        throw std::invalid_argument("ScoreNet: image side must be divisible by 2^(depth-1)");
    fourier_freqs_.resize(cfg_.fourier_features);
    for (auto& f : fourier_freqs_) f = cfg_.fourier_scale * rng.normal();
    // Dry run to materialize all parameter slices.
    slices_->building = true;
    Image zero(rows, cols);
    Tape tape;
    Ctx ctx{tape.impl.get(), &params_, slices_.get(), &rng, 0, false};
    std::size_t xin = new_tensor(ctx, 1, rows, cols);
    std::size_t u = new_tensor(ctx, 2 * cfg_.fourier_features, 1, 1);
    (void)xin;
    std::size_t emb0 = dense(ctx, u, 2 * cfg_.fourier_features);
    std::size_t emb = silu(ctx, emb0);
    NetBuilder nb{cfg_, ctx, emb};
    nb.run(xin);
    slices_->building = false;
}

ScoreNet::~ScoreNet() = default;

void ScoreNet::set_params(const std::vector<double>& p) {
    if (p.size() != params_.size())
        throw std::invalid_argument("ScoreNet::set_params: size mismatch");
    params_ = p;
}

void ScoreNet::set_fourier_freqs(const std::vector<double>& f) {
    if (f.size() != fourier_freqs_.size())
        throw std::invalid_argument("ScoreNet::set_fourier_freqs: size mismatch");
    fourier_freqs_ = f;
}

Image ScoreNet::forward(const Image& x, double sigma, std::unique_ptr<Tape>* tape_out) const {
    const std::size_t div = std::size_t{1} << (cfg_.depth - 1);
    if (x.rows % div != 0 || x.cols % div != 0)
        throw std::invalid_argument("ScoreNet: image side must be divisible by 2^(depth-1)");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("ScoreNet: sigma must be positive and finite");
    auto tape = std::make_unique<Tape>();
    TapeData& td = *tape->impl;
    Ctx ctx{&td, const_cast<std::vector<double>*>(&params_), slices_.get(), nullptr, 0,
            tape_out != nullptr};
    const std::size_t xin = new_tensor(ctx, 1, x.rows, x.cols);
    td.val[xin].v = x.data;
    const std::size_t F = cfg_.fourier_features;
    const std::size_t u = new_tensor(ctx, 2 * F, 1, 1);
    const double ls = std::log(sigma);
    for (std::size_t i = 0; i < F; ++i) {
        td.val[u].v[i] = std::cos(2.0 * M_PI * fourier_freqs_[i] * ls);
        td.val[u].v[F + i] = std::sin(2.0 * M_PI * fourier_freqs_[i] * ls);
    }
    std::size_t emb = dense(ctx, u, 2 * F);
    emb = silu(ctx, emb);
    NetBuilder nb{cfg_, ctx, emb};
    const std::size_t out = nb.run(xin);
    Image y(x.rows, x.cols);
    y.data = td.val[out].v;
    if (tape_out) {
        td.grd.resize(td.val.size());
        *tape_out = std::move(tape);
    }
    return y;
}

void ScoreNet::backward(Tape& tape, const Image& out_grad, std::vector<double>& grad) const {
    if (grad.size() != params_.size())
        throw std::invalid_argument("ScoreNet::backward: gradient buffer size mismatch");
    TapeData& td = *tape.impl;
    if (td.back.empty()) throw std::logic_error("ScoreNet::backward: tape was not recorded");
    const std::size_t out = td.val.size() - 1;
    td.grd[out] = Tens(1, out_grad.rows, out_grad.cols);
    td.grd[out].v = out_grad.data;
    for (auto it = td.back.rbegin(); it != td.back.rend(); ++it)
        (*it)(td, params_.data(), grad);
}

Image ScoreNet::evaluate(const Image& x, double sigma) const {
    return forward(x, sigma, nullptr);
}

} // namespace sr
