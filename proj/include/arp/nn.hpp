#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "arp/common.hpp"
#include "arp/kernels.hpp"
#include "arp/rng.hpp"
#include "arp/tensor.hpp"

// Minimal training stack: explicit layers with cached activations and
// hand-chained backward passes. Templated on the scalar so the gradient
// checks can run the exact same code in double precision.

namespace arp::nn {

template <typename T>
struct Param {
    std::string name;
    TensorT<T> w, g, m, v;

    void init(std::vector<int> shape) {
        w = TensorT<T>(shape);
        g = TensorT<T>(shape);
        m = TensorT<T>(shape);
        v = TensorT<T>(std::move(shape));
    }
};

template <typename T>
class Registry {
public:
    void add(Param<T>* p) { params_.push_back(p); }

    std::vector<Param<T>*>& params() { return params_; }

    size_t total_count() const {
        size_t n = 0;
        for (const auto* p : params_) n += p->w.numel();
        return n;
    }

    void zero_grads() {
        for (auto* p : params_) p->g.zero();
    }

    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
        ++step_;
        for (auto* p : params_) {
            ops::adam_step(p->w.data(), p->g.data(), p->m.data(), p->v.data(), p->w.numel(), lr,
                           beta1, beta2, eps, step_);
        }
    }

    // float32 on disk regardless of T
    std::vector<uint8_t> serialize() const {
        std::vector<uint8_t> out;
        const char magic[8] = {'A', 'R', 'P', 'P', 'R', 'M', '1', '\0'};
        out.insert(out.end(), magic, magic + 8);
        auto put_u32 = [&out](uint32_t v) {
            out.insert(out.end(), reinterpret_cast<uint8_t*>(&v),
                       reinterpret_cast<uint8_t*>(&v) + 4);
        };
        put_u32(static_cast<uint32_t>(params_.size()));
        for (const auto* p : params_) {
            put_u32(static_cast<uint32_t>(p->name.size()));
            out.insert(out.end(), p->name.begin(), p->name.end());
            put_u32(static_cast<uint32_t>(p->w.shape.size()));
            for (int d : p->w.shape) put_u32(static_cast<uint32_t>(d));
            for (T x : p->w.v) {
                const float f = static_cast<float>(x);
                out.insert(out.end(), reinterpret_cast<const uint8_t*>(&f),
                           reinterpret_cast<const uint8_t*>(&f) + 4);
            }
        }
        return out;
    }

    void deserialize(const std::vector<uint8_t>& bytes) {
        size_t pos = 0;
        auto need = [&](size_t n) {
            if (pos + n > bytes.size()) fail("params: truncated parameter blob");
        };
        need(8);
        if (std::memcmp(bytes.data(), "ARPPRM1", 7) != 0) fail("params: bad magic");
        pos = 8;
        auto get_u32 = [&]() {
            need(4);
            uint32_t v;
            std::memcpy(&v, bytes.data() + pos, 4);
            pos += 4;
            return v;
        };
        const uint32_t count = get_u32();
        if (count != params_.size()) fail("params: parameter count mismatch");
        for (auto* p : params_) {
            const uint32_t name_len = get_u32();
            need(name_len);
            const std::string name(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
            pos += name_len;
            if (name != p->name) fail("params: expected \"" + p->name + "\", found \"" + name + "\"");
            const uint32_t ndims = get_u32();
            std::vector<int> shape(ndims);
            for (auto& d : shape) d = static_cast<int>(get_u32());
            if (shape != p->w.shape) fail("params: shape mismatch for \"" + name + "\"");
            need(p->w.numel() * 4);
            for (size_t i = 0; i < p->w.numel(); ++i) {
                float f;
                std::memcpy(&f, bytes.data() + pos, 4);
                pos += 4;
                p->w.v[i] = static_cast<T>(f);
            }
        }
    }

    uint64_t content_hash() const {
        const auto bytes = serialize();
        return fnv1a64(bytes.data(), bytes.size());
    }

    int64_t step_count() const { return step_; }

private:
    std::vector<Param<T>*> params_;
    int64_t step_ = 0;
};

inline int conv_out_size(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

template <typename T>
class Conv2d {
public:
    Conv2d(Registry<T>& reg, const std::string& name, int cin, int cout, int k, int stride,
           int pad, Rng& rng, double gain = 1.0)
        : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad) {
        w_.name = name + ".w";
        w_.init({cout, cin, k, k});
        b_.name = name + ".b";
        b_.init({cout});
        const double std = gain / std::sqrt(static_cast<double>(cin) * k * k);
        w_.w.fill_normal(rng, std);
        reg.add(&w_);
        reg.add(&b_);
    }

    TensorT<T> forward(const TensorT<T>& x) {
        x_ = x;
        const int n = x.shape[0], h = x.shape[2], w = x.shape[3];
        const int ho = conv_out_size(h, k_, stride_, pad_);
        const int wo = conv_out_size(w, k_, stride_, pad_);
        TensorT<T> y({n, cout_, ho, wo});
        ops::conv2d_forward(x.data(), n, cin_, h, w, w_.w.data(), b_.w.data(), cout_, k_, stride_,
                            pad_, y.data(), ho, wo);
        return y;
    }

    TensorT<T> backward(const TensorT<T>& gy) {
        const int n = x_.shape[0], h = x_.shape[2], w = x_.shape[3];
        const int ho = gy.shape[2], wo = gy.shape[3];
        ops::conv2d_backward_params(x_.data(), gy.data(), n, cin_, h, w, cout_, k_, stride_, pad_,
                                    w_.g.data(), b_.g.data(), ho, wo);
        TensorT<T> gx(x_.shape);
        ops::conv2d_backward_input(gy.data(), w_.w.data(), n, cin_, h, w, cout_, k_, stride_, pad_,
                                   gx.data(), ho, wo);
        return gx;
    }

    Param<T>& weight() { return w_; }

private:
    int cin_, cout_, k_, stride_, pad_;
    Param<T> w_, b_;
    TensorT<T> x_;
};

template <typename T>
class Linear {
public:
    Linear(Registry<T>& reg, const std::string& name, int in, int out, Rng& rng, double gain = 1.0)
        : in_(in), out_(out) {
        w_.name = name + ".w";
        w_.init({out, in});
        b_.name = name + ".b";
        b_.init({out});
        w_.w.fill_normal(rng, gain / std::sqrt(static_cast<double>(in)));
        reg.add(&w_);
        reg.add(&b_);
    }

    TensorT<T> forward(const TensorT<T>& x) {
        x_ = x;
        const int n = x.shape[0];
        TensorT<T> y({n, out_});
        ops::linear_forward(x.data(), w_.w.data(), b_.w.data(), n, in_, out_, y.data());
        return y;
    }

    TensorT<T> backward(const TensorT<T>& gy) {
        const int n = x_.shape[0];
        ops::linear_backward_params(x_.data(), gy.data(), n, in_, out_, w_.g.data(), b_.g.data());
        TensorT<T> gx(x_.shape);
        ops::linear_backward_input(gy.data(), w_.w.data(), n, in_, out_, gx.data());
        return gx;
    }

private:
    int in_, out_;
    Param<T> w_, b_;
    TensorT<T> x_;
};

template <typename T>
class SiLU {
public:
    TensorT<T> forward(const TensorT<T>& x) {
        x_ = x;
        TensorT<T> y(x.shape);
        ops::silu_forward(x.data(), x.numel(), y.data());
        return y;
    }

    TensorT<T> backward(const TensorT<T>& gy) {
        TensorT<T> gx(x_.shape);
        ops::silu_backward(x_.data(), gy.data(), x_.numel(), gx.data());
        return gx;
    }

private:
    TensorT<T> x_;
};

template <typename T>
class Upsample2 {
public:
    TensorT<T> forward(const TensorT<T>& x) {
        shape_ = x.shape;
        TensorT<T> y({x.shape[0], x.shape[1], 2 * x.shape[2], 2 * x.shape[3]});
        ops::upsample2_forward(x.data(), x.shape[0], x.shape[1], x.shape[2], x.shape[3], y.data());
        return y;
    }

    TensorT<T> backward(const TensorT<T>& gy) {
        TensorT<T> gx(shape_);
        ops::upsample2_backward(gy.data(), shape_[0], shape_[1], shape_[2], shape_[3], gx.data());
        return gx;
    }

private:
    std::vector<int> shape_;
};

template <typename T>
class GroupNorm {
public:
    GroupNorm(Registry<T>& reg, const std::string& name, int channels, int groups)
        : c_(channels), g_(groups) {
        if (channels % groups != 0) fail("GroupNorm: channels must be divisible by groups");
        gamma_.name = name + ".gamma";
        gamma_.init({channels});
        beta_.name = name + ".beta";
        beta_.init({channels});
        for (auto& v : gamma_.w.v) v = T(1);
        reg.add(&gamma_);
        reg.add(&beta_);
    }

    TensorT<T> forward(const TensorT<T>& x) {
        const int n = x.shape[0], h = x.shape[2], w = x.shape[3];
        const int cg = c_ / g_;
        const size_t m = static_cast<size_t>(cg) * h * w;
        xhat_ = TensorT<T>(x.shape);
        inv_sigma_ = TensorT<T>({n, g_});
        TensorT<T> y(x.shape);
#pragma omp parallel for collapse(2) schedule(static)
        for (int in = 0; in < n; ++in) {
            for (int gr = 0; gr < g_; ++gr) {
                const size_t base = (static_cast<size_t>(in) * c_ + static_cast<size_t>(gr) * cg) *
                                    h * w;
                T mean = T(0);
                for (size_t i = 0; i < m; ++i) mean += x.v[base + i];
                mean /= static_cast<T>(m);
                T var = T(0);
                for (size_t i = 0; i < m; ++i) {
                    const T d = x.v[base + i] - mean;
                    var += d * d;
                }
                var /= static_cast<T>(m);
                const T inv = T(1) / std::sqrt(var + T(1e-5));
                inv_sigma_.v[static_cast<size_t>(in) * g_ + gr] = inv;
                for (size_t i = 0; i < m; ++i) {
                    const int c = gr * cg + static_cast<int>(i / (static_cast<size_t>(h) * w));
                    const T xh = (x.v[base + i] - mean) * inv;
                    xhat_.v[base + i] = xh;
                    y.v[base + i] = gamma_.w.v[c] * xh + beta_.w.v[c];
                }
            }
        }
        return y;
    }

    TensorT<T> backward(const TensorT<T>& gy) {
        const int n = xhat_.shape[0], h = xhat_.shape[2], w = xhat_.shape[3];
        const int cg = c_ / g_;
        const size_t hw = static_cast<size_t>(h) * w;
        const size_t m = static_cast<size_t>(cg) * hw;
#pragma omp parallel for schedule(static)
        for (int c = 0; c < c_; ++c) {
            T gg = T(0), gb = T(0);
            for (int in = 0; in < n; ++in) {
                const size_t base = (static_cast<size_t>(in) * c_ + c) * hw;
                for (size_t i = 0; i < hw; ++i) {
                    gg += gy.v[base + i] * xhat_.v[base + i];
                    gb += gy.v[base + i];
                }
            }
            gamma_.g.v[c] += gg;
            beta_.g.v[c] += gb;
        }
        TensorT<T> gx(xhat_.shape);
#pragma omp parallel for collapse(2) schedule(static)
        for (int in = 0; in < n; ++in) {
            for (int gr = 0; gr < g_; ++gr) {
                const size_t base = (static_cast<size_t>(in) * c_ + static_cast<size_t>(gr) * cg) *
                                    hw;
                T s1 = T(0), s2 = T(0);
                for (size_t i = 0; i < m; ++i) {
                    const int c = gr * cg + static_cast<int>(i / hw);
                    const T gxh = gy.v[base + i] * gamma_.w.v[c];
                    s1 += gxh;
                    s2 += gxh * xhat_.v[base + i];
                }
                const T inv = inv_sigma_.v[static_cast<size_t>(in) * g_ + gr];
                const T inv_m = T(1) / static_cast<T>(m);
                for (size_t i = 0; i < m; ++i) {
                    const int c = gr * cg + static_cast<int>(i / hw);
                    const T gxh = gy.v[base + i] * gamma_.w.v[c];
                    gx.v[base + i] = inv * (gxh - s1 * inv_m - xhat_.v[base + i] * s2 * inv_m);
                }
            }
        }
        return gx;
    }

private:
    int c_, g_;
    Param<T> gamma_, beta_;
    TensorT<T> xhat_, inv_sigma_;
};

// Token embedding: fixed-length id sequences to concatenated per-position
// embeddings, [N, L*dim].
template <typename T>
class Embedding {
public:
    Embedding(Registry<T>& reg, const std::string& name, int vocab, int dim, Rng& rng)
        : vocab_(vocab), dim_(dim) {
        table_.name = name + ".table";
        table_.init({vocab, dim});
        table_.w.fill_normal(rng, 0.5);
        reg.add(&table_);
    }

    TensorT<T> forward(const std::vector<std::vector<int>>& ids) {
        ids_ = ids;
        const int n = static_cast<int>(ids.size());
        const int l = static_cast<int>(ids[0].size());
        TensorT<T> y({n, l * dim_});
        for (int i = 0; i < n; ++i) {
            for (int p = 0; p < l; ++p) {
                const int id = ids[i][p];
                if (id < 0 || id >= vocab_) fail("Embedding: id out of range");
                std::memcpy(&y.v[(static_cast<size_t>(i) * l + p) * dim_],
                            &table_.w.v[static_cast<size_t>(id) * dim_], sizeof(T) * dim_);
            }
        }
        return y;
    }

    void backward(const TensorT<T>& gy) {
        const int n = static_cast<int>(ids_.size());
        const int l = static_cast<int>(ids_[0].size());
        for (int i = 0; i < n; ++i) {
            for (int p = 0; p < l; ++p) {
                const int id = ids_[i][p];
                for (int d = 0; d < dim_; ++d) {
                    table_.g.v[static_cast<size_t>(id) * dim_ + d] +=
                        gy.v[(static_cast<size_t>(i) * l + p) * dim_ + d];
                }
            }
        }
    }

private:
    int vocab_, dim_;
    Param<T> table_;
    std::vector<std::vector<int>> ids_;
};

// Learned mixing across the frame axis, shared over channels and positions.
// Identity init so a fresh model starts as per-frame denoising.
template <typename T>
class TemporalMix {
public:
    TemporalMix(Registry<T>& reg, const std::string& name, int frames) : f_(frames) {
        w_.name = name + ".w";
        w_.init({frames, frames});
        for (int i = 0; i < frames; ++i) w_.w.v[static_cast<size_t>(i) * frames + i] = T(1);
        reg.add(&w_);
    }

    // x is [B*F, C, H, W]
    TensorT<T> forward(const TensorT<T>& x) {
        x_ = x;
        const int bf = x.shape[0];
        const int b = bf / f_;
        const size_t chw = x.numel() / bf;
        TensorT<T> y(x.shape);
#pragma omp parallel for collapse(2) schedule(static)
        for (int ib = 0; ib < b; ++ib) {
            for (int fo = 0; fo < f_; ++fo) {
                T* yp = &y.v[(static_cast<size_t>(ib) * f_ + fo) * chw];
                for (int fi = 0; fi < f_; ++fi) {
                    const T wv = w_.w.v[static_cast<size_t>(fo) * f_ + fi];
                    const T* xp = &x.v[(static_cast<size_t>(ib) * f_ + fi) * chw];
                    for (size_t i = 0; i < chw; ++i) yp[i] += wv * xp[i];
                }
            }
        }
        return y;
    }

    TensorT<T> backward(const TensorT<T>& gy) {
        const int bf = x_.shape[0];
        const int b = bf / f_;
        const size_t chw = x_.numel() / bf;
        for (int fo = 0; fo < f_; ++fo) {
            for (int fi = 0; fi < f_; ++fi) {
                T acc = T(0);
                for (int ib = 0; ib < b; ++ib) {
                    const T* gp = &gy.v[(static_cast<size_t>(ib) * f_ + fo) * chw];
                    const T* xp = &x_.v[(static_cast<size_t>(ib) * f_ + fi) * chw];
                    for (size_t i = 0; i < chw; ++i) acc += gp[i] * xp[i];
                }
                w_.g.v[static_cast<size_t>(fo) * f_ + fi] += acc;
            }
        }
        TensorT<T> gx(x_.shape);
#pragma omp parallel for collapse(2) schedule(static)
        for (int ib = 0; ib < b; ++ib) {
            for (int fi = 0; fi < f_; ++fi) {
                T* gp = &gx.v[(static_cast<size_t>(ib) * f_ + fi) * chw];
                for (int fo = 0; fo < f_; ++fo) {
                    const T wv = w_.w.v[static_cast<size_t>(fo) * f_ + fi];
                    const T* gyp = &gy.v[(static_cast<size_t>(ib) * f_ + fo) * chw];
                    for (size_t i = 0; i < chw; ++i) gp[i] += wv * gyp[i];
                }
            }
        }
        return gx;
    }

private:
    int f_;
    Param<T> w_;
    TensorT<T> x_;
};

// ---- tensor helpers ----

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    const int n = a.shape[0], h = a.shape[2], w = a.shape[3];
    TensorT<T> y({n, a.shape[1] + b.shape[1], h, w});
    const size_t hw = static_cast<size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        std::memcpy(&y.v[static_cast<size_t>(i) * (a.shape[1] + b.shape[1]) * hw],
                    &a.v[static_cast<size_t>(i) * a.shape[1] * hw], sizeof(T) * a.shape[1] * hw);
        std::memcpy(&y.v[(static_cast<size_t>(i) * (a.shape[1] + b.shape[1]) + a.shape[1]) * hw],
                    &b.v[static_cast<size_t>(i) * b.shape[1] * hw], sizeof(T) * b.shape[1] * hw);
    }
    return y;
}

template <typename T>
void split_channels(const TensorT<T>& g, int ca, TensorT<T>& ga, TensorT<T>& gb) {
    const int n = g.shape[0], c = g.shape[1], h = g.shape[2], w = g.shape[3];
    const int cb = c - ca;
    ga = TensorT<T>({n, ca, h, w});
    gb = TensorT<T>({n, cb, h, w});
    const size_t hw = static_cast<size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        std::memcpy(&ga.v[static_cast<size_t>(i) * ca * hw], &g.v[static_cast<size_t>(i) * c * hw],
                    sizeof(T) * ca * hw);
        std::memcpy(&gb.v[static_cast<size_t>(i) * cb * hw],
                    &g.v[(static_cast<size_t>(i) * c + ca) * hw], sizeof(T) * cb * hw);
    }
}

template <typename T>
void add_inplace(TensorT<T>& a, const TensorT<T>& b) {
    for (size_t i = 0; i < a.numel(); ++i) a.v[i] += b.v[i];
}

// half-cosine learning-rate decay to a floor fraction of the base rate
inline double cosine_decay_lr(double base, int step, int total, double floor_frac = 0.1) {
    if (total <= 1) return base;
    const double t = static_cast<double>(step) / (total - 1);
    return base * (floor_frac + (1.0 - floor_frac) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t)));
}

// sinusoidal timestep features, [N, dim]
template <typename T>
TensorT<T> sinusoidal_embed(const std::vector<int>& t, int dim) {
    const int n = static_cast<int>(t.size());
    const int half = dim / 2;
    TensorT<T> y({n, dim});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < half; ++j) {
            const double freq = std::exp(-std::log(10000.0) * j / std::max(1, half - 1));
            y.v[static_cast<size_t>(i) * dim + j] = static_cast<T>(std::sin(t[i] * freq));
            y.v[static_cast<size_t>(i) * dim + half + j] = static_cast<T>(std::cos(t[i] * freq));
        }
    }
    return y;
}

} // namespace arp::nn
