#include "arp/kernels.hpp"

#include <algorithm>
#include <cmath>

// Loop structure notes: convolutions accumulate rows with per-tap sweeps so
// the compiler can vectorize across the output row while each output element
// still receives its terms in a fixed (ci, ky, kx) order. Long reductions use
// eight fixed lanes summed in a fixed order at the end. The serial reference
// in kernels_ref.cpp shares these bodies verbatim minus the omp pragmas, so
// both variants are bit-identical at any thread count.

namespace arp::ops {

namespace kdetail {

// valid ox range for one kernel tap: 0 <= ox*stride + kx - pad < w
inline void tap_range(int kx, int stride, int pad, int w, int wo, int& lo, int& hi) {
    int lo_num = pad - kx;
    lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
    int hi_num = w - 1 + pad - kx;
    hi = hi_num < 0 ? 0 : std::min(wo, hi_num / stride + 1);
    if (hi < lo) hi = lo;
}

template <typename T>
inline T lane_total(const T* lanes) {
    T total = T(0);
    for (int l = 0; l < 8; ++l) total += lanes[l];
    return total;
}

} // namespace kdetail

template <typename T>
void conv2d_forward(const T* x, int n, int cin, int h, int w_,
                    const T* w, const T* b, int cout, int k, int stride, int pad,
                    T* y, int ho, int wo) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < n; ++in) {
        for (int co = 0; co < cout; ++co) {
            const T* wc = w + static_cast<size_t>(co) * cin * k * k;
            T* yc = y + (static_cast<size_t>(in) * cout + co) * ho * wo;
            for (int oy = 0; oy < ho; ++oy) {
                T* row = yc + static_cast<size_t>(oy) * wo;
                const T bias = b ? b[co] : T(0);
                for (int ox = 0; ox < wo; ++ox) row[ox] = bias;
                for (int ci = 0; ci < cin; ++ci) {
                    const T* xc = x + (static_cast<size_t>(in) * cin + ci) * h * w_;
                    const T* wk = wc + static_cast<size_t>(ci) * k * k;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        const T* xrow = xc + static_cast<size_t>(iy) * w_;
                        for (int kx = 0; kx < k; ++kx) {
                            int lo, hi;
                            kdetail::tap_range(kx, stride, pad, w_, wo, lo, hi);
                            const T wv = wk[ky * k + kx];
                            const T* xs = xrow + kx - pad;
                            if (stride == 1) {
                                for (int ox = lo; ox < hi; ++ox) row[ox] += wv * xs[ox];
                            } else {
                                for (int ox = lo; ox < hi; ++ox) {
                                    row[ox] += wv * xs[static_cast<size_t>(ox) * stride];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_input(const T* gy, const T* w, int n, int cin, int h, int w_,
                           int cout, int k, int stride, int pad,
                           T* gx, int ho, int wo) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < n; ++in) {
        for (int ci = 0; ci < cin; ++ci) {
            T* gxc = gx + (static_cast<size_t>(in) * cin + ci) * h * w_;
            for (size_t i = 0; i < static_cast<size_t>(h) * w_; ++i) gxc[i] = T(0);
            for (int co = 0; co < cout; ++co) {
                const T* wk = w + (static_cast<size_t>(co) * cin + ci) * k * k;
                const T* gyc = gy + (static_cast<size_t>(in) * cout + co) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const T* grow = gyc + static_cast<size_t>(oy) * wo;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        T* gxrow = gxc + static_cast<size_t>(iy) * w_;
                        for (int kx = 0; kx < k; ++kx) {
                            int lo, hi;
                            kdetail::tap_range(kx, stride, pad, w_, wo, lo, hi);
                            const T wv = wk[ky * k + kx];
                            T* gxs = gxrow + kx - pad;
                            if (stride == 1) {
                                for (int ox = lo; ox < hi; ++ox) gxs[ox] += wv * grow[ox];
                            } else {
                                for (int ox = lo; ox < hi; ++ox) {
                                    gxs[static_cast<size_t>(ox) * stride] += wv * grow[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_params(const T* x, const T* gy, int n, int cin, int h, int w_,
                            int cout, int k, int stride, int pad,
                            T* gw, T* gb, int ho, int wo) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < cout; ++co) {
        for (int ci = 0; ci < cin; ++ci) {
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    int lo, hi;
                    kdetail::tap_range(kx, stride, pad, w_, wo, lo, hi);
                    T lanes[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
                    for (int in = 0; in < n; ++in) {
                        const T* xc = x + (static_cast<size_t>(in) * cin + ci) * h * w_;
                        const T* gyc = gy + (static_cast<size_t>(in) * cout + co) * ho * wo;
                        for (int oy = 0; oy < ho; ++oy) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            const T* grow = gyc + static_cast<size_t>(oy) * wo;
                            const T* xs = xc + static_cast<size_t>(iy) * w_ + kx - pad;
                            if (stride == 1) {
                                for (int ox = lo; ox < hi; ++ox) {
                                    lanes[(ox - lo) & 7] += grow[ox] * xs[ox];
                                }
                            } else {
                                for (int ox = lo; ox < hi; ++ox) {
                                    lanes[(ox - lo) & 7] +=
                                        grow[ox] * xs[static_cast<size_t>(ox) * stride];
                                }
                            }
                        }
                    }
                    gw[((static_cast<size_t>(co) * cin + ci) * k + ky) * k + kx] +=
                        kdetail::lane_total(lanes);
                }
            }
        }
    }
    if (gb) {
#pragma omp parallel for schedule(static)
        for (int co = 0; co < cout; ++co) {
            T lanes[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
            for (int in = 0; in < n; ++in) {
                const T* gyc = gy + (static_cast<size_t>(in) * cout + co) * ho * wo;
                for (int i = 0; i < ho * wo; ++i) lanes[i & 7] += gyc[i];
            }
            gb[co] += kdetail::lane_total(lanes);
        }
    }
}

template <typename T>
void linear_forward(const T* x, const T* w, const T* b, int n, int in, int out, T* y) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < n; ++i) {
        for (int o = 0; o < out; ++o) {
            const T* xr = x + static_cast<size_t>(i) * in;
            const T* wr = w + static_cast<size_t>(o) * in;
            T lanes[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
            for (int j = 0; j < in; ++j) lanes[j & 7] += xr[j] * wr[j];
            y[static_cast<size_t>(i) * out + o] = (b ? b[o] : T(0)) + kdetail::lane_total(lanes);
        }
    }
}

template <typename T>
void linear_backward_input(const T* gy, const T* w, int n, int in, int out, T* gx) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        T* gxr = gx + static_cast<size_t>(i) * in;
        for (int j = 0; j < in; ++j) gxr[j] = T(0);
        const T* gyr = gy + static_cast<size_t>(i) * out;
        for (int o = 0; o < out; ++o) {
            const T g = gyr[o];
            const T* wr = w + static_cast<size_t>(o) * in;
            for (int j = 0; j < in; ++j) gxr[j] += g * wr[j];
        }
    }
}

template <typename T>
void linear_backward_params(const T* x, const T* gy, int n, int in, int out, T* gw, T* gb) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out; ++o) {
        T* gwr = gw + static_cast<size_t>(o) * in;
        T accb = T(0);
        for (int i = 0; i < n; ++i) {
            const T g = gy[static_cast<size_t>(i) * out + o];
            const T* xr = x + static_cast<size_t>(i) * in;
            for (int j = 0; j < in; ++j) gwr[j] += g * xr[j];
            accb += g;
        }
        if (gb) gb[o] += accb;
    }
}

template <typename T>
void upsample2_forward(const T* x, int n, int c, int h, int w, T* y) {
    const int nc = n * c;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < nc; ++p) {
        const T* xp = x + static_cast<size_t>(p) * h * w;
        T* yp = y + static_cast<size_t>(p) * 4 * h * w;
        for (int iy = 0; iy < 2 * h; ++iy) {
            for (int ix = 0; ix < 2 * w; ++ix) {
                yp[iy * 2 * w + ix] = xp[(iy / 2) * w + (ix / 2)];
            }
        }
    }
}

template <typename T>
void upsample2_backward(const T* gy, int n, int c, int h, int w, T* gx) {
    const int nc = n * c;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < nc; ++p) {
        const T* gyp = gy + static_cast<size_t>(p) * 4 * h * w;
        T* gxp = gx + static_cast<size_t>(p) * h * w;
        for (int iy = 0; iy < h; ++iy) {
            for (int ix = 0; ix < w; ++ix) {
                gxp[iy * w + ix] = gyp[(2 * iy) * 2 * w + 2 * ix] +
                                   gyp[(2 * iy) * 2 * w + 2 * ix + 1] +
                                   gyp[(2 * iy + 1) * 2 * w + 2 * ix] +
                                   gyp[(2 * iy + 1) * 2 * w + 2 * ix + 1];
            }
        }
    }
}

template <typename T>
void silu_forward(const T* x, size_t count, T* y) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(count); ++i) {
        const T s = T(1) / (T(1) + std::exp(-x[i]));
        y[i] = x[i] * s;
    }
}

template <typename T>
void silu_backward(const T* x, const T* gy, size_t count, T* gx) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(count); ++i) {
        const T s = T(1) / (T(1) + std::exp(-x[i]));
        gx[i] = gy[i] * (s + x[i] * s * (T(1) - s));
    }
}

template <typename T>
void adam_step(T* w, const T* g, T* m, T* v, size_t count,
               double lr, double beta1, double beta2, double eps, int64_t t) {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(count); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * gi;
        const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * mhat / (std::sqrt(vhat) + eps));
    }
}

namespace kdetail {

inline const float* pixel_clamped(const float* frame, int size, int x, int y) {
    if (x < 0) x = 0;
    if (x >= size) x = size - 1;
    if (y < 0) y = 0;
    if (y >= size) y = size - 1;
    return frame + (static_cast<size_t>(y) * size + x) * 3;
}

inline double patch_ssd(const float* f0, const float* f1, int size,
                        int px, int py, int qx, int qy, int r) {
    double ssd = 0.0;
    for (int oy = -r; oy <= r; ++oy) {
        for (int ox = -r; ox <= r; ++ox) {
            const float* a = pixel_clamped(f0, size, px + ox, py + oy);
            const float* b = pixel_clamped(f1, size, qx + ox, qy + oy);
            for (int c = 0; c < 3; ++c) {
                const double d = static_cast<double>(a[c]) - static_cast<double>(b[c]);
                ssd += d * d;
            }
        }
    }
    return ssd;
}

inline void track_one(const float* f0, const float* f1, int size,
                      double x, double y, int patch_r, int search_r,
                      double* out_x, double* out_y) {
    const int px = static_cast<int>(std::lround(x));
    const int py = static_cast<int>(std::lround(y));
    double best_ssd = 0.0;
    int best_dx = 0, best_dy = 0, best_d2 = 0;
    bool first = true;
    for (int dy = -search_r; dy <= search_r; ++dy) {
        for (int dx = -search_r; dx <= search_r; ++dx) {
            const double ssd = patch_ssd(f0, f1, size, px, py, px + dx, py + dy, patch_r);
            const int d2 = dx * dx + dy * dy;
            if (first || ssd < best_ssd || (ssd == best_ssd && d2 < best_d2)) {
                first = false;
                best_ssd = ssd;
                best_dx = dx;
                best_dy = dy;
                best_d2 = d2;
            }
        }
    }
    double nx = x + best_dx;
    double ny = y + best_dy;
    if (nx < 0.0) nx = 0.0;
    if (nx > size - 1.0) nx = size - 1.0;
    if (ny < 0.0) ny = 0.0;
    if (ny > size - 1.0) ny = size - 1.0;
    *out_x = nx;
    *out_y = ny;
}

} // namespace kdetail

void track_points_step(const float* frame0, const float* frame1, int size,
                       const double* pts_in, int n_pts, int patch_r, int search_r,
                       double* pts_out) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_pts; ++i) {
        kdetail::track_one(frame0, frame1, size, pts_in[2 * i], pts_in[2 * i + 1],
                           patch_r, search_r, &pts_out[2 * i], &pts_out[2 * i + 1]);
    }
}

#define ARP_INSTANTIATE_OPS(T)                                                              \
    template void conv2d_forward<T>(const T*, int, int, int, int, const T*, const T*, int, \
                                    int, int, int, T*, int, int);                           \
    template void conv2d_backward_input<T>(const T*, const T*, int, int, int, int, int,    \
                                           int, int, int, T*, int, int);                    \
    template void conv2d_backward_params<T>(const T*, const T*, int, int, int, int, int,   \
                                            int, int, int, T*, T*, int, int);              \
    template void linear_forward<T>(const T*, const T*, const T*, int, int, int, T*);      \
    template void linear_backward_input<T>(const T*, const T*, int, int, int, T*);         \
    template void linear_backward_params<T>(const T*, const T*, int, int, int, T*, T*);    \
    template void upsample2_forward<T>(const T*, int, int, int, int, T*);                  \
    template void upsample2_backward<T>(const T*, int, int, int, int, T*);                 \
    template void silu_forward<T>(const T*, size_t, T*);                                   \
    template void silu_backward<T>(const T*, const T*, size_t, T*);                        \
    template void adam_step<T>(T*, const T*, T*, T*, size_t, double, double, double,       \
                               double, int64_t);

ARP_INSTANTIATE_OPS(float)
ARP_INSTANTIATE_OPS(double)

} // namespace arp::ops
