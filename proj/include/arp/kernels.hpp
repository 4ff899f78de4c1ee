#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel kernels behind all model training and tracking. arp::ops holds
// the OpenMP implementations used in production; arp::ops::ref holds serial
// reference implementations with identical loop bodies and accumulation order,
// so the two are bit-equal and the reference can stand in anywhere. Every
// kernel writes each output element from exactly one iteration, which keeps
// results independent of the thread count.

namespace arp::ops {

// y[n,co,ho,wo] = b[co] + sum_{ci,ky,kx} w[co,ci,ky,kx] * x[n,ci,ho*s+ky-p,wo*s+kx-p]
template <typename T>
void conv2d_forward(const T* x, int n, int cin, int h, int w_,
                    const T* w, const T* b, int cout, int k, int stride, int pad,
                    T* y, int ho, int wo);

template <typename T>
void conv2d_backward_input(const T* gy, const T* w, int n, int cin, int h, int w_,
                           int cout, int k, int stride, int pad,
                           T* gx, int ho, int wo);

// accumulates into gw/gb
template <typename T>
void conv2d_backward_params(const T* x, const T* gy, int n, int cin, int h, int w_,
                            int cout, int k, int stride, int pad,
                            T* gw, T* gb, int ho, int wo);

template <typename T>
void linear_forward(const T* x, const T* w, const T* b, int n, int in, int out, T* y);

template <typename T>
void linear_backward_input(const T* gy, const T* w, int n, int in, int out, T* gx);

template <typename T>
void linear_backward_params(const T* x, const T* gy, int n, int in, int out, T* gw, T* gb);

// nearest-neighbour 2x upsample: y is [n,c,2h,2w]
template <typename T>
void upsample2_forward(const T* x, int n, int c, int h, int w, T* y);

template <typename T>
void upsample2_backward(const T* gy, int n, int c, int h, int w, T* gx);

template <typename T>
void silu_forward(const T* x, size_t count, T* y);

template <typename T>
void silu_backward(const T* x, const T* gy, size_t count, T* gx);

template <typename T>
void adam_step(T* w, const T* g, T* m, T* v, size_t count,
               double lr, double beta1, double beta2, double eps, int64_t t);

// One frame-to-frame tracking step: for each point, SSD-match a (2r+1)^2 RGB
// patch of frame0 centred at the point into frame1 within an integer search
// window; ties broken by smallest displacement, then by scan order. Points are
// (x, y) pixel coordinates; output is clamped to the frame.
void track_points_step(const float* frame0, const float* frame1, int size,
                       const double* pts_in, int n_pts, int patch_r, int search_r,
                       double* pts_out);

namespace ref {

template <typename T>
void conv2d_forward(const T* x, int n, int cin, int h, int w_,
                    const T* w, const T* b, int cout, int k, int stride, int pad,
                    T* y, int ho, int wo);

template <typename T>
void conv2d_backward_input(const T* gy, const T* w, int n, int cin, int h, int w_,
                           int cout, int k, int stride, int pad,
                           T* gx, int ho, int wo);

template <typename T>
void conv2d_backward_params(const T* x, const T* gy, int n, int cin, int h, int w_,
                            int cout, int k, int stride, int pad,
                            T* gw, T* gb, int ho, int wo);

template <typename T>
void linear_forward(const T* x, const T* w, const T* b, int n, int in, int out, T* y);

template <typename T>
void linear_backward_input(const T* gy, const T* w, int n, int in, int out, T* gx);

template <typename T>
void linear_backward_params(const T* x, const T* gy, int n, int in, int out, T* gw, T* gb);

template <typename T>
void upsample2_forward(const T* x, int n, int c, int h, int w, T* y);

template <typename T>
void upsample2_backward(const T* gy, int n, int c, int h, int w, T* gx);

template <typename T>
void silu_forward(const T* x, size_t count, T* y);

template <typename T>
void silu_backward(const T* x, const T* gy, size_t count, T* gx);

template <typename T>
void adam_step(T* w, const T* g, T* m, T* v, size_t count,
               double lr, double beta1, double beta2, double eps, int64_t t);

void track_points_step(const float* frame0, const float* frame1, int size,
                       const double* pts_in, int n_pts, int patch_r, int search_r,
                       double* pts_out);

} // namespace ref
} // namespace arp::ops
