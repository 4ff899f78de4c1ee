#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "arp/kernels.hpp"
#include "arp/rng.hpp"
#include "arp/tensor.hpp"

// The OpenMP kernels must be bit-equal to the serial reference: every output
// element is produced by one iteration with a fixed-order inner accumulation,
// so thread count cannot change results.

using namespace arp;

namespace {

std::vector<float> random_vec(Rng& rng, size_t n, double scale = 1.0) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal() * scale);
    return v;
}

} // namespace

TEST_CASE("conv2d: omp bit-equal to serial reference") {
    Rng rng(1);
    for (int stride : {1, 2}) {
        const int n = 3, cin = 5, cout = 7, h = 9, w = 9, k = 3, pad = 1;
        const int ho = (h + 2 * pad - k) / stride + 1;
        const int wo = ho;
        const auto x = random_vec(rng, static_cast<size_t>(n) * cin * h * w);
        const auto wt = random_vec(rng, static_cast<size_t>(cout) * cin * k * k);
        const auto b = random_vec(rng, cout);
        std::vector<float> y1(static_cast<size_t>(n) * cout * ho * wo);
        std::vector<float> y2 = y1;
        ops::conv2d_forward(x.data(), n, cin, h, w, wt.data(), b.data(), cout, k, stride, pad,
                            y1.data(), ho, wo);
        ops::ref::conv2d_forward(x.data(), n, cin, h, w, wt.data(), b.data(), cout, k, stride, pad,
                                 y2.data(), ho, wo);
        CHECK(y1 == y2);

        const auto gy = random_vec(rng, y1.size());
        std::vector<float> gx1(x.size()), gx2(x.size());
        ops::conv2d_backward_input(gy.data(), wt.data(), n, cin, h, w, cout, k, stride, pad,
                                   gx1.data(), ho, wo);
        ops::ref::conv2d_backward_input(gy.data(), wt.data(), n, cin, h, w, cout, k, stride, pad,
                                        gx2.data(), ho, wo);
        CHECK(gx1 == gx2);

        std::vector<float> gw1(wt.size(), 0.0f), gw2(wt.size(), 0.0f);
        std::vector<float> gb1(cout, 0.0f), gb2(cout, 0.0f);
        ops::conv2d_backward_params(x.data(), gy.data(), n, cin, h, w, cout, k, stride, pad,
                                    gw1.data(), gb1.data(), ho, wo);
        ops::ref::conv2d_backward_params(x.data(), gy.data(), n, cin, h, w, cout, k, stride, pad,
                                         gw2.data(), gb2.data(), ho, wo);
        CHECK(gw1 == gw2);
        CHECK(gb1 == gb2);
    }
}

TEST_CASE("linear/upsample/silu/adam: omp bit-equal to serial reference") {
    Rng rng(2);
    const int n = 17, in = 33, out = 29;
    const auto x = random_vec(rng, static_cast<size_t>(n) * in);
    const auto w = random_vec(rng, static_cast<size_t>(out) * in);
    const auto b = random_vec(rng, out);
    std::vector<float> y1(static_cast<size_t>(n) * out), y2 = y1;
    ops::linear_forward(x.data(), w.data(), b.data(), n, in, out, y1.data());
    ops::ref::linear_forward(x.data(), w.data(), b.data(), n, in, out, y2.data());
    CHECK(y1 == y2);

    const auto gy = random_vec(rng, y1.size());
    std::vector<float> gx1(x.size()), gx2(x.size());
    ops::linear_backward_input(gy.data(), w.data(), n, in, out, gx1.data());
    ops::ref::linear_backward_input(gy.data(), w.data(), n, in, out, gx2.data());
    CHECK(gx1 == gx2);

    std::vector<float> gw1(w.size(), 0.0f), gw2(w.size(), 0.0f), gb1(out, 0.0f), gb2(out, 0.0f);
    ops::linear_backward_params(x.data(), gy.data(), n, in, out, gw1.data(), gb1.data());
    ops::ref::linear_backward_params(x.data(), gy.data(), n, in, out, gw2.data(), gb2.data());
    CHECK(gw1 == gw2);
    CHECK(gb1 == gb2);

    const int c = 6, hh = 7, ww = 5;
    const auto u = random_vec(rng, static_cast<size_t>(n) * c * hh * ww);
    std::vector<float> up1(u.size() * 4), up2(u.size() * 4);
    ops::upsample2_forward(u.data(), n, c, hh, ww, up1.data());
    ops::ref::upsample2_forward(u.data(), n, c, hh, ww, up2.data());
    CHECK(up1 == up2);
    const auto gup = random_vec(rng, up1.size());
    std::vector<float> gu1(u.size()), gu2(u.size());
    ops::upsample2_backward(gup.data(), n, c, hh, ww, gu1.data());
    ops::ref::upsample2_backward(gup.data(), n, c, hh, ww, gu2.data());
    CHECK(gu1 == gu2);

    std::vector<float> s1(u.size()), s2(u.size());
    ops::silu_forward(u.data(), u.size(), s1.data());
    ops::ref::silu_forward(u.data(), u.size(), s2.data());
    CHECK(s1 == s2);
    ops::silu_backward(u.data(), gup.data(), u.size(), s1.data());
    ops::ref::silu_backward(u.data(), gup.data(), u.size(), s2.data());
    CHECK(s1 == s2);

    auto w1 = x, w2 = x;
    auto g = random_vec(rng, x.size());
    std::vector<float> m1(x.size(), 0.0f), m2 = m1, v1 = m1, v2 = m1;
    for (int t = 1; t <= 3; ++t) {
        ops::adam_step(w1.data(), g.data(), m1.data(), v1.data(), w1.size(), 1e-3, 0.9, 0.999,
                       1e-8, t);
        ops::ref::adam_step(w2.data(), g.data(), m2.data(), v2.data(), w2.size(), 1e-3, 0.9,
                            0.999, 1e-8, t);
    }
    CHECK(w1 == w2);
    CHECK(m1 == m2);
    CHECK(v1 == v2);
}

TEST_CASE("track_points_step: omp bit-equal to serial reference") {
    Rng rng(3);
    const int size = 48;
    std::vector<float> f0(static_cast<size_t>(size) * size * 3), f1(f0.size());
    for (auto& v : f0) v = static_cast<float>(rng.uniform());
    for (auto& v : f1) v = static_cast<float>(rng.uniform());
    const int n_pts = 50;
    std::vector<double> pts(n_pts * 2), out1(n_pts * 2), out2(n_pts * 2);
    for (auto& p : pts) p = rng.uniform(0.0, size - 1.0);
    ops::track_points_step(f0.data(), f1.data(), size, pts.data(), n_pts, 3, 8, out1.data());
    ops::ref::track_points_step(f0.data(), f1.data(), size, pts.data(), n_pts, 3, 8, out2.data());
    CHECK(out1 == out2);
}

TEST_CASE("conv2d: hand-computed stride-2 output") {
    Rng rng(4);
    const int n = 1, cin = 2, cout = 3, h = 8, w = 8, k = 3, stride = 2, pad = 1;
    const int ho = (h + 2 * pad - k) / stride + 1;
    CHECK(ho == 4);
    const auto x = random_vec(rng, static_cast<size_t>(n) * cin * h * w);
    const auto wt = random_vec(rng, static_cast<size_t>(cout) * cin * k * k);
    const auto b = random_vec(rng, cout);
    std::vector<float> y(static_cast<size_t>(n) * cout * ho * ho);
    ops::conv2d_forward(x.data(), n, cin, h, w, wt.data(), b.data(), cout, k, stride, pad,
                        y.data(), ho, ho);
    float acc = b[0];
    for (int ci = 0; ci < cin; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const int iy = ky - 1, ix = kx - 1;
                if (iy < 0 || ix < 0) continue;
                acc += wt[static_cast<size_t>(ci) * 9 + ky * 3 + kx] *
                       x[static_cast<size_t>(ci) * h * w + iy * w + ix];
            }
        }
    }
    CHECK(y[0] == doctest::Approx(acc).epsilon(1e-6));
}
