// Throughput comparison of the OpenMP kernels against the serial reference.
// Also sanity-checks that both variants produce identical bytes.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "arp/kernels.hpp"
#include "arp/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace arp;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<float> randvec(Rng& rng, size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
}

struct Case {
    const char* name;
    double macs; // per run
    double t_ref = 0, t_omp = 0;
    bool equal = true;
};

template <typename FRef, typename FOmp>
void run_case(Case& c, int reps, FRef ref_fn, FOmp omp_fn, const float* out_ref,
              const float* out_omp, size_t out_n) {
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) ref_fn();
    c.t_ref = seconds_since(t0) / reps;
    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) omp_fn();
    c.t_omp = seconds_since(t0) / reps;
    c.equal = std::memcmp(out_ref, out_omp, out_n * sizeof(float)) == 0;
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif
    Rng rng(42);

    // denoiser-scale conv: batch 24 (4 clips x 6 frames), 16x16 spatial
    {
        const int n = 24, cin = 32, cout = 32, h = 16, w = 16, k = 3;
        const auto x = randvec(rng, static_cast<size_t>(n) * cin * h * w);
        const auto wt = randvec(rng, static_cast<size_t>(cout) * cin * k * k);
        const auto b = randvec(rng, cout);
        std::vector<float> y1(static_cast<size_t>(n) * cout * h * w), y2 = y1;
        Case c{"conv2d 24x32x16x16 fwd",
               static_cast<double>(n) * cout * h * w * cin * k * k};
        run_case(
            c, 20,
            [&] {
                ops::ref::conv2d_forward(x.data(), n, cin, h, w, wt.data(), b.data(), cout, k, 1,
                                         1, y1.data(), h, w);
            },
            [&] {
                ops::conv2d_forward(x.data(), n, cin, h, w, wt.data(), b.data(), cout, k, 1, 1,
                                    y2.data(), h, w);
            },
            y1.data(), y2.data(), y1.size());
        std::printf("%-28s ref %7.2f ms (%6.2f GMAC/s)   omp %7.2f ms (%6.2f GMAC/s)  x%.2f  %s\n",
                    c.name, c.t_ref * 1e3, c.macs / c.t_ref * 1e-9, c.t_omp * 1e3,
                    c.macs / c.t_omp * 1e-9, c.t_ref / c.t_omp, c.equal ? "bit-equal" : "MISMATCH");
    }

    // codec-scale conv: batch 8, 64x64 spatial
    {
        const int n = 8, cin = 16, cout = 24, h = 64, w = 64, k = 3;
        const auto x = randvec(rng, static_cast<size_t>(n) * cin * h * w);
        const auto wt = randvec(rng, static_cast<size_t>(cout) * cin * k * k);
        const auto b = randvec(rng, cout);
        const int ho = 32, wo = 32;
        std::vector<float> y1(static_cast<size_t>(n) * cout * ho * wo), y2 = y1;
        Case c{"conv2d 8x16x64x64 s2 fwd",
               static_cast<double>(n) * cout * ho * wo * cin * k * k};
        run_case(
            c, 20,
            [&] {
                ops::ref::conv2d_forward(x.data(), n, cin, h, w, wt.data(), b.data(), cout, k, 2,
                                         1, y1.data(), ho, wo);
            },
            [&] {
                ops::conv2d_forward(x.data(), n, cin, h, w, wt.data(), b.data(), cout, k, 2, 1,
                                    y2.data(), ho, wo);
            },
            y1.data(), y2.data(), y1.size());
        std::printf("%-28s ref %7.2f ms (%6.2f GMAC/s)   omp %7.2f ms (%6.2f GMAC/s)  x%.2f  %s\n",
                    c.name, c.t_ref * 1e3, c.macs / c.t_ref * 1e-9, c.t_omp * 1e3,
                    c.macs / c.t_omp * 1e-9, c.t_ref / c.t_omp, c.equal ? "bit-equal" : "MISMATCH");
    }

    // conv backward (params + input), denoiser scale
    {
        const int n = 24, cin = 32, cout = 32, h = 16, w = 16, k = 3;
        const auto x = randvec(rng, static_cast<size_t>(n) * cin * h * w);
        const auto wt = randvec(rng, static_cast<size_t>(cout) * cin * k * k);
        const auto gy = randvec(rng, static_cast<size_t>(n) * cout * h * w);
        std::vector<float> gx1(x.size()), gx2(x.size());
        std::vector<float> gw1(wt.size()), gw2(wt.size()), gb1(cout), gb2(cout);
        Case c{"conv2d bwd(in+par)",
               2.0 * n * cout * h * w * cin * k * k};
        run_case(
            c, 10,
            [&] {
                ops::ref::conv2d_backward_input(gy.data(), wt.data(), n, cin, h, w, cout, k, 1, 1,
                                                gx1.data(), h, w);
                ops::ref::conv2d_backward_params(x.data(), gy.data(), n, cin, h, w, cout, k, 1, 1,
                                                 gw1.data(), gb1.data(), h, w);
            },
            [&] {
                ops::conv2d_backward_input(gy.data(), wt.data(), n, cin, h, w, cout, k, 1, 1,
                                           gx2.data(), h, w);
                ops::conv2d_backward_params(x.data(), gy.data(), n, cin, h, w, cout, k, 1, 1,
                                            gw2.data(), gb2.data(), h, w);
            },
            gx1.data(), gx2.data(), gx1.size());
        std::printf("%-28s ref %7.2f ms (%6.2f GMAC/s)   omp %7.2f ms (%6.2f GMAC/s)  x%.2f  %s\n",
                    c.name, c.t_ref * 1e3, c.macs / c.t_ref * 1e-9, c.t_omp * 1e3,
                    c.macs / c.t_omp * 1e-9, c.t_ref / c.t_omp, c.equal ? "bit-equal" : "MISMATCH");
    }

    // patch-SSD tracking step at production settings
    {
        const int size = 64, n_pts = 576;
        const auto f0 = randvec(rng, static_cast<size_t>(size) * size * 3);
        const auto f1 = randvec(rng, static_cast<size_t>(size) * size * 3);
        std::vector<double> pts(n_pts * 2), o1(n_pts * 2), o2(n_pts * 2);
        Rng prng(7);
        for (auto& p : pts) p = prng.uniform(0.0, size - 1.0);
        Case c{"track 576 pts r3 s8",
               static_cast<double>(n_pts) * 17 * 17 * 7 * 7 * 3};
        run_case(
            c, 20,
            [&] {
                ops::ref::track_points_step(f0.data(), f1.data(), size, pts.data(), n_pts, 3, 8,
                                            o1.data());
            },
            [&] {
                ops::track_points_step(f0.data(), f1.data(), size, pts.data(), n_pts, 3, 8,
                                       o2.data());
            },
            nullptr, nullptr, 0);
        c.equal = o1 == o2;
        std::printf("%-28s ref %7.2f ms (%6.2f GMAC/s)   omp %7.2f ms (%6.2f GMAC/s)  x%.2f  %s\n",
                    c.name, c.t_ref * 1e3, c.macs / c.t_ref * 1e-9, c.t_omp * 1e3,
                    c.macs / c.t_omp * 1e-9, c.t_ref / c.t_omp, c.equal ? "bit-equal" : "MISMATCH");
    }

    return 0;
}
