#include "arp/diffusion.hpp"

#include <cmath>

namespace arp::diff {

NoiseSchedule NoiseSchedule::make(const std::string& name, int steps) {
    if (steps < 1) fail("noise schedule: steps must be >= 1");
    NoiseSchedule s;
    s.steps = steps;
    s.alpha_bar.resize(steps);
    if (name == "cosine") {
        const double offs = 0.008;
        auto f = [&](double u) {
            const double v = std::cos((u + offs) / (1.0 + offs) * 3.14159265358979323846 / 2.0);
            return v * v;
        };
        const double f0 = f(0.0);
        for (int t = 0; t < steps; ++t) {
            double ab = f(static_cast<double>(t + 1) / steps) / f0;
            s.alpha_bar[t] = std::clamp(ab, 1e-8, 1.0 - 1e-8);
        }
    } else if (name == "linear") {
        const double scale = 1000.0 / steps;
        const double b0 = 1e-4 * scale, b1 = 0.02 * scale;
        double ab = 1.0;
        for (int t = 0; t < steps; ++t) {
            const double beta =
                std::min(0.999, b0 + (b1 - b0) * (steps > 1 ? static_cast<double>(t) / (steps - 1) : 0.0));
            ab *= 1.0 - beta;
            s.alpha_bar[t] = std::clamp(ab, 1e-8, 1.0 - 1e-8);
        }
    } else {
        fail("noise schedule: unknown name \"" + name + "\"");
    }
    s.signal.resize(steps);
    s.noise.resize(steps);
    for (int t = 0; t < steps; ++t) {
        s.signal[t] = std::sqrt(s.alpha_bar[t]);
        s.noise[t] = std::sqrt(1.0 - s.alpha_bar[t]);
        if (t > 0 && !(s.alpha_bar[t] < s.alpha_bar[t - 1])) {
            fail("noise schedule: signal must be strictly decreasing");
        }
    }
    if (s.signal[0] < 1.0 - 1e-3) fail("noise schedule: signal at t=0 must be ~1");
    return s;
}

template <typename T>
void forward_noise(const NoiseSchedule& sched, const TensorT<T>& z0, int t, const TensorT<T>& eps,
                   TensorT<T>& out) {
    if (t < 0 || t >= sched.steps) fail("forward_noise: t out of range");
    if (z0.shape != eps.shape) fail("forward_noise: shape mismatch");
    out = TensorT<T>(z0.shape);
    const T s = static_cast<T>(sched.signal[t]);
    const T n = static_cast<T>(sched.noise[t]);
    for (size_t i = 0; i < z0.numel(); ++i) out.v[i] = s * z0.v[i] + n * eps.v[i];
}

template void forward_noise<float>(const NoiseSchedule&, const TensorT<float>&, int,
                                   const TensorT<float>&, TensorT<float>&);
template void forward_noise<double>(const NoiseSchedule&, const TensorT<double>&, int,
                                    const TensorT<double>&, TensorT<double>&);

} // namespace arp::diff
