#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "arp/common.hpp"
#include "arp/rng.hpp"

namespace arp {

// Dense row-major tensor. TScalar is float in production models and double in
// the finite-difference gradient checks.
template <typename TScalar>
struct TensorT {
    std::vector<int> shape;
    std::vector<TScalar> v;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) : shape(std::move(s)), v(count(shape), TScalar(0)) {}

    static size_t count(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) n *= static_cast<size_t>(d);
        return n;
    }

    size_t numel() const { return v.size(); }
    TScalar* data() { return v.data(); }
    const TScalar* data() const { return v.data(); }

    void zero() { std::fill(v.begin(), v.end(), TScalar(0)); }

    void fill_normal(Rng& rng, double stddev) {
        for (auto& x : v) x = static_cast<TScalar>(rng.normal() * stddev);
    }
};

using Tensor = TensorT<float>;

} // namespace arp
