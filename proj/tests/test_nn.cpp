#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "arp/checkpoint.hpp"
#include "arp/nn.hpp"
#include "arp/rng.hpp"

using namespace arp;

namespace {

// central finite differences on every parameter and the input of a layer,
// against a random linear functional of the output
template <typename Layer>
void check_layer_gradients(Layer& layer, nn::Registry<double>& reg, TensorT<double> x,
                           double tol = 1e-6) {
    Rng rng(99);
    auto out = layer.forward(x);
    TensorT<double> r(out.shape);
    for (auto& v : r.v) v = rng.normal();

    auto loss_of = [&](const TensorT<double>& input) {
        auto y = layer.forward(input);
        double l = 0.0;
        for (size_t i = 0; i < y.numel(); ++i) l += y.v[i] * r.v[i];
        return l;
    };

    reg.zero_grads();
    layer.forward(x);
    const TensorT<double> gx = layer.backward(r);

    const double eps = 1e-5;
    for (size_t i = 0; i < x.numel(); i += std::max<size_t>(1, x.numel() / 50)) {
        const double keep = x.v[i];
        x.v[i] = keep + eps;
        const double lp = loss_of(x);
        x.v[i] = keep - eps;
        const double lm = loss_of(x);
        x.v[i] = keep;
        const double num = (lp - lm) / (2 * eps);
        CHECK(gx.v[i] == doctest::Approx(num).epsilon(tol).scale(1.0));
    }

    reg.zero_grads();
    layer.forward(x);
    layer.backward(r);
    for (auto* p : reg.params()) {
        for (size_t i = 0; i < p->w.numel(); i += std::max<size_t>(1, p->w.numel() / 40)) {
            const double keep = p->w.v[i];
            p->w.v[i] = keep + eps;
            const double lp = loss_of(x);
            p->w.v[i] = keep - eps;
            const double lm = loss_of(x);
            p->w.v[i] = keep;
            const double num = (lp - lm) / (2 * eps);
            CHECK_MESSAGE(p->g.v[i] == doctest::Approx(num).epsilon(tol).scale(1.0),
                          "param ", p->name, " index ", i);
        }
    }
}

TensorT<double> random_input(Rng& rng, std::vector<int> shape) {
    TensorT<double> x(std::move(shape));
    for (auto& v : x.v) v = rng.normal();
    return x;
}

} // namespace

TEST_CASE("conv2d layer gradients (stride 1 and 2)") {
    for (int stride : {1, 2}) {
        Rng rng(5);
        nn::Registry<double> reg;
        nn::Conv2d<double> conv(reg, "c", 3, 4, 3, stride, 1, rng);
        auto x = random_input(rng, {2, 3, 6, 6});
        check_layer_gradients(conv, reg, x);
    }
}

TEST_CASE("linear layer gradients") {
    Rng rng(6);
    nn::Registry<double> reg;
    nn::Linear<double> lin(reg, "l", 7, 5, rng);
    auto x = random_input(rng, {3, 7});
    check_layer_gradients(lin, reg, x);
}

TEST_CASE("groupnorm layer gradients") {
    Rng rng(7);
    nn::Registry<double> reg;
    nn::GroupNorm<double> gn(reg, "g", 8, 4);
    auto x = random_input(rng, {2, 8, 3, 3});
    check_layer_gradients(gn, reg, x, 1e-5);
}

TEST_CASE("silu gradients") {
    Rng rng(8);
    nn::Registry<double> reg;
    nn::SiLU<double> act;
    auto x = random_input(rng, {2, 4, 3, 3});
    check_layer_gradients(act, reg, x);
}

TEST_CASE("upsample gradients") {
    Rng rng(9);
    nn::Registry<double> reg;
    nn::Upsample2<double> up;
    auto x = random_input(rng, {2, 3, 4, 4});
    check_layer_gradients(up, reg, x);
}

TEST_CASE("temporal mix gradients and identity init") {
    Rng rng(10);
    nn::Registry<double> reg;
    nn::TemporalMix<double> tm(reg, "t", 3);
    auto x = random_input(rng, {6, 2, 2, 2}); // 2 clips of 3 frames
    auto y = tm.forward(x);
    CHECK(y.v == x.v); // identity at init
    check_layer_gradients(tm, reg, x);
}

TEST_CASE("embedding forward/backward") {
    Rng rng(11);
    nn::Registry<double> reg;
    nn::Embedding<double> emb(reg, "e", 10, 4, rng);
    std::vector<std::vector<int>> ids = {{1, 2, 0}, {3, 3, 9}};
    auto y = emb.forward(ids);
    CHECK(y.shape == std::vector<int>{2, 12});
    TensorT<double> gy(y.shape);
    for (auto& v : gy.v) v = 1.0;
    reg.zero_grads();
    emb.backward(gy);
    // token 3 appears twice in sample 1
    const auto& g = reg.params()[0]->g;
    for (int d = 0; d < 4; ++d) CHECK(g.v[3 * 4 + d] == doctest::Approx(2.0));
    for (int d = 0; d < 4; ++d) CHECK(g.v[5 * 4 + d] == doctest::Approx(0.0));
}

TEST_CASE("channel concat/split round trip") {
    Rng rng(12);
    auto a = random_input(rng, {2, 3, 4, 4});
    auto b = random_input(rng, {2, 5, 4, 4});
    auto y = nn::concat_channels(a, b);
    CHECK(y.shape == std::vector<int>{2, 8, 4, 4});
    TensorT<double> ga, gb;
    nn::split_channels(y, 3, ga, gb);
    CHECK(ga.v == a.v);
    CHECK(gb.v == b.v);
}

TEST_CASE("registry serialization round trip and stable hash") {
    Rng rng(13);
    nn::Registry<float> reg;
    nn::Conv2d<float> conv(reg, "c", 2, 3, 3, 1, 1, rng);
    nn::Linear<float> lin(reg, "l", 4, 2, rng);
    const auto bytes = reg.serialize();
    const uint64_t h1 = reg.content_hash();

    nn::Registry<float> reg2;
    nn::Conv2d<float> conv2(reg2, "c", 2, 3, 3, 1, 1, rng);
    nn::Linear<float> lin2(reg2, "l", 4, 2, rng);
    reg2.deserialize(bytes);
    CHECK(reg2.content_hash() == h1);
    for (size_t i = 0; i < reg.params().size(); ++i) {
        CHECK(reg.params()[i]->w.v == reg2.params()[i]->w.v);
    }

    nn::Registry<float> reg3;
    nn::Linear<float> lin3(reg3, "other", 4, 2, rng);
    CHECK_THROWS_AS(reg3.deserialize(bytes), error);
}

TEST_CASE("checkpoint round trip") {
    const fs::path dir = fs::temp_directory_path() / "arp_test_ckpt";
    fs::remove_all(dir);
    Rng rng(14);
    Config cfg;
    nn::Registry<float> reg;
    nn::Linear<float> lin(reg, "l", 4, 2, rng);
    nn::save_checkpoint(dir, "demo", reg, cfg, R"({"note": 1})");

    nn::Registry<float> reg2;
    nn::Linear<float> lin2(reg2, "l", 4, 2, rng);
    const auto info = nn::load_checkpoint(dir, "demo", reg2);
    CHECK(info.kind == "demo");
    CHECK(info.config.image_size == cfg.image_size);
    CHECK(reg2.content_hash() == reg.content_hash());
    CHECK(info.hash == to_hex(reg.content_hash()));
    CHECK_THROWS_AS(nn::load_checkpoint(dir, "codec", reg2), error);
}

TEST_CASE("adam reduces a quadratic") {
    Rng rng(15);
    nn::Registry<float> reg;
    nn::Linear<float> lin(reg, "l", 1, 1, rng);
    // fit y = 3x
    double loss = 0.0;
    for (int step = 0; step < 400; ++step) {
        reg.zero_grads();
        TensorT<float> x({4, 1});
        for (auto& v : x.v) v = static_cast<float>(rng.uniform(-1, 1));
        auto y = lin.forward(x);
        TensorT<float> gy(y.shape);
        loss = 0.0;
        for (size_t i = 0; i < y.numel(); ++i) {
            const float target = 3.0f * x.v[i];
            gy.v[i] = 2.0f * (y.v[i] - target);
            loss += (y.v[i] - target) * (y.v[i] - target);
        }
        lin.backward(gy);
        reg.adam_step(0.05);
    }
    CHECK(loss < 1e-3);
}
