#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <vector>

#include <doctest.h>

#include "attribroi/errors.hpp"
#include "attribroi/gradcheck.hpp"
#include "attribroi/model.hpp"
#include "attribroi/ops.hpp"
#include "attribroi/tensor.hpp"

using namespace attribroi;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.image_size = 8;
    c.channels = 1;
    c.patch_size = 4;
    c.stage_embed_dims = {4};
    c.stage_depths = {1};
    c.heads_per_stage = {2};
    c.mlp_ratio = 2;
    c.num_classes = 2;
    c.seed = 7;
    return c;
}

ModelConfig two_stage_config() {
    ModelConfig c;
    c.image_size = 16;
    c.channels = 1;
    c.patch_size = 4;
    c.stage_embed_dims = {16, 32};
    c.stage_depths = {1, 1};
    c.heads_per_stage = {2, 4};
    c.mlp_ratio = 4;
    c.num_classes = 2;
    c.seed = 3;
    return c;
}

Tensor random_image(const ModelConfig& c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Tensor t = Tensor::zeros({c.channels, c.image_size, c.image_size});
    for (double& v : t.data()) v = dist(rng);
    return t;
}

Tensor pick_logit(const Tensor& logits, std::size_t cls) {
    return ops::sum(ops::gather(logits, {cls}, {1}));
}

bool bits_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("parameter counts match hand arithmetic") {
    // single stage: d=4, two heads (dk=2), mlp_ratio=2, 4x4 patches on 8x8
    //   patch embed 16*4+4 = 68
    //   block: ln1 8 + heads 2*(3*8+3*2)=60 + proj 20 + ln2 8 + mlp 76 = 172
    //   head: ln 8 + weight 8 + bias 2 = 18
    CHECK(param_count(tiny_config()) == 68 + 172 + 18);

    // two stages 16->32 on a 4x4 token grid
    //   patch embed 256+16 = 272
    //   stage0 block: 32 + 2*(3*128+24) + 272 + 32 + (1088+1040) = 3280
    //   merge: 64*32+32 = 2080
    //   stage1 block: 64 + 4*(3*256+24) + 1056 + 64 + (4224+4128) = 12704
    //   head: 64 + 64 + 2 = 130
    CHECK(param_count(two_stage_config()) == 272 + 3280 + 2080 + 12704 + 130);
}

TEST_CASE("initialized parameters agree with the declared count") {
    for (const ModelConfig& c : {tiny_config(), two_stage_config()}) {
        Model m = init_model(c);
        std::size_t total = 0;
        for (const auto& [name, t] : m.params) total += t.size();
        CHECK(total == param_count(c));
    }
}

TEST_CASE("initialization is deterministic in the seed") {
    Model a = init_model(two_stage_config());
    Model b = init_model(two_stage_config());
    REQUIRE(a.params.size() == b.params.size());
    for (const auto& [name, t] : a.params) {
        CHECK(bits_equal(t, b.param(name)));
    }

    ModelConfig other = two_stage_config();
    other.seed += 1;
    Model c = init_model(other);
    bool any_diff = false;
    for (const auto& [name, t] : a.params) {
        if (!bits_equal(t, c.param(name))) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("biases start at zero, layer-norm gains at one") {
    Model m = init_model(tiny_config());
    for (double v : m.param("patch_embed.bias").data()) CHECK(v == 0.0);
    for (double v : m.param("head.bias").data()) CHECK(v == 0.0);
    for (double v : m.param("s0.b0.ln1.gamma").data()) CHECK(v == 1.0);
    for (double v : m.param("s0.b0.ln1.beta").data()) CHECK(v == 0.0);
}

TEST_CASE("token grids shrink 16x16 -> 8x8 across the merge") {
    ModelConfig c;
    c.image_size = 64;
    c.patch_size = 4;
    c.stage_embed_dims = {8, 16};
    c.stage_depths = {1, 1};
    c.heads_per_stage = {2, 2};
    c.mlp_ratio = 2;
    Model m = init_model(c);
    Tensor img = random_image(c, 11);

    ForwardRecord first = forward(m, img, true, 0);
    CHECK(first.captured_tokens().shape() == Shape{16, 16, 8});

    ForwardRecord last = forward(m, img, true);
    CHECK(last.captured_tokens().shape() == Shape{8, 8, 16});
    CHECK(last.logits.shape() == Shape{2});
}

TEST_CASE("224/16 patching yields a 14x14 grid of 196 tokens") {
    ModelConfig c;
    c.image_size = 224;
    c.patch_size = 16;
    c.stage_embed_dims = {8};
    c.stage_depths = {1};
    c.heads_per_stage = {1};
    c.mlp_ratio = 1;
    validate_config(c);
    Model m = init_model(c);
    ForwardRecord fr = forward(m, random_image(c, 5), true);
    CHECK(fr.captured_tokens().shape() == Shape{14, 14, 8});
}

TEST_CASE("zero image produces equal logits and a uniform posterior") {
    Model m = init_model(two_stage_config());
    Tensor img = Tensor::zeros({1, 16, 16});
    ForwardRecord fr = forward(m, img);
    CHECK(fr.logits.data()[0] == fr.logits.data()[1]);
    Tensor probs = ops::softmax(fr.logits, 0);
    CHECK(probs.data()[0] == 0.5);
    CHECK(probs.data()[1] == 0.5);
}

TEST_CASE("swapping head columns swaps the logits bit for bit") {
    Model m = init_model(two_stage_config());
    Tensor img = random_image(m.config, 17);
    ForwardRecord before = forward(m, img);

    Tensor& w = m.param("head.weight");  // [d, classes]
    const std::size_t d = w.shape()[0];
    for (std::size_t j = 0; j < d; ++j) std::swap(w.data()[j * 2], w.data()[j * 2 + 1]);
    Tensor& b = m.param("head.bias");
    std::swap(b.data()[0], b.data()[1]);

    ForwardRecord after = forward(m, img);
    CHECK(after.logits.data()[0] == before.logits.data()[1]);
    CHECK(after.logits.data()[1] == before.logits.data()[0]);
}

TEST_CASE("logit gradient w.r.t. the input matches finite differences") {
    ModelConfig c = tiny_config();
    c.stage_depths = {2};  // two blocks stacked
    Model m = init_model(c);
    m.set_requires_grad(false);
    Tensor img = random_image(c, 23);

    const double err = grad_check(
        [&](const Tensor& x) { return pick_logit(forward(m, x).logits, 0); }, img, 1e-5);
    CHECK(err < 1e-4);
}

TEST_CASE("parameter gradients match finite differences") {
    ModelConfig c = tiny_config();
    c.stage_depths = {2};
    Model m = init_model(c);
    Tensor img = random_image(c, 29);

    m.set_requires_grad(true);
    m.zero_grad();
    ComputationRecord::active().clear();
    pick_logit(forward(m, img).logits, 1).backward();
    ComputationRecord::active().clear();

    const std::vector<std::pair<std::string, std::size_t>> probes = {
        {"patch_embed.weight", 3}, {"patch_embed.bias", 0},   {"s0.b0.attn.h0.wq", 2},
        {"s0.b0.attn.h1.wv", 5},   {"s0.b0.attn.proj.weight", 7}, {"s0.b0.ln1.gamma", 1},
        {"s0.b0.mlp.fc1.weight", 11}, {"s0.b1.mlp.fc2.weight", 4}, {"s0.b1.ln2.beta", 2},
        {"head.weight", 6},        {"head.bias", 1},
    };
    NoGradGuard guard;
    const double h = 1e-5;
    for (const auto& [name, slot] : probes) {
        CAPTURE(name);
        const double autodiff = m.param(name).grad()[slot];
        double& cell = m.param(name).data()[slot];
        const double saved = cell;
        cell = saved + h;
        const double up = forward(m, img).logits.data()[1];
        cell = saved - h;
        const double down = forward(m, img).logits.data()[1];
        cell = saved;
        const double central = (up - down) / (2.0 * h);
        CHECK(std::abs(autodiff - central) / std::max(1.0, std::abs(central)) < 1e-4);
    }
}

TEST_CASE("captured token gradient matches a pool->norm->linear oracle") {
    ModelConfig c = tiny_config();
    Model m = init_model(c);
    m.set_requires_grad(false);
    Tensor img = random_image(c, 31);
    Tensor x = img.detach();
    x.set_requires_grad(true);

    ComputationRecord::active().clear();
    ForwardRecord fr = forward(m, x, true);
    pick_logit(fr.logits, 0).backward();
    const Tensor grad = fr.captured_tokens_grad();
    const Tensor tokens = fr.captured_tokens().detach();
    ComputationRecord::active().clear();

    CHECK(grad.shape() == Shape{2, 2, 4});

    // re-derive logit 0 from raw token values with plain arithmetic
    const std::size_t n = 4, d = 4;
    const auto& gamma = m.param("head.ln.gamma").data();
    const auto& beta = m.param("head.ln.beta").data();
    const auto& hw = m.param("head.weight").data();  // [d, 2]
    const double hb = m.param("head.bias").data()[0];
    auto logit0 = [&](const std::vector<double>& tok) {
        std::vector<double> pooled(d, 0.0);
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t j = 0; j < d; ++j) pooled[j] += tok[t * d + j] / double(n);
        double mu = 0.0;
        for (double v : pooled) mu += v / double(d);
        double var = 0.0;
        for (double v : pooled) var += (v - mu) * (v - mu) / double(d);
        const double inv = 1.0 / std::sqrt(var + 1e-5);
        double out = hb;
        for (std::size_t j = 0; j < d; ++j) {
            out += ((pooled[j] - mu) * inv * gamma[j] + beta[j]) * hw[j * 2];
        }
        return out;
    };

    std::vector<double> tok(tokens.data().begin(), tokens.data().end());
    const double h = 1e-6;
    for (std::size_t e = 0; e < n * d; ++e) {
        const double saved = tok[e];
        tok[e] = saved + h;
        const double up = logit0(tok);
        tok[e] = saved - h;
        const double down = logit0(tok);
        tok[e] = saved;
        const double central = (up - down) / (2.0 * h);
        CHECK(std::abs(grad.data()[e] - central) / std::max(1.0, std::abs(central)) < 1e-5);
    }
}

TEST_CASE("first-order Taylor error shrinks quadratically") {
    ModelConfig c = tiny_config();
    Model m = init_model(c);
    m.set_requires_grad(false);
    Tensor img = random_image(c, 37);

    Tensor x = img.detach();
    x.set_requires_grad(true);
    ComputationRecord::active().clear();
    pick_logit(forward(m, x).logits, 0).backward();
    std::vector<double> g(x.grad().begin(), x.grad().end());
    ComputationRecord::active().clear();

    NoGradGuard guard;
    std::mt19937_64 rng(41);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> u(img.size());
    double norm = 0.0;
    for (double& v : u) { v = dist(rng); norm += v * v; }
    norm = std::sqrt(norm);
    for (double& v : u) v /= norm;

    const double f0 = forward(m, img).logits.data()[0];
    double dot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dot += g[i] * u[i];

    auto taylor_err = [&](double eps) {
        Tensor shifted = img.detach();
        for (std::size_t i = 0; i < u.size(); ++i) shifted.data()[i] += eps * u[i];
        const double f = forward(m, shifted).logits.data()[0];
        return std::abs(f - f0 - eps * dot);
    };
    const double e1 = taylor_err(1e-3);
    const double e2 = taylor_err(5e-4);
    CHECK(e2 <= 0.3 * e1 + 1e-12);
}

TEST_CASE("patch merge halves the grid and projects the channel dim") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Tensor tokens = Tensor::zeros({8, 8, 16});
    for (double& v : tokens.data()) v = dist(rng);
    Tensor w = Tensor::zeros({64, 32});
    for (double& v : w.data()) v = dist(rng);
    Tensor b = Tensor::zeros({32});

    Tensor out = patch_merge(tokens, w, b);
    CHECK(out.shape() == Shape{4, 4, 32});
}

TEST_CASE("patch merge concatenates neighborhoods as TL,TR,BL,BR") {
    // d=1 grid [[1,2],[3,4]]; weight picks each slot with a distinct decimal digit
    Tensor tokens = Tensor::from_data({2, 2, 1}, {1.0, 2.0, 3.0, 4.0});
    Tensor w = Tensor::from_data({4, 1}, {1000.0, 100.0, 10.0, 1.0});
    Tensor b = Tensor::zeros({1});
    Tensor out = patch_merge(tokens, w, b);
    CHECK(out.shape() == Shape{1, 1, 1});
    CHECK(out.data()[0] == 1234.0);
}

TEST_CASE("averaging projection reproduces a constant token exactly") {
    Tensor tokens = Tensor::zeros({2, 2, 2});
    for (std::size_t t = 0; t < 4; ++t) {
        tokens.data()[t * 2] = 0.3;
        tokens.data()[t * 2 + 1] = -0.7;
    }
    std::vector<double> wv(8 * 2, 0.0);
    for (std::size_t q = 0; q < 4; ++q)
        for (std::size_t j = 0; j < 2; ++j) wv[(q * 2 + j) * 2 + j] = 0.25;
    Tensor w = Tensor::from_data({8, 2}, std::move(wv));
    Tensor out = patch_merge(tokens, w, Tensor::zeros({2}));
    CHECK(out.data()[0] == 0.3);
    CHECK(out.data()[1] == -0.7);
}

TEST_CASE("patch merge gradient passes the finite-difference oracle") {
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Tensor w = Tensor::zeros({8, 3});
    for (double& v : w.data()) v = dist(rng);
    Tensor b = Tensor::zeros({3});
    for (double& v : b.data()) v = dist(rng);
    Tensor point = Tensor::zeros({4, 4, 2});
    for (double& v : point.data()) v = dist(rng);

    const double err = grad_check(
        [&](const Tensor& t) { return ops::sum(patch_merge(t, w, b)); }, point);
    CHECK(err < 1e-6);
}

TEST_CASE("patch merge rejects malformed inputs") {
    CHECK_THROWS_AS(patch_merge(Tensor::zeros({4, 4}), Tensor::zeros({4, 2}), Tensor::zeros({2})),
                    ShapeError);
    CHECK_THROWS_AS(
        patch_merge(Tensor::zeros({3, 3, 2}), Tensor::zeros({8, 2}), Tensor::zeros({2})),
        ShapeError);
    CHECK_THROWS_AS(
        patch_merge(Tensor::zeros({4, 4, 2}), Tensor::zeros({6, 2}), Tensor::zeros({2})),
        ShapeError);
}

TEST_CASE("checkpoint round trip restores config and parameters exactly") {
    const fs::path dir = fs::temp_directory_path() / "attribroi_model_test";
    fs::create_directories(dir);
    const fs::path manifest = dir / "ckpt.json";

    Model m = init_model(two_stage_config());
    // make sure we are not just re-initializing from the stored seed
    m.param("head.bias").data()[0] = 0.125;
    save_checkpoint(m, manifest);
    Model back = load_checkpoint(manifest);

    CHECK(back.config.image_size == m.config.image_size);
    CHECK(back.config.stage_embed_dims == m.config.stage_embed_dims);
    CHECK(back.config.heads_per_stage == m.config.heads_per_stage);
    CHECK(back.config.seed == m.config.seed);
    REQUIRE(back.params.size() == m.params.size());
    for (const auto& [name, t] : m.params) {
        CHECK(bits_equal(t, back.param(name)));
    }

    Tensor img = random_image(m.config, 53);
    CHECK(bits_equal(forward(m, img).logits, forward(back, img).logits));
}

TEST_CASE("config validation names the offending field") {
    ModelConfig c = tiny_config();
    c.num_classes = 1;
    try {
        validate_config(c);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("num_classes") != std::string::npos);
    }

    c = tiny_config();
    c.image_size = 10;
    try {
        validate_config(c);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("patch_size") != std::string::npos);
    }

    c = tiny_config();
    c.heads_per_stage = {3};
    try {
        validate_config(c);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("heads_per_stage") != std::string::npos);
    }

    c = two_stage_config();
    c.image_size = 12;  // 3x3 token grid cannot merge
    CHECK_THROWS_AS(validate_config(c), ConfigError);
}

TEST_CASE("forward rejects images that do not match the config") {
    Model m = init_model(tiny_config());
    CHECK_THROWS_AS(forward(m, Tensor::zeros({1, 4, 4})), ShapeError);
    CHECK_THROWS_AS(forward(m, Tensor::zeros({8, 8})), ShapeError);
}

TEST_CASE("forward is deterministic") {
    Model m = init_model(two_stage_config());
    Tensor img = random_image(m.config, 59);
    CHECK(bits_equal(forward(m, img).logits, forward(m, img).logits));
}
