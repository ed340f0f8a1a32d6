#include <benchmark/benchmark.h>

#include <random>

#include "attribroi/atlas.hpp"
#include "attribroi/distill.hpp"
#include "attribroi/model.hpp"
#include "attribroi/ops.hpp"
#include "attribroi/rng.hpp"
#include "attribroi/synth.hpp"
#include "attribroi/tensor.hpp"
#include "attribroi/xai.hpp"

namespace {

attribroi::Tensor random_tensor(const attribroi::Shape& shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(attribroi::shape_numel(shape));
    for (double& x : v) x = dist(rng);
    return attribroi::Tensor::from_data(shape, std::move(v));
}

void bm_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    attribroi::NoGradGuard guard;
    attribroi::Tensor a = random_tensor({n, n}, 1);
    attribroi::Tensor b = random_tensor({n, n}, 2);
    for (auto _ : state) {
        attribroi::Tensor c = attribroi::ops::matmul(a, b);
        benchmark::DoNotOptimize(c.data().data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(bm_matmul)->Arg(32)->Arg(64)->Arg(128);

void bm_softmax_backward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto& rec = attribroi::ComputationRecord::active();
        rec.clear();
        attribroi::Tensor x = random_tensor({n, n}, 3);
        x.set_requires_grad(true);
        attribroi::Tensor y =
            attribroi::ops::mean(attribroi::ops::mul(attribroi::ops::softmax(x, 1), x.detach()));
        y.backward();
        benchmark::DoNotOptimize(x.grad().data());
        rec.clear();
    }
}
BENCHMARK(bm_softmax_backward)->Arg(64);

attribroi::ModelConfig bench_model_config(std::size_t image_size) {
    attribroi::ModelConfig c;
    c.image_size = image_size;
    c.channels = 1;
    c.patch_size = 8;
    c.stage_embed_dims = {8, 16};
    c.stage_depths = {1, 1};
    c.heads_per_stage = {2, 2};
    c.mlp_ratio = 2;
    c.num_classes = 2;
    c.seed = 11;
    return c;
}

void bm_model_forward(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    attribroi::Model m = attribroi::init_model(bench_model_config(size));
    m.set_requires_grad(false);
    const attribroi::Tensor img = random_tensor({1, size, size}, 4);
    attribroi::NoGradGuard guard;
    for (auto _ : state) {
        attribroi::ForwardRecord out = attribroi::forward(m, img);
        benchmark::DoNotOptimize(out.logits.data().data());
    }
}
BENCHMARK(bm_model_forward)->Arg(32)->Arg(64);

void bm_model_backward(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    attribroi::Model m = attribroi::init_model(bench_model_config(size));
    m.set_requires_grad(true);
    const attribroi::Tensor img = random_tensor({1, size, size}, 5);
    for (auto _ : state) {
        auto& rec = attribroi::ComputationRecord::active();
        rec.clear();
        m.zero_grad();
        attribroi::ForwardRecord out = attribroi::forward(m, img);
        attribroi::Tensor loss = attribroi::cross_entropy(out.logits, 1);
        loss.backward();
        benchmark::DoNotOptimize(loss.value());
        rec.clear();
    }
}
BENCHMARK(bm_model_backward)->Arg(32)->Arg(64);

void bm_shapley_sampled(benchmark::State& state) {
    const std::size_t n = 16;
    const auto budget = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> weights(n);
    for (double& w : weights) w = unit(rng);
    const attribroi::CoalitionValue game = [&](const std::vector<bool>& coalition) {
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (coalition[i]) v += weights[i];
        }
        return v;
    };
    for (auto _ : state) {
        attribroi::ShapleyResult r = attribroi::shapley_sampled(n, game, budget, 3);
        benchmark::DoNotOptimize(r.phi.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(budget));
}
BENCHMARK(bm_shapley_sampled)->Arg(32)->Arg(128)->Arg(512);

void bm_shap_values(benchmark::State& state) {
    attribroi::SynthSpec spec;
    spec.image_size = 32;
    spec.n_rois = 8;
    spec.signal_rois = {2, 5};
    spec.effect_size = 0.3;
    spec.noise_sigma = 0.1;
    spec.n_per_class = 2;
    spec.seed = 9;
    const attribroi::RoiAtlas atlas = attribroi::generate_atlas(32, 8, 9, false);
    const attribroi::Dataset data = attribroi::generate_dataset(spec, atlas);
    attribroi::Model m = attribroi::init_model(bench_model_config(32));
    const attribroi::Tensor baseline = attribroi::mean_image(data);
    attribroi::ShapleyConfig sc;
    sc.mode = attribroi::ShapMode::sampled;
    sc.sample_budget = static_cast<std::size_t>(state.range(0));
    sc.seed = 13;
    for (auto _ : state) {
        attribroi::ShapExplanation e = attribroi::shap_values(
            m, data.samples[2].image, 1, atlas, sc, baseline);
        benchmark::DoNotOptimize(e.table.scores.data());
    }
}
BENCHMARK(bm_shap_values)->Arg(16)->Arg(64);

void bm_saliency(benchmark::State& state) {
    attribroi::Model m = attribroi::init_model(bench_model_config(64));
    const attribroi::Tensor img = random_tensor({1, 64, 64}, 6);
    for (auto _ : state) {
        attribroi::AttributionMap map = attribroi::saliency_map(m, img, 1);
        benchmark::DoNotOptimize(map.values.data().data());
    }
}
BENCHMARK(bm_saliency);

}  // namespace

BENCHMARK_MAIN();
