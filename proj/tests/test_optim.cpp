#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <doctest.h>

#include "attribroi/errors.hpp"
#include "attribroi/model.hpp"
#include "attribroi/optim.hpp"

using namespace attribroi;

namespace {

Model scalar_fixture() {
    // only head.bias[0] participates; everything else is frozen
    ModelConfig c;
    c.image_size = 8;
    c.patch_size = 4;
    c.stage_embed_dims = {4};
    c.stage_depths = {1};
    c.heads_per_stage = {2};
    c.mlp_ratio = 2;
    Model m = init_model(c);
    m.set_requires_grad(false);
    m.param("head.bias").set_requires_grad(true);
    return m;
}

void set_bias_grad(Model& m, double g0) {
    auto& node = *m.param("head.bias").node();
    node.grad.assign(node.values.size(), 0.0);
    node.grad[0] = g0;
}

}  // namespace

TEST_CASE("one adam step from unit gradient moves the weight by ~lr") {
    Model m = scalar_fixture();
    m.param("head.bias").data()[0] = 1.0;
    set_bias_grad(m, 1.0);

    Optimizer opt(OptimizerKind::adam, 0.1, 0.0);
    opt.step(m);

    // bias correction cancels at t=1, so the update is lr * g / (|g| + eps)
    const double expected = 1.0 - 0.1 / (1.0 + 1e-8);
    const double got = m.param("head.bias").data()[0];
    CHECK(got == doctest::Approx(expected).epsilon(1e-15));
    CHECK(std::abs((1.0 - got) - 0.1) < 1e-7);
    CHECK(opt.steps_taken() == 1);
}

TEST_CASE("two adam steps follow the hand-run recurrence") {
    Model m = scalar_fixture();
    m.param("head.bias").data()[0] = 0.25;
    Optimizer opt(OptimizerKind::adam, 0.05, 0.0);

    double theta = 0.25, mm = 0.0, vv = 0.0;
    const double grads[2] = {1.0, -0.5};
    for (int t = 1; t <= 2; ++t) {
        const double g = grads[t - 1];
        set_bias_grad(m, g);
        opt.step(m);

        mm = 0.9 * mm + (1.0 - 0.9) * g;
        vv = 0.999 * vv + (1.0 - 0.999) * g * g;
        const double mhat = mm / (1.0 - std::pow(0.9, double(t)));
        const double vhat = vv / (1.0 - std::pow(0.999, double(t)));
        theta -= 0.05 * mhat / (std::sqrt(vhat) + 1e-8);

        CHECK(m.param("head.bias").data()[0] == doctest::Approx(theta).epsilon(1e-15));
    }
    CHECK(opt.steps_taken() == 2);
}

TEST_CASE("adamw decays the weight even with a zero gradient") {
    Model m = scalar_fixture();
    m.param("head.bias").data()[0] = 0.5;
    set_bias_grad(m, 0.0);

    Optimizer opt(OptimizerKind::adamw, 0.01, 0.1);
    opt.step(m);
    CHECK(m.param("head.bias").data()[0] == 0.5 - 0.01 * 0.1 * 0.5);
}

TEST_CASE("plain adam ignores weight decay entirely") {
    Model m = scalar_fixture();
    m.param("head.bias").data()[0] = 0.5;
    set_bias_grad(m, 0.0);

    Optimizer opt(OptimizerKind::adam, 0.01, 0.1);
    opt.step(m);
    CHECK(m.param("head.bias").data()[0] == 0.5);
}

TEST_CASE("adam and adamw coincide when weight decay is zero") {
    Model a = scalar_fixture();
    Model b = scalar_fixture();
    a.param("head.bias").data()[0] = 0.7;
    b.param("head.bias").data()[0] = 0.7;
    Optimizer oa(OptimizerKind::adam, 0.02, 0.0);
    Optimizer ob(OptimizerKind::adamw, 0.02, 0.0);
    for (double g : {0.3, -1.1, 0.2}) {
        set_bias_grad(a, g);
        set_bias_grad(b, g);
        oa.step(a);
        ob.step(b);
        CHECK(a.param("head.bias").data()[0] == b.param("head.bias").data()[0]);
    }
}

TEST_CASE("frozen parameters are never touched") {
    Model m = scalar_fixture();
    const double w0 = m.param("head.weight").data()[0];
    set_bias_grad(m, 1.0);
    Optimizer opt(OptimizerKind::adamw, 0.1, 0.5);
    opt.step(m);
    CHECK(m.param("head.weight").data()[0] == w0);
}

TEST_CASE("identical runs produce identical trajectories") {
    auto run = [] {
        Model m = scalar_fixture();
        m.param("head.bias").data()[0] = -0.3;
        Optimizer opt(OptimizerKind::adamw, 0.03, 0.01);
        for (double g : {1.0, 0.5, -2.0, 0.25}) {
            set_bias_grad(m, g);
            opt.step(m);
        }
        return m.param("head.bias").data()[0];
    };
    CHECK(run() == run());
}

TEST_CASE("a non-finite gradient aborts naming the parameter") {
    Model m = scalar_fixture();
    set_bias_grad(m, std::numeric_limits<double>::quiet_NaN());
    Optimizer opt(OptimizerKind::adam, 0.1, 0.0);
    try {
        opt.step(m);
        FAIL("expected TrainAbort");
    } catch (const TrainAbort& e) {
        CHECK(std::string(e.what()).find("head.bias") != std::string::npos);
    }
}

TEST_CASE("optimizer hyperparameters are validated") {
    CHECK_THROWS_AS(Optimizer(OptimizerKind::adam, 0.0, 0.0), ConfigError);
    CHECK_THROWS_AS(Optimizer(OptimizerKind::adam, -1.0, 0.0), ConfigError);
    CHECK_THROWS_AS(Optimizer(OptimizerKind::adamw, 0.1, -0.5), ConfigError);
    Optimizer opt(OptimizerKind::adam, 0.1, 0.0);
    CHECK_THROWS_AS(opt.set_lr(0.0), ConfigError);
    opt.set_lr(0.25);
    CHECK(opt.lr() == 0.25);
}

TEST_CASE("multistep decay: 1e-3 with factor 0.1 every 10 epochs") {
    MultistepSchedule sched{10, 0.1};
    CHECK(multistep_lr(1e-3, sched, 0) == 1e-3);
    CHECK(multistep_lr(1e-3, sched, 9) == 1e-3);
    CHECK(multistep_lr(1e-3, sched, 10) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(multistep_lr(1e-3, sched, 25) == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(multistep_lr(1e-3, sched, 30) == doctest::Approx(1e-6).epsilon(1e-12));

    CHECK_THROWS_AS(multistep_lr(1e-3, MultistepSchedule{0, 0.1}, 1), ConfigError);
    CHECK_THROWS_AS(multistep_lr(1e-3, MultistepSchedule{10, 0.0}, 1), ConfigError);
    CHECK_THROWS_AS(multistep_lr(1e-3, MultistepSchedule{10, 1.5}, 1), ConfigError);
}

TEST_CASE("plateau cuts the rate after patience stalls") {
    PlateauTracker tracker(9.56e-4, PlateauSchedule{0.5, 3});
    CHECK(tracker.observe(1.00) == 9.56e-4);  // first loss always improves on inf
    CHECK(tracker.observe(0.90) == 9.56e-4);
    CHECK(tracker.observe(0.91) == 9.56e-4);  // stall 1
    CHECK(tracker.observe(0.92) == 9.56e-4);  // stall 2
    CHECK(tracker.observe(0.93) == 9.56e-4 * 0.5);  // stall 3 -> cut
    CHECK(tracker.lr() == 4.78e-4);
}

TEST_CASE("steady improvement never cuts the rate") {
    PlateauTracker tracker(1e-3, PlateauSchedule{0.5, 2});
    double loss = 1.0;
    for (int i = 0; i < 20; ++i) {
        loss -= 0.01;
        CHECK(tracker.observe(loss) == 1e-3);
    }
}

TEST_CASE("improvement below the 1e-8 threshold counts as a stall") {
    PlateauTracker tracker(1e-3, PlateauSchedule{0.5, 2});
    tracker.observe(1.0);
    tracker.observe(1.0 - 1e-9);
    CHECK(tracker.observe(1.0 - 2e-9) == 0.5e-3);
}

TEST_CASE("stall counter resets after each cut") {
    PlateauTracker tracker(1.0, PlateauSchedule{0.5, 2});
    tracker.observe(1.0);
    tracker.observe(1.0);  // stall 1
    CHECK(tracker.observe(1.0) == 0.5);   // stall 2 -> cut, reset
    CHECK(tracker.observe(1.0) == 0.5);   // stall 1 again
    CHECK(tracker.observe(1.0) == 0.25);  // stall 2 -> cut
}

TEST_CASE("plateau schedule validation") {
    CHECK_THROWS_AS(PlateauTracker(1e-3, PlateauSchedule{0.0, 3}), ConfigError);
    CHECK_THROWS_AS(PlateauTracker(1e-3, PlateauSchedule{1.5, 3}), ConfigError);
    CHECK_THROWS_AS(PlateauTracker(1e-3, PlateauSchedule{0.5, 0}), ConfigError);
}

TEST_CASE("stateless replay matches the incremental tracker") {
    ScheduleSpec spec;
    spec.kind = ScheduleKind::plateau;
    spec.base_lr = 9.56e-4;
    spec.plateau = PlateauSchedule{0.5, 3};

    const std::vector<double> history = {1.0, 0.9, 0.91, 0.92, 0.93};
    CHECK(schedule_lr(spec, history) == 4.78e-4);

    PlateauTracker tracker(spec.base_lr, spec.plateau);
    std::vector<double> prefix;
    for (double loss : history) {
        prefix.push_back(loss);
        CHECK(schedule_lr(spec, prefix) == tracker.observe(loss));
    }

    CHECK_THROWS_AS(schedule_lr(spec, {}), ContractError);
}

TEST_CASE("multistep replay keys off epochs completed") {
    ScheduleSpec spec;
    spec.kind = ScheduleKind::multistep;
    spec.base_lr = 1e-3;
    spec.multistep = MultistepSchedule{10, 0.1};
    CHECK(schedule_lr(spec, {}) == 1e-3);
    std::vector<double> history(25, 0.5);
    CHECK(schedule_lr(spec, history) == doctest::Approx(1e-5).epsilon(1e-12));
}
