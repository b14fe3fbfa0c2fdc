#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "lesen/mean_teacher.hpp"
#include "lesen/rng.hpp"
#include "lesen/synth_data.hpp"

using namespace lesen;

namespace {

NetworkConfig tiny_net() {
    NetworkConfig c;
    c.base_width = 4;
    c.depth = 2;
    return c;
}

MultiModalSample make_sample(int h, int w, std::uint64_t seed, bool with_mask) {
    MultiModalSample s;
    s.sample_id = "t" + std::to_string(seed);
    s.modality_a = Tensor({h, w});
    s.modality_b = Tensor({h, w});
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : s.modality_a.data) v = u(rng);
    for (auto& v : s.modality_b.data) v = u(rng);
    if (with_mask) {
        Tensor m({h, w});
        for (int y = h / 4; y < 3 * h / 4; ++y)
            for (int x = w / 4; x < 3 * w / 4; ++x) m.at(y, x) = 1.0;
        s.mask = m;
    }
    return s;
}

StepConfig tiny_step_config() {
    StepConfig c;
    c.net = tiny_net();
    c.aug.m_copies = 3;
    c.total_epochs = 4;
    return c;
}

bool states_equal(const ModelState& a, const ModelState& b) {
    if (!a.same_structure(b)) return false;
    for (std::size_t i = 0; i < a.entries.size(); ++i)
        if (a.entries[i].value.data != b.entries[i].value.data) return false;
    return true;
}

TrainState fresh_train_state(std::uint64_t seed) {
    TrainState ts;
    ts.student = init_state(tiny_net(), seed);
    ts.teacher = ts.student;
    ts.optimizer = AdamState::init(ts.student);
    ts.rng_seed = seed;
    return ts;
}

}  // namespace

TEST_CASE("ema update endpoints") {
    ModelState student = init_state(tiny_net(), 1);
    ModelState teacher = init_state(tiny_net(), 2);

    SUBCASE("decay 1 keeps the teacher bit-identical") {
        ModelState before = teacher;
        ema_update(teacher, student, 1.0);
        CHECK(states_equal(teacher, before));
    }
    SUBCASE("decay 0 copies the student") {
        ema_update(teacher, student, 0.0);
        CHECK(states_equal(teacher, student));
    }
    SUBCASE("structural mismatch is an error") {
        NetworkConfig other = tiny_net();
        other.base_width = 8;
        ModelState big = init_state(other, 1);
        CHECK_THROWS_AS(ema_update(teacher, big, 0.99), std::invalid_argument);
    }
    SUBCASE("decay outside [0,1] is rejected") {
        EmaConfig e;
        e.decay = 1.5;
        CHECK_THROWS_AS(e.validate(), std::invalid_argument);
        e.decay = -0.1;
        CHECK_THROWS_AS(e.validate(), std::invalid_argument);
    }
}

TEST_CASE("repeated ema steps toward a fixed student follow a geometric series") {
    // teacher starts at 0, student constant at 1: after k steps the teacher
    // equals 1 - decay^k in every element.
    ModelState student = init_state(tiny_net(), 1);
    ModelState teacher = student;
    for (auto& e : student.entries) e.value.fill(1.0);
    for (auto& e : teacher.entries) e.value.fill(0.0);

    const double decay = 0.99;
    for (int k = 1; k <= 10; ++k) {
        ema_update(teacher, student, decay);
        const double expected = 1.0 - std::pow(decay, k);
        for (const auto& e : teacher.entries)
            for (double v : e.value.data) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(1.0 - std::pow(0.99, 10) == doctest::Approx(0.09561792499).epsilon(1e-9));
}

TEST_CASE("ema is a contraction toward the student") {
    ModelState student = init_state(tiny_net(), 5);
    ModelState teacher = init_state(tiny_net(), 6);
    auto gap = [&]() {
        double g = 0.0;
        for (std::size_t i = 0; i < student.entries.size(); ++i)
            for (std::size_t j = 0; j < student.entries[i].value.size(); ++j)
                g = std::max(g, std::abs(student.entries[i].value[j] -
                                         teacher.entries[i].value[j]));
        return g;
    };
    double prev = gap();
    for (int k = 0; k < 5; ++k) {
        ema_update(teacher, student, 0.9);
        const double cur = gap();
        CHECK(cur <= prev + 1e-15);
        prev = cur;
    }
}

TEST_CASE("adam state covers trainable parameters only") {
    ModelState model = init_state(tiny_net(), 3);
    AdamState opt = AdamState::init(model);
    CHECK(opt.t == 0);
    std::size_t trainable = 0;
    for (const auto& e : model.entries)
        if (is_trainable_param(e.name)) ++trainable;
    CHECK(opt.slots.size() == trainable);
    for (const auto& slot : opt.slots) {
        CHECK(is_trainable_param(slot.name));
        for (double v : slot.m.data) CHECK(v == 0.0);
        for (double v : slot.v.data) CHECK(v == 0.0);
    }
}

TEST_CASE("train_step runs, decreases nothing unlawful, and logs finite losses") {
    TrainState ts = fresh_train_state(11);
    StepConfig cfg = tiny_step_config();
    std::vector<MultiModalSample> labeled = {make_sample(16, 16, 1, true),
                                             make_sample(16, 16, 2, true)};
    std::vector<MultiModalSample> unlabeled = {make_sample(16, 16, 3, false),
                                               make_sample(16, 16, 4, false)};

    ModelState teacher_before = ts.teacher;
    StepStats st = train_step(ts, labeled, unlabeled, cfg, 1, 77);
    CHECK(std::isfinite(st.l_sup));
    CHECK(std::isfinite(st.l_cons));
    CHECK(std::isfinite(st.l_total));
    CHECK(st.l_sup > 0.0);
    CHECK(st.l_cons >= 0.0);
    CHECK(st.lambda > 0.0);
    CHECK(st.q >= 1);
    CHECK(st.q <= static_cast<int>(unlabeled.size()));
    CHECK(st.russ_active);
    CHECK(static_cast<int>(st.selected_ids.size()) == st.q);
    CHECK(ts.global_step == 1);
    CHECK(ts.optimizer.t == 1);
    // the optimizer moved the student, and the EMA moved the teacher
    CHECK_FALSE(states_equal(ts.student, ts.teacher));
    CHECK_FALSE(states_equal(ts.teacher, teacher_before));
}

TEST_CASE("train_step is deterministic given identical state and seeds") {
    StepConfig cfg = tiny_step_config();
    std::vector<MultiModalSample> labeled = {make_sample(16, 16, 1, true)};
    std::vector<MultiModalSample> unlabeled = {make_sample(16, 16, 3, false),
                                               make_sample(16, 16, 4, false)};

    TrainState a = fresh_train_state(21);
    TrainState b = fresh_train_state(21);
    StepStats sa = train_step(a, labeled, unlabeled, cfg, 1, 5);
    StepStats sb = train_step(b, labeled, unlabeled, cfg, 1, 5);
    CHECK(sa.l_total == sb.l_total);
    CHECK(sa.selected_ids == sb.selected_ids);
    CHECK(states_equal(a.student, b.student));
    CHECK(states_equal(a.teacher, b.teacher));

    // a different augmentation seed changes the consistency term
    TrainState c = fresh_train_state(21);
    StepStats sc = train_step(c, labeled, unlabeled, cfg, 1, 6);
    CHECK(sc.l_cons != sa.l_cons);
}

TEST_CASE("an empty unlabeled batch degrades to supervised training") {
    TrainState ts = fresh_train_state(31);
    StepConfig cfg = tiny_step_config();
    std::vector<MultiModalSample> labeled = {make_sample(16, 16, 1, true)};
    StepStats st = train_step(ts, labeled, {}, cfg, 1, 9);
    CHECK(st.l_cons == 0.0);
    CHECK(st.q == 0);
    CHECK(st.selected_ids.empty());
    CHECK(std::isfinite(st.l_total));
}

TEST_CASE("with use_russ off the whole unlabeled batch is kept") {
    TrainState ts = fresh_train_state(41);
    StepConfig cfg = tiny_step_config();
    cfg.use_russ = false;
    std::vector<MultiModalSample> labeled = {make_sample(16, 16, 1, true)};
    std::vector<MultiModalSample> unlabeled = {make_sample(16, 16, 3, false),
                                               make_sample(16, 16, 4, false),
                                               make_sample(16, 16, 5, false)};
    StepStats st = train_step(ts, labeled, unlabeled, cfg, 1, 9);
    CHECK_FALSE(st.russ_active);
    CHECK(st.q == 3);
    CHECK(st.selected_ids.size() == 3);
}

TEST_CASE("a frozen teacher plus zero consistency weight decouples the student") {
    // With decay = 1 the teacher never moves; with lambda_max = 0 the
    // consistency term contributes an exactly-zero gradient, so the student
    // trajectory must match a run whose unlabeled batch differs. The step
    // seeds are kept equal: they also drive the labeled-view augmentation.
    StepConfig cfg = tiny_step_config();
    cfg.ema.decay = 1.0;
    cfg.loss.lambda_max = 0.0;

    std::vector<MultiModalSample> labeled = {make_sample(16, 16, 1, true),
                                             make_sample(16, 16, 2, true)};
    std::vector<MultiModalSample> u1 = {make_sample(16, 16, 3, false)};
    std::vector<MultiModalSample> u2 = {make_sample(16, 16, 8, false)};

    TrainState a = fresh_train_state(51);
    TrainState b = fresh_train_state(51);
    for (int step = 0; step < 3; ++step) {
        train_step(a, labeled, u1, cfg, 1, 100 + step);
        train_step(b, labeled, u2, cfg, 1, 100 + step);
    }
    CHECK(states_equal(a.student, b.student));
    CHECK(states_equal(a.teacher, b.teacher));
    CHECK(states_equal(a.teacher, init_state(tiny_net(), 51)));  // frozen
}

TEST_CASE("the teacher receives no gradient updates, only averaging") {
    // Run two steps where student and teacher start equal; the teacher must
    // remain a convex combination of past students, i.e. every element lies
    // between the initial value and the current student value.
    TrainState ts = fresh_train_state(61);
    StepConfig cfg = tiny_step_config();
    cfg.ema.decay = 0.5;
    ModelState init = ts.student;
    std::vector<MultiModalSample> labeled = {make_sample(16, 16, 1, true)};
    std::vector<MultiModalSample> unlabeled = {make_sample(16, 16, 3, false)};
    train_step(ts, labeled, unlabeled, cfg, 1, 7);
    for (std::size_t i = 0; i < init.entries.size(); ++i)
        for (std::size_t j = 0; j < init.entries[i].value.size(); ++j) {
            const double lo = std::min(init.entries[i].value[j], ts.student.entries[i].value[j]);
            const double hi = std::max(init.entries[i].value[j], ts.student.entries[i].value[j]);
            CHECK(ts.teacher.entries[i].value[j] >= lo - 1e-12);
            CHECK(ts.teacher.entries[i].value[j] <= hi + 1e-12);
        }
}
