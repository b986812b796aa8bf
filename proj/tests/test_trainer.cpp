#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "gcmt/cluster.hpp"
#include "gcmt/errors.hpp"
#include "gcmt/matrix.hpp"
#include "gcmt/model.hpp"
#include "gcmt/numeric.hpp"
#include "gcmt/rng.hpp"
#include "gcmt/synthdata.hpp"
#include "gcmt/trainer.hpp"

using namespace gcmt;

namespace {

SyntheticDataset make_target(int ids, int cams, int imgs, std::uint64_t master, bool hold_out = true) {
    DomainSpec spec = make_domain_spec(1, ids, cams, imgs, 6, 12, 0.08, master);
    spec.hold_out_eval = hold_out;
    return generate_domain(spec);
}

Model random_model(int input_dim, const std::vector<int>& hidden, int feature_dim, int classes, Rng& rng) {
    Model m;
    m.encoder = make_encoder(input_dim, hidden, feature_dim, rng);
    m.head.weight = Matrix(feature_dim, classes);
    for (double& v : m.head.weight.data()) v = rng.gaussian() * 0.1;
    return m;
}

double param_distance(const Model& a, const Model& b) {
    std::vector<Matrix> pa, pb;
    for_each_param(a, [&](const std::string&, const Matrix& p) { pa.push_back(p); });
    for_each_param(b, [&](const std::string&, const Matrix& p) { pb.push_back(p); });
    REQUIRE(pa.size() == pb.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) acc = std::max(acc, max_abs_diff(pa[i], pb[i]));
    return acc;
}

double train_accuracy(const Model& m, const SyntheticDataset& ds) {
    SplitView v = gather_split(ds, Split::Train);
    Matrix probs = class_probabilities(m.head, forward_features(m.encoder, v.inputs));
    int hit = 0;
    for (int i = 0; i < probs.rows(); ++i) {
        int arg = 0;
        for (int c = 1; c < probs.cols(); ++c) {
            if (probs(i, c) > probs(i, arg)) arg = c;
        }
        if (arg == v.identities[i]) ++hit;
    }
    return static_cast<double>(hit) / probs.rows();
}

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.iters_per_epoch = 3;
    cfg.batch_identities = 4;
    cfg.images_per_identity = 2;
    cfg.cluster_count = 6;
    cfg.knn_k = 4;
    cfg.beta = 0.05;
    cfg.lambda_gcc = 0.6;
    cfg.ema_decay = 0.9;
    cfg.learning_rate = 0.001;
    cfg.kmeans_iters = 30;
    cfg.aug_noise_sigma = 0.02;
    cfg.aug_drop_prob = 0.05;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("train config validation catches each bad field") {
    TrainConfig cfg = tiny_config();
    CHECK_NOTHROW(cfg.validate());
    auto broken = [&](auto mutate) {
        TrainConfig c = tiny_config();
        mutate(c);
        CHECK_THROWS_AS(c.validate(), ParameterError);
    };
    broken([](TrainConfig& c) { c.epochs = -1; });
    broken([](TrainConfig& c) { c.iters_per_epoch = 0; });
    broken([](TrainConfig& c) { c.batch_identities = 0; });
    broken([](TrainConfig& c) { c.batch_identities = 1, c.images_per_identity = 1; });
    broken([](TrainConfig& c) { c.cluster_count = 0; });
    broken([](TrainConfig& c) { c.knn_k = 0; });
    broken([](TrainConfig& c) { c.beta = 0.0; });
    broken([](TrainConfig& c) { c.lambda_gcc = -0.1; });
    broken([](TrainConfig& c) { c.ema_decay = 1.0; });
    broken([](TrainConfig& c) { c.learning_rate = 0.0; });
    broken([](TrainConfig& c) { c.lr_decay_factor = 0.0; });
    broken([](TrainConfig& c) { c.lr_decay_epoch = -1; });
    broken([](TrainConfig& c) { c.aug_noise_sigma = -0.01; });
    broken([](TrainConfig& c) { c.aug_drop_prob = 1.0; });
    broken([](TrainConfig& c) { c.kmeans_iters = 0; });
}

TEST_CASE("pretrain config validation") {
    PretrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.hidden_dims = {32, 0};
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = PretrainConfig{};
    cfg.feature_dim = 0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = PretrainConfig{};
    cfg.learning_rate = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("metric log renders to a fixed csv layout") {
    MetricLog log;
    MetricRow zero;
    log.rows.push_back(zero);
    MetricRow r;
    r.epoch = 1;
    r.l_ce = 0.5;
    r.l_mce = 0.25;
    r.l_gcc = 2.0;
    r.l_total = 1.95;
    r.teacher_idx = 1;
    r.map = 0.5;
    r.rank1 = 1.0;
    r.rank5 = 1.0;
    r.rank10 = 1.0;
    log.rows.push_back(r);
    CHECK(metric_log_csv(log) ==
          "epoch,l_ce,l_mce,l_gcc,l_total,teacher_idx,map,rank1,rank5,rank10\n"
          "0,0,0,0,0,0,0.000000,0.000000,0.000000,0.000000\n"
          "1,0.5,0.25,2,1.95,1,0.500000,1.000000,1.000000,1.000000\n");
}

TEST_CASE("final best map looks only at the last epoch") {
    MetricLog log;
    auto push = [&](int epoch, int teacher, double map) {
        MetricRow r;
        r.epoch = epoch;
        r.teacher_idx = teacher;
        r.map = map;
        log.rows.push_back(r);
    };
    push(1, 0, 0.3);
    push(1, 1, 0.4);
    push(2, 0, 0.35);
    push(2, 1, 0.2);
    CHECK(final_best_map(log) == 0.35);
    CHECK_THROWS_AS(final_best_map(MetricLog{}), StateError);
}

TEST_CASE("source pretraining fits its own train split") {
    DomainSpec spec = make_domain_spec(0, 10, 2, 4, 6, 12, 0.05, 3);
    SyntheticDataset source = generate_domain(spec);
    PretrainConfig cfg;
    cfg.hidden_dims = {48};
    cfg.feature_dim = 8;
    cfg.epochs = 80;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.003;
    cfg.seed = 11;
    Model model = pretrain_source(source, cfg);
    CHECK(train_accuracy(model, source) > 0.95);
    CHECK(model.head.weight.cols() == 10);
    CHECK(model.encoder.input_dim() == 12);
    CHECK(model.encoder.feature_dim() == 8);

    Model again = pretrain_source(source, cfg);
    CHECK(param_distance(model, again) == 0.0);
}

TEST_CASE("pretraining needs train samples") {
    SyntheticDataset empty;
    empty.input_dim = 12;
    CHECK_THROWS_AS(pretrain_source(empty, PretrainConfig{}), SizeError);
}

TEST_CASE("pk sampling draws distinct clusters and members when it can") {
    PseudoLabeling labeling;
    labeling.assignments = {0, 0, 1, 1, 2, 2};
    labeling.cluster_means = l2_normalize_rows(Matrix::from_rows({{1, 0}, {0, 1}, {1, 1}}));
    Rng rng(9);
    std::vector<int> batch = pk_sample(labeling, 2, 2, rng);
    REQUIRE(batch.size() == 4u);
    std::set<int> clusters, indices(batch.begin(), batch.end());
    for (int idx : batch) {
        REQUIRE(idx >= 0);
        REQUIRE(idx < 6);
        clusters.insert(labeling.assignments[idx]);
    }
    CHECK(clusters.size() == 2u);
    CHECK(indices.size() == 4u);
}

TEST_CASE("pk sampling falls back to replacement when clusters run short") {
    PseudoLabeling labeling;
    labeling.assignments = {0, 0, 1};
    labeling.cluster_means = l2_normalize_rows(Matrix::from_rows({{1, 0}, {0, 1}}));
    Rng rng(3);
    std::vector<int> batch = pk_sample(labeling, 4, 3, rng);
    REQUIRE(batch.size() == 12u);
    for (int idx : batch) {
        CHECK(idx >= 0);
        CHECK(idx < 3);
    }
}

TEST_CASE("pk sampling is deterministic in the rng") {
    PseudoLabeling labeling;
    labeling.assignments = {0, 1, 2, 0, 1, 2, 0, 1};
    labeling.cluster_means = l2_normalize_rows(Matrix::from_rows({{1, 0}, {0, 1}, {1, 1}}));
    Rng a(17), b(17);
    CHECK(pk_sample(labeling, 3, 2, a) == pk_sample(labeling, 3, 2, b));
}

TEST_CASE("pk sampling rejects bad input") {
    PseudoLabeling labeling;
    Rng rng(1);
    CHECK_THROWS_AS(pk_sample(labeling, 2, 2, rng), StateError);
    labeling.assignments = {0, 5};
    labeling.cluster_means = Matrix(3, 2);
    CHECK_THROWS_AS(pk_sample(labeling, 1, 1, rng), IndexError);
    labeling.assignments = {0};
    CHECK_THROWS_AS(pk_sample(labeling, 0, 1, rng), ParameterError);
}

TEST_CASE("augmentation with both knobs off is the identity") {
    Rng rng(5);
    Matrix batch(3, 4);
    for (double& v : batch.data()) v = rng.gaussian();
    Rng aug_rng(8);
    CHECK(max_abs_diff(augment(batch, 0.0, 0.0, aug_rng), batch) == 0.0);
}

TEST_CASE("noise perturbs and dropout zeroes coordinates") {
    Matrix batch(4, 6);
    for (double& v : batch.data()) v = 1.0;

    Rng r1(2);
    Matrix noisy = augment(batch, 0.5, 0.0, r1);
    CHECK(max_abs_diff(noisy, batch) > 0.0);

    Rng r2(2);
    Matrix dropped = augment(batch, 0.0, 0.5, r2);
    int zeros = 0;
    for (double v : dropped.data()) {
        CHECK((v == 1.0 || v == 0.0));
        if (v == 0.0) ++zeros;
    }
    CHECK(zeros > 0);
    CHECK(zeros < static_cast<int>(dropped.size()));
}

TEST_CASE("augmentation parameter validation") {
    Matrix batch(2, 2);
    Rng rng(1);
    CHECK_THROWS_AS(augment(batch, -0.1, 0.0, rng), ParameterError);
    CHECK_THROWS_AS(augment(batch, 0.0, 1.0, rng), ParameterError);
}

TEST_CASE("retrieval extraction runs the encoder over one split") {
    SyntheticDataset target = make_target(4, 2, 3, 21);
    Rng rng(7);
    Model model = random_model(12, {16}, 8, 4, rng);
    RetrievalSet set = extract_retrieval_set(model, target, Split::Query);
    SplitView view = gather_split(target, Split::Query);
    CHECK(max_abs_diff(set.features, forward_features(model.encoder, view.inputs)) == 0.0);
    CHECK(set.identities == view.identities);
    CHECK(set.cameras == view.cameras);
}

TEST_CASE("state initialization clones each model into a pair") {
    SyntheticDataset target = make_target(6, 2, 4, 33);
    Rng rng(13);
    std::vector<Model> pretrained = {random_model(12, {16}, 8, 4, rng), random_model(12, {16}, 8, 4, rng)};
    TrainConfig cfg = tiny_config();
    TrainState state = init_train_state(cfg, pretrained, target);

    REQUIRE(state.pairs.size() == 2u);
    REQUIRE(state.adam.size() == 2u);
    for (int j = 0; j < 2; ++j) {
        CHECK(state.pairs[j].pair_id == j);
        CHECK(state.pairs[j].ema_decay == cfg.ema_decay);
        CHECK(param_distance(state.pairs[j].student, pretrained[j]) == 0.0);
        CHECK(param_distance(state.pairs[j].teacher, pretrained[j]) == 0.0);
    }
    CHECK(state.train_inputs.rows() == 6 * 2 * 2);
    CHECK(state.train_inputs.cols() == 12);
    CHECK(state.epoch == 0);
    CHECK(state.iteration == 0);
}

TEST_CASE("state initialization rejects inconsistent input") {
    SyntheticDataset target = make_target(6, 2, 4, 33);
    Rng rng(13);
    TrainConfig cfg = tiny_config();

    CHECK_THROWS_AS(init_train_state(cfg, {}, target), ParameterError);

    std::vector<Model> narrow = {random_model(10, {16}, 8, 4, rng)};
    CHECK_THROWS_AS(init_train_state(cfg, narrow, target), DimensionError);

    std::vector<Model> mixed = {random_model(12, {16}, 8, 4, rng), random_model(12, {16}, 6, 4, rng)};
    CHECK_THROWS_AS(init_train_state(cfg, mixed, target), DimensionError);

    SyntheticDataset no_train = make_target(6, 2, 4, 33);
    for (auto& s : no_train.samples) s.split = Split::Query;
    std::vector<Model> ok = {random_model(12, {16}, 8, 4, rng)};
    CHECK_THROWS_AS(init_train_state(cfg, ok, no_train), SizeError);
}

TEST_CASE("iterating before any relabeling is an error") {
    SyntheticDataset target = make_target(6, 2, 4, 41);
    Rng rng(19);
    std::vector<Model> pretrained = {random_model(12, {16}, 8, 4, rng)};
    TrainConfig cfg = tiny_config();
    TrainState state = init_train_state(cfg, pretrained, target);
    CHECK_THROWS_AS(train_iteration(state, cfg), StateError);
}

TEST_CASE("one iteration steps the student and nudges the teacher") {
    SyntheticDataset target = make_target(6, 2, 4, 41);
    Rng rng(19);
    std::vector<Model> pretrained = {random_model(12, {16}, 8, 4, rng)};
    TrainConfig cfg = tiny_config();
    TrainState state = init_train_state(cfg, pretrained, target);
    state.epoch = 1;
    state.labeling = relabel_epoch(state.pairs, state.train_inputs, cfg.cluster_count, cfg.kmeans_iters, 77, 1);

    const Model student_before = state.pairs[0].student;
    const Model teacher_before = state.pairs[0].teacher;
    LossReport report = train_iteration(state, cfg);

    CHECK(std::isfinite(report.l_total));
    CHECK(report.l_ce > 0.0);
    CHECK(report.l_gcc >= 0.0);
    CHECK(report.lambda_gcc == cfg.lambda_gcc);
    CHECK(state.iteration == 1);
    CHECK(param_distance(state.pairs[0].student, student_before) > 0.0);
    CHECK(param_distance(state.pairs[0].teacher, teacher_before) > 0.0);
}

TEST_CASE("non-finite student output carries a batch diagnostic") {
    SyntheticDataset target = make_target(6, 2, 4, 41);
    Rng rng(19);
    std::vector<Model> pretrained = {random_model(12, {16}, 8, 4, rng)};
    TrainConfig cfg = tiny_config();
    TrainState state = init_train_state(cfg, pretrained, target);
    state.epoch = 1;
    state.labeling = relabel_epoch(state.pairs, state.train_inputs, cfg.cluster_count, cfg.kmeans_iters, 77, 1);
    state.pairs[0].student.encoder.layers[0].weight(0, 0) = std::nan("");
    try {
        train_iteration(state, cfg);
        FAIL_CHECK("expected NumericError");
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("student 0") != std::string::npos);
        CHECK(msg.find("batch indices:") != std::string::npos);
    }
}

TEST_CASE("a tiny adaptation run produces a complete deterministic log") {
    SyntheticDataset target = make_target(6, 2, 4, 51);
    Rng rng(23);
    std::vector<Model> pretrained = {random_model(12, {16}, 8, 4, rng)};
    TrainConfig cfg = tiny_config();

    AdaptResult result = train(cfg, pretrained, target);
    REQUIRE(result.pairs.size() == 1u);
    REQUIRE(result.log.rows.size() == 3u);
    REQUIRE(result.log.best_teacher.size() == 3u);

    // epoch zero is the untouched source baseline
    CHECK(result.log.rows[0].epoch == 0);
    CHECK(result.log.rows[0].l_total == 0.0);
    CHECK(result.log.rows[0].map > 0.0);
    for (int e = 0; e <= 2; ++e) {
        CHECK(result.log.rows[e].epoch == e);
        CHECK(result.log.best_teacher[e].first == e);
        CHECK(result.log.best_teacher[e].second == 0);
        CHECK(result.log.rows[e].map >= 0.0);
        CHECK(result.log.rows[e].map <= 1.0);
        CHECK(std::isfinite(result.log.rows[e].l_total));
    }
    CHECK(result.log.rows[1].l_ce > 0.0);
    CHECK(final_best_map(result.log) == result.log.rows[2].map);

    AdaptResult again = train(cfg, pretrained, target);
    CHECK(metric_log_csv(again.log) == metric_log_csv(result.log));
    CHECK(param_distance(again.pairs[0].teacher, result.pairs[0].teacher) == 0.0);
}

TEST_CASE("two pairs share epoch losses but evaluate separately") {
    SyntheticDataset target = make_target(6, 2, 4, 61);
    Rng rng(29);
    std::vector<Model> pretrained = {random_model(12, {16}, 8, 4, rng), random_model(12, {20}, 8, 4, rng)};
    TrainConfig cfg = tiny_config();
    cfg.epochs = 1;

    AdaptResult result = train(cfg, pretrained, target);
    REQUIRE(result.pairs.size() == 2u);
    REQUIRE(result.log.rows.size() == 4u);
    for (int e = 0; e <= 1; ++e) {
        const MetricRow& a = result.log.rows[2 * e];
        const MetricRow& b = result.log.rows[2 * e + 1];
        CHECK(a.epoch == e);
        CHECK(b.epoch == e);
        CHECK(a.teacher_idx == 0);
        CHECK(b.teacher_idx == 1);
        CHECK(a.l_total == b.l_total);
        CHECK(a.l_ce == b.l_ce);
        const int best = result.log.best_teacher[e].second;
        const double best_map = std::max(a.map, b.map);
        CHECK((best == 0 || best == 1));
        CHECK(result.log.rows[2 * e + best].map == best_map);
    }
}

TEST_CASE("adaptation without eval splits logs zero metrics") {
    SyntheticDataset target = make_target(6, 2, 4, 71, false);
    Rng rng(31);
    std::vector<Model> pretrained = {random_model(12, {16}, 8, 4, rng)};
    TrainConfig cfg = tiny_config();
    cfg.epochs = 1;

    AdaptResult result = train(cfg, pretrained, target);
    for (const auto& row : result.log.rows) {
        CHECK(row.map == 0.0);
        CHECK(row.rank1 == 0.0);
    }
    CHECK(result.log.rows[1].l_total != 0.0);
}
