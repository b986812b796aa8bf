#include "gcmt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gcmt/errors.hpp"
#include "gcmt/graphs.hpp"
#include "gcmt/numeric.hpp"

namespace gcmt {

void TrainConfig::validate() const {
    if (epochs < 0) throw ParameterError("epochs must be non-negative");
    if (iters_per_epoch < 1) throw ParameterError("iters_per_epoch must be positive");
    if (batch_identities < 1 || images_per_identity < 1 || batch_size() < 2) {
        throw ParameterError("batch layout " + std::to_string(batch_identities) + "x" +
                             std::to_string(images_per_identity) + " must give a batch of at least 2");
    }
    if (cluster_count < 1) throw ParameterError("cluster_count must be positive");
    if (knn_k < 1) throw ParameterError("knn_k must be positive");
    if (beta <= 0.0) throw ParameterError("beta must be positive");
    if (lambda_gcc < 0.0) throw ParameterError("lambda_gcc must be non-negative");
    if (ema_decay < 0.0 || ema_decay >= 1.0) throw ParameterError("ema_decay must lie in [0, 1)");
    if (learning_rate <= 0.0) throw ParameterError("learning_rate must be positive");
    if (lr_decay_factor <= 0.0) throw ParameterError("lr_decay_factor must be positive");
    if (lr_decay_epoch < 0) throw ParameterError("lr_decay_epoch must be non-negative");
    if (aug_noise_sigma < 0.0) throw ParameterError("aug_noise_sigma must be non-negative");
    if (aug_drop_prob < 0.0 || aug_drop_prob >= 1.0) throw ParameterError("aug_drop_prob must lie in [0, 1)");
    if (kmeans_iters < 1) throw ParameterError("kmeans_iters must be positive");
}

void PretrainConfig::validate() const {
    if (feature_dim < 1) throw ParameterError("feature_dim must be positive");
    if (epochs < 0) throw ParameterError("epochs must be non-negative");
    if (batch_size < 1) throw ParameterError("batch_size must be positive");
    if (learning_rate <= 0.0) throw ParameterError("learning_rate must be positive");
    for (int h : hidden_dims) {
        if (h < 1) throw ParameterError("hidden layer widths must be positive");
    }
}

std::string metric_log_csv(const MetricLog& log) {
    std::string out = "epoch,l_ce,l_mce,l_gcc,l_total,teacher_idx,map,rank1,rank5,rank10\n";
    char line[256];
    for (const auto& r : log.rows) {
        std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g,%d,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.l_ce,
                      r.l_mce, r.l_gcc, r.l_total, r.teacher_idx, r.map, r.rank1, r.rank5, r.rank10);
        out += line;
    }
    return out;
}

double final_best_map(const MetricLog& log) {
    if (log.rows.empty()) {
        throw StateError("metric log is empty");
    }
    const int last_epoch = log.rows.back().epoch;
    double best = 0.0;
    for (const auto& r : log.rows) {
        if (r.epoch == last_epoch) best = std::max(best, r.map);
    }
    return best;
}

namespace {

double effective_lr(const TrainConfig& config, int epoch) {
    return epoch > config.lr_decay_epoch ? config.learning_rate * config.lr_decay_factor : config.learning_rate;
}

void adam_param_step(std::map<std::string, AdamState>& states, const std::string& name, Matrix& param,
                     const Matrix& grad, double lr) {
    AdamState& st = states[name];
    st.learning_rate = lr;
    adam_step_inplace(st, param, grad);
}

void step_student(Model& student, std::map<std::string, AdamState>& states, const EncoderGrads& enc_grads,
                  const Matrix& head_grad, double lr) {
    for (std::size_t l = 0; l < student.encoder.layers.size(); ++l) {
        const std::string base = "encoder.l" + std::to_string(l);
        adam_param_step(states, base + ".weight", student.encoder.layers[l].weight, enc_grads.layers[l].weight, lr);
        adam_param_step(states, base + ".bias", student.encoder.layers[l].bias, enc_grads.layers[l].bias, lr);
    }
    adam_param_step(states, "head.weight", student.head.weight, head_grad, lr);
}

double cmc_at(const EvalResult& r, int k) {
    if (r.cmc.empty()) return 0.0;
    const int idx = std::min<int>(k, static_cast<int>(r.cmc.size()) - 1);
    return r.cmc[idx];
}

std::string batch_diagnostic(const std::vector<int>& batch, const TrainState& state) {
    std::string msg = "epoch " + std::to_string(state.epoch) + ", iteration " + std::to_string(state.iteration) +
                      ", batch indices:";
    for (int idx : batch) {
        msg += " " + std::to_string(idx);
    }
    return msg;
}

}  // namespace

Model pretrain_source(const SyntheticDataset& source, const PretrainConfig& cfg) {
    cfg.validate();
    const SplitView view = gather_split(source, Split::Train);
    const int n = view.inputs.rows();
    if (n < 1) {
        throw SizeError("source dataset has no train samples");
    }
    int class_count = 0;
    for (int id : view.identities) {
        if (id < 0) throw ValidationError("negative identity label " + std::to_string(id));
        class_count = std::max(class_count, id + 1);
    }

    Rng rng(cfg.seed);
    Model model;
    model.encoder = make_encoder(source.input_dim, cfg.hidden_dims, cfg.feature_dim, rng);
    model.head.weight = Matrix(cfg.feature_dim, class_count);
    const double head_scale = 1.0 / std::sqrt(static_cast<double>(cfg.feature_dim));
    for (std::size_t i = 0; i < model.head.weight.size(); ++i) {
        model.head.weight.data()[i] = rng.gaussian() * head_scale;
    }

    std::map<std::string, AdamState> adam;
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int bsz = std::min(cfg.batch_size, n - start);
            Matrix batch(bsz, source.input_dim);
            std::vector<int> labels(bsz);
            for (int r = 0; r < bsz; ++r) {
                const int src = order[start + r];
                for (int d = 0; d < source.input_dim; ++d) {
                    batch(r, d) = view.inputs(src, d);
                }
                labels[r] = view.identities[src];
            }

            const ForwardCache cache = forward_features_cached(model.encoder, batch);
            const Matrix probs = class_probabilities(model.head, cache.features);
            const CeResult ce = ce_loss(probs, labels);

            const Matrix head_grad = matmul(transpose(cache.features), ce.dlogits);
            const Matrix dfeatures = matmul(ce.dlogits, transpose(model.head.weight));
            const EncoderGrads enc_grads = encoder_backward(model.encoder, cache, dfeatures);
            step_student(model, adam, enc_grads, head_grad, cfg.learning_rate);
        }
    }
    return model;
}

std::vector<int> pk_sample(const PseudoLabeling& labeling, int p, int k_img, Rng& rng) {
    if (p < 1 || k_img < 1) {
        throw ParameterError("batch layout must be positive, got " + std::to_string(p) + "x" +
                             std::to_string(k_img));
    }
    if (labeling.assignments.empty() || labeling.cluster_means.rows() < 1) {
        throw StateError("cannot sample from an empty labeling");
    }
    const int c = labeling.cluster_means.rows();
    std::vector<std::vector<int>> members(c);
    for (std::size_t i = 0; i < labeling.assignments.size(); ++i) {
        const int a = labeling.assignments[i];
        if (a < 0 || a >= c) {
            throw IndexError("assignment " + std::to_string(a) + " outside [0, " + std::to_string(c) + ")");
        }
        members[a].push_back(static_cast<int>(i));
    }
    std::vector<int> non_empty;
    for (int k = 0; k < c; ++k) {
        if (!members[k].empty()) non_empty.push_back(k);
    }

    std::vector<int> chosen;
    if (static_cast<int>(non_empty.size()) >= p) {
        for (int pos : rng.sample_without_replacement(static_cast<int>(non_empty.size()), p)) {
            chosen.push_back(non_empty[pos]);
        }
    } else {
        for (int i = 0; i < p; ++i) {
            chosen.push_back(non_empty[rng.below(non_empty.size())]);
        }
    }

    std::vector<int> batch;
    batch.reserve(static_cast<std::size_t>(p) * k_img);
    for (int cluster : chosen) {
        const auto& pool = members[cluster];
        const int sz = static_cast<int>(pool.size());
        if (sz >= k_img) {
            for (int pos : rng.sample_without_replacement(sz, k_img)) {
                batch.push_back(pool[pos]);
            }
        } else {
            for (int i = 0; i < k_img; ++i) {
                batch.push_back(pool[rng.below(static_cast<std::uint64_t>(sz))]);
            }
        }
    }
    return batch;
}

Matrix augment(const Matrix& batch, double sigma, double drop_prob, Rng& rng) {
    if (sigma < 0.0) {
        throw ParameterError("noise sigma must be non-negative, got " + std::to_string(sigma));
    }
    if (drop_prob < 0.0 || drop_prob >= 1.0) {
        throw ParameterError("drop probability must lie in [0, 1), got " + std::to_string(drop_prob));
    }
    Matrix out = batch;
    if (sigma > 0.0) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.data()[i] += rng.gaussian() * sigma;
        }
    }
    if (drop_prob > 0.0) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (rng.uniform() < drop_prob) out.data()[i] = 0.0;
        }
    }
    return out;
}

RetrievalSet extract_retrieval_set(const Model& model, const SyntheticDataset& ds, Split split) {
    SplitView view = gather_split(ds, split);
    RetrievalSet set;
    set.features = forward_features(model.encoder, view.inputs);
    set.identities = std::move(view.identities);
    set.cameras = std::move(view.cameras);
    return set;
}

TrainState init_train_state(const TrainConfig& config, const std::vector<Model>& pretrained,
                            const SyntheticDataset& target) {
    config.validate();
    if (pretrained.empty()) {
        throw ParameterError("need at least one pretrained model");
    }
    const int input_dim = pretrained[0].encoder.input_dim();
    const int feature_dim = pretrained[0].encoder.feature_dim();
    for (const auto& model : pretrained) {
        model.encoder.validate();
        if (model.encoder.input_dim() != input_dim || model.encoder.feature_dim() != feature_dim) {
            throw DimensionError("pretrained encoder shapes differ");
        }
    }
    if (input_dim != target.input_dim) {
        throw DimensionError("encoder expects width " + std::to_string(input_dim) + " but dataset has " +
                             std::to_string(target.input_dim));
    }

    TrainState state;
    for (std::size_t j = 0; j < pretrained.size(); ++j) {
        NetworkPair pair;
        pair.student = pretrained[j];
        pair.teacher = pretrained[j];
        pair.ema_decay = config.ema_decay;
        pair.pair_id = static_cast<int>(j);
        state.pairs.push_back(std::move(pair));
    }
    state.adam.resize(pretrained.size());
    state.rng = Rng(Rng::derive(config.seed, "trainer"));
    state.train_inputs = gather_split(target, Split::Train).inputs;
    if (state.train_inputs.rows() < 1) {
        throw SizeError("target dataset has no train samples");
    }
    return state;
}

LossReport train_iteration(TrainState& state, const TrainConfig& config) {
    if (state.labeling.assignments.empty()) {
        throw StateError("no pseudo labeling; relabel before iterating");
    }
    const int m = static_cast<int>(state.pairs.size());
    const int b = config.batch_size();
    const int k_eff = std::min(config.knn_k, b - 1);
    const double lr = effective_lr(config, state.epoch);
    const int input_dim = state.train_inputs.cols();

    const std::vector<int> batch_indices =
        pk_sample(state.labeling, config.batch_identities, config.images_per_identity, state.rng);
    Matrix batch(b, input_dim);
    std::vector<int> pseudo(b);
    for (int r = 0; r < b; ++r) {
        const int src = batch_indices[r];
        for (int d = 0; d < input_dim; ++d) {
            batch(r, d) = state.train_inputs(src, d);
        }
        pseudo[r] = state.labeling.assignments[src];
    }

    std::vector<Matrix> teacher_features(m);
    std::vector<Matrix> teacher_probs(m);
    std::vector<ForwardCache> student_caches(m);
    std::vector<Matrix> student_probs(m);
    for (int j = 0; j < m; ++j) {
        const NetworkPair& pair = state.pairs[j];
        const Matrix teacher_view = augment(batch, config.aug_noise_sigma, config.aug_drop_prob, state.rng);
        const Matrix student_view = augment(batch, config.aug_noise_sigma, config.aug_drop_prob, state.rng);
        teacher_features[j] = forward_features(pair.teacher.encoder, teacher_view);
        teacher_probs[j] = class_probabilities(pair.teacher.head, teacher_features[j]);
        student_caches[j] = forward_features_cached(pair.student.encoder, student_view);
        student_probs[j] = class_probabilities(pair.student.head, student_caches[j].features);
        if (!student_caches[j].features.all_finite()) {
            throw NumericError("student " + std::to_string(j) + " produced non-finite features; " +
                               batch_diagnostic(batch_indices, state));
        }
    }

    std::vector<SparseRowGraph> normalized;
    normalized.reserve(m);
    for (int j = 0; j < m; ++j) {
        normalized.push_back(normalize_teacher_graph(build_teacher_graph(teacher_features[j], k_eff)));
    }
    const SparseRowGraph fused = fuse_teacher_graphs(normalized);
    std::vector<DenseRowStochastic> student_graphs;
    student_graphs.reserve(m);
    for (int j = 0; j < m; ++j) {
        student_graphs.push_back(build_student_graph(student_caches[j].features, config.beta));
    }

    std::vector<CeResult> ce(m);
    double l_ce = 0.0;
    for (int j = 0; j < m; ++j) {
        ce[j] = ce_loss(student_probs[j], pseudo);
        l_ce += ce[j].value;
    }
    const MceResult mce = mce_loss(student_probs, teacher_probs);
    const GccResult gcc = gcc_loss(student_graphs, fused, k_eff);

    LossReport report;
    try {
        report = total_loss(l_ce, mce.value, gcc.value, config.lambda_gcc);
    } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + "; " + batch_diagnostic(batch_indices, state));
    }

    for (int j = 0; j < m; ++j) {
        NetworkPair& pair = state.pairs[j];
        Matrix dlogits = ce[j].dlogits;
        add_inplace(dlogits, mce.dlogits[j]);
        const Matrix head_grad = matmul(transpose(student_caches[j].features), dlogits);
        Matrix dfeatures = matmul(dlogits, transpose(pair.student.head.weight));
        add_inplace(dfeatures, scale(gcc.dfeatures[j], config.lambda_gcc));
        const EncoderGrads enc_grads = encoder_backward(pair.student.encoder, student_caches[j], dfeatures);
        step_student(pair.student, state.adam[j], enc_grads, head_grad, lr);
    }
    for (auto& pair : state.pairs) {
        ema_update(pair);
    }
    ++state.iteration;
    return report;
}

namespace {

void append_epoch_rows(MetricLog& log, int epoch, const LossReport& losses, const std::vector<EvalResult>& evals,
                       int m) {
    int best = 0;
    double best_map = -1.0;
    for (int j = 0; j < m; ++j) {
        MetricRow row;
        row.epoch = epoch;
        row.l_ce = losses.l_ce;
        row.l_mce = losses.l_mce;
        row.l_gcc = losses.l_gcc;
        row.l_total = losses.l_total;
        row.teacher_idx = j;
        if (!evals.empty()) {
            row.map = evals[j].map;
            row.rank1 = cmc_at(evals[j], 0);
            row.rank5 = cmc_at(evals[j], 4);
            row.rank10 = cmc_at(evals[j], 9);
        }
        if (row.map > best_map) {
            best_map = row.map;
            best = j;
        }
        log.rows.push_back(row);
    }
    log.best_teacher.emplace_back(epoch, best);
}

}  // namespace

AdaptResult train(const TrainConfig& config, const std::vector<Model>& pretrained, const SyntheticDataset& target) {
    TrainState state = init_train_state(config, pretrained, target);
    const int m = static_cast<int>(state.pairs.size());

    const SplitView query_view = gather_split(target, Split::Query);
    const SplitView gallery_view = gather_split(target, Split::Gallery);
    const bool eval_enabled = query_view.inputs.rows() > 0 && gallery_view.inputs.rows() > 0;

    const auto eval_teachers = [&]() {
        std::vector<EvalResult> evals;
        if (!eval_enabled) return evals;
        for (const auto& pair : state.pairs) {
            RetrievalSet query;
            query.features = forward_features(pair.teacher.encoder, query_view.inputs);
            query.identities = query_view.identities;
            query.cameras = query_view.cameras;
            RetrievalSet gallery;
            gallery.features = forward_features(pair.teacher.encoder, gallery_view.inputs);
            gallery.identities = gallery_view.identities;
            gallery.cameras = gallery_view.cameras;
            evals.push_back(evaluate(query, gallery));
        }
        return evals;
    };

    append_epoch_rows(state.log, 0, LossReport{}, eval_teachers(), m);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        state.epoch = epoch;
        const std::uint64_t relabel_seed = Rng::derive(config.seed, "relabel-" + std::to_string(epoch));
        state.labeling = relabel_epoch(state.pairs, state.train_inputs, config.cluster_count, config.kmeans_iters,
                                       relabel_seed, epoch);
        for (auto& adam : state.adam) {
            adam.erase("head.weight");
        }

        LossReport sums;
        for (int it = 0; it < config.iters_per_epoch; ++it) {
            const LossReport r = train_iteration(state, config);
            sums.l_ce += r.l_ce;
            sums.l_mce += r.l_mce;
            sums.l_gcc += r.l_gcc;
            sums.l_total += r.l_total;
        }
        const double inv = 1.0 / config.iters_per_epoch;
        LossReport avg;
        avg.l_ce = sums.l_ce * inv;
        avg.l_mce = sums.l_mce * inv;
        avg.l_gcc = sums.l_gcc * inv;
        avg.l_total = sums.l_total * inv;
        avg.lambda_gcc = config.lambda_gcc;

        append_epoch_rows(state.log, epoch, avg, eval_teachers(), m);
    }

    AdaptResult result;
    result.pairs = std::move(state.pairs);
    result.log = std::move(state.log);
    return result;
}

}  // namespace gcmt
