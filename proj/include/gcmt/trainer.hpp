#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gcmt/adam.hpp"
#include "gcmt/cluster.hpp"
#include "gcmt/evalkit.hpp"
#include "gcmt/losses.hpp"
#include "gcmt/matrix.hpp"
#include "gcmt/model.hpp"
#include "gcmt/rng.hpp"
#include "gcmt/synthdata.hpp"

namespace gcmt {

struct TrainConfig {
    int epochs = 20;
    int iters_per_epoch = 50;
    int batch_identities = 16;    // P
    int images_per_identity = 4;  // images drawn per chosen cluster
    int cluster_count = 100;
    int knn_k = 12;
    double beta = 0.05;
    double lambda_gcc = 0.6;
    double ema_decay = 0.999;
    double learning_rate = 0.00035;
    double lr_decay_factor = 0.1;
    int lr_decay_epoch = 20;
    double aug_noise_sigma = 0.05;
    double aug_drop_prob = 0.1;
    int kmeans_iters = 100;
    std::uint64_t seed = 42;

    int batch_size() const { return batch_identities * images_per_identity; }
    void validate() const;
};

struct PretrainConfig {
    std::vector<int> hidden_dims{64};
    int feature_dim = 16;
    int epochs = 15;
    int batch_size = 64;
    double learning_rate = 0.003;
    std::uint64_t seed = 42;

    void validate() const;
};

// One metric CSV row. Losses are epoch averages shared by the m rows of an
// epoch; map and ranks belong to one teacher.
struct MetricRow {
    int epoch = 0;
    double l_ce = 0.0;
    double l_mce = 0.0;
    double l_gcc = 0.0;
    double l_total = 0.0;
    int teacher_idx = 0;
    double map = 0.0;
    double rank1 = 0.0;
    double rank5 = 0.0;
    double rank10 = 0.0;
};

struct MetricLog {
    std::vector<MetricRow> rows;
    std::vector<std::pair<int, int>> best_teacher;  // (epoch, teacher with highest map)
};

std::string metric_log_csv(const MetricLog& log);

// Highest teacher map among the rows of the last logged epoch.
double final_best_map(const MetricLog& log);

struct TrainState {
    std::vector<NetworkPair> pairs;
    std::vector<std::map<std::string, AdamState>> adam;  // per student, by parameter name
    PseudoLabeling labeling;
    int epoch = 0;
    long long iteration = 0;
    Rng rng{0};
    MetricLog log;
    Matrix train_inputs;
};

struct AdaptResult {
    std::vector<NetworkPair> pairs;
    MetricLog log;
};

// Supervised CE training on the source train split with true identity labels.
Model pretrain_source(const SyntheticDataset& source, const PretrainConfig& cfg);

// P clusters, then images_per_identity members from each. Clusters are drawn
// without replacement while enough non-empty ones exist; members likewise.
std::vector<int> pk_sample(const PseudoLabeling& labeling, int p, int k_img, Rng& rng);

// Gaussian noise then independent coordinate dropout.
Matrix augment(const Matrix& batch, double sigma, double drop_prob, Rng& rng);

// Features with identity and camera labels for one dataset split.
RetrievalSet extract_retrieval_set(const Model& model, const SyntheticDataset& ds, Split split);

TrainState init_train_state(const TrainConfig& config, const std::vector<Model>& pretrained,
                            const SyntheticDataset& target);

// One mini-batch step: sample, augment per pair, forward both networks, fuse
// teacher graphs, compute the combined loss, Adam-step every student, then
// EMA-update every teacher.
LossReport train_iteration(TrainState& state, const TrainConfig& config);

// Full adaptation: per epoch, relabel with the teachers then run
// iters_per_epoch iterations and evaluate every teacher. Epoch 0 rows hold
// the source-only baseline.
AdaptResult train(const TrainConfig& config, const std::vector<Model>& pretrained, const SyntheticDataset& target);

}  // namespace gcmt
