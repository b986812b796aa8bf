#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gcmt/matrix.hpp"
#include "gcmt/rng.hpp"

namespace gcmt {

struct DenseLayer {
    Matrix weight;  // in x out
    Matrix bias;    // 1 x out
};

// Small MLP encoder: tanh on every layer but the last, then L2 row
// normalization of the output. Stands in for a conv backbone at desk scale.
struct Encoder {
    std::vector<DenseLayer> layers;

    int input_dim() const { return layers.empty() ? 0 : layers.front().weight.rows(); }
    int feature_dim() const { return layers.empty() ? 0 : layers.back().weight.cols(); }

    // Checks consecutive layer dimensions chain correctly.
    void validate() const;
};

Encoder make_encoder(int input_dim, const std::vector<int>& hidden_dims, int feature_dim, Rng& rng);

// Linear classifier head; column c holds the prototype for class c.
struct ClassifierHead {
    Matrix weight;  // feature_dim x C

    int class_count() const { return weight.cols(); }
    int feature_dim() const { return weight.rows(); }
};

struct Model {
    Encoder encoder;
    ClassifierHead head;
};

// Student/teacher pair; the teacher tracks the student by exponential moving
// average.
struct NetworkPair {
    Model student;
    Model teacher;
    double ema_decay = 0.999;
    int pair_id = 0;
};

// Intermediates retained by the forward pass for gradient computation.
struct ForwardCache {
    std::vector<Matrix> layer_inputs;  // input to each layer
    Matrix prenorm;                    // last-layer output before normalization
    std::vector<double> row_norms;     // clamped denominators
    Matrix features;                   // unit rows (up to the degenerate guard)
};

Matrix forward_features(const Encoder& enc, const Matrix& batch);
ForwardCache forward_features_cached(const Encoder& enc, const Matrix& batch);

// Class probabilities: softmax of features x head.weight at temperature 1.
Matrix class_probabilities(const ClassifierHead& head, const Matrix& features);

// Per-layer gradients, same shapes as the encoder parameters.
struct EncoderGrads {
    std::vector<DenseLayer> layers;
};

// Backpropagates a gradient w.r.t. the normalized features through the L2
// normalization, the linear layers and the tanh activations.
EncoderGrads encoder_backward(const Encoder& enc, const ForwardCache& cache, const Matrix& dfeatures);

// Teacher <- decay * teacher + (1 - decay) * student, across encoder and head.
// Never touches student parameters.
void ema_update(NetworkPair& pair);

// Replaces both heads with cluster_means transposed (column c = mean feature
// of cluster c). cluster_means must have unit rows.
void reinit_head(NetworkPair& pair, const Matrix& cluster_means);

// Enumerates every trainable parameter of a model in a fixed order with
// stable names ("encoder.l0.weight", ..., "head.weight").
void for_each_param(Model& model, const std::function<void(const std::string&, Matrix&)>& fn);
void for_each_param(const Model& model, const std::function<void(const std::string&, const Matrix&)>& fn);

}  // namespace gcmt
