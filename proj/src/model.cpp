#include "gcmt/model.hpp"

#include <cmath>

#include "gcmt/errors.hpp"
#include "gcmt/numeric.hpp"

namespace gcmt {

void Encoder::validate() const {
    if (layers.empty()) throw ValidationError("encoder has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.cols()) {
            throw ValidationError("encoder layer " + std::to_string(l) + " bias shape " + layer.bias.shape_str() +
                                  " does not match weight " + layer.weight.shape_str());
        }
        if (l > 0 && layers[l - 1].weight.cols() != layer.weight.rows()) {
            throw ValidationError("encoder layer " + std::to_string(l) + " input width " +
                                  std::to_string(layer.weight.rows()) + " does not chain from previous output " +
                                  std::to_string(layers[l - 1].weight.cols()));
        }
    }
}

Encoder make_encoder(int input_dim, const std::vector<int>& hidden_dims, int feature_dim, Rng& rng) {
    std::vector<int> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(feature_dim);
    Encoder enc;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        layer.weight = Matrix(dims[l], dims[l + 1]);
        const double sigma = 1.0 / std::sqrt(static_cast<double>(dims[l]));
        for (double& v : layer.weight.data()) v = sigma * rng.gaussian();
        layer.bias = Matrix(1, dims[l + 1]);
        enc.layers.push_back(std::move(layer));
    }
    enc.validate();
    return enc;
}

static Matrix affine(const Matrix& x, const DenseLayer& layer) {
    Matrix z = matmul(x, layer.weight);
    for (int i = 0; i < z.rows(); ++i) {
        for (int j = 0; j < z.cols(); ++j) z(i, j) += layer.bias(0, j);
    }
    return z;
}

ForwardCache forward_features_cached(const Encoder& enc, const Matrix& batch) {
    enc.validate();
    if (batch.cols() != enc.input_dim()) {
        throw DimensionError("encoder input width mismatch: batch " + batch.shape_str() + " vs expected cols " +
                             std::to_string(enc.input_dim()));
    }
    ForwardCache cache;
    Matrix x = batch;
    for (std::size_t l = 0; l < enc.layers.size(); ++l) {
        cache.layer_inputs.push_back(x);
        Matrix z = affine(x, enc.layers[l]);
        if (l + 1 < enc.layers.size()) {
            for (double& v : z.data()) v = std::tanh(v);
        }
        x = std::move(z);
    }
    cache.prenorm = x;
    cache.features = l2_normalize_rows(cache.prenorm, cache.row_norms);
    return cache;
}

Matrix forward_features(const Encoder& enc, const Matrix& batch) {
    return forward_features_cached(enc, batch).features;
}

Matrix class_probabilities(const ClassifierHead& head, const Matrix& features) {
    if (features.cols() != head.feature_dim()) {
        throw DimensionError("head feature width mismatch: features " + features.shape_str() + " vs head " +
                             head.weight.shape_str());
    }
    return row_softmax(matmul(features, head.weight), 1.0);
}

EncoderGrads encoder_backward(const Encoder& enc, const ForwardCache& cache, const Matrix& dfeatures) {
    if (!dfeatures.same_shape(cache.features)) {
        throw DimensionError("encoder_backward gradient shape " + dfeatures.shape_str() + " vs features " +
                             cache.features.shape_str());
    }
    const int B = dfeatures.rows();
    const int d = dfeatures.cols();

    // Through f = x / max(||x||, guard). On the guard branch the denominator
    // is constant.
    Matrix delta(B, d);
    for (int i = 0; i < B; ++i) {
        const double n = cache.row_norms[i];
        const double* f = cache.features.row(i);
        const double* g = dfeatures.row(i);
        double fg = 0.0;
        for (int j = 0; j < d; ++j) fg += f[j] * g[j];
        double* o = delta.row(i);
        if (n > kNormGuard) {
            for (int j = 0; j < d; ++j) o[j] = (g[j] - f[j] * fg) / n;
        } else {
            for (int j = 0; j < d; ++j) o[j] = g[j] / kNormGuard;
        }
    }

    EncoderGrads grads;
    grads.layers.resize(enc.layers.size());
    for (int l = static_cast<int>(enc.layers.size()) - 1; l >= 0; --l) {
        Matrix dz = std::move(delta);
        if (l + 1 < static_cast<int>(enc.layers.size())) {
            // Activation output of layer l is the input cached for layer l+1.
            const Matrix& act = cache.layer_inputs[l + 1];
            for (std::size_t i = 0; i < dz.size(); ++i) {
                const double a = act.data()[i];
                dz.data()[i] *= 1.0 - a * a;
            }
        }
        grads.layers[l].weight = matmul(transpose(cache.layer_inputs[l]), dz);
        grads.layers[l].bias = col_sums(dz);
        if (l > 0) delta = matmul(dz, transpose(enc.layers[l].weight));
    }
    return grads;
}

static void ema_blend(Matrix& teacher, const Matrix& student, double decay) {
    if (!teacher.same_shape(student)) {
        throw Error("ema_update parameter shape mismatch: " + teacher.shape_str() + " vs " + student.shape_str());
    }
    for (std::size_t i = 0; i < teacher.size(); ++i) {
        teacher.data()[i] = decay * teacher.data()[i] + (1.0 - decay) * student.data()[i];
    }
}

void ema_update(NetworkPair& pair) {
    if (pair.student.encoder.layers.size() != pair.teacher.encoder.layers.size()) {
        throw Error("ema_update layer count mismatch");
    }
    for (std::size_t l = 0; l < pair.student.encoder.layers.size(); ++l) {
        ema_blend(pair.teacher.encoder.layers[l].weight, pair.student.encoder.layers[l].weight, pair.ema_decay);
        ema_blend(pair.teacher.encoder.layers[l].bias, pair.student.encoder.layers[l].bias, pair.ema_decay);
    }
    ema_blend(pair.teacher.head.weight, pair.student.head.weight, pair.ema_decay);
}

void reinit_head(NetworkPair& pair, const Matrix& cluster_means) {
    for (int c = 0; c < cluster_means.rows(); ++c) {
        double sq = 0.0;
        for (int j = 0; j < cluster_means.cols(); ++j) sq += cluster_means(c, j) * cluster_means(c, j);
        if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
            throw ValidationError("reinit_head: cluster mean row " + std::to_string(c) + " is not unit-norm");
        }
    }
    Matrix w = transpose(cluster_means);
    pair.student.head.weight = w;
    pair.teacher.head.weight = std::move(w);
}

void for_each_param(Model& model, const std::function<void(const std::string&, Matrix&)>& fn) {
    for (std::size_t l = 0; l < model.encoder.layers.size(); ++l) {
        fn("encoder.l" + std::to_string(l) + ".weight", model.encoder.layers[l].weight);
        fn("encoder.l" + std::to_string(l) + ".bias", model.encoder.layers[l].bias);
    }
    fn("head.weight", model.head.weight);
}

void for_each_param(const Model& model, const std::function<void(const std::string&, const Matrix&)>& fn) {
    for (std::size_t l = 0; l < model.encoder.layers.size(); ++l) {
        fn("encoder.l" + std::to_string(l) + ".weight", model.encoder.layers[l].weight);
        fn("encoder.l" + std::to_string(l) + ".bias", model.encoder.layers[l].bias);
    }
    fn("head.weight", model.head.weight);
}

}  // namespace gcmt
