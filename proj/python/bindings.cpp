// Python bindings for the gcmt core. Matrices cross the boundary as nested
// lists of floats; graphs as per-row lists of (neighbor, weight) pairs.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "gcmt/cluster.hpp"
#include "gcmt/errors.hpp"
#include "gcmt/evalkit.hpp"
#include "gcmt/graphs.hpp"
#include "gcmt/losses.hpp"
#include "gcmt/matrix.hpp"
#include "gcmt/model.hpp"
#include "gcmt/numeric.hpp"
#include "gcmt/rng.hpp"
#include "gcmt/synthdata.hpp"

namespace py = pybind11;

namespace {

using Rows = std::vector<std::vector<double>>;

gcmt::Matrix to_matrix(const Rows& rows) {
  if (rows.empty()) throw gcmt::SizeError("matrix: no rows");
  int cols = static_cast<int>(rows[0].size());
  gcmt::Matrix m(static_cast<int>(rows.size()), cols);
  for (int i = 0; i < m.rows(); ++i) {
    if (static_cast<int>(rows[i].size()) != cols)
      throw gcmt::DimensionError("matrix: ragged rows");
    for (int j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Rows from_matrix(const gcmt::Matrix& m) {
  Rows rows(m.rows(), std::vector<double>(m.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
  return rows;
}

using EdgeList = std::vector<std::vector<std::pair<int, double>>>;

EdgeList from_graph(const gcmt::SparseRowGraph& g) {
  EdgeList out(g.rows.size());
  for (size_t i = 0; i < g.rows.size(); ++i)
    for (const auto& e : g.rows[i]) out[i].emplace_back(e.neighbor, e.weight);
  return out;
}

gcmt::SparseRowGraph fused_from_features(const std::vector<Rows>& features,
                                         int k) {
  std::vector<gcmt::SparseRowGraph> graphs;
  graphs.reserve(features.size());
  for (const auto& f : features)
    graphs.push_back(
        gcmt::normalize_teacher_graph(gcmt::build_teacher_graph(to_matrix(f), k)));
  return gcmt::fuse_teacher_graphs(graphs);
}

}  // namespace

PYBIND11_MODULE(_gcmt, m) {
  m.doc() = "Graph-consistency mean teaching core operations";

  py::register_exception<gcmt::Error>(m, "GcmtError", PyExc_ValueError);

  m.def("derive_seed", &gcmt::Rng::derive, py::arg("master"), py::arg("tag"),
        "Derive a named stream seed from a master seed.");

  m.def(
      "l2_normalize_rows",
      [](const Rows& rows) { return from_matrix(gcmt::l2_normalize_rows(to_matrix(rows))); },
      py::arg("rows"));

  m.def(
      "row_softmax",
      [](const Rows& rows, double temperature) {
        return from_matrix(gcmt::row_softmax(to_matrix(rows), temperature));
      },
      py::arg("rows"), py::arg("temperature") = 1.0);

  m.def(
      "teacher_graph",
      [](const Rows& features, int k) {
        return from_graph(gcmt::build_teacher_graph(to_matrix(features), k));
      },
      py::arg("features"), py::arg("k"),
      "K nearest neighbors per row with raw similarity weights.");

  m.def(
      "normalized_teacher_graph",
      [](const Rows& features, int k) {
        return from_graph(gcmt::normalize_teacher_graph(
            gcmt::build_teacher_graph(to_matrix(features), k)));
      },
      py::arg("features"), py::arg("k"),
      "Teacher graph with softmax weights over each row's support.");

  m.def(
      "fused_teacher_graph",
      [](const std::vector<Rows>& features, int k) {
        return from_graph(fused_from_features(features, k));
      },
      py::arg("features_per_teacher"), py::arg("k"),
      "Average of normalized teacher graphs over the union support.");

  m.def(
      "student_graph",
      [](const Rows& features, double beta) {
        return from_matrix(gcmt::build_student_graph(to_matrix(features), beta).weights);
      },
      py::arg("features"), py::arg("beta"),
      "Dense off-diagonal softmax graph at temperature beta.");

  m.def(
      "ce_loss",
      [](const Rows& probabilities, const std::vector<int>& labels) {
        auto r = gcmt::ce_loss(to_matrix(probabilities), labels);
        return py::make_tuple(r.value, from_matrix(r.dlogits));
      },
      py::arg("probabilities"), py::arg("labels"),
      "Mean cross entropy and its logit gradient.");

  m.def(
      "mce_loss",
      [](const std::vector<Rows>& student_probs,
         const std::vector<Rows>& teacher_probs) {
        std::vector<gcmt::Matrix> sp, tp;
        for (const auto& r : student_probs) sp.push_back(to_matrix(r));
        for (const auto& r : teacher_probs) tp.push_back(to_matrix(r));
        auto res = gcmt::mce_loss(sp, tp);
        std::vector<Rows> grads;
        for (const auto& g : res.dlogits) grads.push_back(from_matrix(g));
        return py::make_tuple(res.value, grads);
      },
      py::arg("student_probs"), py::arg("teacher_probs"),
      "Soft cross entropy against the mean teacher distribution.");

  m.def(
      "gcc_loss",
      [](const std::vector<Rows>& student_features,
         const std::vector<Rows>& teacher_features, int k, double beta) {
        auto fused = fused_from_features(teacher_features, k);
        std::vector<gcmt::DenseRowStochastic> student_graphs;
        for (const auto& f : student_features)
          student_graphs.push_back(gcmt::build_student_graph(to_matrix(f), beta));
        auto res = gcmt::gcc_loss(student_graphs, fused, k);
        std::vector<Rows> grads;
        for (const auto& g : res.dfeatures) grads.push_back(from_matrix(g));
        return py::make_tuple(res.value, grads);
      },
      py::arg("student_features"), py::arg("teacher_features"), py::arg("k"),
      py::arg("beta"),
      "Graph consistency loss and feature gradients, graphs built internally.");

  m.def(
      "kmeans",
      [](const Rows& features, int c, int max_iters, unsigned long long seed) {
        auto r = gcmt::kmeans(to_matrix(features), c, max_iters, seed);
        return py::make_tuple(r.assignments, from_matrix(r.cluster_means), r.inertia);
      },
      py::arg("features"), py::arg("c"), py::arg("max_iters") = 100,
      py::arg("seed") = 0,
      "Deterministic k-means; returns (assignments, unit means, inertia).");

  m.def(
      "evaluate",
      [](const Rows& query_features, const std::vector<int>& query_ids,
         const std::vector<int>& query_cams, const Rows& gallery_features,
         const std::vector<int>& gallery_ids,
         const std::vector<int>& gallery_cams) {
        gcmt::RetrievalSet q{to_matrix(query_features), query_ids, query_cams};
        gcmt::RetrievalSet g{to_matrix(gallery_features), gallery_ids,
                             gallery_cams};
        auto r = gcmt::evaluate(q, g);
        py::dict d;
        d["map"] = r.map;
        d["cmc"] = r.cmc;
        d["queries"] = r.query_count;
        d["excluded"] = r.excluded;
        return d;
      },
      py::arg("query_features"), py::arg("query_ids"), py::arg("query_cams"),
      py::arg("gallery_features"), py::arg("gallery_ids"),
      py::arg("gallery_cams"),
      "Retrieval mAP and CMC with same-id same-camera exclusion.");

  m.def(
      "write_domain_csv",
      [](const std::string& path, int domain_id, int identities, int cameras,
         int images_per_identity_per_camera, int latent_dim, int input_dim,
         double noise_sigma, unsigned long long master_seed) {
        auto spec = gcmt::make_domain_spec(domain_id, identities, cameras,
                                           images_per_identity_per_camera,
                                           latent_dim, input_dim, noise_sigma,
                                           master_seed);
        auto ds = gcmt::generate_domain(spec);
        gcmt::write_dataset(ds, path);
        return static_cast<int>(ds.samples.size());
      },
      py::arg("path"), py::arg("domain_id"), py::arg("identities"),
      py::arg("cameras"), py::arg("images_per_identity_per_camera"),
      py::arg("latent_dim"), py::arg("input_dim"), py::arg("noise_sigma"),
      py::arg("master_seed"),
      "Generate one synthetic domain and write it as CSV; returns sample count.");

  m.def(
      "read_dataset_csv",
      [](const std::string& path) {
        auto ds = gcmt::read_dataset(path);
        py::list out;
        for (const auto& s : ds.samples)
          out.append(py::make_tuple(s.identity, s.camera, s.domain,
                                    gcmt::split_to_string(s.split), s.vec));
        return out;
      },
      py::arg("path"),
      "Read a dataset CSV; returns (id, camera, domain, split, vec) tuples.");
}
