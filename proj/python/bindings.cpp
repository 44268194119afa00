#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "feddiv/classifier.hpp"
#include "feddiv/config.hpp"
#include "feddiv/dataset.hpp"
#include "feddiv/noise_filter.hpp"
#include "feddiv/orchestrator.hpp"
#include "feddiv/pcs.hpp"
#include "feddiv/run_log.hpp"

namespace py = pybind11;
using namespace feddiv;

namespace {

py::tuple blobs(std::size_t n, int classes, int dim, double separation, std::uint64_t seed, double cluster_std) {
  RngStream rng = RngStream(seed).fork(Purpose::kDataset);
  auto sample = make_blobs_with_centers(n, classes, dim, separation, rng, cluster_std);
  Matrix x(static_cast<Eigen::Index>(n), dim);
  Eigen::VectorXi y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    x.row(static_cast<Eigen::Index>(i)) = sample.data.features[i].transpose();
    y[static_cast<Eigen::Index>(i)] = sample.data.true_labels[i];
  }
  Matrix centers(classes, dim);
  for (int c = 0; c < classes; ++c) centers.row(c) = sample.centers[c].transpose();
  return py::make_tuple(x, y, centers);
}

GmmParams aggregate(const std::vector<GmmParams>& filters, const std::vector<std::size_t>& sizes) {
  if (filters.size() != sizes.size()) throw std::invalid_argument("aggregate_filters: need one size per filter");
  FilterBank bank;
  for (std::size_t k = 0; k < filters.size(); ++k) bank.entries.push_back({filters[k], sizes[k], 0});
  return aggregate_filters(bank);
}

// Runs one experiment from a JSON config string; returns the summary
// document plus the per-round accuracy curve as a JSON string.
std::string run_json(const std::string& config_text) {
  const RunConfig config = config_from_json(nlohmann::json::parse(config_text));
  config.validate();
  ExperimentResult result;
  {
    py::gil_scoped_release release;
    result = run_experiment(config);
  }
  auto doc = summary_document(config, result.summary);
  nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
  for (const auto& r : result.rounds) {
    nlohmann::ordered_json e;
    e["round"] = r.round;
    e["phase"] = r.phase;
    e["test_accuracy"] = r.test_accuracy;
    e["training_stability"] = r.training_stability;
    const auto f = r.mean_filtering_accuracy();
    e["mean_filtering_accuracy"] = f ? nlohmann::ordered_json(*f) : nlohmann::ordered_json(nullptr);
    rounds.push_back(e);
  }
  doc["rounds"] = rounds;
  return doc.dump();
}

std::string default_config_json() { return to_json(RunConfig{}).dump(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "FedDiv federated noisy-label simulator core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("make_blobs", &blobs, py::arg("n"), py::arg("num_classes"), py::arg("dim"), py::arg("separation"),
        py::arg("seed") = 1, py::arg("cluster_std") = 1.0,
        "Gaussian blobs; returns (features, labels, centers).");

  py::class_<GmmParams>(m, "GmmParams")
      .def(py::init<>())
      .def(py::init([](std::array<double, 2> mean, std::array<double, 2> variance, std::array<double, 2> weight) {
             GmmParams p;
             p.mean = mean;
             p.variance = variance;
             p.weight = weight;
             return p;
           }),
           py::arg("mean"), py::arg("variance"), py::arg("weight"))
      .def_readwrite("mean", &GmmParams::mean)
      .def_readwrite("variance", &GmmParams::variance)
      .def_readwrite("weight", &GmmParams::weight)
      .def("validate", &GmmParams::validate)
      .def("log_likelihood", &GmmParams::log_likelihood, py::arg("losses"))
      .def_static("cold_start", &GmmParams::cold_start, py::arg("num_classes"))
      .def("__repr__", [](const GmmParams& p) {
        return "GmmParams(mean=(" + std::to_string(p.mean[0]) + ", " + std::to_string(p.mean[1]) + "), variance=(" +
               std::to_string(p.variance[0]) + ", " + std::to_string(p.variance[1]) + "), weight=(" +
               std::to_string(p.weight[0]) + ", " + std::to_string(p.weight[1]) + "))";
      });

  py::class_<GmmFit>(m, "GmmFit")
      .def_readonly("params", &GmmFit::params)
      .def_readonly("iterations", &GmmFit::iterations)
      .def_readonly("degenerate", &GmmFit::degenerate)
      .def_readonly("converged", &GmmFit::converged)
      .def_readonly("log_likelihood", &GmmFit::log_likelihood);

  m.def("fit_local_gmm", &fit_local_gmm, py::arg("losses"), py::arg("init"), py::arg("max_iters") = 100,
        py::arg("tolerance") = 1e-6);
  m.def("gmm_posterior_clean", &gmm_posterior_clean, py::arg("loss"), py::arg("filter"));
  m.def("aggregate_filters", &aggregate, py::arg("filters"), py::arg("sizes"),
        "Sample-count weighted average of two-component filters.");

  py::class_<ModelParams>(m, "Model")
      .def_property_readonly("input_dim", &ModelParams::input_dim)
      .def_property_readonly("num_classes", &ModelParams::num_classes)
      .def_property_readonly("num_parameters", &ModelParams::num_parameters)
      .def("flatten", &ModelParams::flatten)
      .def("assign_flat", &ModelParams::assign_flat, py::arg("flat"))
      .def("logits", [](const ModelParams& p, const Vector& x) { return forward_logits(p, x); }, py::arg("x"))
      .def("predict_proba", [](const ModelParams& p, const Vector& x) { return predict_proba(p, x); }, py::arg("x"));

  m.def(
      "init_model",
      [](int input_dim, const std::vector<int>& hidden, int num_classes, std::uint64_t seed) {
        RngStream rng = RngStream(seed).fork(Purpose::kModelInit);
        return init_params(input_dim, hidden, num_classes, rng);
      },
      py::arg("input_dim"), py::arg("hidden_sizes"), py::arg("num_classes"), py::arg("seed") = 1);
  m.def("fedavg_aggregate", &fedavg_aggregate, py::arg("models"), py::arg("weights"));
  m.def("training_stability", &training_stability, py::arg("local_models"), py::arg("global_model"));
  m.def("softmax", &softmax, py::arg("logits"));
  m.def(
      "debias_logits",
      [](const Vector& logits, const Vector& bias, double xi) { return debias_logits(logits, ClientBias{bias}, xi); },
      py::arg("logits"), py::arg("bias"), py::arg("xi"));

  m.def("_run_experiment_json", &run_json, py::arg("config_json"));
  m.def("_default_config_json", &default_config_json);
}
