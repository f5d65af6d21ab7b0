#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "confclust/conformal.hpp"
#include "confclust/evaluate.hpp"
#include "confclust/io.hpp"
#include "confclust/simulate.hpp"

namespace py = pybind11;
using namespace confclust;

namespace {

RandomSeed make_seed(std::uint64_t seed) { return {seed, 0}; }

std::vector<int> to_zero_based(const std::vector<int>& labels) {
    std::vector<int> out(labels);
    for (int& y : out) {
        if (y < 1) throw InvalidArgument("labels are 1-based");
        --y;
    }
    return out;
}

std::vector<std::vector<int>> sets_to_lists(const std::vector<ConfidenceSet>& sets) {
    std::vector<std::vector<int>> out;
    out.reserve(sets.size());
    for (const auto& s : sets) {
        std::vector<int> m = s.members();
        for (int& k : m) ++k;
        out.push_back(std::move(m));
    }
    return out;
}

PipelineConfig pipeline_config(int K, double alpha, double train_fraction, const std::string& mode,
                               const std::string& clusterer, const std::string& classifier, bool skip_classifier,
                               int p) {
    PipelineConfig pc;
    pc.K = K;
    pc.alpha = alpha;
    pc.train_fraction = train_fraction;
    pc.mode = label_mode_from_string(mode);
    pc.clusterer = io::clusterer_spec_from_json(io::json::parse(clusterer), p);
    pc.classifier = io::classifier_spec_from_json(io::json::parse(classifier));
    pc.skip_classifier = skip_classifier;
    return pc;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Split conformal confidence sets for cluster labels";

    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<PipelineError>(m, "PipelineError", PyExc_RuntimeError);

    m.def("aps_score", [](const std::vector<double>& pi, int y) { return aps_score(ProbVector(pi), y - 1); },
          py::arg("pi"), py::arg("label"));
    m.def("calibration_threshold",
          [](const std::vector<double>& scores, double alpha) { return calibration_threshold(scores, alpha); },
          py::arg("scores"), py::arg("alpha"));
    m.def("prediction_set",
          [](const std::vector<double>& pi, double threshold) {
              return sets_to_lists({prediction_set(ProbVector(pi), threshold)}).front();
          },
          py::arg("pi"), py::arg("threshold"));
    m.def("cutoff_set",
          [](const std::vector<double>& gamma, double alpha) {
              return sets_to_lists({cutoff_set(ProbVector(gamma), alpha)}).front();
          },
          py::arg("gamma"), py::arg("alpha"));
    m.def("solve_assignment",
          [](const Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>& cost) {
              if (cost.rows() != cost.cols()) throw InvalidArgument("cost matrix must be square");
              CostMatrix c(static_cast<int>(cost.rows()));
              for (Eigen::Index k = 0; k < cost.rows(); ++k)
                  for (Eigen::Index j = 0; j < cost.cols(); ++j) c(static_cast<int>(k), static_cast<int>(j)) = cost(k, j);
              return solve_assignment(c).map();
          },
          py::arg("cost"), "Row k is assigned to column result[k] (0-based).");

    m.def("simulate",
          [](const std::string& generator, int n, std::uint64_t seed) {
              const auto sim = generate_mixture_data(io::generator_from_json(io::json::parse(generator)), n,
                                                     make_seed(seed));
              std::vector<int> y = sim.Y.labels();
              for (int& v : y) ++v;
              return py::make_tuple(sim.X.matrix(), y);
          },
          py::arg("generator"), py::arg("n"), py::arg("seed"));

    py::class_<ConformalPipeline>(m, "Pipeline")
        .def_property_readonly("threshold", [](const ConformalPipeline& p) { return p.threshold; })
        .def_property_readonly("alpha", [](const ConformalPipeline& p) { return p.alpha; })
        .def_property_readonly("K", [](const ConformalPipeline& p) { return p.classifier.K(); })
        .def_property_readonly("alignment",
                               [](const ConformalPipeline& p) {
                                   std::vector<int> a = p.alignment.map();
                                   for (int& v : a) ++v;
                                   return a;
                               })
        .def_property_readonly("calibration_scores", [](const ConformalPipeline& p) { return p.calibration_scores; })
        .def("predict_sets",
             [](const ConformalPipeline& p, const Matrix& X) { return sets_to_lists(predict_sets(p, Dataset(X))); },
             py::arg("X"))
        .def("to_json", [](const ConformalPipeline& p) { return io::to_json(p).dump(); })
        .def_static("from_json", [](const std::string& s) { return io::pipeline_from_json(io::json::parse(s)); });

    m.def("fit_pipeline",
          [](const Matrix& X, int K, std::uint64_t seed, double alpha, double train_fraction, const std::string& mode,
             const std::string& clusterer, const std::string& classifier, bool skip_classifier,
             std::optional<std::vector<int>> labels) {
              const Dataset D(X);
              const auto pc = pipeline_config(K, alpha, train_fraction, mode, clusterer, classifier, skip_classifier,
                                              D.p());
              py::gil_scoped_release release;
              if (labels) return fit_conformal_from_labels(D, Labeling(to_zero_based(*labels), K), pc, make_seed(seed));
              return fit_conformal_pipeline(D, pc, make_seed(seed));
          },
          py::arg("X"), py::arg("K"), py::arg("seed"), py::arg("alpha") = 0.1, py::arg("train_fraction") = 0.5,
          py::arg("mode") = "stochastic", py::arg("clusterer") = "{}", py::arg("classifier") = "{}",
          py::arg("skip_classifier") = false, py::arg("labels") = py::none());

    m.def("evaluate_coverage",
          [](const ConformalPipeline& p, const Matrix& X, const std::vector<int>& labels) {
              return io::to_json(evaluate_coverage(p, Dataset(X), Labeling(to_zero_based(labels), p.classifier.K())))
                  .dump();
          },
          py::arg("pipeline"), py::arg("X"), py::arg("labels"));

    m.def("run_diagnostics",
          [](const std::string& generator, const std::string& clusterer, int n, int reps, double alpha,
             std::uint64_t seed) {
              const auto gen = io::generator_from_json(io::json::parse(generator));
              const auto spec = io::clusterer_spec_from_json(io::json::parse(clusterer), gen.p(), &gen);
              py::gil_scoped_release release;
              return io::to_json(run_diagnostics(spec, gen, n, reps, alpha, make_seed(seed))).dump();
          },
          py::arg("generator"), py::arg("clusterer"), py::arg("n"), py::arg("reps"), py::arg("alpha"),
          py::arg("seed"));

    m.def("run_experiment",
          [](const std::string& config, std::uint64_t seed) {
              auto cfg = io::experiment_config_from_json(io::json::parse(config));
              cfg.seed = make_seed(seed);
              std::string tidy, aggregate;
              {
                  py::gil_scoped_release release;
                  const auto res = run_experiment(cfg);
                  tidy = io::experiment_tidy_csv(res);
                  aggregate = io::experiment_aggregate_csv(res);
              }
              return py::make_tuple(tidy, aggregate);
          },
          py::arg("config"), py::arg("seed"), "Returns (tidy_csv, aggregate_csv).");
}
