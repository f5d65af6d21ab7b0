#include <doctest.h>

#include "confclust/io.hpp"

using namespace confclust;
using io::json;

TEST_CASE("dataset CSV round-trips exactly") {
    Rng rng({1, 0});
    Matrix X(20, 3);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 3; ++j) X(i, j) = rng.normal() * std::pow(10.0, static_cast<double>(rng.index(20)) - 10.0);
    const Dataset d(X);
    const std::string text = io::dataset_csv(d, "provenance line");
    CHECK(text.rfind("# provenance line\nx1,x2,x3\n", 0) == 0);
    CHECK(io::parse_dataset_csv(text).matrix() == X);
}

TEST_CASE("dataset CSV parsing") {
    const auto d = io::parse_dataset_csv("# comment\na,b\r\n1.5,-2\n\n+3e2, 4\n");
    CHECK(d.n() == 2);
    CHECK(d.matrix()(1, 0) == 300.0);
    CHECK(d.matrix()(1, 1) == 4.0);
    CHECK_THROWS_AS(io::parse_dataset_csv("a,b\n1,2,3\n"), InvalidArgument);
    CHECK_THROWS_AS(io::parse_dataset_csv("a,b\n1,x\n"), InvalidArgument);
    CHECK_THROWS_AS(io::parse_dataset_csv("a,b\n"), InvalidArgument);
    CHECK(io::parse_double("0.1") == 0.1);
}

TEST_CASE("labels CSV is one-based on disk") {
    const Labeling y({0, 2, 1}, 3);
    const std::string text = io::labels_csv(y);
    CHECK(text == "label\n1\n3\n2\n");
    CHECK(io::parse_labels_csv(text) == y);
    CHECK(io::parse_labels_csv("2\n1\n", 4).K() == 4);
    CHECK_THROWS_AS(io::parse_labels_csv("label\n0\n"), InvalidArgument);
    CHECK_THROWS_AS(io::parse_labels_csv("label\n1.5\n"), InvalidArgument);
}

TEST_CASE("sets CSV") {
    const std::vector<ConfidenceSet> sets{ConfidenceSet({0}), ConfidenceSet({0, 2})};
    CHECK(io::sets_csv(sets) == "row,set_size,members\n1,1,1\n2,2,1;3\n");
}

TEST_CASE("number formatting is shortest round-trip") {
    CHECK(io::format_double(0.1) == "0.1");
    CHECK(io::format_double(kInfiniteThreshold) == "inf");
    CHECK(io::hex64(io::fnv1a64("")) == "cbf29ce484222325");
}

TEST_CASE("mixture and FCM models round-trip through JSON") {
    const auto gen = default_generator(GeneratorFamily::Gamma, 2, 3, 2.0);
    const auto sim = generate_mixture_data(gen, 200, {2, 0});
    Vector x(2);
    x << 7.0, 9.5;
    for (auto fam : {MixtureFamily::GaussianFull, MixtureFamily::GaussianDiag, MixtureFamily::GammaIndependent}) {
        EmOptions o;
        o.restarts = 1;
        const auto m = fit_mixture_em(sim.X, 3, fam, o, {3, 0});
        const auto back = io::mixture_from_json(json::parse(io::to_json(m).dump()));
        CHECK(mixture_posterior(back, x) == mixture_posterior(m, x));
        CHECK(back.fit_log().iterations == m.fit_log().iterations);
    }
    const auto f = fit_fcm(sim.X, 3, {}, {4, 0});
    const auto fb = io::fcm_from_json(json::parse(io::to_json(f).dump()));
    CHECK(fb.centroids == f.centroids);
    CHECK(fcm_membership(fb, x) == fcm_membership(f, x));
}

TEST_CASE("pipelines round-trip through JSON") {
    const auto gen = default_generator(GeneratorFamily::Gaussian, 2, 3, 2.0);
    const auto sim = generate_mixture_data(gen, 200, {5, 0});
    Matrix grid(50, 2);
    for (int i = 0; i < 50; ++i) grid.row(i) << -5.0 + 0.2 * i, 3.0 - 0.13 * i;
    for (auto kind : {ClassifierKind::Logistic, ClassifierKind::KnnSoft}) {
        for (bool rff : {true, false}) {
            PipelineConfig cfg;
            cfg.K = 3;
            cfg.classifier.kind = kind;
            cfg.classifier.random_features = rff;
            const auto pipe = fit_conformal_pipeline(sim.X, cfg, {6, 0});
            const std::string doc = io::to_json(pipe).dump();
            const auto back = io::pipeline_from_json(json::parse(doc));
            CHECK(back.threshold == pipe.threshold);
            CHECK(back.alignment == pipe.alignment);
            CHECK(predict_sets(back, Dataset(grid)) == predict_sets(pipe, Dataset(grid)));
            CHECK(io::to_json(back).dump() == doc);
        }
    }
    PipelineConfig skip;
    skip.K = 3;
    skip.skip_classifier = true;
    skip.alpha = 0.001;
    const auto pipe = fit_conformal_pipeline(sim.X, skip, {7, 0});
    const auto j = io::to_json(pipe);
    CHECK(j["threshold"] == "inf");
    CHECK(io::pipeline_from_json(j).threshold == kInfiniteThreshold);
}

TEST_CASE("clusterer specs are parsed strictly") {
    const auto s = io::clusterer_spec_from_json(json::parse(R"({"kind":"gmm","family":"auto"})"), 60);
    CHECK(s.family == MixtureFamily::GaussianDiag);
    CHECK(io::clusterer_spec_from_json(json::object(), 2).family == MixtureFamily::GaussianFull);
    const auto f = io::clusterer_spec_from_json(json::parse(R"({"kind":"fcm","fuzziness":1.7})"), 2);
    CHECK(f.kind == ClustererKind::Fcm);
    CHECK(f.fcm.m == 1.7);
    CHECK_THROWS_WITH_AS(io::clusterer_spec_from_json(json::parse(R"({"kind":"gmm","colour":1})"), 2),
                         "clusterer: unknown key 'colour'", io::ConfigError);
    CHECK_THROWS_AS(io::clusterer_spec_from_json(json::parse(R"({"kind":"fcm","fuzziness":1})"), 2), io::ConfigError);
    CHECK_THROWS_AS(io::clusterer_spec_from_json(json::parse(R"({"kind":"oracle"})"), 2), io::ConfigError);
    CHECK_THROWS_AS(io::clusterer_spec_from_json(json::parse(R"({"tol":"small"})"), 2), io::ConfigError);
}

TEST_CASE("generator configs") {
    const auto g = io::generator_from_json(json::parse(R"({"family":"gaussian","p":2,"K":3,"sigma2":1.5})"));
    CHECK(g.K() == 3);
    const auto back = io::generator_from_json(io::to_json(g));
    CHECK(back.centers == g.centers);
    try {
        io::generator_from_json(
            json::parse(R"({"family":"gamma","sigma2":1,"centers":[[1,2],[3,-4]]})"));
        FAIL("expected a config error");
    } catch (const io::ConfigError& e) {
        CHECK(std::string(e.what()).find("generator.centers") != std::string::npos);
    }
    CHECK_THROWS_AS(io::generator_from_json(json::parse(R"({"family":"gaussian","p":2,"K":3})")), io::ConfigError);
}

TEST_CASE("experiment config parsing") {
    const auto cfg = io::experiment_config_from_json(json::parse(R"({
        "generator": {"family": "gaussian", "p": 2, "K": 3, "sigma2": 1.5},
        "sweep": {"kind": "fuzziness", "values": [1.4, 1.7, 2.0]},
        "methods": ["stochastic", "cutoff"],
        "reps": 4,
        "clusterer": {"kind": "fcm"},
        "output_tidy": "t.csv"
    })"));
    CHECK(cfg.sweep == SweepKind::Fuzziness);
    CHECK(cfg.methods.size() == 2);
    CHECK(cfg.reps == 4);
    CHECK_THROWS_AS(io::experiment_config_from_json(json::parse(R"({
        "generator": {"family": "gaussian", "p": 2, "K": 3, "sigma2": 1.5},
        "sweep": {"kind": "n", "values": [100]}, "methods": ["magic"]})")),
                    io::ConfigError);
}
