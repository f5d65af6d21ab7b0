#include <cmath>

#include "confclust/io.hpp"

namespace confclust::io {

void require_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

template <typename T>
T get_req(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + "." + key + ": required");
    return get_or<T>(j, key, T{}, where);
}

json header(const char* format) { return {{"format", format}, {"version", kFormatVersion}}; }

void check_header(const json& j, const char* format) {
    if (!j.is_object() || j.value("format", std::string{}) != format)
        throw ConfigError(std::string("expected a '") + format + "' document");
    if (j.value("version", 0) != kFormatVersion)
        throw ConfigError(std::string(format) + ": unsupported version");
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j, const std::string& field) {
    try {
        const auto v = j.get<std::vector<double>>();
        return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    } catch (const json::exception&) {
        throw ConfigError(field + ": expected an array of numbers");
    }
}

json threshold_to_json(double q) { return std::isinf(q) ? json("inf") : json(q); }

double threshold_from_json(const json& j) {
    if (j.is_string() && j.get<std::string>() == "inf") return kInfiniteThreshold;
    if (!j.is_number()) throw ConfigError("threshold: expected a number or \"inf\"");
    return j.get<double>();
}

json one_based(const std::vector<int>& v) {
    json a = json::array();
    for (int x : v) a.push_back(x + 1);
    return a;
}

std::vector<int> zero_based(const json& j, const std::string& field) {
    try {
        std::vector<int> v = j.get<std::vector<int>>();
        for (int& x : v) --x;
        return v;
    } catch (const json::exception&) {
        throw ConfigError(field + ": expected an array of integers");
    }
}

}  // namespace

json matrix_to_json(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) r.push_back(M(i, c));
        rows.push_back(std::move(r));
    }
    return rows;
}

Matrix matrix_from_json(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) throw ConfigError(field + ": expected a nonempty array of rows");
    std::vector<std::vector<double>> rows;
    try {
        rows = j.get<std::vector<std::vector<double>>>();
    } catch (const json::exception&) {
        throw ConfigError(field + ": expected an array of numeric rows");
    }
    const std::size_t cols = rows[0].size();
    Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) throw ConfigError(field + ": ragged rows");
        for (std::size_t c = 0; c < cols; ++c) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    }
    return M;
}

//------------------------------------------------------------------------------
// Models
//------------------------------------------------------------------------------

json to_json(const MixtureModel& m) {
    json j = header("confclust/mixture");
    j["family"] = to_string(m.family());
    j["K"] = m.K();
    j["p"] = m.p();
    j["weights"] = std::vector<double>(m.weights().values().begin(), m.weights().values().end());
    j["means"] = matrix_to_json(m.means());
    if (m.family() == MixtureFamily::GaussianFull) {
        json covs = json::array();
        for (const auto& S : m.covariances()) covs.push_back(matrix_to_json(S));
        j["covariances"] = std::move(covs);
    } else {
        j["variances"] = matrix_to_json(m.variances());
    }
    j["fit_log"] = {{"log_likelihood", m.fit_log().log_likelihood}, {"iterations", m.fit_log().iterations}};
    return j;
}

MixtureModel mixture_from_json(const json& j) {
    check_header(j, "confclust/mixture");
    const MixtureFamily family = mixture_family_from_string(j.at("family").get<std::string>());
    ProbVector w(j.at("weights").get<std::vector<double>>());
    Matrix means = matrix_from_json(j.at("means"), "means");
    FitLog log;
    if (j.contains("fit_log")) {
        log.log_likelihood = j["fit_log"].value("log_likelihood", 0.0);
        log.iterations = j["fit_log"].value("iterations", 0);
    }
    if (family == MixtureFamily::GaussianFull) {
        std::vector<Matrix> covs;
        for (const auto& c : j.at("covariances")) covs.push_back(matrix_from_json(c, "covariances"));
        return MixtureModel(family, std::move(w), std::move(means), std::move(covs), {}, std::move(log));
    }
    return MixtureModel(family, std::move(w), std::move(means), {}, matrix_from_json(j.at("variances"), "variances"),
                        std::move(log));
}

json to_json(const FcmModel& m) {
    json j = header("confclust/fcm");
    j["K"] = m.K();
    j["p"] = m.p();
    j["fuzziness"] = m.m;
    j["centroids"] = matrix_to_json(m.centroids);
    j["iterations"] = m.iterations;
    j["objective"] = m.objective;
    return j;
}

FcmModel fcm_from_json(const json& j) {
    check_header(j, "confclust/fcm");
    FcmModel m;
    m.m = j.at("fuzziness").get<double>();
    m.centroids = matrix_from_json(j.at("centroids"), "centroids");
    m.iterations = j.value("iterations", 0);
    m.objective = j.value("objective", 0.0);
    return m;
}

json to_json(const ClassifierModel& m) {
    json j = header("confclust/classifier");
    j["kind"] = to_string(m.kind());
    j["K"] = m.K();
    j["p"] = m.p();
    switch (m.kind()) {
        case ClassifierKind::Logistic: {
            const FeatureMap& f = m.feature_map();
            json fm;
            fm["random"] = f.random;
            if (f.random) {
                fm["W"] = matrix_to_json(f.W);
                fm["offset"] = vector_to_json(f.offset);
                fm["bandwidth"] = f.bandwidth;
            } else {
                fm["center"] = vector_to_json(f.center);
                fm["scale"] = vector_to_json(f.scale);
            }
            j["feature_map"] = std::move(fm);
            j["coefficients"] = matrix_to_json(m.coefficients());
            j["loss_trace"] = m.loss_trace();
            break;
        }
        case ClassifierKind::KnnSoft:
            j["neighbors"] = m.neighbors();
            j["train_points"] = matrix_to_json(m.train_points().matrix());
            j["train_labels"] = one_based(m.train_labels().labels());
            break;
        case ClassifierKind::MixturePosterior: j["mixture"] = to_json(m.mixture()); break;
    }
    return j;
}

ClassifierModel classifier_from_json(const json& j) {
    check_header(j, "confclust/classifier");
    const ClassifierKind kind = classifier_kind_from_string(j.at("kind").get<std::string>());
    const int K = j.at("K").get<int>();
    const int p = j.at("p").get<int>();
    switch (kind) {
        case ClassifierKind::Logistic: {
            const json& fm = j.at("feature_map");
            FeatureMap f;
            f.random = fm.at("random").get<bool>();
            if (f.random) {
                f.W = matrix_from_json(fm.at("W"), "feature_map.W");
                f.offset = vector_from_json(fm.at("offset"), "feature_map.offset");
                f.bandwidth = fm.at("bandwidth").get<double>();
            } else {
                f.center = vector_from_json(fm.at("center"), "feature_map.center");
                f.scale = vector_from_json(fm.at("scale"), "feature_map.scale");
            }
            return ClassifierModel::logistic(K, p, std::move(f), matrix_from_json(j.at("coefficients"), "coefficients"),
                                             j.value("loss_trace", std::vector<double>{}));
        }
        case ClassifierKind::KnnSoft:
            return ClassifierModel::knn(K, Dataset(matrix_from_json(j.at("train_points"), "train_points")),
                                        Labeling(zero_based(j.at("train_labels"), "train_labels"), K),
                                        j.at("neighbors").get<int>());
        case ClassifierKind::MixturePosterior: return ClassifierModel::posterior(mixture_from_json(j.at("mixture")));
    }
    throw ConfigError("classifier: unknown kind");
}

//------------------------------------------------------------------------------
// Specs
//------------------------------------------------------------------------------

json to_json(const ClustererSpec& s) {
    json j;
    switch (s.kind) {
        case ClustererKind::Mixture:
            j["kind"] = "gmm";
            j["family"] = to_string(s.family);
            j["init"] = s.em.init == EmInit::KMeansPlusPlus ? "kmeans++" : "random-responsibility";
            j["tol"] = s.em.tol;
            j["max_iter"] = s.em.max_iter;
            j["restarts"] = s.em.restarts;
            j["variance_floor"] = s.em.variance_floor;
            break;
        case ClustererKind::Fcm:
            j["kind"] = "fcm";
            j["fuzziness"] = s.fcm.m;
            j["tol"] = s.fcm.tol;
            j["max_iter"] = s.fcm.max_iter;
            break;
        case ClustererKind::Fixed: j["kind"] = "oracle"; break;
    }
    if (s.one_hot) j["one_hot"] = true;
    return j;
}

ClustererSpec clusterer_spec_from_json(const json& j, int p, const GeneratorConfig* truth) {
    const std::string where = "clusterer";
    require_keys(j, {"kind", "family", "init", "tol", "max_iter", "restarts", "variance_floor", "fuzziness", "one_hot"},
                 where);
    ClustererSpec s;
    const std::string kind = get_or<std::string>(j, "kind", "gmm", where);
    s.one_hot = get_or<bool>(j, "one_hot", false, where);
    if (kind == "gmm") {
        s.kind = ClustererKind::Mixture;
        const std::string fam = get_or<std::string>(j, "family", "auto", where);
        try {
            s.family = fam == "auto" ? (p > 50 ? MixtureFamily::GaussianDiag : MixtureFamily::GaussianFull)
                                     : mixture_family_from_string(fam);
        } catch (const InvalidArgument& e) {
            throw ConfigError(where + ".family: " + e.what());
        }
        const std::string init = get_or<std::string>(j, "init", "kmeans++", where);
        if (init == "kmeans++") s.em.init = EmInit::KMeansPlusPlus;
        else if (init == "random-responsibility") s.em.init = EmInit::RandomResponsibility;
        else throw ConfigError(where + ".init: unknown initialization '" + init + "'");
        s.em.tol = get_or<double>(j, "tol", s.em.tol, where);
        s.em.max_iter = get_or<int>(j, "max_iter", s.em.max_iter, where);
        s.em.restarts = get_or<int>(j, "restarts", s.em.restarts, where);
        s.em.variance_floor = get_or<double>(j, "variance_floor", s.em.variance_floor, where);
        if (s.em.restarts < 1) throw ConfigError(where + ".restarts: must be >= 1");
        if (!(s.em.variance_floor > 0.0)) throw ConfigError(where + ".variance_floor: must be positive");
        if (j.contains("fuzziness")) throw ConfigError(where + ".fuzziness: only valid for kind fcm");
    } else if (kind == "fcm") {
        s.kind = ClustererKind::Fcm;
        s.fcm.m = get_or<double>(j, "fuzziness", s.fcm.m, where);
        s.fcm.tol = get_or<double>(j, "tol", s.fcm.tol, where);
        s.fcm.max_iter = get_or<int>(j, "max_iter", s.fcm.max_iter, where);
        if (!(s.fcm.m > 1.0)) throw ConfigError(where + ".fuzziness: must exceed 1");
        for (const char* k : {"family", "init", "restarts", "variance_floor"})
            if (j.contains(k)) throw ConfigError(where + "." + k + ": only valid for kind gmm");
    } else if (kind == "oracle") {
        if (!truth) throw ConfigError(where + ".kind: 'oracle' needs a simulation generator with a known posterior");
        s.kind = ClustererKind::Fixed;
        s.fixed = as_mixture_model(*truth);
    } else {
        throw ConfigError(where + ".kind: unknown clusterer '" + kind + "'");
    }
    return s;
}

json to_json(const ClassifierSpec& s) {
    json j;
    j["kind"] = to_string(s.kind);
    if (s.kind == ClassifierKind::Logistic) {
        j["random_features"] = s.random_features;
        j["num_features"] = s.num_features;
        if (s.bandwidth) j["bandwidth"] = *s.bandwidth;
        j["bandwidth_subsample"] = s.bandwidth_subsample;
        j["ridge"] = s.ridge;
        j["grad_tol"] = s.grad_tol;
        j["max_iter"] = s.max_iter;
    } else if (s.kind == ClassifierKind::KnnSoft) {
        j["neighbors"] = s.neighbors;
    }
    return j;
}

ClassifierSpec classifier_spec_from_json(const json& j) {
    const std::string where = "classifier";
    require_keys(j, {"kind", "random_features", "num_features", "bandwidth", "bandwidth_subsample", "ridge", "grad_tol",
                     "max_iter", "neighbors"},
                 where);
    ClassifierSpec s;
    try {
        s.kind = classifier_kind_from_string(get_or<std::string>(j, "kind", "multinomial-logistic", where));
    } catch (const InvalidArgument& e) {
        throw ConfigError(where + ".kind: " + e.what());
    }
    if (s.kind == ClassifierKind::MixturePosterior)
        throw ConfigError(where + ".kind: use \"skip_classifier\": true for the clusterer posterior");
    s.random_features = get_or<bool>(j, "random_features", s.random_features, where);
    s.num_features = get_or<int>(j, "num_features", s.num_features, where);
    if (j.contains("bandwidth")) s.bandwidth = get_req<double>(j, "bandwidth", where);
    s.bandwidth_subsample = get_or<int>(j, "bandwidth_subsample", s.bandwidth_subsample, where);
    s.ridge = get_or<double>(j, "ridge", s.ridge, where);
    s.grad_tol = get_or<double>(j, "grad_tol", s.grad_tol, where);
    s.max_iter = get_or<int>(j, "max_iter", s.max_iter, where);
    s.neighbors = get_or<int>(j, "neighbors", s.neighbors, where);
    if (s.num_features < 1) throw ConfigError(where + ".num_features: must be >= 1");
    if (s.bandwidth && !(*s.bandwidth > 0.0)) throw ConfigError(where + ".bandwidth: must be positive");
    if (s.ridge < 0.0) throw ConfigError(where + ".ridge: must be >= 0");
    if (s.neighbors < 1) throw ConfigError(where + ".neighbors: must be >= 1");
    return s;
}

json to_json(const GeneratorConfig& g) {
    json j;
    j["family"] = to_string(g.family);
    j["K"] = g.K();
    j["p"] = g.p();
    j["sigma2"] = g.sigma2;
    j["centers"] = matrix_to_json(g.centers);
    j["weights"] = std::vector<double>(g.weights.values().begin(), g.weights.values().end());
    return j;
}

GeneratorConfig generator_from_json(const json& j) {
    const std::string where = "generator";
    require_keys(j, {"family", "K", "p", "sigma2", "centers", "weights"}, where);
    GeneratorFamily family;
    try {
        family = generator_family_from_string(get_or<std::string>(j, "family", "gaussian", where));
    } catch (const InvalidArgument& e) {
        throw ConfigError(where + ".family: " + e.what());
    }
    const double sigma2 = get_req<double>(j, "sigma2", where);
    if (!(sigma2 > 0.0)) throw ConfigError(where + ".sigma2: must be positive");
    GeneratorConfig g;
    if (j.contains("centers")) {
        g.family = family;
        g.sigma2 = sigma2;
        g.centers = matrix_from_json(j["centers"], where + ".centers");
        if (j.contains("K") && get_req<int>(j, "K", where) != g.K())
            throw ConfigError(where + ".K: disagrees with the number of centers");
        if (j.contains("p") && get_req<int>(j, "p", where) != g.p())
            throw ConfigError(where + ".p: disagrees with the center dimension");
        g.weights = ProbVector::uniform(g.K());
        if (family == GeneratorFamily::Gamma && !(g.centers.array() > 0.0).all())
            throw ConfigError(where + ".centers: gamma family requires every center coordinate > 0");
    } else {
        const int K = get_req<int>(j, "K", where);
        const int p = get_req<int>(j, "p", where);
        try {
            g = default_generator(family, p, K, sigma2);
        } catch (const InvalidArgument& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    if (j.contains("weights")) {
        try {
            g.weights = ProbVector(get_req<std::vector<double>>(j, "weights", where));
        } catch (const InvalidArgument& e) {
            throw ConfigError(where + ".weights: " + e.what());
        }
    }
    try {
        g.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    return g;
}

//------------------------------------------------------------------------------
// Pipelines and reports
//------------------------------------------------------------------------------

json to_json(const PipelineConfig& c) {
    return {{"K", c.K},
            {"alpha", c.alpha},
            {"train_fraction", c.train_fraction},
            {"mode", to_string(c.mode)},
            {"clusterer", to_json(c.clusterer)},
            {"classifier", to_json(c.classifier)},
            {"skip_classifier", c.skip_classifier}};
}

json to_json(const ConformalPipeline& p) {
    json j = header("confclust/pipeline");
    j["classifier"] = to_json(p.classifier);
    j["alignment"] = one_based(p.alignment.map());
    j["threshold"] = threshold_to_json(p.threshold);
    j["alpha"] = p.alpha;
    j["mode"] = to_string(p.mode);
    j["seed"] = {{"seed", p.seed.seed}, {"stream", p.seed.stream}};
    j["config"] = to_json(p.config);
    j["calibration_scores"] = p.calibration_scores;
    j["n_train"] = p.n_train;
    j["n_calib"] = p.n_calib;
    return j;
}

ConformalPipeline pipeline_from_json(const json& j) {
    check_header(j, "confclust/pipeline");
    try {
        ConformalPipeline p{classifier_from_json(j.at("classifier")),
                            Permutation(zero_based(j.at("alignment"), "alignment")),
                            threshold_from_json(j.at("threshold")),
                            j.at("alpha").get<double>(),
                            label_mode_from_string(j.at("mode").get<std::string>()),
                            RandomSeed{j.at("seed").at("seed").get<std::uint64_t>(),
                                       j.at("seed").at("stream").get<std::uint64_t>()},
                            {},
                            j.value("calibration_scores", std::vector<double>{}),
                            j.value("n_train", 0),
                            j.value("n_calib", 0)};
        const json& c = j.at("config");
        p.config.K = c.at("K").get<int>();
        p.config.alpha = c.at("alpha").get<double>();
        p.config.train_fraction = c.at("train_fraction").get<double>();
        p.config.mode = label_mode_from_string(c.at("mode").get<std::string>());
        p.config.skip_classifier = c.value("skip_classifier", false);
        p.config.classifier = classifier_spec_from_json(c.at("classifier"));
        if (c.at("clusterer").value("kind", "") != "oracle")
            p.config.clusterer = clusterer_spec_from_json(c.at("clusterer"), p.classifier.p());
        return p;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("pipeline document: ") + e.what());
    }
}

json to_json(const DiagnosticsReport& r) {
    return {{"n", r.n},
            {"pool_size", 2 * r.n},
            {"reps", r.reps},
            {"E_hat", r.E_hat},
            {"E_se", r.E_se},
            {"S_hat_upper", r.S_hat_upper},
            {"S_se", r.S_se},
            {"bound_rhs", r.bound_rhs},
            {"failures", r.failures}};
}

json to_json(const CoverageReport& r) {
    return {{"oracle_permutation", one_based(r.oracle_permutation.map())},
            {"coverage", r.coverage},
            {"mean_set_size", r.mean_set_size},
            {"size_histogram", r.size_histogram},
            {"n_test", r.n_test}};
}

//------------------------------------------------------------------------------
// Experiments
//------------------------------------------------------------------------------

ExperimentConfig experiment_config_from_json(const json& j) {
    const std::string where = "experiment";
    require_keys(j, {"generator", "sweep", "n", "alpha", "train_fraction", "methods", "reps", "test_size", "clusterer",
                     "classifier", "threads", "output_tidy", "output_aggregate"},
                 where);
    ExperimentConfig c;
    if (!j.contains("generator")) throw ConfigError(where + ".generator: required");
    c.generator = generator_from_json(j["generator"]);
    if (!j.contains("sweep")) throw ConfigError(where + ".sweep: required");
    const json& sw = j["sweep"];
    require_keys(sw, {"kind", "values"}, where + ".sweep");
    try {
        c.sweep = sweep_kind_from_string(get_req<std::string>(sw, "kind", where + ".sweep"));
    } catch (const InvalidArgument& e) {
        if (dynamic_cast<const ConfigError*>(&e)) throw;
        throw ConfigError(where + ".sweep.kind: " + e.what());
    }
    c.values = get_req<std::vector<double>>(sw, "values", where + ".sweep");
    c.n = get_or<int>(j, "n", c.n, where);
    c.alpha = get_or<double>(j, "alpha", c.alpha, where);
    c.train_fraction = get_or<double>(j, "train_fraction", c.train_fraction, where);
    c.reps = get_or<int>(j, "reps", c.reps, where);
    c.test_size = get_or<int>(j, "test_size", c.test_size, where);
    c.threads = get_or<int>(j, "threads", c.threads, where);
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : get_req<std::vector<std::string>>(j, "methods", where)) {
            try {
                c.methods.push_back(method_from_string(m));
            } catch (const InvalidArgument& e) {
                throw ConfigError(where + ".methods: " + e.what());
            }
        }
    }
    c.clusterer = clusterer_spec_from_json(j.value("clusterer", json::object()), c.generator.p());
    c.classifier = classifier_spec_from_json(j.value("classifier", json::object()));
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

std::string experiment_tidy_csv(const ExperimentResult& r, const std::string& comment) {
    std::string out;
    if (!comment.empty()) out += "# " + comment + "\n";
    out += "sweep_value,method,rep,ok,coverage,mean_set_size,error\n";
    for (const auto& rec : r.records) {
        std::string err = rec.error;
        for (char& ch : err)
            if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
        out += format_double(rec.sweep_value) + ',' + to_string(rec.method) + ',' + std::to_string(rec.rep) + ',' +
               (rec.ok ? "1" : "0") + ',' + format_double(rec.coverage) + ',' + format_double(rec.mean_set_size) +
               ',' + err + '\n';
    }
    return out;
}

std::string experiment_aggregate_csv(const ExperimentResult& r, const std::string& comment) {
    std::string out;
    if (!comment.empty()) out += "# " + comment + "\n";
    out += "sweep_value,method,reps_ok,failures,mean_coverage,se_coverage,mean_set_size,se_set_size,valid\n";
    for (const auto& c : r.cells) {
        out += format_double(c.sweep_value) + ',' + to_string(c.method) + ',' + std::to_string(c.reps_ok) + ',' +
               std::to_string(c.failures) + ',' + format_double(c.mean_coverage) + ',' + format_double(c.se_coverage) +
               ',' + format_double(c.mean_set_size) + ',' + format_double(c.se_set_size) + ',' +
               (c.valid ? "1" : "0") + '\n';
    }
    return out;
}

}  // namespace confclust::io
