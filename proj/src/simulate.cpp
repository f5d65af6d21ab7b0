#include "confclust/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include "confclust/conformal.hpp"
#include "confclust/evaluate.hpp"

namespace confclust {

std::string to_string(GeneratorFamily f) { return f == GeneratorFamily::Gaussian ? "gaussian" : "gamma"; }

GeneratorFamily generator_family_from_string(const std::string& s) {
    if (s == "gaussian") return GeneratorFamily::Gaussian;
    if (s == "gamma") return GeneratorFamily::Gamma;
    throw InvalidArgument("unknown generator family '" + s + "'");
}

void GeneratorConfig::validate() const {
    if (centers.rows() < 1 || centers.cols() < 1) throw InvalidArgument("generator: centers must be a nonempty K x p matrix");
    if (!centers.allFinite()) throw InvalidArgument("generator: centers must be finite");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InvalidArgument("generator: sigma2 must be positive");
    if (weights.size() != K()) throw InvalidArgument("generator: weights must have K entries");
    if (family == GeneratorFamily::Gamma && !(centers.array() > 0.0).all())
        throw InvalidArgument("generator: gamma family requires all centers > 0");
}

GeneratorConfig default_generator(GeneratorFamily family, int p, int K, double sigma2) {
    GeneratorConfig g;
    g.family = family;
    g.sigma2 = sigma2;
    g.weights = ProbVector::uniform(K);
    const double shift = family == GeneratorFamily::Gamma ? 8.0 : 0.0;
    if (p == 2 && K == 3) {
        const double radius = 6.0 / std::sqrt(3.0);
        g.centers.resize(3, 2);
        for (int k = 0; k < 3; ++k) {
            const double angle = M_PI / 2.0 + 2.0 * M_PI * k / 3.0;
            g.centers(k, 0) = radius * std::cos(angle) + shift;
            g.centers(k, 1) = radius * std::sin(angle) + shift;
        }
    } else if (p >= K && K >= 1) {
        g.centers = Matrix::Constant(K, p, shift);
        for (int k = 0; k < K; ++k) g.centers(k, k) += 10.0 / std::sqrt(2.0);
    } else {
        throw InvalidArgument("default_generator: no built-in layout for p=" + std::to_string(p) +
                              ", K=" + std::to_string(K));
    }
    g.validate();
    return g;
}

SimulatedData generate_mixture_data(const GeneratorConfig& cfg, int n, RandomSeed seed) {
    cfg.validate();
    if (n < 1) throw InvalidArgument("generate_mixture_data: n < 1");
    Rng rng(seed);
    Matrix X(n, cfg.p());
    std::vector<int> y(static_cast<std::size_t>(n));
    const double sd = std::sqrt(cfg.sigma2);
    for (int i = 0; i < n; ++i) {
        const int k = sample_categorical(cfg.weights, rng);
        y[static_cast<std::size_t>(i)] = k;
        for (int j = 0; j < cfg.p(); ++j) {
            const double mu = cfg.centers(k, j);
            if (cfg.family == GeneratorFamily::Gaussian) {
                X(i, j) = mu + sd * rng.normal();
            } else {
                std::gamma_distribution<double> g(mu * mu / cfg.sigma2, cfg.sigma2 / mu);
                X(i, j) = g(rng);
            }
        }
    }
    return {Dataset(std::move(X)), Labeling(std::move(y), cfg.K())};
}

MixtureModel as_mixture_model(const GeneratorConfig& cfg) {
    cfg.validate();
    if (cfg.family == GeneratorFamily::Gaussian) {
        std::vector<Matrix> covs(static_cast<std::size_t>(cfg.K()), cfg.sigma2 * Matrix::Identity(cfg.p(), cfg.p()));
        return MixtureModel::gaussian_full(cfg.weights, cfg.centers, std::move(covs));
    }
    return MixtureModel::gamma(cfg.weights, cfg.centers, Matrix::Constant(cfg.K(), cfg.p(), cfg.sigma2));
}

ProbVector true_posterior(const GeneratorConfig& cfg, const Vector& x) {
    return mixture_posterior(as_mixture_model(cfg), x);
}

SoftLabelMatrix true_posterior(const GeneratorConfig& cfg, const Dataset& X) {
    return mixture_posterior(as_mixture_model(cfg), X);
}

//==============================================================================
// Experiments
//==============================================================================

std::string to_string(Method m) {
    switch (m) {
        case Method::Stochastic: return "stochastic";
        case Method::NaiveHard: return "naive-hard";
        case Method::Cutoff: return "cutoff";
        case Method::TrueLabels: return "true-labels";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "stochastic") return Method::Stochastic;
    if (s == "naive-hard") return Method::NaiveHard;
    if (s == "cutoff") return Method::Cutoff;
    if (s == "true-labels") return Method::TrueLabels;
    throw InvalidArgument("unknown method '" + s + "'");
}

std::string to_string(SweepKind s) {
    switch (s) {
        case SweepKind::SampleSize: return "n";
        case SweepKind::Variance: return "sigma2";
        case SweepKind::Fuzziness: return "fuzziness";
    }
    return "?";
}

SweepKind sweep_kind_from_string(const std::string& s) {
    if (s == "n") return SweepKind::SampleSize;
    if (s == "sigma2") return SweepKind::Variance;
    if (s == "fuzziness") return SweepKind::Fuzziness;
    throw InvalidArgument("unknown sweep '" + s + "'");
}

void ExperimentConfig::validate() const {
    generator.validate();
    if (values.empty()) throw InvalidArgument("experiment: empty sweep");
    if (reps < 1) throw InvalidArgument("experiment: reps < 1");
    if (methods.empty()) throw InvalidArgument("experiment: no methods");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("experiment: alpha outside (0,1)");
    if (test_size < 1) throw InvalidArgument("experiment: test_size < 1");
    if (sweep == SweepKind::Fuzziness && clusterer.kind != ClustererKind::Fcm)
        throw InvalidArgument("experiment: a fuzziness sweep needs the fcm clusterer");
    for (std::size_t i = 0; i < values.size(); ++i)
        for (std::size_t j = i + 1; j < values.size(); ++j)
            if (values[i] == values[j]) throw InvalidArgument("experiment: duplicate sweep value");
    for (double v : values) {
        if (sweep == SweepKind::SampleSize && (v < 2.0 * generator.K() || v != std::floor(v)))
            throw InvalidArgument("experiment: sample sizes must be integers >= 2K");
        if (sweep == SweepKind::Variance && !(v > 0.0)) throw InvalidArgument("experiment: sigma2 must be positive");
        if (sweep == SweepKind::Fuzziness && !(v > 1.0)) throw InvalidArgument("experiment: fuzziness must exceed 1");
    }
}

bool ExperimentResult::all_valid() const {
    return std::all_of(cells.begin(), cells.end(), [](const CellSummary& c) { return c.valid; });
}

const CellSummary& ExperimentResult::cell(double value, Method m) const {
    for (const auto& c : cells)
        if (c.sweep_value == value && c.method == m) return c;
    throw InvalidArgument("ExperimentResult::cell: no such cell");
}

namespace {

enum class RepTag : std::uint64_t { Pool = 21, Test = 22, Pipeline = 23, Cutoff = 24 };

RandomSeed tagged(RandomSeed s, RepTag t) { return s.child(static_cast<std::uint64_t>(t)); }

/// One replication of one sweep value, all methods on shared data.
std::vector<ExperimentRecord> run_replication(const ExperimentConfig& cfg, std::size_t value_index, int rep) {
    const double value = cfg.values[value_index];
    GeneratorConfig gen = cfg.generator;
    ClustererSpec cspec = cfg.clusterer;
    int n = cfg.n;
    switch (cfg.sweep) {
        case SweepKind::SampleSize: n = static_cast<int>(value); break;
        case SweepKind::Variance: gen.sigma2 = value; break;
        case SweepKind::Fuzziness: cspec.fcm.m = value; break;
    }
    const RandomSeed rep_seed = cfg.seed.child(value_index).child(static_cast<std::uint64_t>(rep));
    const SimulatedData pool = generate_mixture_data(gen, n, tagged(rep_seed, RepTag::Pool));
    const SimulatedData test = generate_mixture_data(gen, cfg.test_size, tagged(rep_seed, RepTag::Test));

    PipelineConfig pc;
    pc.K = gen.K();
    pc.alpha = cfg.alpha;
    pc.train_fraction = cfg.train_fraction;
    pc.clusterer = cspec;
    pc.classifier = cfg.classifier;

    std::vector<ExperimentRecord> out;
    for (Method m : cfg.methods) {
        ExperimentRecord rec;
        rec.sweep_value = value;
        rec.method = m;
        rec.rep = rep;
        try {
            switch (m) {
                case Method::Stochastic:
                case Method::NaiveHard: {
                    pc.mode = m == Method::Stochastic ? LabelMode::Stochastic : LabelMode::NaiveHard;
                    const ConformalPipeline pipe = fit_conformal_pipeline(pool.X, pc, tagged(rep_seed, RepTag::Pipeline));
                    const CoverageReport r = evaluate_coverage(pipe, test.X, test.Y);
                    rec.coverage = r.coverage;
                    rec.mean_set_size = r.mean_set_size;
                    break;
                }
                case Method::TrueLabels: {
                    pc.mode = LabelMode::Stochastic;
                    const ConformalPipeline pipe =
                        fit_conformal_from_labels(pool.X, pool.Y, pc, tagged(rep_seed, RepTag::Pipeline));
                    const std::vector<ConfidenceSet> sets = predict_sets(pipe, test.X);
                    rec.coverage = coverage_under(sets, test.Y, Permutation::identity(gen.K()));
                    rec.mean_set_size = coverage_report(sets, test.Y).mean_set_size;
                    break;
                }
                case Method::Cutoff: {
                    ClustererSpec soft = cspec;
                    soft.one_hot = false;
                    const FittedClusterer g = fit_clusterer(soft, gen.K(), pool.X, tagged(rep_seed, RepTag::Cutoff));
                    const SoftLabelMatrix gamma = g.soft(test.X);
                    std::vector<ConfidenceSet> sets;
                    sets.reserve(static_cast<std::size_t>(gamma.n()));
                    for (int i = 0; i < gamma.n(); ++i) sets.push_back(cutoff_set(gamma.row(i), cfg.alpha));
                    const CoverageReport r = coverage_report(sets, test.Y);
                    rec.coverage = r.coverage;
                    rec.mean_set_size = r.mean_set_size;
                    break;
                }
            }
            rec.ok = true;
        } catch (const std::exception& e) {
            rec.error = e.what();
        }
        out.push_back(std::move(rec));
    }
    return out;
}

void mean_se(const std::vector<double>& v, double& mean, double& se) {
    mean = se = 0.0;
    if (v.empty()) return;
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t n_values = cfg.values.size();
    const std::size_t n_tasks = n_values * static_cast<std::size_t>(cfg.reps);
    std::vector<std::vector<ExperimentRecord>> slots(n_tasks);

    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;
    std::mutex fatal_mutex;
    auto worker = [&] {
        for (std::size_t t = next++; t < n_tasks; t = next++) {
            try {
                slots[t] = run_replication(cfg, t / static_cast<std::size_t>(cfg.reps),
                                           static_cast<int>(t % static_cast<std::size_t>(cfg.reps)));
            } catch (...) {
                // data generation only fails on invalid configs, which validate() already rejected
                const std::lock_guard lock(fatal_mutex);
                fatal = std::current_exception();
            }
        }
    };
    const int threads = std::max(1, cfg.threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (fatal) std::rethrow_exception(fatal);

    ExperimentResult result;
    for (auto& s : slots)
        for (auto& r : s) result.records.push_back(std::move(r));

    for (std::size_t v = 0; v < n_values; ++v) {
        for (Method m : cfg.methods) {
            CellSummary c;
            c.sweep_value = cfg.values[v];
            c.method = m;
            std::vector<double> cov, size;
            for (const auto& r : result.records) {
                if (r.sweep_value != c.sweep_value || r.method != m) continue;
                if (r.ok) {
                    cov.push_back(r.coverage);
                    size.push_back(r.mean_set_size);
                } else {
                    ++c.failures;
                }
            }
            c.reps_ok = static_cast<int>(cov.size());
            mean_se(cov, c.mean_coverage, c.se_coverage);
            mean_se(size, c.mean_set_size, c.se_set_size);
            c.valid = c.failures * 5 <= cfg.reps && c.reps_ok > 0;
            result.cells.push_back(c);
        }
    }
    return result;
}

}  // namespace confclust
