#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "confclust/errors.hpp"
#include "confclust/evaluate.hpp"
#include "confclust/io.hpp"

namespace confclust::cli {

namespace {

using io::ConfigError;
using io::json;

/// Everything a command needs after flag parsing: the effective config (file plus
/// overrides), the optional seed, and the provenance stamp derived from both.
struct Invocation {
    std::string command;
    json config = json::object();
    std::optional<std::uint64_t> seed;
    std::string hash;

    std::string stamp() const {
        std::string s = "confclust " + std::string(io::kToolVersion) + " command=" + command + " config=" + hash;
        if (seed) s += " seed=" + std::to_string(*seed);
        return s;
    }

    json provenance() const {
        json p = {{"tool_version", io::kToolVersion}, {"command", command}, {"config_hash", hash}};
        if (seed) p["seed"] = *seed;
        return p;
    }

    RandomSeed random_seed() const { return RandomSeed{*seed, 0}; }
};

json parse_override_value(const std::string& text) {
    json v = json::parse(text, nullptr, false);
    return v.is_discarded() ? json(text) : v;
}

/// Applies "a.b.c=value" to the config, creating intermediate objects.
void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    json* node = &config;
    std::size_t start = 0;
    for (;;) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("--set: empty key in '" + path + "'");
        if (!node->is_object()) throw ConfigError("--set: '" + path + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[key] = parse_override_value(assignment.substr(eq + 1));
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    const std::string text = io::read_text(path);
    json j = json::parse(text, nullptr, false, true);
    if (j.is_discarded()) throw ConfigError("config '" + path + "' is not valid JSON");
    if (!j.is_object()) throw ConfigError("config '" + path + "' must hold a JSON object");
    return j;
}

template <typename T>
T field(const json& c, const char* key, const std::string& command) {
    if (!c.contains(key)) throw ConfigError(command + "." + key + ": required");
    try {
        return c.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(command + "." + key + ": wrong type");
    }
}

template <typename T>
T field_or(const json& c, const char* key, T fallback, const std::string& command) {
    return c.contains(key) ? field<T>(c, key, command) : fallback;
}

Dataset read_dataset(const std::string& path) {
    const std::string text = io::read_text(path);
    try {
        return io::parse_dataset_csv(text);
    } catch (const InvalidArgument& e) {
        throw io::IoError("'" + path + "': " + e.what());
    }
}

Labeling read_labels(const std::string& path, int K) {
    const std::string text = io::read_text(path);
    try {
        return io::parse_labels_csv(text, K);
    } catch (const InvalidArgument& e) {
        throw io::IoError("'" + path + "': " + e.what());
    }
}

ConformalPipeline read_pipeline(const std::string& path) {
    json j = json::parse(io::read_text(path), nullptr, false);
    if (j.is_discarded()) throw io::IoError("'" + path + "' is not valid JSON");
    return io::pipeline_from_json(j);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

//------------------------------------------------------------------------------
// simulate
//------------------------------------------------------------------------------

int cmd_simulate(const Invocation& inv, std::ostream& out) {
    const json& c = inv.config;
    io::require_keys(c, {"generator", "n", "output_data", "output_labels"}, "simulate");
    if (!c.contains("generator")) throw ConfigError("simulate.generator: required");
    const GeneratorConfig gen = io::generator_from_json(c["generator"]);
    const int n = field<int>(c, "n", "simulate");
    if (n < 1) throw ConfigError("simulate.n: must be >= 1");
    const auto data_path = field<std::string>(c, "output_data", "simulate");
    const auto labels_path = field<std::string>(c, "output_labels", "simulate");

    const SimulatedData sim = generate_mixture_data(gen, n, inv.random_seed());
    io::write_text_atomic(data_path, io::dataset_csv(sim.X, inv.stamp()));
    io::write_text_atomic(labels_path, io::labels_csv(sim.Y, inv.stamp()));

    out << "generator: " << io::to_json(gen).dump() << "\n";
    out << "wrote " << n << " rows to " << data_path << " and " << labels_path << "\n";
    return kOk;
}

//------------------------------------------------------------------------------
// fit
//------------------------------------------------------------------------------

PipelineConfig pipeline_config_from_json(const json& c, int p) {
    const std::string cmd = "fit";
    PipelineConfig pc;
    pc.K = field<int>(c, "K", cmd);
    pc.alpha = field_or<double>(c, "alpha", pc.alpha, cmd);
    pc.train_fraction = field_or<double>(c, "train_fraction", pc.train_fraction, cmd);
    try {
        pc.mode = label_mode_from_string(field_or<std::string>(c, "mode", "stochastic", cmd));
    } catch (const InvalidArgument& e) {
        throw ConfigError(cmd + ".mode: " + e.what());
    }
    pc.skip_classifier = field_or<bool>(c, "skip_classifier", false, cmd);
    pc.clusterer = io::clusterer_spec_from_json(c.value("clusterer", json::object()), p);
    pc.classifier = io::classifier_spec_from_json(c.value("classifier", json::object()));
    if (pc.K < 1) throw ConfigError(cmd + ".K: must be >= 1");
    if (!(pc.alpha > 0.0 && pc.alpha < 1.0)) throw ConfigError(cmd + ".alpha: must lie in (0, 1)");
    if (!(pc.train_fraction > 0.0 && pc.train_fraction < 1.0))
        throw ConfigError(cmd + ".train_fraction: must lie in (0, 1)");
    if (pc.skip_classifier && pc.clusterer.kind == ClustererKind::Fcm)
        throw ConfigError(cmd + ".skip_classifier: needs a mixture clusterer");
    return pc;
}

int cmd_fit(const Invocation& inv, std::ostream& out) {
    const json& c = inv.config;
    io::require_keys(c, {"data", "labels", "K", "alpha", "train_fraction", "mode", "clusterer", "classifier",
                         "skip_classifier", "output"},
                     "fit");
    const auto data_path = field<std::string>(c, "data", "fit");
    const auto output = field<std::string>(c, "output", "fit");
    const Dataset X = read_dataset(data_path);
    const PipelineConfig pc = pipeline_config_from_json(c, X.p());

    const ConformalPipeline pipe =
        c.contains("labels")
            ? fit_conformal_from_labels(X, read_labels(field<std::string>(c, "labels", "fit"), pc.K), pc,
                                        inv.random_seed())
            : fit_conformal_pipeline(X, pc, inv.random_seed());

    json doc = io::to_json(pipe);
    doc["provenance"] = inv.provenance();
    io::write_text_atomic(output, dump(doc));

    std::vector<double> s = pipe.calibration_scores;
    std::sort(s.begin(), s.end());
    out << "threshold: " << io::format_double(pipe.threshold) << "\n";
    out << "alignment:";
    for (int k = 0; k < pipe.alignment.size(); ++k) out << ' ' << (k + 1) << "->" << (pipe.alignment(k) + 1);
    out << "\n";
    if (!s.empty()) {
        out << "calibration scores: n=" << s.size() << " min=" << io::format_double(s.front())
            << " median=" << io::format_double(s[s.size() / 2]) << " max=" << io::format_double(s.back()) << "\n";
    }
    out << "wrote " << output << "\n";
    return kOk;
}

//------------------------------------------------------------------------------
// predict-sets
//------------------------------------------------------------------------------

int cmd_predict_sets(const Invocation& inv, std::ostream& out) {
    const json& c = inv.config;
    io::require_keys(c, {"pipeline", "data", "output"}, "predict-sets");
    const ConformalPipeline pipe = read_pipeline(field<std::string>(c, "pipeline", "predict-sets"));
    const Dataset X = read_dataset(field<std::string>(c, "data", "predict-sets"));
    if (X.p() != pipe.classifier.p())
        throw ConfigError("predict-sets.data: " + std::to_string(X.p()) + " columns, pipeline expects " +
                          std::to_string(pipe.classifier.p()));
    const auto output = field<std::string>(c, "output", "predict-sets");
    const auto sets = predict_sets(pipe, X);
    io::write_text_atomic(output, io::sets_csv(sets, inv.stamp()));
    double mean = 0.0;
    for (const auto& s : sets) mean += s.size();
    out << "sets: " << sets.size() << " mean size " << io::format_double(sets.empty() ? 0.0 : mean / sets.size())
        << "\nwrote " << output << "\n";
    return kOk;
}

//------------------------------------------------------------------------------
// heatmap
//------------------------------------------------------------------------------

std::pair<double, double> range_field(const json& c, const char* key) {
    const auto r = field<std::vector<double>>(c, key, "heatmap");
    if (r.size() != 2 || !std::isfinite(r[0]) || !std::isfinite(r[1]) || !(r[0] <= r[1]))
        throw ConfigError(std::string("heatmap.") + key + ": expected [low, high] with low <= high");
    return {r[0], r[1]};
}

double grid_point(std::pair<double, double> r, int i, int steps) {
    if (steps == 1) return 0.5 * (r.first + r.second);
    return r.first + (r.second - r.first) * static_cast<double>(i) / static_cast<double>(steps - 1);
}

int cmd_heatmap(const Invocation& inv, std::ostream& out) {
    const json& c = inv.config;
    io::require_keys(c, {"pipeline", "x1_range", "x2_range", "resolution", "output"}, "heatmap");
    const ConformalPipeline pipe = read_pipeline(field<std::string>(c, "pipeline", "heatmap"));
    if (pipe.classifier.p() != 2)
        throw ConfigError("heatmap: the pipeline has p = " + std::to_string(pipe.classifier.p()) +
                          "; heatmaps need two-dimensional data");
    const auto r1 = range_field(c, "x1_range");
    const auto r2 = range_field(c, "x2_range");
    int n1 = 0, n2 = 0;
    if (!c.contains("resolution")) throw ConfigError("heatmap.resolution: required");
    if (c["resolution"].is_array()) {
        const auto r = field<std::vector<int>>(c, "resolution", "heatmap");
        if (r.size() != 2) throw ConfigError("heatmap.resolution: expected an integer or [n1, n2]");
        n1 = r[0];
        n2 = r[1];
    } else {
        n1 = n2 = field<int>(c, "resolution", "heatmap");
    }
    if (n1 < 1 || n2 < 1) throw ConfigError("heatmap.resolution: must be >= 1");
    const auto output = field<std::string>(c, "output", "heatmap");

    Matrix grid(static_cast<Eigen::Index>(n1) * n2, 2);
    Eigen::Index row = 0;
    for (int b = 0; b < n2; ++b)
        for (int a = 0; a < n1; ++a, ++row) {
            grid(row, 0) = grid_point(r1, a, n1);
            grid(row, 1) = grid_point(r2, b, n2);
        }
    const auto sets = predict_sets(pipe, Dataset(grid));

    std::string text = "# " + inv.stamp() + "\nx1,x2,set_size,members\n";
    for (Eigen::Index i = 0; i < grid.rows(); ++i) {
        const auto& s = sets[static_cast<std::size_t>(i)];
        text += io::format_double(grid(i, 0)) + ',' + io::format_double(grid(i, 1)) + ',' + std::to_string(s.size()) +
                ',' + io::members_field(s) + '\n';
    }
    io::write_text_atomic(output, text);
    out << "grid: " << n1 << " x " << n2 << "\nwrote " << output << "\n";
    return kOk;
}

//------------------------------------------------------------------------------
// diagnostics
//------------------------------------------------------------------------------

int cmd_diagnostics(const Invocation& inv, std::ostream& out) {
    const json& c = inv.config;
    if (c.contains("data"))
        throw ConfigError(
            "diagnostics: the estimation and stability errors are measured against the true posterior, which is "
            "unknown for real data; supply a 'generator' instead of 'data'");
    io::require_keys(c, {"generator", "clusterer", "n", "reps", "alpha", "output", "output_csv"}, "diagnostics");
    if (!c.contains("generator"))
        throw ConfigError("diagnostics.generator: required (diagnostics need a simulation with a known posterior)");
    const GeneratorConfig gen = io::generator_from_json(c["generator"]);
    const ClustererSpec spec = io::clusterer_spec_from_json(c.value("clusterer", json::object()), gen.p(), &gen);
    std::vector<int> ns;
    if (!c.contains("n")) throw ConfigError("diagnostics.n: required");
    if (c["n"].is_array()) ns = field<std::vector<int>>(c, "n", "diagnostics");
    else ns.push_back(field<int>(c, "n", "diagnostics"));
    if (ns.empty()) throw ConfigError("diagnostics.n: empty");
    for (int n : ns)
        if (n < 2) throw ConfigError("diagnostics.n: every sample size must be >= 2");
    const int reps = field_or<int>(c, "reps", 50, "diagnostics");
    if (reps < 1) throw ConfigError("diagnostics.reps: must be >= 1");
    const double alpha = field_or<double>(c, "alpha", 0.1, "diagnostics");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("diagnostics.alpha: must lie in (0, 1)");
    const auto output = field<std::string>(c, "output", "diagnostics");

    json reports = json::array();
    std::string csv = "# " + inv.stamp() + "\nn,pool_size,reps,E_hat,E_se,S_hat_upper,S_se,bound_rhs,failures\n";
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const DiagnosticsReport r = run_diagnostics(spec, gen, ns[i], reps, alpha, inv.random_seed().child(i));
        reports.push_back(io::to_json(r));
        csv += std::to_string(r.n) + ',' + std::to_string(2 * r.n) + ',' + std::to_string(r.reps) + ',' +
               io::format_double(r.E_hat) + ',' + io::format_double(r.E_se) + ',' + io::format_double(r.S_hat_upper) +
               ',' + io::format_double(r.S_se) + ',' + io::format_double(r.bound_rhs) + ',' +
               std::to_string(r.failures) + '\n';
        out << "n=" << r.n << " E_hat=" << io::format_double(r.E_hat) << " S_hat_upper="
            << io::format_double(r.S_hat_upper) << " bound_rhs(pool " << 2 * r.n
            << ")=" << io::format_double(r.bound_rhs) << "\n";
    }
    json doc = {{"format", "confclust/diagnostics"},
                {"version", io::kFormatVersion},
                {"provenance", inv.provenance()},
                {"alpha", alpha},
                {"generator", io::to_json(gen)},
                {"clusterer", io::to_json(spec)},
                {"reports", reports}};
    io::write_text_atomic(output, dump(doc));
    if (c.contains("output_csv")) io::write_text_atomic(field<std::string>(c, "output_csv", "diagnostics"), csv);
    out << "wrote " << output << "\n";
    return kOk;
}

//------------------------------------------------------------------------------
// experiment
//------------------------------------------------------------------------------

int cmd_experiment(const Invocation& inv, std::ostream& out, std::ostream& err) {
    const json& c = inv.config;
    ExperimentConfig cfg = io::experiment_config_from_json(c);
    cfg.seed = inv.random_seed();
    const auto tidy = field<std::string>(c, "output_tidy", "experiment");
    const auto aggregate = field<std::string>(c, "output_aggregate", "experiment");

    const ExperimentResult res = run_experiment(cfg);
    io::write_text_atomic(tidy, io::experiment_tidy_csv(res, inv.stamp()));
    io::write_text_atomic(aggregate, io::experiment_aggregate_csv(res, inv.stamp()));

    for (const auto& cell : res.cells) {
        out << to_string(cfg.sweep) << '=' << io::format_double(cell.sweep_value) << ' ' << to_string(cell.method)
            << " coverage=" << io::format_double(cell.mean_coverage) << " size="
            << io::format_double(cell.mean_set_size) << " ok=" << cell.reps_ok << " failed=" << cell.failures
            << (cell.valid ? "" : " INVALID") << "\n";
    }
    out << "wrote " << tidy << " and " << aggregate << "\n";
    if (!res.all_valid()) {
        err << "error: at least one cell exceeded the replication failure budget\n";
        return kFailure;
    }
    return kOk;
}

//------------------------------------------------------------------------------
// dispatch
//------------------------------------------------------------------------------

struct CommandInfo {
    const char* name;
    const char* help;
    bool stochastic;
};

constexpr CommandInfo kCommands[] = {
    {"simulate", "Draw a labelled sample from a known mixture", true},
    {"fit", "Fit a split conformal clustering pipeline", true},
    {"predict-sets", "Confidence sets for new points from a fitted pipeline", false},
    {"heatmap", "Confidence sets on a regular two-dimensional grid", false},
    {"diagnostics", "Estimation and stability errors against a known posterior", true},
    {"experiment", "Replicated simulation sweep", true},
};

/// Flags that are shorthand for a top-level config key.
struct Shorthand {
    const char* flag;
    const char* key;
    const char* help;
};

const std::map<std::string, std::vector<Shorthand>>& shorthands() {
    static const std::map<std::string, std::vector<Shorthand>> table = {
        {"simulate",
         {{"--n", "n", "Sample size"},
          {"--out-data", "output_data", "Features CSV path"},
          {"--out-labels", "output_labels", "Labels CSV path"}}},
        {"fit",
         {{"--data", "data", "Features CSV path"},
          {"--labels", "labels", "Known labels CSV (exchangeable control)"},
          {"--K", "K", "Number of clusters"},
          {"--alpha", "alpha", "Miscoverage level"},
          {"--mode", "mode", "stochastic or naive-hard"},
          {"--out", "output", "Pipeline JSON path"}}},
        {"predict-sets",
         {{"--pipeline", "pipeline", "Pipeline JSON path"},
          {"--data", "data", "Features CSV path"},
          {"--out", "output", "Sets CSV path"}}},
        {"heatmap",
         {{"--pipeline", "pipeline", "Pipeline JSON path"},
          {"--resolution", "resolution", "Grid points per axis"},
          {"--out", "output", "Grid CSV path"}}},
        {"diagnostics",
         {{"--n", "n", "Clustering sample size (or JSON array)"},
          {"--reps", "reps", "Replications"},
          {"--alpha", "alpha", "Miscoverage level"},
          {"--out", "output", "Report JSON path"}}},
        {"experiment",
         {{"--reps", "reps", "Replications per cell"},
          {"--threads", "threads", "Worker threads"},
          {"--out-tidy", "output_tidy", "Tidy CSV path"},
          {"--out-aggregate", "output_aggregate", "Aggregate CSV path"}}},
    };
    return table;
}

int dispatch(const Invocation& inv, std::ostream& out, std::ostream& err) {
    if (inv.command == "simulate") return cmd_simulate(inv, out);
    if (inv.command == "fit") return cmd_fit(inv, out);
    if (inv.command == "predict-sets") return cmd_predict_sets(inv, out);
    if (inv.command == "heatmap") return cmd_heatmap(inv, out);
    if (inv.command == "diagnostics") return cmd_diagnostics(inv, out);
    return cmd_experiment(inv, out, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Split conformal confidence sets for cluster labels"};
    app.require_subcommand(1);
    app.set_version_flag("--version", io::kToolVersion);

    struct Parsed {
        std::string config_path;
        std::vector<std::string> sets;
        std::optional<std::uint64_t> seed;
        std::map<std::string, std::string> shorthand;
    };
    std::map<std::string, Parsed> parsed;
    std::map<std::string, CLI::App*> subs;
    for (const auto& info : kCommands) {
        auto* sub = app.add_subcommand(info.name, info.help);
        Parsed& p = parsed[info.name];
        sub->add_option("--config", p.config_path, "JSON config file");
        sub->add_option("--set", p.sets, "Override a config entry: key.path=value (value parsed as JSON when possible)");
        if (info.stochastic) sub->add_option("--seed", p.seed, "Random seed")->required();
        for (const auto& sh : shorthands().at(info.name)) sub->add_option(sh.flag, p.shorthand[sh.key], sh.help);
        subs[info.name] = sub;
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        for (const auto& [name, sub] : subs)
            if (sub->parsed()) {
                out << sub->help();
                return kOk;
            }
        out << app.help();
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << io::kToolVersion << "\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }

    Invocation inv;
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) inv.command = name;
    const Parsed& p = parsed[inv.command];
    inv.seed = p.seed;

    try {
        inv.config = load_config(p.config_path);
        for (const auto& [key, value] : p.shorthand)
            if (!value.empty()) inv.config[key] = parse_override_value(value);
        for (const auto& s : p.sets) apply_override(inv.config, s);
        json hashed = {{"command", inv.command}, {"config", inv.config}};
        if (inv.seed) hashed["seed"] = *inv.seed;
        inv.hash = io::hex64(io::fnv1a64(hashed.dump()));
        return dispatch(inv, out, err);
    } catch (const io::IoError& e) {
        err << "error: " << e.what() << "\n";
        return kIoError;
    } catch (const PipelineError& e) {
        err << "error: fit failed at stage '" << e.stage() << "': " << e.what() << "\n";
        return kFitError;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const json::exception& e) {
        err << "error: malformed document: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::runtime_error& e) {
        err << "error: " << e.what() << "\n";
        return kFitError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace confclust::cli
