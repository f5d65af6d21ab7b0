// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: acceptance [--only N[,N...]] [--expect-fail N[,N...]] [--threads T]
// The exit status is nonzero when a criterion fails that is not listed in
// --expect-fail.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "commands.hpp"
#include "confclust/evaluate.hpp"
#include "confclust/io.hpp"

using namespace confclust;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

int g_threads = 1;

ExperimentConfig base_experiment(double sigma2) {
    ExperimentConfig cfg;
    cfg.generator = default_generator(GeneratorFamily::Gaussian, 2, 3, sigma2);
    cfg.sweep = SweepKind::Variance;
    cfg.values = {sigma2};
    cfg.n = 1000;
    cfg.alpha = 0.1;
    cfg.test_size = 2000;
    cfg.threads = g_threads;
    return cfg;
}

ProbVector random_prob(Rng& rng, int K) {
    std::vector<double> w(static_cast<std::size_t>(K));
    for (auto& v : w) v = rng.uniform() < 0.2 ? 0.0 : -std::log(1.0 - rng.uniform());
    if (std::accumulate(w.begin(), w.end(), 0.0) == 0.0) w[rng.index(w.size())] = 1.0;
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& v : w) v /= s;
    return ProbVector(w);
}

bool on_simplex(const ProbVector& p) {
    double s = 0.0;
    for (double v : p.values()) {
        if (!(v >= 0.0 && v <= 1.0)) return false;
        s += v;
    }
    return std::abs(s - 1.0) <= 1e-9;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

/// Spearman correlation with a two-sided p-value from the t approximation.
/// Returns nan when either variable is constant.
std::pair<double, double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n, my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return {std::nan(""), std::nan("")};
    const double r = sxy / std::sqrt(sxx * syy);
    if (std::abs(r) >= 1.0) return {r, 0.0};
    const double t = r * std::sqrt((n - 2.0) / (1.0 - r * r));
    const boost::math::students_t dist(n - 2.0);
    return {r, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)))};
}

//------------------------------------------------------------------------------

Outcome exchangeable_sanity() {
    const auto t0 = Clock::now();
    // At the default spread the Bayes rule is right for ~99% of points, so over 90% of
    // scores are exactly 0 and the threshold sits on a tie; a wider spread keeps the
    // 0.9 quantile among continuous scores.
    ExperimentConfig cfg = base_experiment(6.0);
    cfg.methods = {Method::TrueLabels};
    cfg.reps = 500;
    cfg.seed = {1001, 0};
    const auto res = run_experiment(cfg);
    const auto& c = res.cells.at(0);
    const double secs = seconds_since(t0);
    const bool pass = c.valid && c.mean_coverage >= 0.90 - 0.01 && c.mean_coverage <= 0.902 + 0.01 && secs < 120.0;
    return {pass, "mean coverage " + fmt(c.mean_coverage) + " (se " + fmt(c.se_coverage) + ") over " +
                      std::to_string(c.reps_ok) + " reps, band [0.89, 0.912], " + fmt(secs, 1) + " s"};
}

struct Figure3 {
    CellSummary stochastic, naive, cutoff;
    double seconds = 0.0;
};

const Figure3& figure3_cell() {
    static const Figure3 cached = [] {
        const auto t0 = Clock::now();
        ExperimentConfig cfg = base_experiment(1.5);
        cfg.methods = {Method::Stochastic, Method::NaiveHard, Method::Cutoff};
        cfg.reps = 100;
        cfg.seed = {2002, 0};
        const auto res = run_experiment(cfg);
        Figure3 f{res.cell(1.5, Method::Stochastic), res.cell(1.5, Method::NaiveHard), res.cell(1.5, Method::Cutoff),
                  0.0};
        f.seconds = seconds_since(t0);
        return f;
    }();
    return cached;
}

Outcome stochastic_vs_naive() {
    const auto& f = figure3_cell();
    const bool pass = f.stochastic.valid && f.naive.valid && f.stochastic.mean_coverage >= 0.88 &&
                      f.naive.mean_coverage <= 0.88 && f.naive.mean_coverage < f.stochastic.mean_coverage &&
                      f.seconds < 900.0;
    return {pass, "stochastic coverage " + fmt(f.stochastic.mean_coverage) + " (need >= 0.88), naive-hard " +
                      fmt(f.naive.mean_coverage) + " (need <= 0.88 and below stochastic), " + fmt(f.seconds, 1) +
                      " s"};
}

Outcome cutoff_conservatism() {
    const auto& f = figure3_cell();
    const double ratio = f.cutoff.mean_set_size / f.stochastic.mean_set_size;
    return {f.cutoff.valid && ratio >= 1.05, "cutoff mean size " + fmt(f.cutoff.mean_set_size) + " vs stochastic " +
                                                 fmt(f.stochastic.mean_set_size) + " (ratio " + fmt(ratio) +
                                                 ", need >= 1.05)"};
}

Outcome size_shrinks_with_n() {
    ExperimentConfig cfg = base_experiment(1.5);
    cfg.sweep = SweepKind::SampleSize;
    cfg.values = {250, 500, 1000, 2000};
    cfg.methods = {Method::Stochastic};
    cfg.reps = 50;
    cfg.seed = {4004, 0};
    const auto res = run_experiment(cfg);
    std::vector<double> ns, sizes;
    for (const auto& r : res.records)
        if (r.ok) {
            ns.push_back(r.sweep_value);
            sizes.push_back(r.mean_set_size);
        }
    const auto [rho, p] = spearman(ns, sizes);
    std::string means;
    for (const auto& c : res.cells) means += " " + fmt(c.mean_set_size);
    const bool pass = res.all_valid() && std::isfinite(rho) && rho < 0.0 && p < 0.05;
    return {pass, "Spearman rho " + (std::isfinite(rho) ? fmt(rho) : std::string("undefined (constant sizes)")) +
                      ", p " + (std::isfinite(p) ? fmt(p, 6) : std::string("n/a")) + "; mean sizes by n:" + means};
}

Outcome consistency_diagnostic() {
    const auto gen = default_generator(GeneratorFamily::Gaussian, 2, 3, 1.5);
    ClustererSpec spec;
    spec.em.tol = 1e-10;
    spec.em.max_iter = 5000;
    const std::vector<int> ns{250, 500, 1000, 2000};
    std::vector<DiagnosticsReport> reps;
    for (std::size_t i = 0; i < ns.size(); ++i) reps.push_back(run_diagnostics(spec, gen, ns[i], 50, 0.1, {5005, i}));
    bool pass = true;
    std::string detail = "E_hat / bound:";
    for (std::size_t i = 0; i < reps.size(); ++i) {
        detail += " n=" + std::to_string(ns[i]) + ":" + fmt(reps[i].E_hat) + "/" + fmt(reps[i].bound_rhs);
        if (i > 0) pass = pass && reps[i].E_hat < reps[i - 1].E_hat && reps[i].bound_rhs > reps[i - 1].bound_rhs;
        pass = pass && reps[i].reps >= 50 && reps[i].bound_rhs < 0.9;
    }
    return {pass, detail};
}

Outcome stability_bound_soundness() {
    Rng rng({6006, 0});
    int violations = 0;
    double worst = -1e300;
    for (int t = 0; t < 200; ++t) {
        const int n = 2 + static_cast<int>(rng.index(6));
        const int K = 2 + static_cast<int>(rng.index(2));
        const int m = n - 1;
        Matrix a(m, K), b(m, K);
        const double mix = rng.uniform();
        for (int j = 0; j < m; ++j) {
            const ProbVector u = random_prob(rng, K), v = random_prob(rng, K);
            for (int k = 0; k < K; ++k) {
                a(j, k) = u[k];
                b(j, k) = (1.0 - mix) * u[k] + mix * v[k];
            }
        }
        const SoftLabelMatrix A(a), B(b);
        std::vector<double> h2;
        for (int j = 0; j < m; ++j) h2.push_back(hellinger_sq(A.row(j), B.row(j)));
        const double exact = exact_product_l1(A, B), bound = product_l1_bound(h2);
        worst = std::max(worst, exact - bound);
        violations += exact > bound + 1e-12;
    }
    return {violations == 0, std::to_string(violations) + " violations in 200 draws (max exact - bound " +
                                 fmt(worst, 6) + ")"};
}

Outcome oracle_equivalences() {
    Rng rng({7007, 0});
    int cost_mismatch = 0, perm_mismatch = 0;
    for (int t = 0; t < 1000; ++t) {
        const int K = 1 + static_cast<int>(rng.index(6));
        const int range = t % 3 == 0 ? 3 : 100;
        CostMatrix c(K);
        for (int k = 0; k < K; ++k)
            for (int j = 0; j < K; ++j) c(k, j) = static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(range)));
        const auto h = solve_assignment(c), b = brute_force_assignment(c);
        cost_mismatch += c.cost(h) != c.cost(b);
        perm_mismatch += !(h == b);
    }
    int oracle_mismatch = 0;
    for (int t = 0; t < 200; ++t) {
        const int K = 2 + static_cast<int>(rng.index(5));
        const int n = 10 + static_cast<int>(rng.index(40));
        std::vector<ConfidenceSet> sets;
        std::vector<int> y(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            std::vector<int> mem;
            for (int k = 0; k < K; ++k)
                if (rng.uniform() < 0.3) mem.push_back(k);
            if (mem.empty()) mem.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(K))));
            sets.emplace_back(mem);
            y[static_cast<std::size_t>(i)] = static_cast<int>(rng.index(static_cast<std::size_t>(K)));
        }
        const Labeling truth(y, K);
        std::vector<int> perm(static_cast<std::size_t>(K));
        std::iota(perm.begin(), perm.end(), 0);
        double best = -1.0;
        Permutation arg;
        do {
            const Permutation p(perm);
            const double cov = coverage_under(sets, truth, p);
            if (cov > best) {
                best = cov;
                arg = p;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        oracle_mismatch += !(oracle_permutation(sets, truth) == arg);
    }
    const bool pass = cost_mismatch == 0 && perm_mismatch == 0 && oracle_mismatch == 0;
    return {pass, "assignment: " + std::to_string(cost_mismatch) + " objective and " + std::to_string(perm_mismatch) +
                      " permutation mismatches in 1000; oracle permutation: " + std::to_string(oracle_mismatch) +
                      " mismatches in 200"};
}

Outcome invariant_suites() {
    Rng rng({8008, 0});
    int aps_violations = 0;
    std::vector<double> scores(99);
    for (int t = 0; t < 10000; ++t) {
        const int K = 1 + static_cast<int>(rng.index(8));
        const ProbVector pi = random_prob(rng, K);
        for (auto& s : scores) s = rng.uniform();
        const double a1 = 0.005 + 0.99 * rng.uniform(), a2 = 0.005 + 0.99 * rng.uniform();
        const double lo = std::min(a1, a2), hi = std::max(a1, a2);
        const auto wide = prediction_set(pi, calibration_threshold(scores, lo));
        const auto narrow = prediction_set(pi, calibration_threshold(scores, hi));
        bool ok = !narrow.empty() && narrow.contains(pi.argmax());
        for (int k : narrow.members()) ok = ok && wide.contains(k);
        aps_violations += !ok;
    }

    int em_violations = 0, em_fits = 0;
    const MixtureFamily families[] = {MixtureFamily::GaussianFull, MixtureFamily::GaussianDiag,
                                      MixtureFamily::GammaIndependent};
    for (int t = 0; t < 50; ++t) {
        const MixtureFamily fam = families[t % 3];
        const int K = 2 + static_cast<int>(rng.index(3));
        const int p = 1 + static_cast<int>(rng.index(3));
        const double sigma2 = 0.5 + 4.0 * rng.uniform();
        Matrix centers(K, p);
        for (int k = 0; k < K; ++k)
            for (int j = 0; j < p; ++j) centers(k, j) = 4.0 + 12.0 * rng.uniform();
        GeneratorConfig gen;
        gen.family = fam == MixtureFamily::GammaIndependent ? GeneratorFamily::Gamma : GeneratorFamily::Gaussian;
        gen.centers = centers;
        gen.sigma2 = sigma2;
        gen.weights = ProbVector::uniform(K);
        const auto sim = generate_mixture_data(gen, 100 + static_cast<int>(rng.index(300)), {rng(), 0});
        EmOptions o;
        o.init = t % 2 == 0 ? EmInit::KMeansPlusPlus : EmInit::RandomResponsibility;
        o.restarts = 2;
        try {
            const auto m = fit_mixture_em(sim.X, K, fam, o, {rng(), 1});
            const auto& tr = m.fit_log().trace;
            for (std::size_t i = 1; i < tr.size(); ++i)
                em_violations += tr[i] < tr[i - 1] - 1e-8 * std::max(1.0, std::abs(tr[i - 1]));
            ++em_fits;
        } catch (const DegenerateFit&) {
        }
    }

    int prob_violations = 0, prob_checks = 0;
    const auto gen = default_generator(GeneratorFamily::Gaussian, 2, 3, 1.5);
    const auto sim = generate_mixture_data(gen, 300, {8009, 0});
    const auto gmm = fit_mixture_em(sim.X, 3, MixtureFamily::GaussianFull, {}, {1, 0});
    const auto diag = fit_mixture_em(sim.X, 3, MixtureFamily::GaussianDiag, {}, {1, 0});
    const auto gam_gen = default_generator(GeneratorFamily::Gamma, 2, 3, 1.5);
    const auto gam_sim = generate_mixture_data(gam_gen, 300, {8010, 0});
    const auto gam = fit_mixture_em(gam_sim.X, 3, MixtureFamily::GammaIndependent, {}, {1, 0});
    const auto fcm = fit_fcm(sim.X, 3, {}, {1, 0});
    ClassifierSpec knn;
    knn.kind = ClassifierKind::KnnSoft;
    ClassifierSpec lin;
    lin.random_features = false;
    const std::vector<ClassifierModel> clfs{fit_soft_classifier(sim.X, sim.Y, 3, {}, {2, 0}),
                                            fit_soft_classifier(sim.X, sim.Y, 3, lin, {2, 0}),
                                            fit_soft_classifier(sim.X, sim.Y, 3, knn, {2, 0})};
    for (int t = 0; t < 5000; ++t) {
        Vector x(2);
        const double scale = std::pow(10.0, -3.0 + 10.0 * rng.uniform());
        x << scale * rng.normal(), scale * rng.normal();
        Vector xp = x.cwiseAbs().array() + 1e-300;
        std::vector<ProbVector> outs{mixture_posterior(gmm, x), mixture_posterior(diag, x), mixture_posterior(gam, xp),
                                     fcm_membership(fcm, x), true_posterior(gen, x), true_posterior(gam_gen, xp)};
        for (const auto& c : clfs) outs.push_back(predict_proba(c, x));
        for (const auto& o : outs) {
            prob_violations += !on_simplex(o);
            ++prob_checks;
        }
    }
    const bool pass = aps_violations == 0 && em_violations == 0 && em_fits >= 45 && prob_violations == 0;
    return {pass, "APS: " + std::to_string(aps_violations) + "/10000 violations; EM: " + std::to_string(em_violations) +
                      " decreases over " + std::to_string(em_fits) + " fits; simplex: " +
                      std::to_string(prob_violations) + "/" + std::to_string(prob_checks) + " violations"};
}

Outcome fuzziness_sweep() {
    ExperimentConfig cfg = base_experiment(1.5);
    cfg.sweep = SweepKind::Fuzziness;
    cfg.values = {1.4, 1.7, 2.0};
    cfg.methods = {Method::Stochastic};
    cfg.reps = 100;
    cfg.clusterer.kind = ClustererKind::Fcm;
    cfg.seed = {9009, 0};
    const auto res = run_experiment(cfg);
    const auto& a = res.cell(1.4, Method::Stochastic);
    const auto& b = res.cell(1.7, Method::Stochastic);
    const auto& c = res.cell(2.0, Method::Stochastic);
    const bool pass = res.all_valid() && a.mean_coverage < b.mean_coverage && c.mean_set_size > b.mean_set_size;
    return {pass, "coverage m=1.4/1.7/2.0: " + fmt(a.mean_coverage) + "/" + fmt(b.mean_coverage) + "/" +
                      fmt(c.mean_coverage) + "; size: " + fmt(a.mean_set_size) + "/" + fmt(b.mean_set_size) + "/" +
                      fmt(c.mean_set_size)};
}

Outcome cli_determinism() {
    const fs::path dir = fs::temp_directory_path() / "confclust_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto p = [&](const std::string& name) { return (dir / name).string(); };
    const std::string gen = R"({"family":"gaussian","p":2,"K":3,"sigma2":1.5})";

    struct Step {
        std::vector<std::string> args;
        std::vector<std::string> outputs;
    };
    const std::vector<Step> steps{
        {{"simulate", "--seed", "1", "--n", "400", "--set", "generator=" + gen, "--out-data", p("x.csv"),
          "--out-labels", p("y.csv")},
         {"x.csv", "y.csv"}},
        {{"fit", "--seed", "2", "--data", p("x.csv"), "--K", "3", "--out", p("pipe.json")}, {"pipe.json"}},
        {{"fit", "--seed", "2", "--data", p("x.csv"), "--K", "3", "--mode", "naive-hard", "--set",
          "classifier.kind=knn-soft", "--out", p("pipe_knn.json")},
         {"pipe_knn.json"}},
        {{"predict-sets", "--pipeline", p("pipe.json"), "--data", p("x.csv"), "--out", p("sets.csv")}, {"sets.csv"}},
        {{"heatmap", "--pipeline", p("pipe.json"), "--set", "x1_range=[-7,7]", "--set", "x2_range=[-7,7]",
          "--resolution", "25", "--out", p("grid.csv")},
         {"grid.csv"}},
        {{"diagnostics", "--seed", "3", "--set", "generator=" + gen, "--n", "[60,120]", "--reps", "3", "--out",
          p("diag.json"), "--set", "output_csv=" + p("diag.csv")},
         {"diag.json", "diag.csv"}},
        {{"experiment", "--seed", "4", "--set", "generator=" + gen, "--set",
          R"(sweep={"kind":"sigma2","values":[1.0,2.0]})", "--set", R"(methods=["stochastic","naive-hard","cutoff"])",
          "--set", "n=200", "--set", "test_size=200", "--reps", "2", "--threads", "2", "--out-tidy", p("tidy.csv"),
          "--out-aggregate", p("agg.csv")},
         {"tidy.csv", "agg.csv"}},
    };
    std::vector<std::string> first;
    int differing = 0, failures = 0, files = 0;
    std::ostringstream sink;
    for (int round = 0; round < 2; ++round) {
        int f = 0;
        for (const auto& s : steps) {
            if (confclust::cli::run(s.args, sink, sink) != 0) ++failures;
            for (const auto& o : s.outputs) {
                const std::string text = fs::exists(p(o)) ? io::read_text(p(o)) : std::string();
                if (round == 0) first.push_back(text);
                else differing += text != first[static_cast<std::size_t>(f)];
                ++f;
            }
        }
        files = f;
    }
    fs::remove_all(dir);
    return {differing == 0 && failures == 0, std::to_string(files) + " output files from " +
                                                 std::to_string(steps.size()) + " commands, " +
                                                 std::to_string(differing) + " differ between runs, " +
                                                 std::to_string(failures) + " command failures"};
}

std::set<int> parse_list(const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');)
        if (!tok.empty()) out.insert(std::stoi(tok));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only, expect_fail;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) only = parse_list(argv[++i]);
        else if (a == "--expect-fail" && i + 1 < argc) expect_fail = parse_list(argv[++i]);
        else if (a == "--threads" && i + 1 < argc) g_threads = std::max(1, std::stoi(argv[++i]));
        else {
            std::cerr << "usage: acceptance [--only N,...] [--expect-fail N,...] [--threads T]\n";
            return 2;
        }
    }

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"exchangeable sanity", exchangeable_sanity},
        {"stochastic vs naive coverage", stochastic_vs_naive},
        {"cutoff conservatism", cutoff_conservatism},
        {"set size shrinks with n", size_shrinks_with_n},
        {"consistency diagnostic", consistency_diagnostic},
        {"stability bound soundness", stability_bound_soundness},
        {"oracle equivalences", oracle_equivalences},
        {"invariant suites", invariant_suites},
        {"fuzziness sweep", fuzziness_sweep},
        {"CLI determinism", cli_determinism},
    };

    int unexpected = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail;
        if (!o.pass && expect_fail.count(id)) std::cout << " (known failure)";
        std::cout << std::endl;
        if (!o.pass && !expect_fail.count(id)) ++unexpected;
    }
    return unexpected == 0 ? 0 : 1;
}
