#include "bsdelab/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bsdelab/factories.hpp"
#include "bsdelab/serialize.hpp"

namespace bsdelab {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

constexpr const char* kVersion = "0.1.0";

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

int thread_cap() {
    if (const char* env = std::getenv("BSDE_LAB_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return 1;
}

std::vector<std::uint64_t> fork_seeds(std::uint64_t master, int n) {
    Rng rng(master);
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n));
    for (auto& s : seeds) s = rng.fork_seed();
    return seeds;
}

// Trials are independent; results land in index-ordered slots so the
// aggregation is identical no matter how many workers ran. A crashing trial
// aborts the run with its seed in the message.
template <class Fn>
void parallel_trials_seeded(const std::vector<std::uint64_t>& seeds, Fn&& fn) {
    const int n = static_cast<int>(seeds.size());
    auto guarded = [&](int i) {
        try {
            fn(i, seeds[static_cast<std::size_t>(i)]);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw std::runtime_error("trial " + std::to_string(i) + " (seed " +
                                     std::to_string(seeds[static_cast<std::size_t>(i)]) +
                                     ") crashed: " + e.what());
        }
    };
    const int workers = std::min(thread_cap(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) guarded(i);
        return;
    }
    std::vector<std::future<void>> futs;
    std::atomic<int> next{0};
    futs.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        futs.push_back(std::async(std::launch::async, [&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) guarded(i);
        }));
    for (auto& f : futs) f.get();
}

struct CsvTable {
    std::string header;
    std::vector<std::string> rows;

    std::string body() const {
        std::string out = header + "\n";
        for (const auto& r : rows) out += r + "\n";
        return out;
    }
};

struct Outputs {
    std::vector<std::pair<std::string, std::string>> files;  // name -> content
    std::map<std::string, bool> verdicts;

    void add_file(std::string name, std::string content) {
        files.emplace_back(std::move(name), std::move(content));
    }
    void verdict(const std::string& name, bool pass) { verdicts[name] = pass; }
    bool all_pass() const {
        for (const auto& [k, v] : verdicts)
            if (!v) return false;
        return true;
    }
};

// ----- config schemas ---------------------------------------------------------

const std::set<std::string> kCommonKeys = {
    "experiment", "seed", "out", "trials", "solver.tol", "solver.beta", "solver.max_iters",
};

const std::set<std::string> kModelKeys = {
    "grid.T", "grid.steps", "grid.branching", "model.components", "model.randomize_probs",
    "model.brownian.dims", "model.brownian.scale", "model.default.lambda",
    "model.poisson.lambda",
};

const std::set<std::string> kProblemKeys = {
    "problem.generator", "problem.generator.value", "problem.generator.rate",
    "problem.generator.a", "problem.generator.b", "problem.generator.c", "problem.generator.d",
    "problem.generator.bw", "problem.generator.cj", "problem.generator.ycoeffs",
    "problem.generator.zcoeffs", "problem.generator.clamp", "problem.eta", "problem.eta.value",
    "problem.d", "problem.d.slope",
};

std::set<std::string> merged(std::initializer_list<const std::set<std::string>*> parts,
                             std::initializer_list<std::string> extra = {}) {
    std::set<std::string> out;
    for (const auto* p : parts) out.insert(p->begin(), p->end());
    for (const auto& e : extra) out.insert(e);
    return out;
}

// ----- model / problem construction from config ---------------------------------

struct BuiltModel {
    BlockSpace block;
    MartingaleModel model;
};

BuiltModel model_from_config(const RunConfig& cfg, Rng& rng) {
    BlockSpaceSpec bs;
    bs.T = cfg.get_double("grid.T", 1.0);
    bs.steps = cfg.get_int("grid.steps", 10);
    bs.randomize_probs = cfg.get_bool("model.randomize_probs", false);

    const std::string components = cfg.get_string("model.components", "brownian");
    const bool has_brownian = components.find("brownian") != std::string::npos;
    const bool has_default = components.find("default") != std::string::npos;
    const bool has_poisson = components.find("poisson") != std::string::npos;
    if (has_default && has_poisson)
        throw ConfigError("model.components: pick one jump component");
    const int dims = has_brownian ? cfg.get_int("model.brownian.dims", 1) : 0;

    bs.cont_branching = cfg.get_int("grid.branching", dims > 0 ? dims + 1 : 1);
    bs.jump = has_default ? JumpLayout::Kind::Default
                          : (has_poisson ? JumpLayout::Kind::Poisson : JumpLayout::Kind::None);
    if (bs.jump != JumpLayout::Kind::None)
        bs.lambda = cfg.get_double_list(has_default ? "model.default.lambda"
                                                    : "model.poisson.lambda");

    BuiltModel out{build_block_space(bs, &rng), {}};
    MartingaleModel cont =
        (dims > 0) ? build_brownian_proxy(out.block.space, dims,
                                          cfg.get_double("model.brownian.scale", 1.0),
                                          &out.block.layout)
                   : make_trivial_model(out.block.space);
    MartingaleModel jump = make_trivial_model(out.block.space);
    if (has_default)
        jump = build_default_martingale(out.block.space, out.block.lambda_per_step,
                                        &out.block.layout);
    else if (has_poisson)
        jump = build_poisson_martingale(out.block.space, out.block.lambda_per_step,
                                        &out.block.layout);
    out.model = assemble_block_model(cont, jump);
    return out;
}

Generator generator_from_config(const RunConfig& cfg, const MartingaleModel& model) {
    const std::string name = cfg.get_string("problem.generator", "zero");
    if (name == "zero") return make_zero_generator();
    if (name == "constant") return make_constant_generator(cfg.get_double("problem.generator.value", 1.0));
    if (name == "discount") return make_discount_generator(cfg.get_double("problem.generator.rate", 0.1));
    if (name == "linear") {
        const auto k = static_cast<std::size_t>(model.k_continuous);
        const auto nj = static_cast<std::size_t>(model.dim - model.k_continuous);
        Vec c(k), d(nj);
        if (cfg.has("problem.generator.c")) {
            const auto vals = cfg.get_double_list("problem.generator.c");
            for (std::size_t j = 0; j < k && j < vals.size(); ++j) c[j] = vals[j];
        }
        if (cfg.has("problem.generator.d")) {
            const auto vals = cfg.get_double_list("problem.generator.d");
            for (std::size_t j = 0; j < nj && j < vals.size(); ++j) d[j] = vals[j];
        }
        return make_linear_const_generator(cfg.get_double("problem.generator.a", 0.0),
                                           cfg.get_double("problem.generator.b", 0.0), c, d);
    }
    if (name == "lambda_admissible")
        return make_lambda_admissible_generator(cfg.get_double("problem.generator.a", 0.0),
                                                cfg.get_double("problem.generator.bw", 0.0),
                                                cfg.get_double("problem.generator.cj", 0.0),
                                                model.k_continuous, model.dim);
    if (name == "custom_polynomial") {
        std::vector<double> yc = cfg.has("problem.generator.ycoeffs")
                                     ? cfg.get_double_list("problem.generator.ycoeffs")
                                     : std::vector<double>{0.0};
        Vec zc(static_cast<std::size_t>(model.dim));
        if (cfg.has("problem.generator.zcoeffs")) {
            const auto vals = cfg.get_double_list("problem.generator.zcoeffs");
            for (std::size_t j = 0; j < zc.size() && j < vals.size(); ++j) zc[j] = vals[j];
        }
        return make_custom_polynomial_generator(yc, zc,
                                                cfg.get_double("problem.generator.clamp", 10.0));
    }
    throw ConfigError("problem.generator: unknown generator '" + name + "'");
}

std::vector<double> eta_from_config(const RunConfig& cfg, const MartingaleModel& model, Rng& rng) {
    const std::string kind = cfg.get_string("problem.eta", "constant");
    const double value = cfg.get_double("problem.eta.value", 1.0);
    const auto& leaves = model.space->leaves();
    std::vector<double> eta(leaves.size(), 0.0);
    if (kind == "constant") {
        for (double& v : eta) v = value;
    } else if (kind == "indicator_survival") {
        if (model.jump_state.empty())
            throw ConfigError("problem.eta: indicator_survival needs a jump component");
        for (std::size_t i = 0; i < leaves.size(); ++i)
            eta[i] = model.jump_state[leaves[i]] < 0.5 ? value : 0.0;
    } else if (kind == "path_sum") {
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < static_cast<std::size_t>(model.dim); ++j)
                acc += model.paths[leaves[i]][j];
            eta[i] = value * acc;
        }
    } else if (kind == "random") {
        eta = make_random_eta(rng, model, value);
    } else {
        throw ConfigError("problem.eta: unknown payoff '" + kind + "'");
    }
    return eta;
}

ScalarAdapted adjustment_from_config(const RunConfig& cfg, const MartingaleModel& model, Rng& rng) {
    const std::string kind = cfg.get_string("problem.d", "zero");
    const SpacePtr& space = model.space;
    if (kind == "zero") return ScalarAdapted(space, 0.0);
    if (kind == "ramp") {
        const double slope = cfg.get_double("problem.d.slope", 1.0);
        ScalarAdapted d(space, 0.0);
        for (int k = 0; k <= space->n_steps(); ++k)
            for (NodeId id : space->slice(k)) d[id] = slope * space->time_of(id);
        return d;
    }
    if (kind == "random_fv")
        return make_random_adjustment(rng, model, AdjustmentKind::FiniteVariation, 0.5);
    if (kind == "random_nonincreasing")
        return make_random_adjustment(rng, model, AdjustmentKind::Nonincreasing, 0.5);
    throw ConfigError("problem.d: unknown adjustment '" + kind + "'");
}

// ----- experiments ---------------------------------------------------------------

void experiment_solve(const RunConfig& cfg, std::uint64_t seed, const std::string& run_id,
                      Outputs& out) {
    Rng rng(seed);
    BuiltModel bm = model_from_config(cfg, rng);
    BSDEProblem problem = make_problem(bm.model, generator_from_config(cfg, bm.model),
                                       eta_from_config(cfg, bm.model, rng),
                                       adjustment_from_config(cfg, bm.model, rng));
    SolverOptions opts;
    opts.tol = cfg.get_double("solver.tol", 1e-12);
    const Solution sol = solve_backward_exact(problem, opts);

    CsvTable t;
    t.header = "run_id,steps,branching,n,Y0,residual,s2_norm,h2_norm,l2m_norm";
    std::ostringstream row;
    const NodeId root = bm.model.space->root();
    row << run_id << ',' << bm.model.space->n_steps() << ','
        << bm.model.space->node(root).children.size() << ',' << bm.model.dim << ','
        << format_double(sol.y[root]) << ',' << format_double(sol.pathwise_residual) << ','
        << format_double(sol.norms.s2_beta) << ',' << format_double(sol.norms.h2_beta) << ','
        << format_double(sol.norms.l2m_beta);
    t.rows.push_back(row.str());
    out.add_file("results.csv", t.body());
    out.verdict("pathwise_residual_below_1e-10", sol.pathwise_residual < 1e-10);
}

void experiment_picard(const RunConfig& cfg, std::uint64_t seed, const std::string& run_id,
                       Outputs& out) {
    Rng rng(seed);
    BuiltModel bm = model_from_config(cfg, rng);
    BSDEProblem problem = make_problem(bm.model, generator_from_config(cfg, bm.model),
                                       eta_from_config(cfg, bm.model, rng),
                                       adjustment_from_config(cfg, bm.model, rng));
    SolverOptions opts;
    opts.tol = cfg.get_double("solver.tol", 1e-12);
    const double lips = problem.generator.declared_lipschitz();
    const double beta =
        cfg.get_double("solver.beta", std::max(8.0, 2.0 * lips + 2.0 * lips * lips + 2.0));
    const int max_iters = cfg.get_int("solver.max_iters", 60);

    const Solution exact = solve_backward_exact(problem, opts);
    const PicardResult pr = picard_iterate(problem, beta, max_iters, opts.tol);

    double h2 = 0.0, l2 = 0.0;
    {
        const FilteredSpace& sp = *bm.model.space;
        ScalarAdapted dy(bm.model.space, 0.0);
        VecPredictable dz(bm.model.space, Vec(static_cast<std::size_t>(bm.model.dim)));
        for (int k = 0; k <= sp.n_steps(); ++k)
            for (NodeId id : sp.slice(k)) dy[id] = pr.solution.y[id] - exact.y[id];
        for (int k = 0; k < sp.n_steps(); ++k)
            for (NodeId id : sp.slice(k)) dz[id] = pr.solution.z[id] - exact.z[id];
        h2 = norm_h2(dy, bm.model.q_process, 0.0);
        l2 = norm_l2m(dz, bm.model.q_process, bm.model.m_factor, 0.0);
    }

    CsvTable trace;
    trace.header = "iter,delta_norm,ratio_sq,bound";
    for (std::size_t i = 0; i < pr.trace.delta_norms.size(); ++i) {
        std::ostringstream row;
        row << (i + 1) << ',' << format_double(pr.trace.delta_norms[i]) << ','
            << (i < pr.trace.ratios_sq.size() ? format_double(pr.trace.ratios_sq[i]) : "")
            << ',' << format_double(pr.trace.theoretical_bound);
        trace.rows.push_back(row.str());
    }
    out.add_file("picard_trace.csv", trace.body());

    CsvTable t;
    t.header = "run_id,beta,iterations,converged,final_delta,bound,max_ratio_sq,agreement_h2_l2";
    double max_ratio = 0.0;
    for (double r : pr.trace.ratios_sq) max_ratio = std::max(max_ratio, r);
    std::ostringstream row;
    row << run_id << ',' << format_double(beta) << ',' << pr.trace.iterations << ','
        << (pr.trace.converged ? 1 : 0) << ','
        << format_double(pr.trace.delta_norms.empty() ? 0.0 : pr.trace.delta_norms.back()) << ','
        << format_double(pr.trace.theoretical_bound) << ',' << format_double(max_ratio) << ','
        << format_double(h2 + l2);
    t.rows.push_back(row.str());
    out.add_file("results.csv", t.body());

    out.verdict("picard_converged", pr.trace.converged);
    out.verdict("contraction_bound_respected", pr.trace.bound_respected);
    out.verdict("agrees_with_exact_1e-8", h2 + l2 < 1e-8);
}

// piecewise-constant schedule keyed by time index (a single entry broadcasts)
ScalarPredictable schedule_from_config(const RunConfig& cfg, const std::string& key,
                                       const SpacePtr& space, double fallback) {
    ScalarPredictable s(space, fallback);
    if (!cfg.has(key)) return s;
    const std::vector<double> vals = cfg.get_double_list(key);
    for (int k = 0; k < space->n_steps(); ++k) {
        const double v = vals[vals.size() == 1 ? 0 : static_cast<std::size_t>(k) % vals.size()];
        for (NodeId id : space->slice(k)) s[id] = v;
    }
    return s;
}

void experiment_linear(const RunConfig& cfg, std::uint64_t seed, const std::string& run_id,
                       Outputs& out) {
    const bool configured = cfg.has("problem.linear.a") || cfg.has("problem.linear.b") ||
                            cfg.has("problem.linear.c") || cfg.has("problem.linear.d");
    const int trials = configured ? 1 : cfg.get_int("trials", 20);
    CsvTable t;
    t.header = "run_id,trial,n,k,y0_closed,y0_exact,max_diff,lemma_residual,min_jump";
    std::vector<std::string> rows(static_cast<std::size_t>(trials));
    std::vector<bool> ok(static_cast<std::size_t>(trials), false);

    parallel_trials_seeded(fork_seeds(seed, trials), [&](int i, std::uint64_t trial_seed) {
        Rng rng(trial_seed);
        RandomLinearProblem lp;
        if (configured) {
            RunConfig mc = cfg;  // configured model, scheduled coefficients
            BuiltModel bm = model_from_config(mc, rng);
            lp.rm.block = bm.block;
            lp.rm.model = bm.model;
            const auto kdim = static_cast<std::size_t>(bm.model.k_continuous);
            const auto nj = static_cast<std::size_t>(bm.model.dim - bm.model.k_continuous);
            VecPredictable c(bm.model.space, Vec(kdim)), d(bm.model.space, Vec(nj));
            const ScalarPredictable cs =
                schedule_from_config(cfg, "problem.linear.c", bm.model.space, 0.0);
            const ScalarPredictable ds =
                schedule_from_config(cfg, "problem.linear.d", bm.model.space, 0.0);
            for (int k = 0; k < bm.model.space->n_steps(); ++k)
                for (NodeId id : bm.model.space->slice(k)) {
                    for (std::size_t j = 0; j < kdim; ++j) c[id][j] = cs[id];
                    for (std::size_t j = 0; j < nj; ++j) d[id][j] = ds[id];
                }
            lp.coeffs = make_coefficients(
                bm.model, schedule_from_config(cfg, "problem.linear.a", bm.model.space, 0.0),
                schedule_from_config(cfg, "problem.linear.b", bm.model.space, 0.0), c, d);
            lp.eta = eta_from_config(cfg, bm.model, rng);
            lp.adjustment = adjustment_from_config(cfg, bm.model, rng);
        } else {
            RandomModelSpec ms;
            ms.max_depth = 6;
            lp = make_random_linear_problem(rng, ms);
        }
        const MartingaleModel& model = lp.rm.model;
        BSDEProblem problem = make_problem(model, generator_from_coefficients(lp.coeffs), lp.eta,
                                           lp.adjustment);
        const Solution exact = solve_backward_exact(problem);
        const LinearClosedForm cf =
            linear_solution(model, lp.coeffs, lp.eta, lp.adjustment, /*require_gamma=*/false);

        double max_diff = 0.0;
        double lemma_resid = -1.0;
        double y0_closed = 0.0;
        if (cf.gamma_form) {
            const FilteredSpace& sp = *model.space;
            for (int k = 0; k <= sp.n_steps(); ++k)
                for (NodeId id : sp.slice(k))
                    max_diff = std::max(max_diff, std::fabs(cf.solution.y[id] - exact.y[id]));
            lemma_resid =
                lemma51_martingale_check(model, cf.bundle, cf.solution.y, lp.coeffs.b).residual;
            y0_closed = cf.solution.y[sp.root()];
        }
        ok[static_cast<std::size_t>(i)] =
            cf.gamma_form && max_diff < 1e-9 && lemma_resid < 1e-10;
        std::ostringstream row;
        row << run_id << ',' << i << ',' << model.dim << ',' << model.k_continuous << ','
            << format_double(y0_closed) << ',' << format_double(exact.y[model.space->root()])
            << ',' << format_double(max_diff) << ',' << format_double(lemma_resid) << ','
            << format_double(cf.bundle.min_jump);
        rows[static_cast<std::size_t>(i)] = row.str();
    });

    t.rows = std::move(rows);
    out.add_file("results.csv", t.body());
    bool all = true;
    for (bool b : ok) all = all && b;
    out.verdict("closed_form_matches_exact_1e-9", all);
}

namespace {

ZetaSpec zeta_from_config(const RunConfig& cfg) {
    ZetaSpec zeta;
    const std::string kind = cfg.get_string("compare.zeta", "zero");
    if (kind == "psi_sqrt_lambda") {
        zeta.kind = ZetaSpec::Kind::PsiSqrtLambda;
        zeta.psi = cfg.get_double("compare.psi", 0.0);
    } else if (kind != "zero") {
        throw ConfigError("compare.zeta: unknown strategy '" + kind + "'");
    }
    return zeta;
}

// explicit pair: problem.* and problem2.* specs on one configured model
ComparisonScenario custom_scenario(const RunConfig& cfg, Rng& rng) {
    BuiltModel bm = model_from_config(cfg, rng);
    RunConfig second = cfg;
    for (const auto& [key, value] : cfg.entries())
        if (key.rfind("problem2.", 0) == 0) second.set("problem." + key.substr(9), value);
    ComparisonScenario sc;
    sc.p1 = make_problem(bm.model, generator_from_config(cfg, bm.model),
                         eta_from_config(cfg, bm.model, rng),
                         adjustment_from_config(cfg, bm.model, rng));
    sc.p2 = make_problem(bm.model, generator_from_config(second, bm.model),
                         eta_from_config(second, bm.model, rng),
                         adjustment_from_config(second, bm.model, rng));
    sc.zeta = zeta_from_config(cfg);
    return sc;
}

json hypotheses_json(const ComparisonReport& rep) {
    json items = json::array();
    for (const auto& h : rep.hypotheses) {
        json item;
        item["name"] = h.name;
        item["pass"] = h.pass;
        item["witness"] = h.witness;
        item["margin"] = h.margin;
        if (!h.note.empty()) item["note"] = h.note;
        items.push_back(std::move(item));
    }
    json j;
    j["hypotheses"] = std::move(items);
    j["hypotheses_pass"] = rep.hypotheses_pass;
    j["min_gap"] = rep.min_gap;
    j["min_gap_node"] = rep.min_gap_node;
    j["y0_gap"] = rep.y0_gap;
    j["comparison_holds"] = rep.comparison_holds;
    j["asserted"] = rep.asserted;
    return j;
}

}  // namespace

void experiment_compare(const RunConfig& cfg, std::uint64_t seed, const std::string& run_id,
                        Outputs& out) {
    const std::string scenario = cfg.get_string("compare.scenario", "ordered");
    const double psi = cfg.get_double("compare.psi", 0.0);
    const int trials = (scenario == "custom") ? 1 : cfg.get_int("trials", 50);

    std::vector<std::string> rows(static_cast<std::size_t>(trials));
    std::vector<bool> ok(static_cast<std::size_t>(trials), false);
    std::vector<double> gaps(static_cast<std::size_t>(trials), 0.0);
    std::vector<std::string> counterexamples(static_cast<std::size_t>(trials));
    std::vector<json> reports(static_cast<std::size_t>(trials));

    CsvTable detail;
    detail.header = "run_id,trial,scenario,hypotheses_pass,min_gap,verdict";

    parallel_trials_seeded(fork_seeds(seed, trials), [&](int i, std::uint64_t trial_seed) {
        Rng rng(trial_seed);
        ComparisonScenario sc;
        if (scenario == "ordered") sc = make_ordered_scenario(rng);
        else if (scenario == "single_default") {
            sc = make_single_default_scenario(rng, psi);
            if (cfg.has("compare.zeta")) sc.zeta = zeta_from_config(cfg);
        }
        else if (scenario == "equality") sc = make_equality_scenario(rng);
        else if (scenario == "leaf_gap") sc = make_leaf_gap_scenario(rng, 0.25);
        else if (scenario == "custom") sc = custom_scenario(cfg, rng);
        else throw ConfigError("compare.scenario: unknown scenario '" + scenario + "'");

        ComparisonReport rep = (scenario == "equality")
                                   ? verify_strict_comparison(sc.p1, sc.p2, sc.zeta)
                                   : verify_comparison(sc.p1, sc.p2, sc.zeta);
        bool pass = rep.hypotheses_pass && rep.comparison_holds;
        if (scenario == "equality") pass = pass && rep.strict_preconditions && rep.strict_holds;
        if (scenario == "leaf_gap") pass = pass && rep.y0_gap > 0.0;
        ok[static_cast<std::size_t>(i)] = pass;
        gaps[static_cast<std::size_t>(i)] = rep.min_gap;
        reports[static_cast<std::size_t>(i)] = hypotheses_json(rep);
        if (!rep.counterexample_json.empty())
            counterexamples[static_cast<std::size_t>(i)] = rep.counterexample_json;
        std::ostringstream row;
        row << run_id << ',' << i << ',' << scenario << ',' << (rep.hypotheses_pass ? 1 : 0)
            << ',' << format_double(rep.min_gap) << ',' << (pass ? "pass" : "fail");
        rows[static_cast<std::size_t>(i)] = row.str();
    });

    detail.rows = std::move(rows);
    out.add_file("compare_detail.csv", detail.body());

    int violations = 0;
    int worst_idx = 0;
    double worst_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < trials; ++i) {
        if (!ok[static_cast<std::size_t>(i)]) ++violations;
        if (gaps[static_cast<std::size_t>(i)] < worst_gap) {
            worst_gap = gaps[static_cast<std::size_t>(i)];
            worst_idx = i;
        }
        if (!counterexamples[static_cast<std::size_t>(i)].empty())
            out.add_file("counterexample_trial" + std::to_string(i) + ".json",
                         counterexamples[static_cast<std::size_t>(i)]);
    }

    json report;
    report["run_id"] = run_id;
    report["scenario"] = scenario;
    report["trials"] = trials;
    report["violations"] = violations;
    report["worst_trial"] = reports[static_cast<std::size_t>(worst_idx)];
    out.add_file("compare_report.json", report.dump(2));

    CsvTable t;
    t.header = "run_id,scenario,trials,violations,comparison,min_gap";
    std::ostringstream row;
    row << run_id << ',' << scenario << ',' << trials << ',' << violations << ','
        << (violations == 0 ? "pass" : "fail") << ',' << format_double(worst_gap);
    t.rows.push_back(row.str());
    out.add_file("results.csv", t.body());
    out.verdict("comparison_no_violations", violations == 0);
}

void experiment_apriori(const RunConfig& cfg, std::uint64_t seed, const std::string& run_id,
                        Outputs& out) {
    const int trials = cfg.get_int("trials", 100);
    std::vector<std::string> rows(static_cast<std::size_t>(trials));
    std::vector<bool> ok(static_cast<std::size_t>(trials), false);
    std::vector<double> ratios(static_cast<std::size_t>(trials), 0.0);

    parallel_trials_seeded(fork_seeds(seed, trials), [&](int i, std::uint64_t trial_seed) {
        Rng rng(trial_seed);
        RandomModelSpec ms;
        ms.max_depth = 6;
        RandomModel rm = make_random_model(rng, ms);
        Generator g1 = make_random_generator(rng, rm.model, 0.8);
        Generator g2 = make_random_generator(rng, rm.model, 0.8);
        BSDEProblem p1 = make_problem(rm.model, g1, make_random_eta(rng, rm.model, 1.0),
                                      make_random_adjustment(rng, rm.model,
                                                             AdjustmentKind::FiniteVariation, 0.5));
        BSDEProblem p2 = make_problem(rm.model, g2, make_random_eta(rng, rm.model, 1.0),
                                      make_random_adjustment(rng, rm.model,
                                                             AdjustmentKind::FiniteVariation, 0.5));
        const Solution s1 = solve_backward_exact(p1);
        const Solution s2 = solve_backward_exact(p2);
        const AprioriReport rep = apriori_check(p1, p2, s1, s2);
        ok[static_cast<std::size_t>(i)] = rep.pass;
        ratios[static_cast<std::size_t>(i)] = rep.ratio;
        std::ostringstream row;
        row << run_id << ',' << i << ',' << format_double(rep.lhs) << ','
            << format_double(rep.j_value) << ',' << format_double(rep.constant) << ','
            << format_double(rep.ratio) << ',' << (rep.pass ? "pass" : "fail");
        rows[static_cast<std::size_t>(i)] = row.str();
    });

    CsvTable t;
    t.header = "run_id,trial,lhs,j,constant,ratio,verdict";
    t.rows = std::move(rows);
    out.add_file("results.csv", t.body());

    int violations = 0;
    double worst = 0.0;
    for (int i = 0; i < trials; ++i) {
        if (!ok[static_cast<std::size_t>(i)]) ++violations;
        worst = std::max(worst, ratios[static_cast<std::size_t>(i)]);
    }
    out.verdict("apriori_no_violations", violations == 0);

    // Remark-3.1 stability ladder on a fresh seeded problem
    CsvTable stab;
    stab.header = "run_id,eps,gap,bound,verdict";
    Rng rng(splitmix64(++seed));
    RandomProblemSpec ps;
    ps.model.max_depth = 6;
    BSDEProblem base = make_random_problem(rng, ps);
    bool stab_ok = true;
    for (double eps : {1e-3, 1e-2, 1e-1}) {
        const StabilityReport rep = stability_check(base, eps);
        stab_ok = stab_ok && rep.pass;
        std::ostringstream row;
        row << run_id << ',' << format_double(eps) << ',' << format_double(rep.gap) << ','
            << format_double(rep.bound) << ',' << (rep.pass ? "pass" : "fail");
        stab.rows.push_back(row.str());
    }
    out.add_file("stability.csv", stab.body());
    out.verdict("stability_ladder", stab_ok);
}

void experiment_refine(const RunConfig& cfg, std::uint64_t /*seed*/, const std::string& run_id,
                       Outputs& out) {
    std::vector<int> steps_list{10, 20, 40, 80, 160};
    if (cfg.has("refine.steps")) steps_list = cfg.get_int_list("refine.steps");
    const double rate = cfg.get_double("problem.generator.rate", 0.1);
    const double exact = std::exp(-rate);

    CsvTable t;
    t.header = "run_id,steps,Y0,exact,abs_err,bound,err_ratio";
    bool all = true;
    double prev_err = 0.0;
    for (std::size_t i = 0; i < steps_list.size(); ++i) {
        const int steps = steps_list[i];
        // deterministic study: the chain space carries the same Y as any
        // branching tree at a fraction of the nodes
        SpacePtr sp = make_chain_space(1.0, steps);
        MartingaleModel model = build_brownian_proxy(sp, 1, 0.0);
        BSDEProblem problem =
            make_problem(model, make_discount_generator(rate),
                         std::vector<double>(sp->leaves().size(), 1.0));
        const Solution sol = solve_backward_exact(problem);
        const double y0 = sol.y[sp->root()];
        const double err = std::fabs(y0 - exact);
        const double bound = 2.0 / steps;
        all = all && err <= bound;
        std::ostringstream row;
        row << run_id << ',' << steps << ',' << format_double(y0) << ',' << format_double(exact)
            << ',' << format_double(err) << ',' << format_double(bound) << ','
            << (i > 0 ? format_double(err / prev_err) : std::string(""));
        t.rows.push_back(row.str());
        prev_err = err;
    }
    out.add_file("results.csv", t.body());
    out.verdict("discount_error_within_2_over_steps", all);
}

const std::set<std::string> kExperiments = {"solve",   "picard-diagnose", "linear-check",
                                            "compare", "apriori-sweep",   "refine"};

void validate_config(const RunConfig& cfg, const std::string& experiment) {
    if (!kExperiments.count(experiment))
        throw ConfigError("experiment: unknown experiment '" + experiment + "'");
    if (experiment == "solve" || experiment == "picard-diagnose")
        cfg.validate_keys(merged({&kCommonKeys, &kModelKeys, &kProblemKeys}));
    else if (experiment == "linear-check")
        cfg.validate_keys(merged({&kCommonKeys, &kModelKeys, &kProblemKeys},
                                 {"problem.linear.a", "problem.linear.b", "problem.linear.c",
                                  "problem.linear.d"}));
    else if (experiment == "compare") {
        auto allowed = merged({&kCommonKeys, &kModelKeys, &kProblemKeys},
                              {"compare.scenario", "compare.psi", "compare.zeta"});
        for (const auto& k : kProblemKeys) allowed.insert("problem2." + k.substr(8));
        cfg.validate_keys(allowed);
    }
    else if (experiment == "apriori-sweep")
        cfg.validate_keys(merged({&kCommonKeys}));
    else if (experiment == "refine")
        cfg.validate_keys(merged({&kCommonKeys}, {"refine.steps", "problem.generator.rate"}));
}

}  // namespace

RunResult run_experiment(const RunConfig& cfg) {
    RunResult result;
    const auto t0 = std::chrono::steady_clock::now();
    Outputs out;
    std::string experiment;
    std::uint64_t seed = 0;
    try {
        experiment = cfg.get_string("experiment");
        validate_config(cfg, experiment);
        seed = cfg.get_u64("seed", 0);
        result.out_dir = cfg.get_string("out", "bsdelab_out");
        RunConfig identity = cfg;  // where the run lands does not change what it is
        identity.set("out", "");
        result.run_id = hex64(fnv1a64(identity.canonical() + "#" + std::to_string(seed)));

        if (experiment == "solve") experiment_solve(cfg, seed, result.run_id, out);
        else if (experiment == "picard-diagnose") experiment_picard(cfg, seed, result.run_id, out);
        else if (experiment == "linear-check") experiment_linear(cfg, seed, result.run_id, out);
        else if (experiment == "compare") experiment_compare(cfg, seed, result.run_id, out);
        else if (experiment == "apriori-sweep") experiment_apriori(cfg, seed, result.run_id, out);
        else if (experiment == "refine") experiment_refine(cfg, seed, result.run_id, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        result.exit_code = 2;
        return result;
    }

    const auto t1 = std::chrono::steady_clock::now();
    const double wallclock_ms =
        std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count() / 1000.0;

    json manifest;
    manifest["tool"] = "bsdelab";
    manifest["version"] = kVersion;
    manifest["experiment"] = experiment;
    manifest["seed"] = seed;
    manifest["run_id"] = result.run_id;
    manifest["config"] = cfg.entries();
    manifest["wallclock_ms"] = wallclock_ms;
    manifest["verdicts"] = out.verdicts;

    fs::create_directories(result.out_dir);
    json outputs = json::array();
    for (const auto& [name, content] : out.files) {
        std::ofstream of(fs::path(result.out_dir) / name, std::ios::binary);
        of << content;
        json entry;
        entry["file"] = name;
        entry["bytes"] = content.size();
        entry["fnv64"] = hex64(fnv1a64(content));
        outputs.push_back(std::move(entry));
    }
    manifest["outputs"] = std::move(outputs);
    result.manifest_json = manifest.dump(2);
    {
        std::ofstream of(fs::path(result.out_dir) / "manifest.json", std::ios::binary);
        of << result.manifest_json;
    }

    result.all_pass = out.all_pass();
    result.exit_code = result.all_pass ? 0 : 1;
    return result;
}

int report_manifest(const std::string& out_dir, std::ostream& os) {
    std::ifstream in(fs::path(out_dir) / "manifest.json");
    if (!in) {
        os << "report: no manifest.json under " << out_dir << "\n";
        return 2;
    }
    json manifest;
    in >> manifest;
    os << "bsdelab run " << manifest.value("run_id", std::string("?")) << " ("
       << manifest.value("experiment", std::string("?")) << ", seed "
       << manifest.value("seed", 0ULL) << ")\n";
    bool all = true;
    for (const auto& [name, pass] : manifest.at("verdicts").items()) {
        os << "  " << (pass.get<bool>() ? "PASS" : "FAIL") << "  " << name << "\n";
        all = all && pass.get<bool>();
    }
    for (const auto& f : manifest.at("outputs"))
        os << "  out: " << f.at("file").get<std::string>() << " (" << f.at("bytes") << " bytes, fnv64 "
           << f.at("fnv64").get<std::string>() << ")\n";
    return all ? 0 : 1;
}

}  // namespace bsdelab
