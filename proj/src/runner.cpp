#include "treerate/runner.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include "treerate/bounds.hpp"
#include "treerate/calculus.hpp"
#include "treerate/entropy.hpp"
#include "treerate/io.hpp"
#include "treerate/perturb.hpp"
#include "treerate/process.hpp"

namespace treerate {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw std::invalid_argument(msg); }

void reject_unknown(const json& obj, std::set<std::string> allowed, const std::string& where) {
    for (const auto& [key, val] : obj.items()) {
        (void)val;
        if (!allowed.count(key)) bad("unknown key '" + key + "' in " + where);
    }
}

std::string resolve(const std::string& base_dir, const std::string& path) {
    fs::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (fs::path(base_dir) / p).string();
}

json load_inline_or_file(const json& v, const std::string& base_dir) {
    if (v.is_string()) return load_json_file(resolve(base_dir, v.get<std::string>()));
    return v;
}

struct Ctx {
    const json& params;
    std::string base_dir;
    std::uint64_t seed = 0;
    std::string comment;  // version/seed/hash line
    std::ofstream csv;
    std::string output_path;
    std::ostream& log;
};

LengthFunction pick_length(const json& params, const TreeWithLengths& tl,
                           const std::string& base_dir) {
    if (!params.contains("length")) {
        return tl.has_lengths ? tl.lengths : LengthFunction::unit(tl.tree);
    }
    const json& v = params["length"];
    if (v.is_string() && v.get<std::string>() == "unit") return LengthFunction::unit(tl.tree);
    if (v.is_string())
        return load_length_table(tl.tree, load_json_file(resolve(base_dir, v.get<std::string>())));
    return load_length_table(tl.tree, v);
}

std::string b(bool v) { return v ? "1" : "0"; }

ExitCode run_lansit(Ctx& ctx) {
    reject_unknown(ctx.params, {"tree", "p", "kernel", "f", "length"}, "lansit-check params");
    if (!ctx.params.contains("tree") || !ctx.params.contains("f"))
        bad("lansit-check needs 'tree' and 'f'");
    if (ctx.params.contains("p") == ctx.params.contains("kernel"))
        bad("lansit-check needs exactly one of 'p' or 'kernel'");

    TreeWithLengths tl = load_tree_json(load_inline_or_file(ctx.params["tree"], ctx.base_dir));
    LengthFunction l = pick_length(ctx.params, tl, ctx.base_dir);
    LeafDistribution p =
        ctx.params.contains("p")
            ? load_leaf_distribution(tl.tree, load_inline_or_file(ctx.params["p"], ctx.base_dir))
            : kernel_to_leaf(tl.tree, load_kernel(tl.tree, load_inline_or_file(
                                                               ctx.params["kernel"], ctx.base_dir)));
    NodeFunction f = load_node_function(tl.tree, load_inline_or_file(ctx.params["f"], ctx.base_dir));

    LansitSides sides = lansit_both_sides(tl.tree, p, l, f);
    CsvWriter w(ctx.csv);
    w.comment(ctx.comment);
    w.header({"lhs", "rhs", "difference", "abs_laplacian_expectation"});
    w.row({fmt_double(sides.lhs), fmt_double(sides.rhs), fmt_double(sides.difference()),
           fmt_double(sides.abs_expectation)});
    ctx.log << "lansit lhs=" << fmt_double(sides.lhs) << " rhs=" << fmt_double(sides.rhs) << "\n";
    bool ok = std::abs(sides.difference()) <= 1e-10 * (1.0 + std::abs(sides.lhs));
    return ok ? ExitCode::ok : ExitCode::invariant_violation;
}

ExitCode run_divergence(Ctx& ctx) {
    reject_unknown(ctx.params, {"tree", "p", "q", "length"}, "divergence params");
    for (const char* k : {"tree", "p", "q"})
        if (!ctx.params.contains(k)) bad(std::string("divergence needs '") + k + "'");

    TreeWithLengths tl = load_tree_json(load_inline_or_file(ctx.params["tree"], ctx.base_dir));
    LengthFunction l = pick_length(ctx.params, tl, ctx.base_dir);
    LeafDistribution p =
        load_leaf_distribution(tl.tree, load_inline_or_file(ctx.params["p"], ctx.base_dir));
    LeafDistribution q =
        load_leaf_distribution(tl.tree, load_inline_or_file(ctx.params["q"], ctx.base_dir));

    double hp = entropy(tl.tree, p), hq = entropy(tl.tree, q), d = kl(tl.tree, p, q);
    DecompositionSides hdec = entropy_decomposition(tl.tree, p, l);
    DecompositionSides ddec = kl_decomposition(tl.tree, p, q, l);

    CsvWriter w(ctx.csv);
    w.comment(ctx.comment);
    w.header({"H_P", "H_Q", "D", "H_rate_boundary", "H_rate_interior", "D_rate_boundary",
              "D_rate_interior"});
    w.row({fmt_double(hp), fmt_double(hq), fmt_double(d), fmt_double(hdec.lhs),
           fmt_double(hdec.rhs), fmt_double(ddec.lhs), fmt_double(ddec.rhs)});
    ctx.log << "H(P)=" << fmt_double(hp) << " H(Q)=" << fmt_double(hq) << " D(P||Q)="
            << fmt_double(d) << "\n";
    bool ok = std::abs(hdec.lhs - hdec.rhs) <= 1e-10 * (1.0 + std::abs(hdec.lhs)) &&
              std::abs(ddec.lhs - ddec.rhs) <= 1e-10 * (1.0 + std::abs(ddec.lhs));
    return ok ? ExitCode::ok : ExitCode::invariant_violation;
}

ExitCode run_compare_bound(Ctx& ctx) {
    reject_unknown(ctx.params,
                   {"tree", "p", "q", "length", "delta", "epsilon", "section", "report"},
                   "compare-bound params");
    for (const char* k : {"tree", "p", "q"})
        if (!ctx.params.contains(k)) bad(std::string("compare-bound needs '") + k + "'");

    TreeWithLengths tl = load_tree_json(load_inline_or_file(ctx.params["tree"], ctx.base_dir));
    LeafDistribution p =
        load_leaf_distribution(tl.tree, load_inline_or_file(ctx.params["p"], ctx.base_dir));
    LeafDistribution q =
        load_leaf_distribution(tl.tree, load_inline_or_file(ctx.params["q"], ctx.base_dir));

    LengthFunction l = LengthFunction::unit(tl.tree);
    bool hq_length = false;
    if (ctx.params.contains("length") && ctx.params["length"].is_string() &&
        ctx.params["length"].get<std::string>() == "hq") {
        hq_length = true;
        ForwardKernel kq = leaf_to_kernel(tl.tree, q);
        std::vector<double> vals(tl.tree.node_count(), 0.0);
        for (std::size_t i = 0; i < tl.tree.node_count(); ++i) {
            NodeId x = static_cast<NodeId>(i);
            if (!tl.tree.is_interior(x)) continue;
            if (!kq.supported(x)) bad("q-kernel unsupported at an interior node");
            vals[i] = entropy(kq.row(x));
            if (vals[i] == 0.0) bad("deterministic q-row makes the entropy length degenerate");
        }
        l = LengthFunction::table(tl.tree, std::move(vals));
    } else {
        l = pick_length(ctx.params, tl, ctx.base_dir);
    }

    std::vector<double> deltas, epsilons;
    if (ctx.params.contains("delta")) deltas = ctx.params["delta"].get<std::vector<double>>();
    if (ctx.params.contains("epsilon")) epsilons = ctx.params["epsilon"].get<std::vector<double>>();

    TightnessCertificate cert = TightnessCertificate::finite(tl.tree);
    BoundSweep sweep = compare_bound_sweep(tl.tree, p, q, l, cert, deltas, epsilons);

    std::optional<CrossSection> section;
    if (ctx.params.contains("section")) {
        std::vector<NodeId> members;
        for (const auto& v : ctx.params["section"]) {
            auto id = tl.tree.find_external(v.get<std::int64_t>());
            if (!id) bad("section refers to unknown node " + v.dump());
            members.push_back(*id);
        }
        section = CrossSection::validate(tl.tree, members);
    }

    CsvWriter w(ctx.csv);
    w.comment(ctx.comment);
    std::vector<std::string> cols{"eps",  "delta", "lhs",   "term1", "term2", "term3",
                                  "rhs",  "holds", "L",     "C",     "A",     "a",
                                  "mu_l1"};
    if (section) {
        cols.insert(cols.end(), {"term3_variant", "rhs_variant", "holds_variant"});
    }
    w.header(cols);

    json report = json::array();
    bool all_hold = true;
    for (const auto& r : sweep.reports) {
        std::vector<std::string> row{
            fmt_double(r.eps),   fmt_double(r.delta), fmt_double(r.lhs),
            fmt_double(r.term1), fmt_double(r.term2), fmt_double(r.term3),
            fmt_double(r.rhs),   b(r.holds),          fmt_double(r.l_factor),
            fmt_double(r.constant_c), fmt_double(r.sup_hq_over_l),
            fmt_double(r.inf_hq_over_l), fmt_double(r.mu_l1)};
        json jr{{"eps", r.eps},       {"delta", r.delta}, {"lhs", r.lhs},
                {"term1", r.term1},   {"term2", r.term2}, {"term3", r.term3},
                {"rhs", r.rhs},       {"holds", r.holds}, {"L", r.l_factor},
                {"C", r.constant_c},  {"A", r.sup_hq_over_l},
                {"a", r.inf_hq_over_l}, {"mu_l1", r.mu_l1}};
        if (section) {
            SectionVariantReport v =
                section_variant_bound(tl.tree, p, q, l, *section, r.eps, r.delta, cert);
            row.insert(row.end(), {fmt_double(v.term3_variant), fmt_double(v.rhs_variant),
                                   b(v.holds)});
            jr["term3_variant"] = v.term3_variant;
            jr["rhs_variant"] = v.rhs_variant;
            jr["holds_variant"] = v.holds;
            all_hold = all_hold && v.holds;
        }
        w.row(row);
        report.push_back(std::move(jr));
        all_hold = all_hold && r.holds;
    }
    if (hq_length) {
        // with l = l_q the bound target is 1; report it alongside
        ForwardKernel kq = leaf_to_kernel(tl.tree, q);
        EntropyLengthBoundReport er = entropy_length_bound(
            tl.tree, p, kq, sweep.reports[sweep.best].delta,
            sweep.reports[sweep.best].eps, cert);
        ctx.log << "entropy-length form: lhs=" << fmt_double(er.lhs)
                << " rhs=" << fmt_double(er.rhs) << " holds=" << b(er.holds) << "\n";
    }

    std::string report_path = ctx.params.contains("report")
                                  ? resolve(ctx.base_dir, ctx.params["report"].get<std::string>())
                                  : ctx.output_path + ".json";
    std::ofstream rj(report_path);
    rj << json{{"reports", report}, {"best", sweep.best}}.dump(2) << '\n';

    ctx.log << "sweep of " << sweep.reports.size() << " points, best rhs="
            << fmt_double(sweep.reports[sweep.best].rhs) << " all_hold=" << b(all_hold) << "\n";
    return all_hold ? ExitCode::ok : ExitCode::invariant_violation;
}

ExitCode run_indisp(Ctx& ctx) {
    reject_unknown(ctx.params, {"theta", "d1", "d2", "n_max", "aggregate_n"}, "indisp params");
    for (const char* k : {"theta", "d1", "d2", "n_max"})
        if (!ctx.params.contains(k)) bad(std::string("indisp needs '") + k + "'");
    double theta = ctx.params["theta"].get<double>();
    int d1 = ctx.params["d1"].get<int>();
    int d2 = ctx.params["d2"].get<int>();
    int n_max = ctx.params["n_max"].get<int>();
    long long aggregate_n =
        ctx.params.contains("aggregate_n") ? ctx.params["aggregate_n"].get<long long>() : 0;

    CsvWriter w(ctx.csv);
    w.comment(ctx.comment);
    w.header({"mode", "n", "H_closed", "H_numeric", "D_closed", "D_numeric", "l_P", "gap_limit",
              "gap_n", "D_over_n"});

    bool ok = true;
    for (int n = 1; n <= n_max; ++n) {
        IndispExample ex = indisp_example(theta, d1, d2, n, true);
        double gap_n = std::abs(ex.entropy_p - (1.0 + n * 0.5 * (std::log2(d1) + std::log2(d2)))) /
                       ex.expected_length;
        w.row({"explicit", std::to_string(n), fmt_double(ex.entropy_p),
               fmt_double(ex.entropy_p_numeric), fmt_double(ex.kl_pq), fmt_double(ex.kl_numeric),
               fmt_double(ex.expected_length), fmt_double(ex.gap_limit), fmt_double(gap_n),
               fmt_double(ex.kl_pq / n)});
        ok = ok && std::abs(ex.entropy_p - ex.entropy_p_numeric) <=
                       1e-10 * (1.0 + std::abs(ex.entropy_p)) &&
             std::abs(ex.kl_pq - ex.kl_numeric) <= 1e-10;
    }
    if (aggregate_n > 0) {
        ProcessSpec sp = two_branch_process(theta, d1, d2);
        ProcessSpec sq = two_branch_process(0.5, d1, d2);
        auto recs = aggregate_rates(sp, sq, static_cast<int>(aggregate_n));
        IndispExample ex = indisp_example(theta, d1, d2, 1, false);
        for (long long n = 10; n <= aggregate_n; n *= 10) {
            const auto& r = recs[static_cast<std::size_t>(n - 1)];
            w.row({"aggregated", std::to_string(n), "", "", fmt_double(ex.kl_pq),
                   fmt_double(r.kl), fmt_double(r.length_p), fmt_double(ex.gap_limit),
                   fmt_double(r.gap()), fmt_double(r.kl_per_level())});
        }
    }
    return ok ? ExitCode::ok : ExitCode::invariant_violation;
}

ExitCode run_entropy_rate(Ctx& ctx) {
    reject_unknown(ctx.params, {"p", "q", "levels", "eps"}, "entropy-rate params");
    for (const char* k : {"p", "q", "levels"})
        if (!ctx.params.contains(k)) bad(std::string("entropy-rate needs '") + k + "'");
    ProcessSpec p = load_process_spec(load_inline_or_file(ctx.params["p"], ctx.base_dir));
    ProcessSpec q = load_process_spec(load_inline_or_file(ctx.params["q"], ctx.base_dir));
    int levels = ctx.params["levels"].get<int>();
    double eps = ctx.params.contains("eps") ? ctx.params["eps"].get<double>() : 0.0;

    RateSequence seq = rate_sequence(p, q, levels, eps);
    CsvWriter w(ctx.csv);
    w.comment(ctx.comment);
    w.comment("h=" + fmt_double(seq.diag.h) + " declared=" + b(seq.diag.rate_declared) +
              " tail_spread=" + fmt_double(seq.diag.h_tail_spread));
    w.header({"n", "H_P", "H_Q", "l_P", "D", "D_over_n", "gap", "bound"});
    for (std::size_t i = 0; i < seq.records.size(); ++i) {
        const auto& r = seq.records[i];
        w.row({std::to_string(r.n), fmt_double(r.entropy_p), fmt_double(r.entropy_q),
               fmt_double(r.length_p), fmt_double(r.kl), fmt_double(r.kl_per_level()),
               fmt_double(r.gap()), fmt_double(seq.diag.asy_bound[i])});
    }
    ctx.log << "levels=" << levels << " final gap=" << fmt_double(seq.records.back().gap())
            << " D/n=" << fmt_double(seq.records.back().kl_per_level()) << "\n";
    return seq.diag.kl_monotone ? ExitCode::ok : ExitCode::invariant_violation;
}

ExitCode run_kakutani(Ctx& ctx) {
    reject_unknown(ctx.params, {"M", "beta", "checkpoints"}, "kakutani params");
    for (const char* k : {"M", "beta", "checkpoints"})
        if (!ctx.params.contains(k)) bad(std::string("kakutani needs '") + k + "'");
    int M = ctx.params["M"].get<int>();
    double beta = ctx.params["beta"].get<double>();
    auto cps = ctx.params["checkpoints"].get<std::vector<long long>>();

    auto recs = kakutani_experiment(M, beta, cps);
    CsvWriter w(ctx.csv);
    w.comment(ctx.comment);
    w.comment("f(1e-3)/1e-6=" + fmt_double(kakutani_f(1e-3) / 1e-6) +
              " log2M=" + fmt_double(std::log2(static_cast<double>(M))));
    w.header({"n", "D", "D_over_n", "rate"});
    for (const auto& r : recs)
        w.row({std::to_string(r.n), fmt_double(r.kl),
               fmt_double(r.kl / static_cast<double>(r.n)), fmt_double(r.rate)});
    return ExitCode::ok;
}

DeltaLaw parse_delta_law(const json& j, const std::string& base_dir) {
    if (!j.is_object() || !j.contains("kind")) bad("delta law needs a 'kind'");
    std::string kind = j["kind"].get<std::string>();
    if (kind == "bernoulli") {
        reject_unknown(j, {"kind", "beta"}, "delta law");
        return DeltaLaw::bernoulli_decay(j.at("beta").get<double>());
    }
    if (kind == "constant") {
        reject_unknown(j, {"kind", "value"}, "delta law");
        return DeltaLaw::constant(j.at("value").get<double>());
    }
    if (kind == "sequence") {
        reject_unknown(j, {"kind", "values"}, "delta law");
        return DeltaLaw::from_sequence(j.at("values").get<std::vector<double>>());
    }
    if (kind == "file") {
        reject_unknown(j, {"kind", "path"}, "delta law");
        json vals = load_json_file(resolve(base_dir, j.at("path").get<std::string>()));
        return DeltaLaw::from_sequence(vals.get<std::vector<double>>());
    }
    bad("unknown delta law kind '" + kind + "'");
}

ExitCode run_perturb_sim(Ctx& ctx) {
    reject_unknown(ctx.params,
                   {"base", "alt", "kl_bound", "delta", "trials", "levels", "checkpoints"},
                   "perturb-sim params");
    for (const char* k : {"base", "alt", "kl_bound", "delta", "trials", "levels"})
        if (!ctx.params.contains(k)) bad(std::string("perturb-sim needs '") + k + "'");

    ProcessSpec base = load_process_spec(load_inline_or_file(ctx.params["base"], ctx.base_dir));
    ProcessSpec alt = load_process_spec(load_inline_or_file(ctx.params["alt"], ctx.base_dir));
    double D = ctx.params["kl_bound"].get<double>();
    DeltaLaw law = parse_delta_law(ctx.params["delta"], ctx.base_dir);
    int trials = ctx.params["trials"].get<int>();
    int levels = ctx.params["levels"].get<int>();
    std::vector<int> cps{levels};
    if (ctx.params.contains("checkpoints"))
        cps = ctx.params["checkpoints"].get<std::vector<int>>();

    PerturbationSpec spec = make_perturbation(std::move(base), alt, D);
    MonteCarloReport rep = randper_monte_carlo(spec, law, levels, trials, ctx.seed, cps);

    CsvWriter w(ctx.csv);
    w.comment(ctx.comment);
    w.comment("h=" + fmt_double(rep.h) +
              " hypothesis_e_delta_to_zero=" + b(rep.hypothesis_vanishes) +
              " all_bounds_hold=" + b(rep.all_bounds_hold));
    {
        std::string means = "mean_abs_rate_gap:";
        for (std::size_t c = 0; c < rep.checkpoints.size(); ++c)
            means += " n=" + std::to_string(rep.checkpoints[c]) + ":" +
                     fmt_double(rep.mean_abs_rate_gap[c]);
        w.comment(means);
    }
    w.header({"trial", "seed", "n", "rate", "abs_rate_gap", "kl_rate", "delta_sum", "bounds_ok"});
    for (const auto& tr : rep.trials)
        for (std::size_t c = 0; c < rep.checkpoints.size(); ++c)
            w.row({std::to_string(tr.trial), std::to_string(tr.seed),
                   std::to_string(rep.checkpoints[c]), fmt_double(tr.rate_at[c]),
                   fmt_double(std::abs(tr.rate_at[c] - rep.h)), fmt_double(tr.kl_rate_at[c]),
                   fmt_double(tr.delta_sum), b(tr.bounds_hold)});

    ctx.log << "trials=" << trials << " h=" << fmt_double(rep.h)
            << " hypothesis_e_delta_to_zero=" << b(rep.hypothesis_vanishes)
            << " mean|rate-h|@N=" << fmt_double(rep.mean_abs_rate_gap.back()) << "\n";
    if (!rep.hypothesis_vanishes)
        ctx.log << "warning: E(delta_n) does not vanish under this law; "
                   "the rate need not approach h\n";
    return rep.all_bounds_hold ? ExitCode::ok : ExitCode::invariant_violation;
}

}  // namespace

ExitCode run_experiment(const json& config, const std::string& base_dir, std::ostream& log) {
    try {
        if (!config.is_object()) bad("config must be a JSON object");
        reject_unknown(config, {"experiment", "seed", "output", "params"}, "config");
        if (!config.contains("experiment")) bad("config needs an 'experiment'");
        if (!config.contains("params") || !config["params"].is_object())
            bad("config needs a 'params' object");
        std::string experiment = config["experiment"].get<std::string>();

        static const std::set<std::string> known{
            "lansit-check", "divergence", "compare-bound", "indisp",
            "entropy-rate", "kakutani",   "perturb-sim"};
        if (!known.count(experiment)) bad("unknown experiment '" + experiment + "'");
        if (!config.contains("output")) bad("config needs an 'output' path");

        // inputs resolve against the config's directory, outputs against
        // the working directory
        Ctx ctx{config["params"],
                base_dir,
                config.contains("seed") ? config["seed"].get<std::uint64_t>() : 0,
                {},
                {},
                config["output"].get<std::string>(),
                log};
        char hash[32];
        std::snprintf(hash, sizeof hash, "%016llx",
                      static_cast<unsigned long long>(fnv1a64(config.dump())));
        ctx.comment = std::string("treerate ") + kVersion + " experiment=" + experiment +
                      " seed=" + std::to_string(ctx.seed) + " config=" + hash;
        ctx.csv.open(ctx.output_path, std::ios::trunc);
        if (!ctx.csv) bad("cannot open output file " + ctx.output_path);

        if (experiment == "lansit-check") return run_lansit(ctx);
        if (experiment == "divergence") return run_divergence(ctx);
        if (experiment == "compare-bound") return run_compare_bound(ctx);
        if (experiment == "indisp") return run_indisp(ctx);
        if (experiment == "entropy-rate") return run_entropy_rate(ctx);
        if (experiment == "kakutani") return run_kakutani(ctx);
        return run_perturb_sim(ctx);
    } catch (const GuardExceeded& e) {
        log << "guard: " << e.what() << "\n";
        return ExitCode::guard_tripped;
    } catch (const nlohmann::json::exception& e) {
        log << "config error: " << e.what() << "\n";
        return ExitCode::schema_error;
    } catch (const std::invalid_argument& e) {
        log << "config error: " << e.what() << "\n";
        return ExitCode::schema_error;
    } catch (const std::domain_error& e) {
        log << "input error: " << e.what() << "\n";
        return ExitCode::schema_error;
    }
}

ExitCode run_experiment_file(const std::string& config_path, std::ostream& log) {
    json config;
    try {
        config = load_json_file(config_path);
    } catch (const std::invalid_argument& e) {
        log << "config error: " << e.what() << "\n";
        return ExitCode::schema_error;
    }
    return run_experiment(config, fs::path(config_path).parent_path().string(), log);
}

}  // namespace treerate
