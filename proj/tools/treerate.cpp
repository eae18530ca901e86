// Experiment CLI: each subcommand assembles the same config object the
// `run` subcommand reads from a file, so flags and config files cannot
// drift apart.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "treerate/runner.hpp"

namespace {

using nlohmann::json;

json comma_list_to_json(const std::vector<double>& v) { return json(v); }

int run(const json& config) {
    return static_cast<int>(treerate::run_experiment(config, ".", std::cout));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"entropy-rate comparison experiments on rooted trees"};
    app.require_subcommand(1);

    // ---- run <config.json> ----
    std::string config_path;
    auto* cmd_run = app.add_subcommand("run", "run an experiment from a JSON config");
    cmd_run->add_option("config", config_path, "config file")->required();

    // ---- lansit-check ----
    std::string tree_path, p_path, q_path, kernel_path, f_path, length_spec = "unit", out_path;
    auto* cmd_lansit = app.add_subcommand("lansit-check",
                                          "evaluate both sides of the interchange identity");
    cmd_lansit->add_option("--tree", tree_path)->required();
    cmd_lansit->add_option("--p", p_path, "leaf distribution JSON");
    cmd_lansit->add_option("--kernel", kernel_path, "forward kernel JSON");
    cmd_lansit->add_option("--f", f_path, "node function JSON")->required();
    cmd_lansit->add_option("--length", length_spec, "unit | length-table JSON path");
    cmd_lansit->add_option("--out", out_path, "output CSV");

    // ---- divergence ----
    auto* cmd_div = app.add_subcommand("divergence", "entropies, divergence, decompositions");
    cmd_div->add_option("--tree", tree_path)->required();
    cmd_div->add_option("--p", p_path)->required();
    cmd_div->add_option("--q", q_path)->required();
    cmd_div->add_option("--length", length_spec);
    cmd_div->add_option("--out", out_path);

    // ---- compare-bound ----
    std::vector<double> deltas, epsilons;
    std::vector<std::int64_t> section_ids;
    auto* cmd_cmp = app.add_subcommand("compare-bound", "three-term entropy-rate gap bound");
    cmd_cmp->add_option("--tree", tree_path)->required();
    cmd_cmp->add_option("--p", p_path)->required();
    cmd_cmp->add_option("--q", q_path)->required();
    cmd_cmp->add_option("--delta", deltas, "sweep values in (0, 1/2)");
    cmd_cmp->add_option("--epsilon", epsilons, "sweep values");
    cmd_cmp->add_option("--section", section_ids, "cross-section node ids for the variant bound");
    cmd_cmp->add_option("--length", length_spec, "unit | hq | length-table JSON path");
    cmd_cmp->add_option("--out", out_path);

    // ---- indisp ----
    double theta = 0.25;
    int d1 = 2, d2 = 4, n_max = 10;
    long long aggregate_n = 0;
    auto* cmd_ind = app.add_subcommand("indisp", "two-branch example: closed forms vs numerics");
    cmd_ind->add_option("--theta", theta)->required();
    cmd_ind->add_option("--d1", d1)->required();
    cmd_ind->add_option("--d2", d2)->required();
    cmd_ind->add_option("--nmax", n_max)->required();
    cmd_ind->add_option("--aggregate-n", aggregate_n, "extend via level aggregation to this n");
    cmd_ind->add_option("--out", out_path);

    // ---- entropy-rate ----
    std::string p_spec, q_spec;
    int levels = 0;
    double eps = 0.0;
    auto* cmd_rate = app.add_subcommand("entropy-rate", "section entropy-rate comparison");
    cmd_rate->add_option("--p", p_spec, "process spec JSON path")->required();
    cmd_rate->add_option("--q", q_spec, "process spec JSON path")->required();
    cmd_rate->add_option("--levels", levels)->required();
    cmd_rate->add_option("--eps", eps, "eps for the asymptotic diagnostic");
    cmd_rate->add_option("--out", out_path);

    // ---- kakutani ----
    int M = 4;
    double beta = 0.6;
    std::vector<long long> checkpoints;
    auto* cmd_kak = app.add_subcommand("kakutani", "near-uniform product perturbation");
    cmd_kak->add_option("--m", M)->required();
    cmd_kak->add_option("--beta", beta)->required();
    cmd_kak->add_option("--checkpoints", checkpoints, "levels to report")->required();
    cmd_kak->add_option("--out", out_path);

    // ---- perturb-sim ----
    std::string base_spec, alt_spec, delta_file;
    double kl_bound = 0.0, delta_const = -1.0, sim_beta = 0.0;
    int trials = 100;
    std::uint64_t seed = 1;
    std::vector<int> sim_checkpoints;
    auto* cmd_sim = app.add_subcommand("perturb-sim", "random perturbations of a base process");
    cmd_sim->add_option("--base", base_spec, "base process spec JSON")->required();
    cmd_sim->add_option("--alt", alt_spec, "alternate kernel spec JSON")->required();
    cmd_sim->add_option("--kl-bound", kl_bound, "declared uniform row-divergence bound")
        ->required();
    cmd_sim->add_option("--beta", sim_beta, "bernoulli delta law exponent");
    cmd_sim->add_option("--delta-file", delta_file, "JSON array of deterministic deltas");
    cmd_sim->add_option("--delta-const", delta_const, "constant delta");
    cmd_sim->add_option("--trials", trials);
    cmd_sim->add_option("--levels", levels)->required();
    cmd_sim->add_option("--seed", seed);
    cmd_sim->add_option("--checkpoints", sim_checkpoints);
    cmd_sim->add_option("--out", out_path);

    CLI11_PARSE(app, argc, argv);

    auto out_or = [&](const char* fallback) { return out_path.empty() ? fallback : out_path; };
    auto length_json = [&]() -> json { return length_spec; };

    if (cmd_run->parsed()) return static_cast<int>(treerate::run_experiment_file(config_path, std::cout));

    if (cmd_lansit->parsed()) {
        if (p_path.empty() == kernel_path.empty()) {
            std::cerr << "lansit-check needs exactly one of --p / --kernel\n";
            return static_cast<int>(treerate::ExitCode::schema_error);
        }
        json params{{"tree", tree_path}, {"f", f_path}, {"length", length_json()}};
        if (!p_path.empty()) params["p"] = p_path;
        if (!kernel_path.empty()) params["kernel"] = kernel_path;
        return run({{"experiment", "lansit-check"},
                    {"output", out_or("lansit.csv")},
                    {"params", params}});
    }
    if (cmd_div->parsed()) {
        return run({{"experiment", "divergence"},
                    {"output", out_or("divergence.csv")},
                    {"params",
                     {{"tree", tree_path}, {"p", p_path}, {"q", q_path}, {"length", length_json()}}}});
    }
    if (cmd_cmp->parsed()) {
        json params{{"tree", tree_path}, {"p", p_path}, {"q", q_path}, {"length", length_json()}};
        if (!deltas.empty()) params["delta"] = comma_list_to_json(deltas);
        if (!epsilons.empty()) params["epsilon"] = comma_list_to_json(epsilons);
        if (!section_ids.empty()) params["section"] = section_ids;
        return run({{"experiment", "compare-bound"},
                    {"output", out_or("compare_bound.csv")},
                    {"params", params}});
    }
    if (cmd_ind->parsed()) {
        json params{{"theta", theta}, {"d1", d1}, {"d2", d2}, {"n_max", n_max}};
        if (aggregate_n > 0) params["aggregate_n"] = aggregate_n;
        return run({{"experiment", "indisp"}, {"output", out_or("indisp.csv")}, {"params", params}});
    }
    if (cmd_rate->parsed()) {
        return run({{"experiment", "entropy-rate"},
                    {"output", out_or("entropy_rate.csv")},
                    {"params", {{"p", p_spec}, {"q", q_spec}, {"levels", levels}, {"eps", eps}}}});
    }
    if (cmd_kak->parsed()) {
        return run({{"experiment", "kakutani"},
                    {"output", out_or("kakutani.csv")},
                    {"params", {{"M", M}, {"beta", beta}, {"checkpoints", checkpoints}}}});
    }
    if (cmd_sim->parsed()) {
        json delta_law;
        int given = (sim_beta > 0.0) + (!delta_file.empty()) + (delta_const >= 0.0);
        if (given != 1) {
            std::cerr << "perturb-sim needs exactly one of --beta / --delta-file / --delta-const\n";
            return static_cast<int>(treerate::ExitCode::schema_error);
        }
        if (sim_beta > 0.0) delta_law = {{"kind", "bernoulli"}, {"beta", sim_beta}};
        if (!delta_file.empty()) delta_law = {{"kind", "file"}, {"path", delta_file}};
        if (delta_const >= 0.0) delta_law = {{"kind", "constant"}, {"value", delta_const}};
        json params{{"base", base_spec}, {"alt", alt_spec},     {"kl_bound", kl_bound},
                    {"delta", delta_law}, {"trials", trials},   {"levels", levels}};
        if (!sim_checkpoints.empty()) params["checkpoints"] = sim_checkpoints;
        return run({{"experiment", "perturb-sim"},
                    {"seed", seed},
                    {"output", out_or("perturb_sim.csv")},
                    {"params", params}});
    }
    return 0;
}
