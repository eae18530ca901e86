#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treerate/measures.hpp"
#include "treerate/tree.hpp"

namespace treerate {

// One outgoing row of a trajectory-tree node: ordered entries
// (next state, probability). Entries may repeat a state: a fan-out of
// degree d inside one aggregated state is d entries with the same label.
struct ProcessRow {
    std::vector<int> state;
    std::vector<double> prob;
    std::size_t size() const { return prob.size(); }
};

// Level- and state-dependent forward specification of a stochastic process
// on its trajectory tree. States are 0..n_states-1; the root is its own
// pseudo-state and carries root_row (the law of the first step).
struct ProcessSpec {
    std::string name;
    int n_states = 0;
    ProcessRow root_row;
    std::function<ProcessRow(int level, int state)> row_fn;  // levels >= 1

    // length rule: every node at (level,state) has this edge length
    std::function<double(int level, int state)> length_fn;  // null = unit
    double length_min = 1.0, length_max = 1.0;               // c1, c2

    // limit of H_q(x)/l(x), when the family knows it
    std::optional<double> declared_rate;

    ProcessRow row(int level, int state) const {
        return level == 0 ? root_row : row_fn(level, state);
    }
    double edge_length(int level, int state) const {
        return length_fn ? length_fn(level, state) : 1.0;
    }
};

// Built-in families.
ProcessSpec iid_process(std::vector<double> probs);
ProcessSpec markov_process(std::vector<std::vector<double>> transition,
                           std::vector<double> initial);
// Independent steps with a level-dependent common row over one alphabet.
ProcessSpec product_process(int alphabet, std::function<std::vector<double>(int level)> row_at,
                            std::string name = "product");
// Simple random walk on the complete oriented d-regular graph (uniform rows).
ProcessSpec srw_regular_digraph(int d);
// Two branches of constant fan-out d1/d2 chosen once at the root with
// probability theta / 1-theta; the fair version is theta = 1/2.
ProcessSpec two_branch_process(double theta, int d1, int d2);

// Per-section record of the rate comparison between two processes on the
// same trajectory tree.
struct RateRecord {
    int n = 0;
    double entropy_p = 0.0, length_p = 0.0;
    double entropy_q = 0.0, length_q = 0.0;
    double kl = 0.0;
    double rate_p() const { return entropy_p / length_p; }
    double rate_q() const { return entropy_q / length_q; }
    double gap() const { return std::abs(rate_p() - rate_q()); }
    double kl_per_level() const { return kl / static_cast<double>(n); }
    double delta_n() const { return std::pow(kl / length_p, 0.25); }
};

// Exact level-state dynamic programme: occupancies pi_k(s) collapse the
// mu_P-weighted local sums when rows depend only on (level, state).
// Requires the two specs to have entry-aligned rows (same states in the
// same order) wherever P gives mass.
std::vector<RateRecord> aggregate_rates(const ProcessSpec& p, const ProcessSpec& q, int n_max);

struct RateDiagnostics {
    bool kl_monotone = true;        // D(P_n||Q_n) nondecreasing in n
    double worst_kl_step = 0.0;     // most negative increment observed
    bool length_comparable = true;  // c1 <= l <= c2 supplied
    bool rate_declared = false;
    double h = 0.0;                 // declared, or tail estimate
    double h_tail_spread = 0.0;     // sup-inf of H_q/l over the last levels
    double sup_hq_over_l = 0.0;     // A over materialized (level,state)
    double inf_hq_over_l = 0.0;     // a
    int tail_start = 0;             // k with spread < eps outside S(k); -1 if none
    double eps = 0.0;
    std::vector<double> asy_bound;  // per record; NaN where delta_n >= 1/2 or no k
};

struct RateSequence {
    std::vector<RateRecord> records;
    RateDiagnostics diag;
};

// Rate comparison plus the asymptotic-theorem diagnostic column
//   c2 (2 eps + M phi(delta_n)) + C sqrt(c2) delta_n + eps
//     + (A - a) max{ l(P_S(k))/l(P_n), l(Q_S(k))/l(Q_n) }
// with delta_n = (D(P_n||Q_n)/l(P_n))^{1/4} and k the first level beyond
// which H_q/l varies by less than eps.
RateSequence rate_sequence(const ProcessSpec& p, const ProcessSpec& q, int n_max, double eps = 0.0);

// Explicit truncation T^{S(n)} of a process: positive-probability words up
// to length n, plus the kernel and hitting law on that finite tree.
struct ExplicitSection {
    Tree tree;
    ForwardKernel kernel;
    LeafDistribution law;
    std::vector<int> state_of;    // per node; -1 at the root
    std::vector<int> entry_of;    // index of the row entry that created the node
};

ExplicitSection truncate(const ProcessSpec& spec, int n,
                         std::size_t node_guard = 5'000'000);

// Lays a second, entry-aligned process law on an existing truncation.
// Throws SupportViolation if it gives mass to a pruned branch.
LeafDistribution lay_on_truncation(const ExplicitSection& sec, const ProcessSpec& spec);

// f(alpha) = (1+alpha) log2(1+alpha) + (1-alpha) log2(1-alpha), the
// per-step divergence scale of the near-uniform perturbation family.
double kakutani_f(double alpha);

// Near-uniform product family on {1..M}: level-k row bumps symbol 1 by
// alpha_k/M and docks symbol 2 by the same amount.
ProcessSpec kakutani_process(int M, std::function<double(int level)> alpha_at);
ProcessSpec kakutani_process(int M, double beta);  // alpha_n = n^-beta

struct KakutaniRecord {
    long long n = 0;
    double kl = 0.0;      // D(P_n||Q_n) = sum f(alpha_k)/M
    double rate = 0.0;    // H(P_n)/n = log2 M - D_n/n
};

// Closed-form partial sums at the requested checkpoints (no tree, no DP).
std::vector<KakutaniRecord> kakutani_experiment(int M, double beta,
                                                std::span<const long long> checkpoints);

}  // namespace treerate
