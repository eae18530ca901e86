#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "treerate/bounds.hpp"
#include "treerate/process.hpp"
#include "treerate/rng.hpp"

namespace treerate {

// Law of the per-level mixing weights delta_0, delta_1, ...
struct DeltaLaw {
    enum class Kind { deterministic, bernoulli, custom };
    Kind kind = Kind::deterministic;

    std::vector<double> sequence;  // deterministic: delta_k = sequence[k] (last value repeats)
    double beta = 0.0;             // bernoulli: P[delta_n = 1] = min(1, n^-beta)
    std::function<double(int, Rng&)> sampler;  // custom
    bool custom_vanishes = false;  // declared E(delta_n) -> 0 for custom laws

    static DeltaLaw constant(double value);
    static DeltaLaw from_sequence(std::vector<double> seq);
    static DeltaLaw bernoulli_decay(double beta);

    // whether E(delta_n) -> 0 under this law (the theorem's hypothesis)
    bool expectation_vanishes() const;
};

struct DeltaSample {
    std::vector<double> delta;
    std::uint64_t seed = 0;
    double sum = 0.0;
    double mean = 0.0;
};

DeltaSample sample_deltas(const DeltaLaw& law, int n, std::uint64_t seed);

// Base process q with an alternate kernel q' on the same entry layout and
// a declared uniform bound D on the row divergences D(q'(.|x) || q(.|x)).
struct PerturbationSpec {
    ProcessSpec base;
    ProcessRow alt_root;
    std::function<ProcessRow(int level, int state)> alt_row;
    double kl_bound = 0.0;  // D
    std::optional<double> alt_declared_rate;  // H of q'-rows when constant

    ProcessRow alt(int level, int state) const {
        return level == 0 ? alt_root : alt_row(level, state);
    }
};

// Validates entry alignment, supp q' within supp q, and the declared D on
// the materialized rows of the first `check_levels` levels.
PerturbationSpec make_perturbation(ProcessSpec base, const ProcessSpec& alternate,
                                   double kl_bound, int check_levels = 64);

// The mixed process of one realization: rows of nodes at depth k are
// (1 - delta_k) q + delta_k q'.
ProcessSpec mixed_process(const PerturbationSpec& spec, std::span<const double> deltas);

struct PerturbedRecord {
    int n = 0;
    double entropy_p = 0.0, length_p = 0.0, kl = 0.0;
    double rate = 0.0;        // H(P_n)/l(P_n)
    double kl_rate = 0.0;     // D(P_n||Q_n)/l(P_n)
    double bound_rhs = 0.0;   // (D/(c1 n)) sum_{k<=n} delta_k
};

struct PerturbedRun {
    std::vector<PerturbedRecord> records;
    DeltaSample deltas;
    double h = 0.0;                  // declared base rate
    bool convexity_ok = true;        // D_pq(x) <= delta_k D(q'||q)(x) <= delta_k D per row
    double worst_convexity_slack = 0.0;
    bool kl_rate_bound_ok = true;    // kl_rate <= bound_rhs at every n
};

// Exact per-realization entropy/divergence sequence of the mixed process
// against the base, with the inequality chain checked at every level.
PerturbedRun perturbed_rate(const PerturbationSpec& spec, int n, const DeltaSample& deltas);

struct TrialRecord {
    int trial = 0;
    std::uint64_t seed = 0;
    double delta_sum = 0.0;
    std::vector<double> rate_at;       // per checkpoint
    std::vector<double> kl_rate_at;
    bool bounds_hold = true;
};

struct MonteCarloReport {
    std::vector<int> checkpoints;
    std::vector<TrialRecord> trials;
    double h = 0.0;
    bool hypothesis_vanishes = true;   // E(delta_n) -> 0 under the law
    bool all_bounds_hold = true;
    // per checkpoint: mean over trials of |rate - h|
    std::vector<double> mean_abs_rate_gap;
    // fraction of trials with |terminal rate - h| < tol at the last checkpoint
    double fraction_within(double tol) const;
};

// Seeded trials of delta-sequences; H and D per realization are exact
// (aggregated), nothing is trajectory-sampled. Trial t uses
// Rng::derive(seed, t), so reports are reproducible and mergeable in
// trial order no matter how trials are scheduled.
MonteCarloReport randper_monte_carlo(const PerturbationSpec& spec, const DeltaLaw& law, int n,
                                     int trials, std::uint64_t seed,
                                     std::span<const int> checkpoints);

// Tail-entropy certificate for mixed rows, combined from the two base
// certificates: beyond a cutoff where both dominating tails are <= 1/(2e),
// the mixture's entropy tail is at most twice the sum of the bases'.
struct MixtureTailBound {
    std::size_t cutoff = 0;
    double entropy_tail_bound = 0.0;
};

MixtureTailBound combine_mixture_tails(const TightnessCertificate& q,
                                       const TightnessCertificate& q_alt, double eps);

// sum_{n >= m} n 2^-n, the geometric part of the entropy tail estimates.
double entropy_tail_geometric_part(std::size_t m);

}  // namespace treerate
