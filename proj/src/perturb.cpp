#include "treerate/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "treerate/entropy.hpp"
#include "treerate/kahan.hpp"

namespace treerate {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

DeltaLaw DeltaLaw::constant(double value) {
    if (!(value >= 0.0 && value <= 1.0)) fail("delta must lie in [0,1]");
    DeltaLaw law;
    law.kind = Kind::deterministic;
    law.sequence = {value};
    return law;
}

DeltaLaw DeltaLaw::from_sequence(std::vector<double> seq) {
    if (seq.empty()) fail("empty delta sequence");
    for (double v : seq)
        if (!(v >= 0.0 && v <= 1.0)) fail("delta must lie in [0,1]");
    DeltaLaw law;
    law.kind = Kind::deterministic;
    law.sequence = std::move(seq);
    return law;
}

DeltaLaw DeltaLaw::bernoulli_decay(double beta) {
    if (!(beta > 0.0)) fail("bernoulli delta law needs beta > 0");
    DeltaLaw law;
    law.kind = Kind::bernoulli;
    law.beta = beta;
    return law;
}

bool DeltaLaw::expectation_vanishes() const {
    switch (kind) {
        case Kind::bernoulli: return true;  // n^-beta -> 0 for beta > 0
        case Kind::deterministic:
            // the tail value repeats forever, so the limit is its value
            return sequence.back() == 0.0;
        case Kind::custom: return custom_vanishes;
    }
    return false;
}

DeltaSample sample_deltas(const DeltaLaw& law, int n, std::uint64_t seed) {
    if (n < 1) fail("need at least one level");
    DeltaSample out;
    out.seed = seed;
    out.delta.resize(static_cast<std::size_t>(n));
    Rng rng(seed);
    KahanSum sum;
    for (int k = 0; k < n; ++k) {
        double d = 0.0;
        switch (law.kind) {
            case DeltaLaw::Kind::deterministic:
                d = law.sequence[std::min<std::size_t>(static_cast<std::size_t>(k),
                                                       law.sequence.size() - 1)];
                break;
            case DeltaLaw::Kind::bernoulli: {
                // P[delta_k = 1] = min(1, k^-beta); levels 0 and 1 are certain
                double p = k <= 1 ? 1.0 : std::pow(static_cast<double>(k), -law.beta);
                d = rng.uniform01() < p ? 1.0 : 0.0;
                break;
            }
            case DeltaLaw::Kind::custom:
                d = law.sampler(k, rng);
                if (!(d >= 0.0 && d <= 1.0)) fail("custom sampler left [0,1]");
                break;
        }
        out.delta[static_cast<std::size_t>(k)] = d;
        sum.add(d);
    }
    out.sum = sum.value();
    out.mean = out.sum / static_cast<double>(n);
    return out;
}

PerturbationSpec make_perturbation(ProcessSpec base, const ProcessSpec& alternate,
                                   double kl_bound, int check_levels) {
    if (!(kl_bound > 0.0) || !std::isfinite(kl_bound)) fail("need a finite positive bound D");
    if (base.n_states != alternate.n_states) fail("state spaces differ");

    PerturbationSpec spec;
    spec.alt_root = alternate.root_row;
    spec.alt_row = alternate.row_fn;
    spec.kl_bound = kl_bound;
    spec.alt_declared_rate = alternate.declared_rate;

    auto verify = [&](const ProcessRow& q, const ProcessRow& qa, const std::string& where) {
        if (q.size() != qa.size()) fail(where + ": alternate row has different entry count");
        for (std::size_t j = 0; j < q.size(); ++j) {
            if (q.state[j] != qa.state[j]) fail(where + ": alternate row disagrees on states");
            if (qa.prob[j] > 0.0 && q.prob[j] == 0.0)
                fail(where + ": alternate row escapes the base support (entry " +
                     std::to_string(j) + ")");
        }
        double d = local_kl(qa.prob, q.prob);
        if (!(d < kl_bound))
            fail(where + ": row divergence " + std::to_string(d) +
                 " does not stay below the declared bound " + std::to_string(kl_bound));
    };

    verify(base.root_row, spec.alt_root, "root");
    for (int level = 1; level <= check_levels; ++level)
        for (int s = 0; s < base.n_states; ++s)
            verify(base.row(level, s), spec.alt(level, s),
                   "level " + std::to_string(level) + " state " + std::to_string(s));

    spec.base = std::move(base);
    return spec;
}

ProcessSpec mixed_process(const PerturbationSpec& spec, std::span<const double> deltas) {
    if (deltas.empty()) fail("empty delta sequence");
    std::vector<double> d(deltas.begin(), deltas.end());
    const ProcessSpec& base = spec.base;

    auto mix = [](const ProcessRow& q, const ProcessRow& qa, double delta) {
        ProcessRow r = q;
        for (std::size_t j = 0; j < r.size(); ++j)
            r.prob[j] = (1.0 - delta) * q.prob[j] + delta * qa.prob[j];
        return r;
    };

    ProcessSpec mixed;
    mixed.name = base.name + "+perturbation";
    mixed.n_states = base.n_states;
    mixed.root_row = mix(base.root_row, spec.alt_root, d[0]);
    PerturbationSpec captured = spec;  // keep the row closures alive
    mixed.row_fn = [captured, d](int level, int state) {
        double delta =
            d[std::min<std::size_t>(static_cast<std::size_t>(level), d.size() - 1)];
        ProcessRow q = captured.base.row(level, state);
        ProcessRow qa = captured.alt(level, state);
        ProcessRow r = q;
        for (std::size_t j = 0; j < r.size(); ++j)
            r.prob[j] = (1.0 - delta) * q.prob[j] + delta * qa.prob[j];
        return r;
    };
    mixed.length_fn = base.length_fn;
    mixed.length_min = base.length_min;
    mixed.length_max = base.length_max;
    return mixed;
}

PerturbedRun perturbed_rate(const PerturbationSpec& spec, int n, const DeltaSample& deltas) {
    if (n < 1) fail("need at least one level");
    if (deltas.delta.size() < static_cast<std::size_t>(n)) fail("delta sequence shorter than run");
    const ProcessSpec& base = spec.base;
    if (!base.declared_rate)
        fail("base process does not declare its rate limit (hypothesis (ii))");
    if (!(base.length_min > 0.0) || !std::isfinite(base.length_max))
        fail("length rule is not comparable with unit length (hypothesis (i))");

    PerturbedRun run;
    run.deltas = deltas;
    run.h = *base.declared_rate;
    run.records.reserve(static_cast<std::size_t>(n));

    double c1 = base.length_min;
    double D = spec.kl_bound;

    std::vector<double> occ, next;
    KahanSum hp, lp, dd, delta_partial;

    for (int level = 0; level < n; ++level) {
        double delta_k = deltas.delta[static_cast<std::size_t>(level)];
        delta_partial.add(delta_k);
        next.assign(static_cast<std::size_t>(base.n_states), 0.0);

        auto visit = [&](int s, double mass) {
            ProcessRow q = base.row(level, s);
            ProcessRow qa = spec.alt(level, s);
            ProcessRow p = q;
            for (std::size_t j = 0; j < p.size(); ++j)
                p.prob[j] = (1.0 - delta_k) * q.prob[j] + delta_k * qa.prob[j];

            double d_row = local_kl(p.prob, q.prob);
            double d_alt = local_kl(qa.prob, q.prob);
            double slack = d_row - delta_k * d_alt;  // convexity: must be <= 0
            run.worst_convexity_slack = std::max(run.worst_convexity_slack, slack);
            if (slack > 1e-12 || d_alt >= D + 1e-12) run.convexity_ok = false;

            hp.add(mass * entropy(p.prob));
            lp.add(mass * base.edge_length(level, s));
            dd.add(mass * d_row);
            for (std::size_t j = 0; j < p.size(); ++j)
                next[static_cast<std::size_t>(p.state[j])] += mass * p.prob[j];
        };

        if (level == 0) {
            visit(-1, 1.0);
        } else {
            for (int s = 0; s < base.n_states; ++s)
                if (occ[static_cast<std::size_t>(s)] > 0.0)
                    visit(s, occ[static_cast<std::size_t>(s)]);
        }
        occ.swap(next);

        PerturbedRecord rec;
        rec.n = level + 1;
        rec.entropy_p = hp.value();
        rec.length_p = lp.value();
        rec.kl = dd.value();
        rec.rate = rec.entropy_p / rec.length_p;
        rec.kl_rate = rec.kl / rec.length_p;
        rec.bound_rhs = D / (c1 * rec.n) * delta_partial.value();
        if (rec.kl_rate > rec.bound_rhs + 1e-12) run.kl_rate_bound_ok = false;
        run.records.push_back(rec);
    }
    return run;
}

double MonteCarloReport::fraction_within(double tol) const {
    if (trials.empty()) return 0.0;
    int ok = 0;
    for (const auto& t : trials)
        if (std::abs(t.rate_at.back() - h) < tol) ++ok;
    return static_cast<double>(ok) / static_cast<double>(trials.size());
}

MonteCarloReport randper_monte_carlo(const PerturbationSpec& spec, const DeltaLaw& law, int n,
                                     int trials, std::uint64_t seed,
                                     std::span<const int> checkpoints) {
    if (trials < 1) fail("need at least one trial");
    MonteCarloReport rep;
    rep.checkpoints.assign(checkpoints.begin(), checkpoints.end());
    if (rep.checkpoints.empty()) rep.checkpoints = {n};
    std::sort(rep.checkpoints.begin(), rep.checkpoints.end());
    if (rep.checkpoints.front() < 1 || rep.checkpoints.back() > n)
        fail("checkpoints must lie in [1, levels]");
    rep.hypothesis_vanishes = law.expectation_vanishes();
    rep.trials.resize(static_cast<std::size_t>(trials));

    // trials are independent; each one is seeded from its index, so the
    // report is identical no matter how they are scheduled
    auto run_trial = [&](int t) {
        std::uint64_t trial_seed = Rng::derive(seed, static_cast<std::uint64_t>(t));
        DeltaSample ds = sample_deltas(law, n, trial_seed);
        PerturbedRun run = perturbed_rate(spec, n, ds);
        TrialRecord& tr = rep.trials[static_cast<std::size_t>(t)];
        tr.trial = t;
        tr.seed = trial_seed;
        tr.delta_sum = ds.sum;
        tr.bounds_hold = run.kl_rate_bound_ok && run.convexity_ok;
        for (int cp : rep.checkpoints) {
            const auto& rec = run.records[static_cast<std::size_t>(cp - 1)];
            tr.rate_at.push_back(rec.rate);
            tr.kl_rate_at.push_back(rec.kl_rate);
        }
    };

    int threads = 1;
    if (const char* env = std::getenv("TREERATE_THREADS")) threads = std::atoi(env);
    threads = std::clamp(threads, 1, std::max(1, static_cast<int>(std::thread::hardware_concurrency())));
    if (threads <= 1 || trials < 2 * threads) {
        for (int t = 0; t < trials; ++t) run_trial(t);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                for (int t = w; t < trials; t += threads) run_trial(t);
            });
        for (auto& th : pool) th.join();
    }
    for (const auto& tr : rep.trials)
        if (!tr.bounds_hold) rep.all_bounds_hold = false;
    rep.h = rep.trials.empty() ? 0.0 : *spec.base.declared_rate;

    rep.mean_abs_rate_gap.assign(rep.checkpoints.size(), 0.0);
    for (std::size_t c = 0; c < rep.checkpoints.size(); ++c) {
        KahanSum s;
        for (const auto& tr : rep.trials) s.add(std::abs(tr.rate_at[c] - rep.h));
        rep.mean_abs_rate_gap[c] = s.value() / static_cast<double>(trials);
    }
    return rep;
}

double entropy_tail_geometric_part(std::size_t m) {
    return (static_cast<double>(m) + 1.0) * std::ldexp(1.0, 1 - static_cast<int>(m));
}

MixtureTailBound combine_mixture_tails(const TightnessCertificate& q,
                                       const TightnessCertificate& q_alt, double eps) {
    if (q.mode() != TightnessCertificate::Mode::dominated ||
        q_alt.mode() != TightnessCertificate::Mode::dominated)
        fail("mixture tail combination needs dominated certificates on both sides");
    if (!(eps > 0.0)) fail("need eps > 0");
    constexpr double kHalfOverE = 0.18393972058572117;  // 1/(2e)
    for (std::size_t m = 2; m <= 1u << 22; ++m) {
        if (q.pmf().tail(m) > kHalfOverE || q_alt.pmf().tail(m) > kHalfOverE) continue;
        double tail_q = entropy_tail_geometric_part(m) + q.pmf().tail_first_moment(m);
        double tail_a = entropy_tail_geometric_part(m) + q_alt.pmf().tail_first_moment(m);
        double bound = 2.0 * (tail_q + tail_a);
        if (bound < eps) return {m, bound};
    }
    fail("no cutoff reaches the requested eps for the mixture");
}

}  // namespace treerate
