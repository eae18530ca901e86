#include "treerate/process.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "treerate/bounds.hpp"
#include "treerate/entropy.hpp"
#include "treerate/kahan.hpp"

namespace treerate {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void check_row(const ProcessRow& r, int n_states, const std::string& where) {
    if (r.state.size() != r.prob.size()) fail(where + ": entry arrays differ in length");
    KahanSum s;
    for (std::size_t j = 0; j < r.size(); ++j) {
        if (r.state[j] < 0 || r.state[j] >= n_states) fail(where + ": entry state out of range");
        if (r.prob[j] < 0.0 || !std::isfinite(r.prob[j])) fail(where + ": bad probability");
        s.add(r.prob[j]);
    }
    if (std::abs(s.value() - 1.0) > kMassTolerance) fail(where + ": row does not sum to 1");
}

void check_aligned(const ProcessRow& a, const ProcessRow& b, const std::string& where) {
    if (a.size() != b.size()) fail(where + ": rows have different entry counts");
    for (std::size_t j = 0; j < a.size(); ++j)
        if (a.state[j] != b.state[j]) fail(where + ": rows disagree on entry states");
}

}  // namespace

ProcessSpec iid_process(std::vector<double> probs) {
    int m = static_cast<int>(probs.size());
    ProcessRow row;
    row.prob = std::move(probs);
    row.state.resize(row.prob.size());
    for (int j = 0; j < m; ++j) row.state[static_cast<std::size_t>(j)] = j;
    check_row(row, m, "iid row");

    ProcessSpec spec;
    spec.name = "iid";
    spec.n_states = m;
    spec.root_row = row;
    spec.row_fn = [row](int, int) { return row; };
    spec.declared_rate = entropy(row.prob);
    return spec;
}

ProcessSpec markov_process(std::vector<std::vector<double>> transition,
                           std::vector<double> initial) {
    int m = static_cast<int>(transition.size());
    if (m == 0) fail("empty transition matrix");
    std::vector<ProcessRow> rows(static_cast<std::size_t>(m));
    for (int s = 0; s < m; ++s) {
        auto& row = rows[static_cast<std::size_t>(s)];
        if (transition[static_cast<std::size_t>(s)].size() != static_cast<std::size_t>(m))
            fail("transition matrix is not square");
        row.prob = transition[static_cast<std::size_t>(s)];
        row.state.resize(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) row.state[static_cast<std::size_t>(j)] = j;
        check_row(row, m, "transition row " + std::to_string(s));
    }
    ProcessRow root;
    root.prob = std::move(initial);
    root.state.resize(root.prob.size());
    for (int j = 0; j < m; ++j) root.state[static_cast<std::size_t>(j)] = j;
    check_row(root, m, "initial distribution");

    ProcessSpec spec;
    spec.name = "markov";
    spec.n_states = m;
    spec.root_row = std::move(root);
    spec.row_fn = [rows](int, int state) { return rows[static_cast<std::size_t>(state)]; };

    // constant row entropy is worth declaring; it is the common use here
    double h0 = entropy(rows[0].prob);
    bool constant = std::all_of(rows.begin(), rows.end(), [&](const ProcessRow& r) {
        return std::abs(entropy(r.prob) - h0) <= 1e-12;
    });
    if (constant) spec.declared_rate = h0;
    return spec;
}

ProcessSpec product_process(int alphabet, std::function<std::vector<double>(int level)> row_at,
                            std::string name) {
    if (alphabet < 2) fail("product alphabet needs at least two symbols");
    ProcessSpec spec;
    spec.name = std::move(name);
    spec.n_states = alphabet;
    auto make = [alphabet, row_at](int level) {
        ProcessRow r;
        r.prob = row_at(level);
        if (r.prob.size() != static_cast<std::size_t>(alphabet))
            fail("level row size does not match the alphabet");
        r.state.resize(r.prob.size());
        for (int j = 0; j < alphabet; ++j) r.state[static_cast<std::size_t>(j)] = j;
        check_row(r, alphabet, "level row");
        return r;
    };
    spec.root_row = make(0);
    spec.row_fn = [make](int level, int) { return make(level); };
    return spec;
}

ProcessSpec srw_regular_digraph(int d) {
    if (d < 2) fail("out-degree must be at least 2");
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(d),
                                          std::vector<double>(static_cast<std::size_t>(d),
                                                              1.0 / static_cast<double>(d)));
    std::vector<double> init(static_cast<std::size_t>(d), 1.0 / static_cast<double>(d));
    ProcessSpec spec = markov_process(std::move(rows), std::move(init));
    spec.name = "srw_regular_digraph(" + std::to_string(d) + ")";
    spec.declared_rate = std::log2(static_cast<double>(d));
    return spec;
}

ProcessSpec two_branch_process(double theta, int d1, int d2) {
    if (!(theta > 0.0 && theta < 1.0)) fail("theta must lie in (0,1)");
    if (d1 < 2 || d2 < 2) fail("branch degrees must be at least 2");
    ProcessSpec spec;
    spec.name = "two_branch";
    spec.n_states = 2;  // which branch we are in
    spec.root_row.state = {0, 1};
    spec.root_row.prob = {theta, 1.0 - theta};
    spec.row_fn = [d1, d2](int, int state) {
        int d = state == 0 ? d1 : d2;
        ProcessRow r;
        r.state.assign(static_cast<std::size_t>(d), state);
        r.prob.assign(static_cast<std::size_t>(d), 1.0 / static_cast<double>(d));
        return r;
    };
    return spec;
}

std::vector<RateRecord> aggregate_rates(const ProcessSpec& p, const ProcessSpec& q, int n_max) {
    if (n_max < 1) fail("need at least one level");
    if (p.n_states != q.n_states) fail("state spaces differ");

    std::vector<RateRecord> out;
    out.reserve(static_cast<std::size_t>(n_max));

    // occupancies over states for each law
    std::vector<double> occ_p, occ_q, next_p, next_q;
    KahanSum hp, lp, hq, lq, dd;

    for (int level = 0; level < n_max; ++level) {
        next_p.assign(static_cast<std::size_t>(p.n_states), 0.0);
        next_q.assign(static_cast<std::size_t>(q.n_states), 0.0);

        auto step = [&](const ProcessSpec& spec, const std::vector<double>& occ,
                        std::vector<double>& next, KahanSum& h, KahanSum& len,
                        auto&& per_state) {
            if (level == 0) {
                ProcessRow row = spec.root_row;
                h.add(entropy(row.prob));
                len.add(spec.edge_length(0, -1));
                for (std::size_t j = 0; j < row.size(); ++j)
                    next[static_cast<std::size_t>(row.state[j])] += row.prob[j];
                per_state(-1, 1.0, row);
                return;
            }
            for (int s = 0; s < spec.n_states; ++s) {
                double mass = occ[static_cast<std::size_t>(s)];
                if (mass <= 0.0) continue;
                ProcessRow row = spec.row(level, s);
                h.add(mass * entropy(row.prob));
                len.add(mass * spec.edge_length(level, s));
                for (std::size_t j = 0; j < row.size(); ++j)
                    next[static_cast<std::size_t>(row.state[j])] += mass * row.prob[j];
                per_state(s, mass, row);
            }
        };

        // P side drives the divergence sum; q rows are fetched aligned.
        step(p, occ_p, next_p, hp, lp, [&](int s, double mass, const ProcessRow& row_p) {
            ProcessRow row_q = q.row(level, s);
            check_aligned(row_p, row_q,
                          "level " + std::to_string(level) + " state " + std::to_string(s));
            dd.add(mass * local_kl(row_p.prob, row_q.prob));
        });
        step(q, occ_q, next_q, hq, lq, [](int, double, const ProcessRow&) {});

        occ_p.swap(next_p);
        occ_q.swap(next_q);

        RateRecord rec;
        rec.n = level + 1;
        rec.entropy_p = hp.value();
        rec.length_p = lp.value();
        rec.entropy_q = hq.value();
        rec.length_q = lq.value();
        rec.kl = dd.value();
        out.push_back(rec);
    }
    return out;
}

RateSequence rate_sequence(const ProcessSpec& p, const ProcessSpec& q, int n_max, double eps) {
    RateSequence seq;
    seq.records = aggregate_rates(p, q, n_max);
    auto& d = seq.diag;
    d.eps = eps;

    for (std::size_t i = 1; i < seq.records.size(); ++i) {
        double step = seq.records[i].kl - seq.records[i - 1].kl;
        d.worst_kl_step = std::min(d.worst_kl_step, step);
    }
    d.kl_monotone = d.worst_kl_step >= -1e-12;
    d.length_comparable = q.length_min > 0.0 && std::isfinite(q.length_max);

    // H_q(x)/l(x) per occupied (level, state); drives A, a and the
    // tail-constancy diagnostic.
    std::vector<double> level_sup(static_cast<std::size_t>(n_max),
                                  -std::numeric_limits<double>::infinity());
    std::vector<double> level_inf(static_cast<std::size_t>(n_max),
                                  std::numeric_limits<double>::infinity());
    int max_row = 0;
    {
        std::vector<double> occ, next;
        for (int level = 0; level < n_max; ++level) {
            next.assign(static_cast<std::size_t>(q.n_states), 0.0);
            auto visit = [&](int s, const ProcessRow& row) {
                double v = entropy(row.prob) / q.edge_length(level, s);
                level_sup[static_cast<std::size_t>(level)] =
                    std::max(level_sup[static_cast<std::size_t>(level)], v);
                level_inf[static_cast<std::size_t>(level)] =
                    std::min(level_inf[static_cast<std::size_t>(level)], v);
                max_row = std::max(max_row, static_cast<int>(row.size()));
                for (std::size_t j = 0; j < row.size(); ++j)
                    next[static_cast<std::size_t>(row.state[j])] += (s < 0 ? 1.0 : occ[static_cast<std::size_t>(s)]) * row.prob[j];
            };
            if (level == 0) {
                visit(-1, q.root_row);
            } else {
                for (int s = 0; s < q.n_states; ++s)
                    if (occ[static_cast<std::size_t>(s)] > 0.0) visit(s, q.row(level, s));
            }
            occ.swap(next);
        }
    }
    double sup_all = -std::numeric_limits<double>::infinity();
    double inf_all = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n_max; ++k) {
        sup_all = std::max(sup_all, level_sup[static_cast<std::size_t>(k)]);
        inf_all = std::min(inf_all, level_inf[static_cast<std::size_t>(k)]);
    }
    d.sup_hq_over_l = sup_all;
    d.inf_hq_over_l = inf_all;

    if (q.declared_rate) {
        d.rate_declared = true;
        d.h = *q.declared_rate;
    } else {
        d.h = level_sup.empty() ? 0.0 : 0.5 * (level_sup.back() + level_inf.back());
    }
    // convergence diagnostic over the trailing quarter of the levels
    {
        int from = std::max(0, n_max - std::max(1, n_max / 4));
        double s = -std::numeric_limits<double>::infinity();
        double i = std::numeric_limits<double>::infinity();
        for (int k = from; k < n_max; ++k) {
            s = std::max(s, level_sup[static_cast<std::size_t>(k)]);
            i = std::min(i, level_inf[static_cast<std::size_t>(k)]);
        }
        d.h_tail_spread = s - i;
    }

    // first k with sup-inf over levels >= k within eps
    d.tail_start = -1;
    {
        std::vector<double> suf_sup(static_cast<std::size_t>(n_max) + 1,
                                    -std::numeric_limits<double>::infinity());
        std::vector<double> suf_inf(static_cast<std::size_t>(n_max) + 1,
                                    std::numeric_limits<double>::infinity());
        for (int k = n_max - 1; k >= 0; --k) {
            suf_sup[static_cast<std::size_t>(k)] =
                std::max(suf_sup[static_cast<std::size_t>(k) + 1], level_sup[static_cast<std::size_t>(k)]);
            suf_inf[static_cast<std::size_t>(k)] =
                std::min(suf_inf[static_cast<std::size_t>(k) + 1], level_inf[static_cast<std::size_t>(k)]);
        }
        for (int k = 0; k < n_max; ++k) {
            if (suf_sup[static_cast<std::size_t>(k)] - suf_inf[static_cast<std::size_t>(k)] <= eps) {
                d.tail_start = k;
                break;
            }
        }
    }

    d.asy_bound.assign(seq.records.size(), std::numeric_limits<double>::quiet_NaN());
    if (d.tail_start >= 0 && d.length_comparable) {
        double c2 = q.length_max;
        double aa = sup_all - inf_all;
        double c = compare_constant();
        for (std::size_t i = 0; i < seq.records.size(); ++i) {
            const auto& rec = seq.records[i];
            double dn = rec.delta_n();
            if (!(dn < 0.5)) continue;  // comparison theorem needs delta < 1/2
            if (rec.n <= d.tail_start) continue;
            double lpk = d.tail_start == 0
                             ? 0.0
                             : seq.records[static_cast<std::size_t>(d.tail_start) - 1].length_p;
            double lqk = d.tail_start == 0
                             ? 0.0
                             : seq.records[static_cast<std::size_t>(d.tail_start) - 1].length_q;
            double ratio = std::max(lpk / rec.length_p, lqk / rec.length_q);
            d.asy_bound[i] = c2 * (2.0 * eps + max_row * phi(dn)) + c * std::sqrt(c2) * dn +
                             eps + aa * ratio;
        }
    }
    return seq;
}

ExplicitSection truncate(const ProcessSpec& spec, int n, std::size_t node_guard) {
    if (n < 1) fail("truncation level must be at least 1");

    ExplicitSection sec;
    std::vector<std::pair<std::int64_t, std::int64_t>> edges;
    std::vector<int> state_of{-1};
    std::vector<int> entry_of{-1};
    std::vector<double> reach{1.0};  // hitting mass of each node
    std::vector<int> level_of{0};

    // plain BFS queue over node indices; children are appended in row order
    for (std::size_t i = 0; i < state_of.size(); ++i) {
        int level = level_of[i];
        if (level == n) continue;
        ProcessRow row = spec.row(level, state_of[i]);
        check_row(row, spec.n_states, "row at level " + std::to_string(level));
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (row.prob[j] == 0.0) continue;  // pruned: word never occurs
            state_of.push_back(row.state[j]);
            entry_of.push_back(static_cast<int>(j));
            reach.push_back(reach[i] * row.prob[j]);
            level_of.push_back(level + 1);
            edges.emplace_back(static_cast<std::int64_t>(i),
                               static_cast<std::int64_t>(state_of.size() - 1));
            if (state_of.size() > node_guard)
                throw GuardExceeded("truncation exceeds node guard; use the aggregated mode");
        }
    }

    TreeBuildOptions opts;
    opts.allow_unary = true;  // pruning can leave single live children
    opts.max_nodes = node_guard;
    sec.tree = Tree::from_edges(edges, 0, opts);

    // BFS ids coincide with our construction order only level by level;
    // remap through the external labels to stay correct in general.
    std::vector<std::vector<double>> rows(sec.tree.node_count());
    std::vector<double> mass(sec.tree.node_count(), 0.0);
    sec.state_of.assign(sec.tree.node_count(), -1);
    sec.entry_of.assign(sec.tree.node_count(), -1);
    for (std::size_t i = 0; i < sec.tree.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        std::size_t orig = static_cast<std::size_t>(sec.tree.external_id(x));
        sec.state_of[i] = state_of[orig];
        sec.entry_of[i] = entry_of[orig];
        if (sec.tree.is_leaf(x)) {
            mass[i] = reach[orig];
            continue;
        }
        auto ch = sec.tree.children(x);
        auto& row = rows[i];
        row.reserve(ch.size());
        for (NodeId c : ch) {
            std::size_t corig = static_cast<std::size_t>(sec.tree.external_id(c));
            row.push_back(reach[corig] / reach[orig]);
        }
    }
    sec.kernel = ForwardKernel::from_rows(sec.tree, std::move(rows));
    sec.law = LeafDistribution::from_node_masses(sec.tree, std::move(mass));
    return sec;
}

LeafDistribution lay_on_truncation(const ExplicitSection& sec, const ProcessSpec& spec) {
    const Tree& t = sec.tree;
    std::vector<double> reach(t.node_count(), 0.0);
    reach[0] = 1.0;
    std::vector<double> mass(t.node_count(), 0.0);
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (t.is_leaf(x)) {
            mass[i] = reach[i];
            continue;
        }
        ProcessRow row = spec.row(t.depth(x), sec.state_of[i]);
        KahanSum placed;
        for (NodeId c : t.children(x)) {
            std::size_t ci = static_cast<std::size_t>(c);
            int j = sec.entry_of[ci];
            if (j < 0 || static_cast<std::size_t>(j) >= row.size())
                fail("truncation and spec disagree on row shape");
            if (row.state[static_cast<std::size_t>(j)] != sec.state_of[ci])
                fail("truncation and spec disagree on entry states");
            reach[ci] = reach[i] * row.prob[static_cast<std::size_t>(j)];
            placed.add(row.prob[static_cast<std::size_t>(j)]);
        }
        // mass on entries pruned from the reference support must be zero
        if (reach[i] > 0.0 && std::abs(placed.value() - 1.0) > kMassTolerance)
            throw SupportViolation(t.external_id(x),
                                   "law gives mass to a branch pruned from the reference support "
                                   "below node " + std::to_string(t.external_id(x)));
    }
    return LeafDistribution::from_node_masses(t, std::move(mass));
}

double kakutani_f(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) fail("alpha must lie in (0,1]");
    double up = (1.0 + alpha) * std::log2(1.0 + alpha);
    double down = alpha == 1.0 ? 0.0 : (1.0 - alpha) * std::log2(1.0 - alpha);
    return up + down;
}

ProcessSpec kakutani_process(int M, std::function<double(int level)> alpha_at) {
    if (M < 2) fail("alphabet size must be at least 2");
    auto row_at = [M, alpha_at](int level) {
        double alpha = alpha_at(level);
        if (!(alpha > 0.0 && alpha <= 1.0)) fail("alpha must lie in (0,1]");
        std::vector<double> r(static_cast<std::size_t>(M), 1.0 / M);
        r[0] = (1.0 + alpha) / M;
        r[1] = (1.0 - alpha) / M;
        return r;
    };
    ProcessSpec spec = product_process(M, row_at, "kakutani");
    return spec;
}

ProcessSpec kakutani_process(int M, double beta) {
    if (!(beta > 0.0)) fail("beta must be positive");
    // levels are 0-based internally; alpha_n = n^-beta with n = level + 1
    return kakutani_process(M, [beta](int level) {
        return std::pow(static_cast<double>(level + 1), -beta);
    });
}

std::vector<KakutaniRecord> kakutani_experiment(int M, double beta,
                                                std::span<const long long> checkpoints) {
    if (M < 2) fail("alphabet size must be at least 2");
    if (!(beta > 0.0)) fail("beta must be positive");
    std::vector<long long> cps(checkpoints.begin(), checkpoints.end());
    std::sort(cps.begin(), cps.end());
    if (cps.empty() || cps.front() < 1) fail("checkpoints must be positive");

    std::vector<KakutaniRecord> out;
    out.reserve(cps.size());
    KahanSum d;
    double log2m = std::log2(static_cast<double>(M));
    std::size_t next = 0;
    for (long long k = 1; k <= cps.back(); ++k) {
        d.add(kakutani_f(std::pow(static_cast<double>(k), -beta)) / M);
        while (next < cps.size() && cps[next] == k) {
            KakutaniRecord rec;
            rec.n = k;
            rec.kl = d.value();
            rec.rate = log2m - rec.kl / static_cast<double>(k);
            out.push_back(rec);
            ++next;
        }
    }
    return out;
}

}  // namespace treerate
