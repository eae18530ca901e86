#include "treerate/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "treerate/kahan.hpp"

namespace treerate {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

constexpr std::size_t kPowerLawCutoff = 20000;

// sum_{n >= m} n 2^-n
double geometric_tail_moment(std::size_t m) {
    return (static_cast<double>(m) + 1.0) * std::ldexp(1.0, 1 - static_cast<int>(m));
}

std::vector<double> sorted_desc(std::span<const double> row) {
    std::vector<double> s(row.begin(), row.end());
    std::sort(s.begin(), s.end(), std::greater<double>());
    return s;
}

}  // namespace

double compare_constant() {
    return 2.0 * std::sqrt(2.0) / (std::exp(1.0) * std::sqrt(std::log(2.0)));
}

DominatingPmf DominatingPmf::geometric(double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) fail("geometric ratio must lie in (0,1)");
    DominatingPmf p;
    p.family_ = Family::geometric;
    p.param_ = ratio;
    p.name_ = "geometric(" + std::to_string(ratio) + ")";
    return p;
}

DominatingPmf DominatingPmf::power_law(double exponent) {
    if (!(exponent > 1.0)) fail("power law needs exponent > 1 to normalise");
    DominatingPmf p;
    p.family_ = Family::power_law;
    p.param_ = exponent;
    p.name_ = "power_law(" + std::to_string(exponent) + ")";
    // Partial sums up to the cutoff; integral bound beyond. The normaliser
    // uses the lower bound so the stored pmf over-covers (stays dominating).
    p.table_tail_.assign(kPowerLawCutoff + 2, 0.0);
    double beyond = std::pow(static_cast<double>(kPowerLawCutoff + 1), 1.0 - exponent) /
                    (exponent - 1.0);
    p.table_tail_[kPowerLawCutoff + 1] = beyond;
    for (std::size_t n = kPowerLawCutoff; n >= 1; --n)
        p.table_tail_[n] = p.table_tail_[n + 1] + std::pow(static_cast<double>(n), -exponent);
    p.norm_ = p.table_tail_[1];
    return p;
}

DominatingPmf DominatingPmf::table(std::vector<double> probs) {
    DominatingPmf p;
    p.family_ = Family::table;
    KahanSum s;
    for (double v : probs) {
        if (v < 0.0 || !std::isfinite(v)) fail("table pmf entries must be finite and nonnegative");
        s.add(v);
    }
    if (std::abs(s.value() - 1.0) > 1e-9) fail("table pmf must sum to 1");
    p.table_ = std::move(probs);
    p.table_tail_.assign(p.table_.size() + 2, 0.0);
    for (std::size_t n = p.table_.size(); n >= 1; --n)
        p.table_tail_[n] = p.table_tail_[n + 1] + p.table_[n - 1];
    p.name_ = "table(" + std::to_string(p.table_.size()) + ")";
    return p;
}

double DominatingPmf::prob(std::size_t n) const {
    if (n == 0) fail("pmf indexed from 1");
    switch (family_) {
        case Family::geometric: return (1.0 - param_) * std::pow(param_, static_cast<double>(n - 1));
        case Family::power_law: return std::pow(static_cast<double>(n), -param_) / norm_;
        case Family::table: return n <= table_.size() ? table_[n - 1] : 0.0;
    }
    return 0.0;
}

double DominatingPmf::tail(std::size_t k) const {
    if (k <= 1) return 1.0;
    switch (family_) {
        case Family::geometric: return std::pow(param_, static_cast<double>(k - 1));
        case Family::power_law: {
            if (k < table_tail_.size()) return table_tail_[k] / norm_;
            // integral upper bound beyond the precomputed range
            return std::pow(static_cast<double>(k - 1), 1.0 - param_) / ((param_ - 1.0) * norm_);
        }
        case Family::table: return k < table_tail_.size() ? table_tail_[k] : 0.0;
    }
    return 0.0;
}

bool DominatingPmf::finite_mean() const {
    switch (family_) {
        case Family::geometric: return true;
        case Family::power_law: return param_ > 2.0;
        case Family::table: return true;
    }
    return false;
}

double DominatingPmf::mean() const {
    if (!finite_mean()) return std::numeric_limits<double>::infinity();
    return tail_first_moment(1);
}

double DominatingPmf::tail_first_moment(std::size_t m) const {
    if (m == 0) m = 1;
    if (!finite_mean()) return std::numeric_limits<double>::infinity();
    switch (family_) {
        case Family::geometric: {
            // sum_{n>=m} n (1-r) r^(n-1) = r^(m-1) (m - (m-1) r) / (1 - r)
            double r = param_;
            return std::pow(r, static_cast<double>(m - 1)) *
                   (static_cast<double>(m) - static_cast<double>(m - 1) * r) / (1.0 - r);
        }
        case Family::power_law: {
            // sum_{n>=m} n^{1-s}/Z with an integral upper bound for the far tail
            KahanSum s;
            std::size_t hi = std::max(m, kPowerLawCutoff + 1);
            for (std::size_t n = m; n < hi; ++n)
                s.add(std::pow(static_cast<double>(n), 1.0 - param_));
            s.add(std::pow(static_cast<double>(hi - 1), 2.0 - param_) / (param_ - 2.0));
            return s.value() / norm_;
        }
        case Family::table: {
            KahanSum s;
            for (std::size_t n = std::max<std::size_t>(m, 1); n <= table_.size(); ++n)
                s.add(static_cast<double>(n) * table_[n - 1]);
            return s.value();
        }
    }
    return 0.0;
}

TightnessCertificate TightnessCertificate::finite(const Tree& t) {
    int m = 0;
    for (std::size_t i = 0; i < t.node_count(); ++i)
        m = std::max(m, t.degree(static_cast<NodeId>(i)));
    return finite(m);
}

TightnessCertificate TightnessCertificate::finite(int max_degree) {
    if (max_degree <= 0) fail("max forward degree must be positive");
    TightnessCertificate c;
    c.mode_ = Mode::finite_tree;
    c.max_degree_ = max_degree;
    return c;
}

TightnessCertificate TightnessCertificate::dominated(DominatingPmf pmf) {
    if (!pmf.finite_mean())
        fail("dominating pmf " + pmf.name() + " lacks finite mean");
    TightnessCertificate c;
    c.mode_ = Mode::dominated;
    c.pmf_ = std::move(pmf);
    return c;
}

CutoffSelection TightnessCertificate::select(double eps) const {
    return select_comparable(eps, 1.0);
}

CutoffSelection TightnessCertificate::select_comparable(double eps, double c) const {
    if (mode_ == Mode::finite_tree) {
        if (eps < 0.0) fail("eps must be nonnegative");
        return {eps, static_cast<std::size_t>(max_degree_) + 1,
                static_cast<double>(max_degree_), 0.0};
    }
    if (!(eps > 0.0)) fail("dominated mode needs eps > 0");
    if (!(c >= 1.0)) fail("comparability constant must be >= 1");
    for (std::size_t m = 2; m <= 1u << 22; ++m) {
        double bound = geometric_tail_moment(m) + c * c * pmf_->tail_first_moment(m);
        if (bound < eps) return {eps, m, static_cast<double>(m - 1), bound};
    }
    fail("no cutoff reaches the requested eps");
}

void TightnessCertificate::verify_row(std::span<const double> row) const {
    if (mode_ == Mode::finite_tree) {
        if (row.size() > static_cast<std::size_t>(max_degree_))
            fail("row larger than the declared maximum forward degree");
        return;
    }
    auto s = sorted_desc(row);
    // tail-sorted enumeration: tau_x(k) must sit below the declared tau(k)
    double tail = 0.0;
    for (std::size_t k = s.size(); k >= 1; --k) {
        tail += s[k - 1];
        if (tail > pmf_->tail(k) + 1e-12)
            fail("row tail exceeds dominating tail at index " + std::to_string(k) + " (" +
                 std::to_string(tail) + " > " + std::to_string(pmf_->tail(k)) + ")");
    }
}

void TightnessCertificate::set_comparability(const Tree& t, const LeafDistribution& p,
                                             const LeafDistribution& q, double c) {
    if (!(c >= 1.0)) fail("comparability constant must be >= 1");
    for (NodeId v : t.leaves()) {
        double pv = p.mass(v), qv = q.mass(v);
        if (pv > c * qv + 1e-15 || qv > c * pv + 1e-15)
            fail("measures are not " + std::to_string(c) + "-comparable at leaf " +
                 std::to_string(t.external_id(v)));
    }
    comparability_c_ = c;
}

TightnessCertificate certify_tightness(const Tree& t, const ForwardKernel& k,
                                       const DominatingPmf& pmf) {
    TightnessCertificate cert = TightnessCertificate::dominated(pmf);
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (t.is_interior(x) && k.supported(x)) cert.verify_row(k.row(x));
    }
    return cert;
}

QTypePartition q_type_partition(const Tree& t, const ForwardKernel& q) {
    QTypePartition part;
    part.type_of.assign(t.node_count(), -1);

    std::vector<std::pair<std::vector<double>, NodeId>> keyed;
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (t.is_interior(x) && q.supported(x)) keyed.emplace_back(sorted_desc(q.row(x)), x);
    }
    std::sort(keyed.begin(), keyed.end());

    auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
        if (a.size() != b.size()) return false;
        for (std::size_t j = 0; j < a.size(); ++j)
            if (std::abs(a[j] - b[j]) > 1e-12) return false;
        return true;
    };

    // group lexicographically-adjacent equal rows, then renumber types by
    // first appearance in node order so output is stable
    std::vector<int> raw(t.node_count(), -1);
    int groups = 0;
    for (std::size_t i = 0; i < keyed.size(); ++i) {
        if (i == 0 || !same(keyed[i].first, keyed[i - 1].first)) ++groups;
        raw[static_cast<std::size_t>(keyed[i].second)] = groups - 1;
    }
    std::vector<int> remap(static_cast<std::size_t>(groups), -1);
    int next = 0;
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        int g = raw[i];
        if (g < 0) continue;
        if (remap[static_cast<std::size_t>(g)] < 0) remap[static_cast<std::size_t>(g)] = next++;
        part.type_of[i] = remap[static_cast<std::size_t>(g)];
    }
    part.type_count = next;
    return part;
}

namespace {

struct HqStats {
    double sup = 0.0;
    double inf = std::numeric_limits<double>::infinity();
    bool any = false;
};

HqStats hq_over_l_range(const Tree& t, const ForwardKernel& kq, const LeafDistribution& q,
                        const LengthFunction& l, const CrossSection* exclude_interior_of) {
    HqStats s;
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (!t.is_interior(x) || !q.supported(x) || !kq.supported(x)) continue;
        if (exclude_interior_of && exclude_interior_of->in_subtree_interior(x)) continue;
        double v = entropy(kq.row(x)) / l.at(t, x);
        s.sup = std::max(s.sup, v);
        s.inf = std::min(s.inf, v);
        s.any = true;
    }
    if (!s.any) s.inf = s.sup = 0.0;
    return s;
}

double mu_l1_distance(const Tree& t, const NodeAverageMeasure& mp, const NodeAverageMeasure& mq) {
    KahanSum s;
    for (std::size_t i = 0; i < t.node_count(); ++i)
        s.add(std::abs(mp.at(static_cast<NodeId>(i)) - mq.at(static_cast<NodeId>(i))));
    return s.value();
}

}  // namespace

BoundReport compare_bound(const Tree& t, const LeafDistribution& p, const LeafDistribution& q,
                          const LengthFunction& l, double eps, double delta,
                          const TightnessCertificate& cert) {
    if (!(delta > 0.0 && delta < 0.5)) fail("delta must lie in (0, 1/2)");
    if (eps < 0.0) fail("eps must be nonnegative");
    if (eps == 0.0 && cert.mode() == TightnessCertificate::Mode::dominated)
        fail("eps = 0 is only allowed with bounded forward degrees");

    BoundReport r;
    r.eps = eps;
    r.delta = delta;
    r.constant_c = compare_constant();

    double hp = entropy(t, p);
    double hq = entropy(t, q);
    r.length_p = expected_length(t, p, l);
    r.length_q = expected_length(t, q, l);
    r.entropy_rate_p = hp / r.length_p;
    r.entropy_rate_q = hq / r.length_q;
    r.lhs = std::abs(r.entropy_rate_p - r.entropy_rate_q);

    r.kl_pq = kl(t, p, q);
    LengthFunction unit = LengthFunction::unit(t);
    r.l_factor = expected_length(t, p, unit) / r.length_p;

    CutoffSelection sel = cert.comparability() && cert.mode() == TightnessCertificate::Mode::dominated
                              ? cert.select_comparable(eps, *cert.comparability())
                              : cert.select(eps);
    r.m_eps = sel.m_eps;

    ForwardKernel kq = leaf_to_kernel(t, q);
    HqStats stats = hq_over_l_range(t, kq, q, l, nullptr);
    r.sup_hq_over_l = stats.sup;
    r.inf_hq_over_l = stats.inf;

    NodeAverageMeasure mp = NodeAverageMeasure::compute(t, p, l);
    NodeAverageMeasure mq = NodeAverageMeasure::compute(t, q, l);
    r.mu_l1 = mu_l1_distance(t, mp, mq);

    r.term1 = r.l_factor * (2.0 * eps + r.m_eps * phi(delta));
    r.term2 = r.constant_c * std::sqrt(r.l_factor) / delta * std::sqrt(r.kl_pq / r.length_p);
    r.term3 = 0.5 * (r.sup_hq_over_l - r.inf_hq_over_l) * r.mu_l1;
    r.rhs = r.term1 + r.term2 + r.term3;
    r.holds = r.lhs <= r.rhs + 1e-12;
    return r;
}

BoundSweep compare_bound_sweep(const Tree& t, const LeafDistribution& p, const LeafDistribution& q,
                               const LengthFunction& l, const TightnessCertificate& cert,
                               std::span<const double> deltas, std::span<const double> epsilons) {
    static constexpr double kDefaultDeltas[] = {0.01, 0.05, 0.1, 0.25, 0.49};
    static constexpr double kDefaultEps[] = {0.0, 0.01, 0.1};
    if (deltas.empty()) deltas = kDefaultDeltas;
    if (epsilons.empty()) epsilons = kDefaultEps;

    BoundSweep sweep;
    for (double eps : epsilons) {
        if (eps == 0.0 && cert.mode() == TightnessCertificate::Mode::dominated) continue;
        for (double delta : deltas)
            sweep.reports.push_back(compare_bound(t, p, q, l, eps, delta, cert));
    }
    for (std::size_t i = 1; i < sweep.reports.size(); ++i)
        if (sweep.reports[i].rhs < sweep.reports[sweep.best].rhs) sweep.best = i;
    return sweep;
}

SingleTypeBoundReport boeam_bound(const Tree& t, const LeafDistribution& p,
                                  std::span<const double> q_row, double delta, double eps,
                                  const TightnessCertificate& cert) {
    if (!(delta > 0.0 && delta < 0.5)) fail("delta must lie in (0, 1/2)");
    auto want = sorted_desc(q_row);

    // every interior node must carry the single q-type
    std::vector<std::vector<double>> rows(t.node_count());
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (t.is_leaf(x)) continue;
        if (t.degree(x) != static_cast<int>(q_row.size()))
            fail("node " + std::to_string(t.external_id(x)) +
                 " breaks the single q-type (degree mismatch)");
        rows[i].assign(q_row.begin(), q_row.end());
    }

    SingleTypeBoundReport r;
    r.eps = eps;
    r.delta = delta;
    r.h_q = entropy(q_row);

    ForwardKernel kq = ForwardKernel::from_rows(t, std::move(rows));
    LeafDistribution q = kernel_to_leaf(t, kq);
    LengthFunction unit = LengthFunction::unit(t);

    double lsharp = expected_length(t, p, unit);
    r.entropy_rate_p = entropy(t, p) / lsharp;
    r.lhs = std::abs(r.entropy_rate_p - r.h_q);
    r.kl_rate = kl(t, p, q) / lsharp;
    r.m_eps = cert.select(eps).m_eps;
    r.rhs = 2.0 * eps + r.m_eps * phi(delta) + compare_constant() / delta * std::sqrt(r.kl_rate);
    r.holds = r.lhs <= r.rhs + 1e-12;

    int h = t.depth(t.leaves().front());
    r.constant_height = std::all_of(t.leaves().begin(), t.leaves().end(),
                                    [&](NodeId v) { return t.depth(v) == h; });
    r.height = r.constant_height ? h : 0;
    return r;
}

EntropyLengthBoundReport entropy_length_bound(const Tree& t, const LeafDistribution& p,
                                              const ForwardKernel& q, double delta, double eps,
                                              const TightnessCertificate& cert) {
    if (!(delta > 0.0 && delta < 0.5)) fail("delta must lie in (0, 1/2)");
    std::vector<double> lq(t.node_count(), 0.0);
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (!t.is_interior(x)) continue;
        if (!q.supported(x)) fail("q-kernel unsupported at interior node " +
                                  std::to_string(t.external_id(x)));
        lq[i] = entropy(q.row(x));
        if (lq[i] == 0.0)
            fail("deterministic q-row at node " + std::to_string(t.external_id(x)) +
                 " makes the entropy length degenerate");
    }
    LengthFunction ell = LengthFunction::table(t, std::move(lq));
    LeafDistribution qleaf = kernel_to_leaf(t, q);

    EntropyLengthBoundReport r;
    r.eps = eps;
    r.delta = delta;
    r.length_q_p = expected_length(t, p, ell);
    r.kl_pq = kl(t, p, qleaf);
    r.lhs = std::abs(entropy(t, p) / r.length_q_p - 1.0);
    r.m_eps = cert.select(eps).m_eps;

    double c = compare_constant();
    double kl_rate = r.kl_pq / r.length_q_p;
    r.rhs = 2.0 * eps + r.m_eps * phi(delta) + c / delta * std::sqrt(kl_rate);
    LengthFunction unit = LengthFunction::unit(t);
    double lfac = expected_length(t, p, unit) / r.length_q_p;
    r.rhs_full = lfac * (2.0 * eps + r.m_eps * phi(delta)) +
                 c * std::sqrt(lfac) / delta * std::sqrt(kl_rate);
    r.holds = r.lhs <= r.rhs + 1e-12;
    r.holds_full = r.lhs <= r.rhs_full + 1e-12;
    return r;
}

SectionVariantReport section_variant_bound(const Tree& t, const LeafDistribution& p,
                                           const LeafDistribution& q, const LengthFunction& l,
                                           const CrossSection& s, double eps, double delta,
                                           const TightnessCertificate& cert) {
    SectionVariantReport r;
    r.base = compare_bound(t, p, q, l, eps, delta, cert);

    ForwardKernel kq = leaf_to_kernel(t, q);
    HqStats outside = hq_over_l_range(t, kq, q, l, &s);
    r.sup_outside = outside.sup;
    r.inf_outside = outside.inf;

    double lp_s = expected_length(t, p, l, s);
    double lq_s = expected_length(t, q, l, s);
    r.section_length_ratio = std::max(lp_s / r.base.length_p, lq_s / r.base.length_q);
    r.term3_variant = 0.5 * (r.sup_outside - r.inf_outside) * r.base.mu_l1 +
                      (r.base.sup_hq_over_l - r.base.inf_hq_over_l) * r.section_length_ratio;
    r.rhs_variant = r.base.term1 + r.base.term2 + r.term3_variant;
    r.holds = r.base.lhs <= r.rhs_variant + 1e-12;
    return r;
}

IndispInstance build_indisp_instance(double theta, int d1, int d2, int n, std::size_t node_guard) {
    if (!(theta > 0.0 && theta < 1.0)) fail("theta must lie in (0,1)");
    if (d1 < 2 || d2 < 2) fail("branch degrees must be at least 2");
    if (n < 1) fail("height parameter must be at least 1");

    std::vector<int> degrees{2};
    std::size_t c1 = 1, c2 = 1, total = 2;
    for (int k = 1; k <= n; ++k) {
        total += c1 * static_cast<std::size_t>(d1) + c2 * static_cast<std::size_t>(d2);
        if (total > node_guard) throw GuardExceeded("two-branch tree exceeds node guard");
        degrees.insert(degrees.end(), c1, d1);
        degrees.insert(degrees.end(), c2, d2);
        c1 *= static_cast<std::size_t>(d1);
        c2 *= static_cast<std::size_t>(d2);
    }
    TreeBuildOptions opts;
    opts.max_nodes = node_guard;
    Tree tree = Tree::from_level_order_degrees(degrees, opts);

    // breadth-first leaf order puts branch-1 leaves (count d1^n) first
    double m1 = theta / static_cast<double>(c1);
    double m2 = (1.0 - theta) / static_cast<double>(c2);
    double f1 = 0.5 / static_cast<double>(c1);
    double f2 = 0.5 / static_cast<double>(c2);
    std::vector<double> pm(tree.leaf_count()), qm(tree.leaf_count());
    for (std::size_t i = 0; i < tree.leaf_count(); ++i) {
        bool first = i < c1;
        pm[i] = first ? m1 : m2;
        qm[i] = first ? f1 : f2;
    }
    IndispInstance inst{std::move(tree), LeafDistribution{}, LeafDistribution{}};
    inst.p = LeafDistribution::from_leaf_masses(inst.tree, pm);
    inst.q = LeafDistribution::from_leaf_masses(inst.tree, qm);
    return inst;
}

IndispExample indisp_example(double theta, int d1, int d2, int n, bool build_explicit,
                             std::size_t node_guard) {
    if (!(theta > 0.0 && theta < 1.0)) fail("theta must lie in (0,1)");
    if (d1 < 2 || d2 < 2) fail("branch degrees must be at least 2");
    if (n < 1) fail("height parameter must be at least 1");

    IndispExample ex;
    ex.theta = theta;
    ex.d1 = d1;
    ex.d2 = d2;
    ex.n = n;
    double ld1 = std::log2(static_cast<double>(d1));
    double ld2 = std::log2(static_cast<double>(d2));
    ex.entropy_p = binary_entropy(theta) + n * (theta * ld1 + (1.0 - theta) * ld2);
    ex.expected_length = n + 1.0;
    ex.kl_pq = 1.0 - binary_entropy(theta);
    ex.gap_limit = std::abs((theta - 0.5) * ld1 + (0.5 - theta) * ld2);

    if (build_explicit) {
        IndispInstance inst = build_indisp_instance(theta, d1, d2, n, node_guard);
        LengthFunction unit = LengthFunction::unit(inst.tree);
        ex.entropy_p_numeric = entropy(inst.tree, inst.p);
        ex.kl_numeric = kl(inst.tree, inst.p, inst.q);
        ex.expected_length_numeric = expected_length(inst.tree, inst.p, unit);
        ex.verified_numerically = true;
    }
    return ex;
}

}  // namespace treerate
