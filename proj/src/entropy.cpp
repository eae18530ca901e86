#include "treerate/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "treerate/kahan.hpp"

namespace treerate {

double phi(double t) {
    if (t < 0.0 || t > 1.0) throw std::domain_error("phi defined on [0,1]");
    if (t == 0.0 || t == 1.0) return 0.0;
    return -t * std::log2(t);
}

double binary_entropy(double theta) { return phi(theta) + phi(1.0 - theta); }

double entropy(std::span<const double> probs) {
    KahanSum s;
    for (double p : probs)
        if (p > 0.0) s.add(phi(p));
    return s.value();
}

double entropy(const Tree& t, const LeafDistribution& p) {
    KahanSum s;
    for (NodeId v : t.leaves()) {
        double m = p.mass(v);
        if (m > 0.0) s.add(phi(m));
    }
    return s.value();
}

double local_entropy(const ForwardKernel& k, NodeId x) {
    if (!k.supported(x)) throw std::invalid_argument("local entropy of an unsupported row");
    return entropy(k.row(x));
}

std::vector<double> local_entropies(const Tree& t, const ForwardKernel& k) {
    std::vector<double> h(t.node_count(), 0.0);
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (t.is_interior(x) && k.supported(x)) h[i] = entropy(k.row(x));
    }
    return h;
}

ValueInterval local_entropy_interval(const LazyRow& row) {
    if (!row.has_certificate)
        throw std::invalid_argument("lazy row carries no tail certificate");
    double prefix = entropy(row.prefix);
    return {prefix, prefix + row.tail_entropy_bound};
}

DecompositionSides entropy_decomposition(const Tree& t, const LeafDistribution& p,
                                         const LengthFunction& l) {
    DecompositionSides sides;
    double lP = expected_length(t, p, l);
    if (!(lP > 0.0)) throw std::invalid_argument("expected length is zero");
    sides.lhs = entropy(t, p) / lP;

    ForwardKernel k = leaf_to_kernel(t, p);
    NodeAverageMeasure mu = NodeAverageMeasure::compute(t, p, l);
    KahanSum s;
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        double m = mu.at(x);
        if (m > 0.0) s.add(m * entropy(k.row(x)) / l.at(t, x));
    }
    sides.rhs = s.value();
    return sides;
}

double kl(const Tree& t, const LeafDistribution& p, const LeafDistribution& q) {
    KahanSum s;
    for (NodeId v : t.leaves()) {
        double pv = p.mass(v);
        if (pv == 0.0) continue;
        double qv = q.mass(v);
        if (qv == 0.0)
            throw SupportViolation(t.external_id(v),
                                   "support violation: leaf " + std::to_string(t.external_id(v)) +
                                       " has P > 0 but Q = 0");
        s.add(pv * std::log2(pv / qv));
    }
    return s.value();
}

double local_kl(std::span<const double> row_p, std::span<const double> row_q) {
    if (row_p.size() != row_q.size()) throw std::invalid_argument("row size mismatch");
    KahanSum s;
    for (std::size_t j = 0; j < row_p.size(); ++j) {
        if (row_p[j] == 0.0) continue;
        if (row_q[j] == 0.0)
            throw SupportViolation(static_cast<std::int64_t>(j),
                                   "support violation at row entry " + std::to_string(j));
        s.add(row_p[j] * std::log2(row_p[j] / row_q[j]));
    }
    return s.value();
}

DecompositionSides kl_decomposition(const Tree& t, const LeafDistribution& p,
                                    const LeafDistribution& q, const LengthFunction& l) {
    DecompositionSides sides;
    double lP = expected_length(t, p, l);
    if (!(lP > 0.0)) throw std::invalid_argument("expected length is zero");
    sides.lhs = kl(t, p, q) / lP;

    ForwardKernel kp = leaf_to_kernel(t, p);
    ForwardKernel kq = leaf_to_kernel(t, q);
    NodeAverageMeasure mu = NodeAverageMeasure::compute(t, p, l);
    KahanSum s;
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        double m = mu.at(x);
        if (m > 0.0) s.add(m * local_kl(kp.row(x), kq.row(x)) / l.at(t, x));
    }
    sides.rhs = s.value();
    return sides;
}

VariationalParts variational_distance(std::span<const double> nu1, std::span<const double> nu2) {
    if (nu1.size() != nu2.size()) throw std::invalid_argument("distributions on different index sets");
    KahanSum pos, neg;
    for (std::size_t i = 0; i < nu1.size(); ++i) {
        double d = nu1[i] - nu2[i];
        if (d > 0.0)
            pos.add(d);
        else
            neg.add(-d);
    }
    VariationalParts v;
    v.positive_part = pos.value();
    v.negative_part = neg.value();
    v.l1 = v.positive_part + v.negative_part;
    return v;
}

PinskerCheck pinsker_check(std::span<const double> nu1, std::span<const double> nu2) {
    PinskerCheck c;
    double l1 = variational_distance(nu1, nu2).l1;
    c.lhs = l1 * l1;
    KahanSum d;
    for (std::size_t i = 0; i < nu1.size(); ++i) {
        if (nu1[i] == 0.0) continue;
        if (nu2[i] == 0.0) {
            c.rhs = std::numeric_limits<double>::infinity();
            return c;
        }
        d.add(nu1[i] * std::log2(nu1[i] / nu2[i]));
    }
    c.rhs = kPinskerFactor * d.value();
    return c;
}

LocalGapBound local_gap_bound(std::span<const double> row_p, std::span<const double> row_q,
                              double eps, double m_eps, double delta) {
    if (!(delta > 0.0 && delta <= 0.5)) throw std::domain_error("delta must lie in (0, 1/2]");
    if (eps < 0.0) throw std::domain_error("eps must be nonnegative");
    std::size_t n = std::max(row_p.size(), row_q.size());
    auto at = [](std::span<const double> r, std::size_t j) {
        return j < r.size() ? r[j] : 0.0;  // pad the shorter row with zeros
    };
    KahanSum l1;
    for (std::size_t j = 0; j < n; ++j) l1.add(std::abs(at(row_p, j) - at(row_q, j)));
    LocalGapBound out;
    out.gap = std::abs(entropy(row_p) - entropy(row_q));
    out.bound = 2.0 * eps + m_eps * phi(delta) + (2.0 * kMaxPhi / delta) * l1.value();
    return out;
}

}  // namespace treerate
