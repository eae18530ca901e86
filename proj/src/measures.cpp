#include "treerate/measures.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "treerate/kahan.hpp"

namespace treerate {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::vector<double> cone_masses(const Tree& t, const std::vector<double>& mass) {
    std::vector<double> cone = mass;
    // children have larger ids than parents, so one reverse sweep suffices
    for (std::size_t i = t.node_count(); i-- > 1;) {
        NodeId p = t.parent(static_cast<NodeId>(i));
        cone[static_cast<std::size_t>(p)] += cone[i];
    }
    return cone;
}

}  // namespace

LeafDistribution LeafDistribution::from_node_masses(const Tree& t, std::vector<double> mass_by_node) {
    if (mass_by_node.size() != t.node_count()) fail("mass vector size does not match node count");
    KahanSum total;
    for (std::size_t i = 0; i < mass_by_node.size(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        double m = mass_by_node[i];
        if (m < 0.0 || !std::isfinite(m)) fail("leaf mass must be finite and nonnegative");
        if (m != 0.0 && !t.is_leaf(x)) fail("mass on interior node " + std::to_string(t.external_id(x)));
        total.add(m);
    }
    if (std::abs(total.value() - 1.0) > kMassTolerance)
        fail("leaf masses sum to " + std::to_string(total.value()) + ", not 1");
    LeafDistribution p;
    p.mass_ = std::move(mass_by_node);
    p.cone_ = cone_masses(t, p.mass_);
    return p;
}

LeafDistribution LeafDistribution::from_leaf_masses(const Tree& t, std::span<const double> mass_by_leaf) {
    if (mass_by_leaf.size() != t.leaf_count()) fail("expected one mass per leaf");
    std::vector<double> mass(t.node_count(), 0.0);
    for (std::size_t i = 0; i < mass_by_leaf.size(); ++i)
        mass[static_cast<std::size_t>(t.leaves()[i])] = mass_by_leaf[i];
    return from_node_masses(t, std::move(mass));
}

ForwardKernel ForwardKernel::from_rows(const Tree& t, std::vector<std::vector<double>> rows) {
    if (rows.size() != t.node_count()) fail("kernel rows size does not match node count");
    ForwardKernel k;
    k.supported_.assign(t.node_count(), 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (t.is_leaf(x)) {
            if (!rows[i].empty()) fail("kernel row on leaf " + std::to_string(t.external_id(x)));
            continue;
        }
        if (rows[i].size() != static_cast<std::size_t>(t.degree(x)))
            fail("kernel row at node " + std::to_string(t.external_id(x)) +
                 " does not match its child count");
        KahanSum s;
        for (double v : rows[i]) {
            if (v < 0.0 || !std::isfinite(v)) fail("kernel entries must be finite and nonnegative");
            s.add(v);
        }
        if (std::abs(s.value() - 1.0) > kMassTolerance)
            fail("unnormalized kernel row at node " + std::to_string(t.external_id(x)) +
                 " (sums to " + std::to_string(s.value()) + ")");
        k.supported_[i] = 1;
    }
    k.rows_ = std::move(rows);
    return k;
}

LeafDistribution kernel_to_leaf(const Tree& t, const ForwardKernel& k) {
    std::vector<double> reach(t.node_count(), 0.0);
    reach[0] = 1.0;
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (t.is_leaf(x)) continue;
        if (!k.supported(x)) {
            if (reach[i] > 0.0)
                fail("kernel has no row at reachable node " + std::to_string(t.external_id(x)));
            continue;
        }
        auto row = k.row(x);
        auto ch = t.children(x);
        for (std::size_t j = 0; j < ch.size(); ++j)
            reach[static_cast<std::size_t>(ch[j])] = reach[i] * row[j];
    }
    std::vector<double> mass(t.node_count(), 0.0);
    for (NodeId v : t.leaves()) mass[static_cast<std::size_t>(v)] = reach[static_cast<std::size_t>(v)];
    return LeafDistribution::from_node_masses(t, std::move(mass));
}

ForwardKernel leaf_to_kernel(const Tree& t, const LeafDistribution& p) {
    ForwardKernel k;
    k.rows_.resize(t.node_count());
    k.supported_.assign(t.node_count(), 0);
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (t.is_leaf(x)) continue;
        double cx = p.cone_mass(x);
        if (cx <= 0.0) continue;  // unsupported, reported via supported()
        auto ch = t.children(x);
        auto& row = k.rows_[i];
        row.resize(ch.size());
        for (std::size_t j = 0; j < ch.size(); ++j)
            row[j] = p.cone_mass(ch[j]) / cx;
        k.supported_[i] = 1;
    }
    return k;
}

std::vector<double> section_distribution(const Tree& t, const LeafDistribution& p,
                                         const CrossSection& s) {
    (void)t;
    std::vector<double> out;
    out.reserve(s.members().size());
    for (NodeId x : s.members()) out.push_back(p.cone_mass(x));
    return out;
}

double expected_length(const Tree& t, const LeafDistribution& p, const LengthFunction& l) {
    KahanSum s;
    for (NodeId v : t.leaves()) {
        double m = p.mass(v);
        if (m > 0.0) s.add(l.path_length(t, v) * m);
    }
    return s.value();
}

double expected_length(const Tree& t, const LeafDistribution& p, const LengthFunction& l,
                       const CrossSection& sec) {
    KahanSum s;
    for (NodeId x : sec.members()) {
        double m = p.cone_mass(x);
        if (m > 0.0) s.add(l.path_length(t, x) * m);
    }
    return s.value();
}

double expected_length_interior(const Tree& t, const LeafDistribution& p, const LengthFunction& l) {
    KahanSum s;
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (t.is_interior(x) && p.cone_mass(x) > 0.0) s.add(l.at(t, x) * p.cone_mass(x));
    }
    return s.value();
}

NodeAverageMeasure NodeAverageMeasure::compute(const Tree& t, const LeafDistribution& p,
                                               const LengthFunction& l) {
    NodeAverageMeasure mu;
    mu.expected_length_ = expected_length_interior(t, p, l);
    if (!(mu.expected_length_ > 0.0))
        fail("node-average measure undefined: expected length is zero (no interior mass)");
    mu.mass_.assign(t.node_count(), 0.0);
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (t.is_interior(x) && p.cone_mass(x) > 0.0)
            mu.mass_[i] = l.at(t, x) * p.cone_mass(x) / mu.expected_length_;
    }
    return mu;
}

}  // namespace treerate
