#include "treerate/calculus.hpp"

#include <cmath>
#include <stdexcept>

#include "treerate/kahan.hpp"

namespace treerate {

std::vector<double> gradient(const Tree& t, const LengthFunction& l, const NodeFunction& f) {
    if (f.size() != t.node_count()) throw std::invalid_argument("node function size mismatch");
    std::vector<double> g(t.node_count(), 0.0);
    for (std::size_t i = 1; i < t.node_count(); ++i) {
        NodeId p = t.parent(static_cast<NodeId>(i));
        g[i] = (f[i] - f[static_cast<std::size_t>(p)]) / l.at(t, p);
    }
    return g;
}

LaplacianResult laplacian(const Tree& t, const ForwardKernel& k, const LengthFunction& l,
                          const NodeFunction& f) {
    if (f.size() != t.node_count()) throw std::invalid_argument("node function size mismatch");
    LaplacianResult r;
    r.value.assign(t.node_count(), 0.0);
    r.abs_value.assign(t.node_count(), 0.0);
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (t.is_leaf(x) || !k.supported(x)) continue;
        double lx = l.at(t, x);
        auto ch = t.children(x);
        auto row = k.row(x);
        KahanSum sum, abs_sum;
        for (std::size_t j = 0; j < ch.size(); ++j) {
            double diff = (f[static_cast<std::size_t>(ch[j])] - f[i]) / lx;
            sum.add(diff * row[j]);
            abs_sum.add(std::abs(diff) * row[j]);
        }
        r.value[i] = sum.value();
        r.abs_value[i] = abs_sum.value();
    }
    return r;
}

LansitSides lansit_both_sides(const Tree& t, const LeafDistribution& p, const LengthFunction& l,
                              const NodeFunction& f) {
    if (f.size() != t.node_count()) throw std::invalid_argument("node function size mismatch");
    LansitSides out;

    // Left side lives entirely on the boundary.
    double lP_boundary = expected_length(t, p, l);
    if (!(lP_boundary > 0.0))
        throw std::invalid_argument("expected length is zero; interchange undefined");
    KahanSum leaf_sum;
    double f_root = f[0];
    for (NodeId v : t.leaves()) {
        double m = p.mass(v);
        if (m > 0.0) leaf_sum.add((f[static_cast<std::size_t>(v)] - f_root) * m);
    }
    out.lhs = leaf_sum.value() / lP_boundary;

    // Right side lives entirely on the interior.
    ForwardKernel k = leaf_to_kernel(t, p);
    LaplacianResult lap = laplacian(t, k, l, f);
    NodeAverageMeasure mu = NodeAverageMeasure::compute(t, p, l);
    KahanSum node_sum, abs_sum;
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        double m = mu.at(static_cast<NodeId>(i));
        if (m > 0.0) {
            node_sum.add(lap.value[i] * m);
            abs_sum.add(lap.abs_value[i] * m);
        }
    }
    out.rhs = node_sum.value();
    out.abs_expectation = abs_sum.value();
    if (!std::isfinite(out.abs_expectation))
        throw std::domain_error("E_mu(|Delta|f) diverges; interchange hypothesis fails");
    return out;
}

LazyLaplacian lazy_laplacian(const LazyRow& row, std::span<const double> f_children,
                             double f_at_x, double f_sup, double edge_length) {
    if (!row.has_certificate)
        throw std::invalid_argument("lazy row carries no tail certificate");
    if (f_children.size() < row.prefix.size())
        throw std::invalid_argument("need f at every materialized child");
    LazyLaplacian out;
    KahanSum s;
    for (std::size_t j = 0; j < row.prefix.size(); ++j)
        s.add((f_children[j] - f_at_x) * row.prefix[j] / edge_length);
    out.value = s.value();
    out.error_bound = (f_sup + std::abs(f_at_x)) * row.tail_mass / edge_length;
    return out;
}

}  // namespace treerate
