#pragma once

#include <span>
#include <vector>

#include "treerate/tree.hpp"

namespace treerate {

constexpr double kMassTolerance = 1e-12;

// Probability law on the leaves, with the per-node cone masses P(dT_x)
// cached by one bottom-up pass. Everything downstream (kernels, expected
// lengths, node averages) reads the cache so the representations can
// never drift apart. Support may be a strict subset of the leaves;
// cone_mass(x) == 0 marks an unreachable subtree.
class LeafDistribution {
public:
    // `mass_by_node` must be zero on interior nodes and sum to 1 over leaves.
    static LeafDistribution from_node_masses(const Tree& t, std::vector<double> mass_by_node);
    static LeafDistribution from_leaf_masses(const Tree& t, std::span<const double> mass_by_leaf);

    double mass(NodeId v) const { return mass_[static_cast<std::size_t>(v)]; }
    double cone_mass(NodeId x) const { return cone_[static_cast<std::size_t>(x)]; }
    bool supported(NodeId x) const { return cone_mass(x) > 0.0; }
    std::span<const double> node_masses() const { return mass_; }

private:
    std::vector<double> mass_;
    std::vector<double> cone_;
};

// Forward transition probabilities p(.|x) over the ordered children of
// each interior node. Nodes below a zero-mass cone have no meaningful row
// and are flagged unsupported rather than given an arbitrary convention.
class ForwardKernel {
public:
    static ForwardKernel from_rows(const Tree& t, std::vector<std::vector<double>> rows);

    std::span<const double> row(NodeId x) const { return rows_[static_cast<std::size_t>(x)]; }
    bool supported(NodeId x) const { return supported_[static_cast<std::size_t>(x)] != 0; }

private:
    std::vector<std::vector<double>> rows_;
    std::vector<char> supported_;
    friend ForwardKernel leaf_to_kernel(const Tree&, const LeafDistribution&);
};

// Hitting distribution of the chain: P(v) = prod of p(x|x^-) down the
// geodesic. Throws on a row that is off normalization by more than the
// mass tolerance.
LeafDistribution kernel_to_leaf(const Tree& t, const ForwardKernel& k);

// p(y|x) = cone(y)/cone(x) wherever cone(x) > 0; unsupported below.
ForwardKernel leaf_to_kernel(const Tree& t, const LeafDistribution& p);

// P_S(x) = P(dT_x), aligned with s.members(). Sums to 1 for any section.
std::vector<double> section_distribution(const Tree& t, const LeafDistribution& p,
                                         const CrossSection& s);

// Boundary route: sum over leaves of |v|_l P(v).
double expected_length(const Tree& t, const LeafDistribution& p, const LengthFunction& l);
// Section route: sum over S of |x|_l P_S(x).
double expected_length(const Tree& t, const LeafDistribution& p, const LengthFunction& l,
                       const CrossSection& s);
// Interior route: sum over interior x of l(x) P(dT_x). Equal to the
// boundary route; kept as an independent code path for the identity tests.
double expected_length_interior(const Tree& t, const LeafDistribution& p,
                                const LengthFunction& l);

// Node-average measure mu_P(x) = l(x) P(dT_x) / l(P) on the interior.
class NodeAverageMeasure {
public:
    static NodeAverageMeasure compute(const Tree& t, const LeafDistribution& p,
                                      const LengthFunction& l);

    double at(NodeId x) const { return mass_[static_cast<std::size_t>(x)]; }
    double normalizer() const { return expected_length_; }  // l(P)
    std::span<const double> node_masses() const { return mass_; }

private:
    std::vector<double> mass_;
    double expected_length_ = 0.0;
};

}  // namespace treerate
