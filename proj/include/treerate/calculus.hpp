#pragma once

#include <span>
#include <vector>

#include "treerate/measures.hpp"
#include "treerate/tree.hpp"

namespace treerate {

// f: T -> R as a per-node value table.
using NodeFunction = std::vector<double>;

// grad f(y) = (f(y) - f(y^-)) / l(y^-); index 0 (the root) is left at 0.
std::vector<double> gradient(const Tree& t, const LengthFunction& l, const NodeFunction& f);

struct LaplacianResult {
    std::vector<double> value;      // Delta f per node (0 on leaves/unsupported)
    std::vector<double> abs_value;  // |Delta| f per node
};

// Delta f(x) = sum over children of grad f * p(.|x); abs variant bounds the
// series. Finite rows are always absolutely convergent.
LaplacianResult laplacian(const Tree& t, const ForwardKernel& k, const LengthFunction& l,
                          const NodeFunction& f);

struct LansitSides {
    double lhs = 0.0;          // E_P(f - f(o)) / l(P), boundary sum
    double rhs = 0.0;          // E_{mu_P}(Delta f), interior sum
    double abs_expectation = 0.0;  // E_{mu_P}(|Delta| f), the lemma's hypothesis
    double difference() const { return lhs - rhs; }
};

// Both sides of the leaf-average/node-sum interchange identity, computed by
// genuinely independent routes (leaf sums vs interior sums) so equality is a
// meaningful check and not a rearrangement of itself.
LansitSides lansit_both_sides(const Tree& t, const LeafDistribution& p, const LengthFunction& l,
                              const NodeFunction& f);

// One row with countably many entries: materialized prefix plus a certified
// bound on everything beyond it. `tail(k)` bounds sum_{n>=k} p_x(n).
struct LazyRow {
    std::vector<double> prefix;                  // p_x(1..m-1), 1-based indexing in the math
    double tail_mass = 0.0;                      // bound on the un-materialized mass
    double tail_entropy_bound = 0.0;             // bound on sum_{n>=m} phi(p_x(n))
    bool has_certificate = false;
};

// Laplacian of one lazy row given f on the child index space. |f| must be
// bounded by `f_sup` beyond the prefix for the tail bound to apply.
struct LazyLaplacian {
    double value = 0.0;        // prefix part of Delta f(x)
    double error_bound = 0.0;  // certified bound on the dropped tail
};

LazyLaplacian lazy_laplacian(const LazyRow& row, std::span<const double> f_children,
                             double f_at_x, double f_sup, double edge_length);

}  // namespace treerate
