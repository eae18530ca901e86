#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "treerate/calculus.hpp"
#include "treerate/measures.hpp"
#include "treerate/tree.hpp"

namespace treerate {

// phi(t) = t log2(1/t) on [0,1], phi(0) = phi(1) = 0. All logs in this
// library are base 2.
double phi(double t);

inline constexpr double kLn2 = 0.6931471805599453094;
inline constexpr double kMaxPhi = 0.5307378454230429885;  // phi(1/e) = 1/(e ln 2)
inline constexpr double kPinskerFactor = 2.0 * kLn2;

double binary_entropy(double theta);  // H(theta, 1-theta)

// Entropy of a probability vector / leaf law, compensated summation.
double entropy(std::span<const double> probs);
double entropy(const Tree& t, const LeafDistribution& p);

// H_p(x): entropy of the outgoing row at x.
double local_entropy(const ForwardKernel& k, NodeId x);
// Batch over all interior nodes; unsupported nodes get 0 and a false flag.
std::vector<double> local_entropies(const Tree& t, const ForwardKernel& k);

// Certified bracket for a series summed only up to a prefix.
struct ValueInterval {
    double lower = 0.0;
    double upper = 0.0;
    double midpoint() const { return 0.5 * (lower + upper); }
    double width() const { return upper - lower; }
};

// Prefix entropy plus the certified tail bound of a lazy row.
ValueInterval local_entropy_interval(const LazyRow& row);

struct DecompositionSides {
    double lhs = 0.0;  // H(P)/l(P) or D(P||Q)/l(P), boundary route
    double rhs = 0.0;  // E_mu(H_p(x)/l(x)) or E_mu(D_pq(x)/l(x)), interior route
};

// H(P)/l(P) against the mu_P-average of local entropies, independent routes.
DecompositionSides entropy_decomposition(const Tree& t, const LeafDistribution& p,
                                         const LengthFunction& l);

// Raised when some leaf has P > 0 but Q = 0; experiments want the witness,
// not an infinity.
class SupportViolation : public std::domain_error {
public:
    SupportViolation(std::int64_t witness_label, const std::string& what)
        : std::domain_error(what), witness(witness_label) {}
    std::int64_t witness;
};

// D(P||Q) over the leaves, 0 log(0/q) = 0.
double kl(const Tree& t, const LeafDistribution& p, const LeafDistribution& q);
// Local divergence of two aligned rows.
double local_kl(std::span<const double> row_p, std::span<const double> row_q);

// D(P||Q)/l(P) against the mu_P-average of local divergences.
DecompositionSides kl_decomposition(const Tree& t, const LeafDistribution& p,
                                    const LeafDistribution& q, const LengthFunction& l);

struct VariationalParts {
    double l1 = 0.0;
    double positive_part = 0.0;  // sum over nu1 > nu2
    double negative_part = 0.0;  // sum over nu1 < nu2
};

VariationalParts variational_distance(std::span<const double> nu1, std::span<const double> nu2);

// ||nu1 - nu2||_1^2 <= 2 ln 2 D(nu1||nu2). Returns both sides.
struct PinskerCheck {
    double lhs = 0.0;  // squared L1 distance
    double rhs = 0.0;  // 2 ln 2 * KL
    bool holds(double slack = 1e-12) const { return lhs <= rhs + slack; }
};

PinskerCheck pinsker_check(std::span<const double> nu1, std::span<const double> nu2);

// Per-node entropy gap bound:
//   |H_p(x) - H_q(x)| <= 2 eps + M_eps phi(delta) + (2/(e ln 2)) (1/delta) ||p - q||_1
// for 0 < delta <= 1/2. For finite rows use eps = 0 and M_eps = row size.
struct LocalGapBound {
    double gap = 0.0;
    double bound = 0.0;
    bool holds(double slack = 1e-12) const { return gap <= bound + slack; }
};

LocalGapBound local_gap_bound(std::span<const double> row_p, std::span<const double> row_q,
                              double eps, double m_eps, double delta);

}  // namespace treerate
