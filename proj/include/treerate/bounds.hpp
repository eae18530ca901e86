#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treerate/calculus.hpp"
#include "treerate/entropy.hpp"
#include "treerate/measures.hpp"
#include "treerate/tree.hpp"

namespace treerate {

// Constant C = 2 sqrt(2) / (e sqrt(ln 2)) of the comparison bound.
inline constexpr double kCompareC = 1.2497921170587191;
double compare_constant();  // computed from the closed form at run time

// Distribution on {1,2,...} that stochastically dominates every row of a
// kernel family. Parametric families carry analytic tails; a finite table
// is also accepted.
class DominatingPmf {
public:
    static DominatingPmf geometric(double ratio);     // p(n) = (1-r) r^(n-1)
    static DominatingPmf power_law(double exponent);  // p(n) ~ n^(-s), needs s > 2
    static DominatingPmf table(std::vector<double> probs);

    double prob(std::size_t n) const;        // n >= 1
    double tail(std::size_t k) const;        // sum_{n >= k} p(n)
    double mean() const;
    bool finite_mean() const;
    double tail_first_moment(std::size_t m) const;  // sum_{n >= m} n p(n)
    const std::string& name() const { return name_; }

private:
    enum class Family { geometric, power_law, table };
    Family family_;
    double param_ = 0.0;
    double norm_ = 1.0;  // power-law normaliser
    std::vector<double> table_;
    std::vector<double> table_tail_;
    std::string name_;
};

// Selection produced by a certificate for a given eps: keep the first
// `m_eps` children of every row, everything beyond sums (in entropy) to
// less than eps.
struct CutoffSelection {
    double eps = 0.0;
    std::size_t cutoff = 0;            // first dropped index m
    double m_eps = 0.0;                // |N_eps(x)| <= m_eps
    double tail_entropy_bound = 0.0;   // sum_{n>=m} n (2^-n + p(n)) < eps
};

// Uniform-summability certificate for the local entropies of a kernel
// family: either "the tree is finite" (max forward degree does the job,
// eps-free) or "all rows are dominated by a finite-mean pmf".
class TightnessCertificate {
public:
    enum class Mode { finite_tree, dominated };

    static TightnessCertificate finite(const Tree& t);
    static TightnessCertificate finite(int max_degree);
    static TightnessCertificate dominated(DominatingPmf pmf);

    Mode mode() const { return mode_; }
    int max_degree() const { return max_degree_; }
    const DominatingPmf& pmf() const { return *pmf_; }

    // M_eps and the tail bound for the p-side rows.
    CutoffSelection select(double eps) const;
    // Same for the q-side once comparability (1/c) Q <= P <= c Q is known:
    // q-tails are bounded by min(1, c^2 tau(k)).
    CutoffSelection select_comparable(double eps, double c) const;

    // Checks tau_x(k) <= tau(k) for a materialized row (in its tail-sorted
    // enumeration). Throws with a witness index on failure.
    void verify_row(std::span<const double> row) const;

    // Declares and verifies the comparability constant against two leaf
    // measures; extends the certificate to the q-side rows.
    void set_comparability(const Tree& t, const LeafDistribution& p, const LeafDistribution& q,
                           double c);
    std::optional<double> comparability() const { return comparability_c_; }

private:
    Mode mode_ = Mode::finite_tree;
    int max_degree_ = 0;
    std::optional<DominatingPmf> pmf_;
    std::optional<double> comparability_c_;
};

// Builds the dominated-mode certificate and checks every materialized row
// of the kernel against the declared pmf.
TightnessCertificate certify_tightness(const Tree& t, const ForwardKernel& k,
                                       const DominatingPmf& pmf);

// Interior nodes grouped by the multiset of their q-row entries (equal up
// to child relabelling, per-entry tolerance 1e-12).
struct QTypePartition {
    std::vector<int> type_of;  // per node; -1 for leaves/unsupported
    int type_count = 0;
    bool single_type() const { return type_count == 1; }
};

QTypePartition q_type_partition(const Tree& t, const ForwardKernel& q);

// Itemised evaluation of the three-term comparison bound
//   |H(P)/l(P) - H(Q)/l(Q)| <= L (2 eps + M_eps phi(delta))
//                              + (C sqrt(L)/delta) sqrt(D(P||Q)/l(P))
//                              + ((A-a)/2) ||mu_P - mu_Q||_1 .
struct BoundReport {
    double lhs = 0.0;
    double entropy_rate_p = 0.0, entropy_rate_q = 0.0;
    double length_p = 0.0, length_q = 0.0;    // l(P), l(Q)
    double kl_pq = 0.0;
    double l_factor = 0.0;                    // L = l_sharp(P)/l(P)
    double constant_c = 0.0;
    double sup_hq_over_l = 0.0, inf_hq_over_l = 0.0;  // A, a
    double eps = 0.0, delta = 0.0, m_eps = 0.0;
    double mu_l1 = 0.0;                       // ||mu_P - mu_Q||_1
    double term1 = 0.0, term2 = 0.0, term3 = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

BoundReport compare_bound(const Tree& t, const LeafDistribution& p, const LeafDistribution& q,
                          const LengthFunction& l, double eps, double delta,
                          const TightnessCertificate& cert);

// Default sweep grids; the best (smallest rhs) entry is sweep[best].
struct BoundSweep {
    std::vector<BoundReport> reports;
    std::size_t best = 0;
};

BoundSweep compare_bound_sweep(const Tree& t, const LeafDistribution& p, const LeafDistribution& q,
                               const LengthFunction& l, const TightnessCertificate& cert,
                               std::span<const double> deltas = {},
                               std::span<const double> epsilons = {});

// Single-Q-type form (unit lengths): |H(P)/l#(P) - H_q| bounded without the
// mu-term. For constant-height trees this is the product-measure variant.
struct SingleTypeBoundReport {
    double lhs = 0.0;
    double h_q = 0.0;
    double entropy_rate_p = 0.0;
    double kl_rate = 0.0;  // D(P||Q)/l#(P)
    double eps = 0.0, delta = 0.0, m_eps = 0.0;
    double rhs = 0.0;
    bool holds = false;
    bool constant_height = false;
    int height = 0;
};

SingleTypeBoundReport boeam_bound(const Tree& t, const LeafDistribution& p,
                                  std::span<const double> q_row, double delta, double eps,
                                  const TightnessCertificate& cert);

// Entropy length function l_q(x) = H_q(x): |H(P)/l_q(P) - 1| form. The
// report carries both the plain right-hand side and the full three-term
// one evaluated with l_q (which is never smaller and always valid).
struct EntropyLengthBoundReport {
    double lhs = 0.0;
    double length_q_p = 0.0;  // l_q(P)
    double kl_pq = 0.0;
    double eps = 0.0, delta = 0.0, m_eps = 0.0;
    double rhs = 0.0;          // 2 eps + M_eps phi(delta) + (C/delta) sqrt(D/l_q(P))
    double rhs_full = 0.0;     // with the L factors of the general bound
    bool holds = false;
    bool holds_full = false;
};

EntropyLengthBoundReport entropy_length_bound(const Tree& t, const LeafDistribution& p,
                                              const ForwardKernel& q, double delta, double eps,
                                              const TightnessCertificate& cert);

// Cross-section variant: the mu-term is replaced by
//   ((A*_S - a*_S)/2) ||mu_P - mu_Q||_1 + (A - a) max{ l(P_S)/l(P), l(Q_S)/l(Q) }
// with the starred sup/inf taken outside the interior of T^S.
struct SectionVariantReport {
    BoundReport base;           // terms 1 and 2 are shared
    double sup_outside = 0.0;   // A*_S
    double inf_outside = 0.0;   // a*_S
    double section_length_ratio = 0.0;
    double term3_variant = 0.0;
    double rhs_variant = 0.0;
    bool holds = false;
};

SectionVariantReport section_variant_bound(const Tree& t, const LeafDistribution& p,
                                           const LeafDistribution& q, const LengthFunction& l,
                                           const CrossSection& s, double eps, double delta,
                                           const TightnessCertificate& cert);

// Two-branch example family: root with branches of constant forward
// degrees d1 and d2 and heights n; leaf masses theta/d1^n and
// (1-theta)/d2^n. Closed forms plus (for small n) an explicit-tree check.
struct IndispExample {
    double theta = 0.0;
    int d1 = 0, d2 = 0, n = 0;
    double entropy_p = 0.0;          // H(theta,1-theta) + n (theta log2 d1 + ...)
    double expected_length = 0.0;    // n + 1 under unit lengths
    double kl_pq = 0.0;              // 1 - H(theta,1-theta), independent of n
    double gap_limit = 0.0;          // |(theta-1/2) log2 d1 + (1/2-theta) log2 d2|
    // set when the explicit tree was built and measured
    bool verified_numerically = false;
    double entropy_p_numeric = 0.0;
    double kl_numeric = 0.0;
    double expected_length_numeric = 0.0;
};

IndispExample indisp_example(double theta, int d1, int d2, int n, bool build_explicit = true,
                             std::size_t node_guard = 5'000'000);

// The explicit two-branch tree together with its theta-law and the fair
// reference law (theta = 1/2).
struct IndispInstance {
    Tree tree;
    LeafDistribution p;
    LeafDistribution q;
};

IndispInstance build_indisp_instance(double theta, int d1, int d2, int n,
                                     std::size_t node_guard = 5'000'000);

}  // namespace treerate
