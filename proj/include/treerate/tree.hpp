#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace treerate {

using NodeId = std::int32_t;
constexpr NodeId kNoNode = -1;

// Size guards trip this instead of invalid input errors, so callers can
// fall back (e.g. to aggregated mode) or exit with the guard status.
class GuardExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TreeBuildOptions {
    bool allow_unary = false;       // forward degree 1 is rejected by default
    std::size_t max_nodes = 5'000'000;  // desk-scale guard; fail fast, not OOM
};

// Immutable rooted tree. Nodes are dense ids in breadth-first order
// (root = 0); children of each node are contiguous and keep the order in
// which the edges were supplied. External labels are remapped at build
// time and retained for reporting.
class Tree {
public:
    static Tree from_edges(std::span<const std::pair<std::int64_t, std::int64_t>> edges,
                           std::optional<std::int64_t> root = std::nullopt,
                           const TreeBuildOptions& opts = {});

    // Shape-only constructor: child counts in breadth-first order.
    static Tree from_level_order_degrees(std::span<const int> degrees,
                                         const TreeBuildOptions& opts = {});

    NodeId root() const { return 0; }
    std::size_t node_count() const { return parent_.size(); }
    NodeId parent(NodeId x) const { return parent_[static_cast<std::size_t>(x)]; }
    int depth(NodeId x) const { return depth_[static_cast<std::size_t>(x)]; }
    int max_depth() const { return max_depth_; }

    std::span<const NodeId> children(NodeId x) const {
        auto b = static_cast<std::size_t>(child_off_[static_cast<std::size_t>(x)]);
        auto e = static_cast<std::size_t>(child_off_[static_cast<std::size_t>(x) + 1]);
        return {children_.data() + b, e - b};
    }
    int degree(NodeId x) const {
        return child_off_[static_cast<std::size_t>(x) + 1] - child_off_[static_cast<std::size_t>(x)];
    }
    bool is_leaf(NodeId x) const { return degree(x) == 0; }
    bool is_interior(NodeId x) const { return degree(x) > 0; }

    std::size_t leaf_count() const { return leaves_.size(); }
    std::span<const NodeId> leaves() const { return leaves_; }

    std::int64_t external_id(NodeId x) const { return external_[static_cast<std::size_t>(x)]; }
    std::optional<NodeId> find_external(std::int64_t label) const;

    void require_valid(NodeId x) const;

private:
    friend class TreeBuilder;
    std::vector<NodeId> parent_;
    std::vector<std::int32_t> child_off_;
    std::vector<NodeId> children_;
    std::vector<std::int32_t> depth_;
    std::vector<NodeId> leaves_;
    std::vector<std::int64_t> external_;
    std::unordered_map<std::int64_t, NodeId> external_index_;
    int max_depth_ = 0;
};

// Positive edge length per interior node; every outgoing edge at x has
// length at(x). Leaves carry no value and asking for one is a caller bug.
class LengthFunction {
public:
    enum class Kind { unit, table, entropy_derived };

    static LengthFunction unit(const Tree& t);
    static LengthFunction table(const Tree& t, std::vector<double> values);

    Kind kind() const { return kind_; }
    double at(const Tree& t, NodeId x) const;
    double min_interior(const Tree& t) const;
    double max_interior(const Tree& t) const;

    // |x|_l: sum of at(y^-) over the geodesic from the root to x.
    double path_length(const Tree& t, NodeId x) const;
    // All path lengths in one pass (parents precede children in id order).
    std::vector<double> all_path_lengths(const Tree& t) const;

private:
    LengthFunction(Kind k, std::vector<double> v) : kind_(k), values_(std::move(v)) {}
    Kind kind_;
    std::vector<double> values_;  // empty for unit kind
};

// T_x and its leaf set.
struct Cone {
    std::vector<NodeId> nodes;
    std::vector<NodeId> leaves;
};

Cone cone(const Tree& t, NodeId x);

// Result of checking whether S is a cross section: every root-to-leaf
// geodesic must meet S exactly once. On failure, `witness` is a leaf whose
// geodesic meets S `hits` times.
struct SectionCheck {
    bool ok = false;
    NodeId witness = kNoNode;
    int hits = 0;
};

class CrossSection {
public:
    // Throws std::invalid_argument (with the witness leaf) if S is not a
    // section; use check() for the non-throwing report.
    static CrossSection validate(const Tree& t, std::span<const NodeId> members);
    static SectionCheck check(const Tree& t, std::span<const NodeId> members);

    // S(n) = {x : |x| = n} + {leaves shallower than n}.
    static CrossSection at_depth(const Tree& t, int n);

    std::span<const NodeId> members() const { return members_; }
    bool contains(NodeId x) const { return in_section_[static_cast<std::size_t>(x)] != 0; }
    // Nodes of the induced subtree T^S (all geodesics from the root to S).
    bool in_subtree(NodeId x) const { return in_subtree_[static_cast<std::size_t>(x)] != 0; }
    // Interior of T^S = T^S minus S itself.
    bool in_subtree_interior(NodeId x) const { return in_subtree(x) && !contains(x); }

private:
    CrossSection() = default;
    std::vector<NodeId> members_;
    std::vector<char> in_section_;
    std::vector<char> in_subtree_;
};

}  // namespace treerate
