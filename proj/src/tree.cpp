#include "treerate/tree.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <stdexcept>

namespace treerate {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

Tree Tree::from_edges(std::span<const std::pair<std::int64_t, std::int64_t>> edges,
                      std::optional<std::int64_t> root,
                      const TreeBuildOptions& opts) {
    // Index the external labels and their adjacency, keeping edge order.
    std::unordered_map<std::int64_t, std::int64_t> parent_of;
    std::unordered_map<std::int64_t, std::vector<std::int64_t>> kids;
    parent_of.reserve(edges.size() * 2);
    for (const auto& [p, c] : edges) {
        if (p == c) fail("edge (" + std::to_string(p) + "," + std::to_string(c) + ") is a self-loop");
        auto [it, fresh] = parent_of.try_emplace(c, p);
        if (!fresh) fail("multiple parents for node " + std::to_string(c));
        kids[p];  // ensure the parent exists even if it has no own parent entry
        kids[p].push_back(c);
    }

    std::int64_t root_label;
    if (root) {
        root_label = *root;
        if (parent_of.count(root_label)) fail("designated root has a parent");
    } else {
        std::optional<std::int64_t> found;
        for (const auto& [p, cs] : kids) {
            (void)cs;
            if (!parent_of.count(p)) {
                if (found && *found != p) fail("edge list has more than one root candidate");
                found = p;
            }
        }
        if (!found) fail(edges.empty() ? "empty edge list and no root given"
                                       : "no root candidate: edge list contains a cycle");
        root_label = *found;
    }

    std::size_t n_labels = kids.size();
    for (const auto& [c, p] : parent_of) {
        (void)p;
        if (!kids.count(c)) ++n_labels;  // leaves appear only as children
    }
    if (!kids.count(root_label) && !parent_of.count(root_label)) ++n_labels;  // bare root
    if (n_labels > opts.max_nodes)
        throw GuardExceeded("tree exceeds node guard (" + std::to_string(opts.max_nodes) + " nodes)");

    Tree t;
    t.parent_.reserve(n_labels);
    t.external_.reserve(n_labels);
    t.depth_.reserve(n_labels);

    // Breadth-first relabelling: dense ids, children contiguous.
    std::deque<std::int64_t> queue{root_label};
    t.external_index_.reserve(n_labels);
    t.external_index_[root_label] = 0;
    t.parent_.push_back(kNoNode);
    t.external_.push_back(root_label);
    t.depth_.push_back(0);
    t.child_off_.push_back(0);

    std::size_t bfs_pos = 0;
    while (!queue.empty()) {
        std::int64_t label = queue.front();
        queue.pop_front();
        NodeId id = static_cast<NodeId>(bfs_pos++);
        auto it = kids.find(label);
        int deg = it == kids.end() ? 0 : static_cast<int>(it->second.size());
        if (deg == 1 && !opts.allow_unary)
            fail("node " + std::to_string(label) +
                 " has exactly one child (forward degree 1); pass allow_unary to permit");
        if (it != kids.end()) {
            for (std::int64_t c : it->second) {
                if (t.external_index_.count(c))
                    fail("cycle detected through node " + std::to_string(c));
                NodeId cid = static_cast<NodeId>(t.parent_.size());
                t.external_index_[c] = cid;
                t.parent_.push_back(id);
                t.external_.push_back(c);
                t.depth_.push_back(t.depth_[static_cast<std::size_t>(id)] + 1);
                t.children_.push_back(cid);
                queue.push_back(c);
            }
        }
        t.child_off_.push_back(static_cast<std::int32_t>(t.children_.size()));
    }

    if (t.parent_.size() != n_labels)
        fail("edge list is not connected to the root (cycle or stray component)");

    for (std::size_t i = 0; i < t.parent_.size(); ++i) {
        if (t.child_off_[i + 1] == t.child_off_[i]) t.leaves_.push_back(static_cast<NodeId>(i));
        t.max_depth_ = std::max(t.max_depth_, static_cast<int>(t.depth_[i]));
    }
    return t;
}

Tree Tree::from_level_order_degrees(std::span<const int> degrees, const TreeBuildOptions& opts) {
    if (degrees.empty()) fail("degree list is empty");
    std::size_t total = 1;
    for (int d : degrees) {
        if (d < 0) fail("negative child count");
        if (d == 1 && !opts.allow_unary) fail("forward degree 1 in degree list; pass allow_unary to permit");
        total += static_cast<std::size_t>(d);
        if (total > opts.max_nodes)
            throw GuardExceeded("tree exceeds node guard (" + std::to_string(opts.max_nodes) + " nodes)");
    }
    if (degrees.size() > total) fail("degree list longer than the tree it describes");

    Tree t;
    t.parent_.assign(total, kNoNode);
    t.depth_.assign(total, 0);
    t.child_off_.assign(total + 1, 0);
    t.external_.resize(total);
    std::size_t next = 1;
    for (std::size_t i = 0; i < total; ++i) {
        int d = i < degrees.size() ? degrees[i] : 0;
        t.child_off_[i + 1] = t.child_off_[i] + d;
        for (int k = 0; k < d; ++k) {
            t.parent_[next] = static_cast<NodeId>(i);
            t.depth_[next] = t.depth_[i] + 1;
            t.children_.push_back(static_cast<NodeId>(next));
            ++next;
        }
    }
    if (next != total) fail("degree list inconsistent (unused trailing entries)");
    t.external_index_.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        t.external_[i] = static_cast<std::int64_t>(i);
        t.external_index_[static_cast<std::int64_t>(i)] = static_cast<NodeId>(i);
        if (t.child_off_[i + 1] == t.child_off_[i]) t.leaves_.push_back(static_cast<NodeId>(i));
        t.max_depth_ = std::max(t.max_depth_, static_cast<int>(t.depth_[i]));
    }
    return t;
}

std::optional<NodeId> Tree::find_external(std::int64_t label) const {
    auto it = external_index_.find(label);
    if (it == external_index_.end()) return std::nullopt;
    return it->second;
}

void Tree::require_valid(NodeId x) const {
    if (x < 0 || static_cast<std::size_t>(x) >= node_count())
        fail("unknown node id " + std::to_string(x));
}

LengthFunction LengthFunction::unit(const Tree&) { return LengthFunction(Kind::unit, {}); }

LengthFunction LengthFunction::table(const Tree& t, std::vector<double> values) {
    if (values.size() != t.node_count()) fail("length table size does not match node count");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (t.is_interior(static_cast<NodeId>(i)) && !(values[i] > 0.0))
            fail("length must be positive at interior node " +
                 std::to_string(t.external_id(static_cast<NodeId>(i))));
    }
    return LengthFunction(Kind::table, std::move(values));
}

double LengthFunction::at(const Tree& t, NodeId x) const {
    t.require_valid(x);
    if (t.is_leaf(x))
        throw std::logic_error("length function evaluated at a leaf (node " +
                               std::to_string(t.external_id(x)) + ")");
    return kind_ == Kind::unit ? 1.0 : values_[static_cast<std::size_t>(x)];
}

double LengthFunction::min_interior(const Tree& t) const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.node_count(); ++i)
        if (t.is_interior(static_cast<NodeId>(i))) m = std::min(m, at(t, static_cast<NodeId>(i)));
    return m;
}

double LengthFunction::max_interior(const Tree& t) const {
    double m = 0.0;
    for (std::size_t i = 0; i < t.node_count(); ++i)
        if (t.is_interior(static_cast<NodeId>(i))) m = std::max(m, at(t, static_cast<NodeId>(i)));
    return m;
}

double LengthFunction::path_length(const Tree& t, NodeId x) const {
    t.require_valid(x);
    if (kind_ == Kind::unit) return static_cast<double>(t.depth(x));
    double s = 0.0;
    for (NodeId y = x; y != t.root(); y = t.parent(y)) s += at(t, t.parent(y));
    return s;
}

std::vector<double> LengthFunction::all_path_lengths(const Tree& t) const {
    std::vector<double> len(t.node_count(), 0.0);
    for (std::size_t i = 1; i < t.node_count(); ++i) {
        NodeId p = t.parent(static_cast<NodeId>(i));
        len[i] = len[static_cast<std::size_t>(p)] + at(t, p);
    }
    return len;
}

Cone cone(const Tree& t, NodeId x) {
    t.require_valid(x);
    Cone c;
    // Descend iteratively; ids inside a cone are not contiguous in general.
    std::vector<NodeId> stack{x};
    while (!stack.empty()) {
        NodeId y = stack.back();
        stack.pop_back();
        c.nodes.push_back(y);
        if (t.is_leaf(y)) c.leaves.push_back(y);
        auto ch = t.children(y);
        for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
    return c;
}

SectionCheck CrossSection::check(const Tree& t, std::span<const NodeId> members) {
    std::vector<char> mark(t.node_count(), 0);
    for (NodeId x : members) {
        t.require_valid(x);
        mark[static_cast<std::size_t>(x)] = 1;
    }
    // hits(x) = number of marked nodes on the geodesic from the root to x;
    // computable in one id-ordered pass since parents precede children.
    std::vector<std::int32_t> hits(t.node_count(), 0);
    hits[0] = mark[0];
    for (std::size_t i = 1; i < t.node_count(); ++i)
        hits[i] = hits[static_cast<std::size_t>(t.parent(static_cast<NodeId>(i)))] + mark[i];
    for (NodeId v : t.leaves()) {
        if (hits[static_cast<std::size_t>(v)] != 1)
            return {false, v, hits[static_cast<std::size_t>(v)]};
    }
    return {true, kNoNode, 1};
}

CrossSection CrossSection::validate(const Tree& t, std::span<const NodeId> members) {
    SectionCheck chk = check(t, members);
    if (!chk.ok)
        fail("not a cross section: geodesic to leaf " +
             std::to_string(t.external_id(chk.witness)) + " meets it " +
             std::to_string(chk.hits) + " times");
    CrossSection s;
    s.members_.assign(members.begin(), members.end());
    std::sort(s.members_.begin(), s.members_.end());
    s.members_.erase(std::unique(s.members_.begin(), s.members_.end()), s.members_.end());
    s.in_section_.assign(t.node_count(), 0);
    for (NodeId x : s.members_) s.in_section_[static_cast<std::size_t>(x)] = 1;
    s.in_subtree_.assign(t.node_count(), 0);
    for (NodeId x : s.members_)
        for (NodeId y = x;; y = t.parent(y)) {
            auto& cell = s.in_subtree_[static_cast<std::size_t>(y)];
            if (cell) break;
            cell = 1;
            if (y == t.root()) break;
        }
    return s;
}

CrossSection CrossSection::at_depth(const Tree& t, int n) {
    std::vector<NodeId> members;
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (t.depth(x) == n || (t.is_leaf(x) && t.depth(x) < n)) members.push_back(x);
    }
    return validate(t, members);
}

}  // namespace treerate
