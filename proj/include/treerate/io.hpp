#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "treerate/calculus.hpp"
#include "treerate/measures.hpp"
#include "treerate/process.hpp"
#include "treerate/tree.hpp"

namespace treerate {

inline constexpr const char* kVersion = "0.1.0";

// ---- JSON schemas -------------------------------------------------------
//
// Tree:      { "root": id, "edges": [[parent, child], ...],
//              "lengths": { "<node id>": value, ... } (optional) }
// Leaf law:  { "<leaf id>": mass, ... }
// Kernel:    { "<node id>": { "<child id>": prob, ... }, ... }
// Node fn:   { "<node id>": value, ... }
// Process:   { "family": "iid" | "markov" | "product" | "kakutani"
//                        | "two_branch" | "srw", ... }   (see load_process_spec)

struct TreeWithLengths {
    Tree tree;
    LengthFunction lengths;   // unit when the file has no lengths object
    bool has_lengths = false;
};

TreeWithLengths load_tree_json(const nlohmann::json& j, const TreeBuildOptions& opts = {});
nlohmann::json tree_to_json(const Tree& t, const LengthFunction* l = nullptr);

// Compact level-order text format for generated trees:
//   line 1: "treerate-tree-lo 1"
//   line 2: child counts in breadth-first order, space separated
//   line 3: "lengths <l0> <l1> ..." (optional, interior nodes in id order)
Tree load_tree_level_order(std::istream& in, const TreeBuildOptions& opts = {});
void save_tree_level_order(std::ostream& out, const Tree& t, const LengthFunction* l = nullptr);

LeafDistribution load_leaf_distribution(const Tree& t, const nlohmann::json& j);
nlohmann::json leaf_distribution_to_json(const Tree& t, const LeafDistribution& p);

ForwardKernel load_kernel(const Tree& t, const nlohmann::json& j);
nlohmann::json kernel_to_json(const Tree& t, const ForwardKernel& k);

NodeFunction load_node_function(const Tree& t, const nlohmann::json& j);
LengthFunction load_length_table(const Tree& t, const nlohmann::json& j);

ProcessSpec load_process_spec(const nlohmann::json& j);

nlohmann::json load_json_file(const std::string& path);

// ---- CSV ----------------------------------------------------------------

std::string fmt_double(double v);  // shortest exact round-trip ("%.17g")

// Deterministic CSV emission: a '#' comment line with version, seed and
// config hash, then a header row, then data rows.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}
    void comment(const std::string& text);
    void header(const std::vector<std::string>& columns);
    void row(const std::vector<std::string>& fields);

private:
    std::ostream& out_;
};

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace treerate
