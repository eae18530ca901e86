#include "treerate/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace treerate {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::int64_t parse_id(const std::string& key) {
    std::size_t pos = 0;
    std::int64_t v = std::stoll(key, &pos);
    if (pos != key.size()) fail("bad node id key '" + key + "'");
    return v;
}

NodeId need_node(const Tree& t, std::int64_t label, const char* what) {
    auto id = t.find_external(label);
    if (!id) fail(std::string(what) + " refers to unknown node " + std::to_string(label));
    return *id;
}

}  // namespace

TreeWithLengths load_tree_json(const nlohmann::json& j, const TreeBuildOptions& opts) {
    if (!j.is_object()) fail("tree file must be a JSON object");
    for (const auto& [key, val] : j.items()) {
        (void)val;
        if (key != "root" && key != "edges" && key != "lengths")
            fail("unknown key '" + key + "' in tree object");
    }
    if (!j.contains("edges") || !j["edges"].is_array()) fail("tree object needs an 'edges' array");

    std::vector<std::pair<std::int64_t, std::int64_t>> edges;
    edges.reserve(j["edges"].size());
    for (const auto& e : j["edges"]) {
        if (!e.is_array() || e.size() != 2) fail("each edge must be a [parent, child] pair");
        edges.emplace_back(e[0].get<std::int64_t>(), e[1].get<std::int64_t>());
    }
    std::optional<std::int64_t> root;
    if (j.contains("root")) root = j["root"].get<std::int64_t>();

    Tree tree = Tree::from_edges(edges, root, opts);
    LengthFunction unit = LengthFunction::unit(tree);
    TreeWithLengths out{std::move(tree), std::move(unit), false};
    if (j.contains("lengths")) {
        out.lengths = load_length_table(out.tree, j["lengths"]);
        out.has_lengths = true;
    }
    return out;
}

nlohmann::json tree_to_json(const Tree& t, const LengthFunction* l) {
    nlohmann::json j;
    j["root"] = t.external_id(t.root());
    auto& edges = j["edges"] = nlohmann::json::array();
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        for (NodeId c : t.children(x))
            edges.push_back({t.external_id(x), t.external_id(c)});
    }
    if (l && l->kind() != LengthFunction::Kind::unit) {
        auto& lens = j["lengths"] = nlohmann::json::object();
        for (std::size_t i = 0; i < t.node_count(); ++i) {
            NodeId x = static_cast<NodeId>(i);
            if (t.is_interior(x)) lens[std::to_string(t.external_id(x))] = l->at(t, x);
        }
    }
    return j;
}

Tree load_tree_level_order(std::istream& in, const TreeBuildOptions& opts) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "treerate-tree-lo" || version != 1)
        fail("not a treerate-tree-lo v1 stream");
    std::string line;
    std::getline(in, line);
    if (!std::getline(in, line)) fail("missing degree line");
    std::istringstream ls(line);
    std::vector<int> degrees;
    for (int d; ls >> d;) degrees.push_back(d);
    return Tree::from_level_order_degrees(degrees, opts);
}

void save_tree_level_order(std::ostream& out, const Tree& t, const LengthFunction* l) {
    out << "treerate-tree-lo 1\n";
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        if (i) out << ' ';
        out << t.degree(static_cast<NodeId>(i));
    }
    out << '\n';
    if (l && l->kind() != LengthFunction::Kind::unit) {
        out << "lengths";
        for (std::size_t i = 0; i < t.node_count(); ++i) {
            NodeId x = static_cast<NodeId>(i);
            out << ' ' << (t.is_interior(x) ? fmt_double(l->at(t, x)) : "0");
        }
        out << '\n';
    }
}

LeafDistribution load_leaf_distribution(const Tree& t, const nlohmann::json& j) {
    if (!j.is_object()) fail("leaf distribution must be a JSON object");
    std::vector<double> mass(t.node_count(), 0.0);
    for (const auto& [key, val] : j.items()) {
        NodeId v = need_node(t, parse_id(key), "leaf distribution");
        mass[static_cast<std::size_t>(v)] = val.get<double>();
    }
    return LeafDistribution::from_node_masses(t, std::move(mass));
}

nlohmann::json leaf_distribution_to_json(const Tree& t, const LeafDistribution& p) {
    nlohmann::json j = nlohmann::json::object();
    for (NodeId v : t.leaves())
        if (p.mass(v) > 0.0) j[std::to_string(t.external_id(v))] = p.mass(v);
    return j;
}

ForwardKernel load_kernel(const Tree& t, const nlohmann::json& j) {
    if (!j.is_object()) fail("kernel must be a JSON object");
    std::vector<std::vector<double>> rows(t.node_count());
    for (const auto& [key, val] : j.items()) {
        NodeId x = need_node(t, parse_id(key), "kernel");
        if (t.is_leaf(x)) fail("kernel row on leaf " + key);
        auto ch = t.children(x);
        auto& row = rows[static_cast<std::size_t>(x)];
        row.assign(ch.size(), 0.0);
        for (const auto& [ckey, prob] : val.items()) {
            NodeId c = need_node(t, parse_id(ckey), "kernel row");
            bool found = false;
            for (std::size_t i = 0; i < ch.size(); ++i) {
                if (ch[i] == c) {
                    row[i] = prob.get<double>();
                    found = true;
                    break;
                }
            }
            if (!found) fail("node " + ckey + " is not a child of node " + key);
        }
    }
    return ForwardKernel::from_rows(t, std::move(rows));
}

nlohmann::json kernel_to_json(const Tree& t, const ForwardKernel& k) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (t.is_leaf(x) || !k.supported(x)) continue;
        nlohmann::json row = nlohmann::json::object();
        auto ch = t.children(x);
        auto r = k.row(x);
        for (std::size_t c = 0; c < ch.size(); ++c)
            row[std::to_string(t.external_id(ch[c]))] = r[c];
        j[std::to_string(t.external_id(x))] = std::move(row);
    }
    return j;
}

NodeFunction load_node_function(const Tree& t, const nlohmann::json& j) {
    if (!j.is_object()) fail("node function must be a JSON object");
    NodeFunction f(t.node_count(), 0.0);
    for (const auto& [key, val] : j.items()) {
        NodeId x = need_node(t, parse_id(key), "node function");
        f[static_cast<std::size_t>(x)] = val.get<double>();
    }
    return f;
}

LengthFunction load_length_table(const Tree& t, const nlohmann::json& j) {
    if (!j.is_object()) fail("length table must be a JSON object");
    std::vector<double> values(t.node_count(), 0.0);
    for (const auto& [key, val] : j.items()) {
        NodeId x = need_node(t, parse_id(key), "length table");
        values[static_cast<std::size_t>(x)] = val.get<double>();
    }
    return LengthFunction::table(t, std::move(values));
}

ProcessSpec load_process_spec(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("family")) fail("process spec needs a 'family' key");
    std::string family = j["family"].get<std::string>();

    auto check_keys = [&](std::initializer_list<const char*> allowed) {
        for (const auto& [key, val] : j.items()) {
            (void)val;
            if (key == "family") continue;
            bool ok = false;
            for (const char* a : allowed)
                if (key == a) ok = true;
            if (!ok) fail("unknown key '" + key + "' in " + family + " process spec");
        }
    };

    if (family == "iid") {
        check_keys({"probs"});
        return iid_process(j.at("probs").get<std::vector<double>>());
    }
    if (family == "markov") {
        check_keys({"transition", "initial"});
        return markov_process(j.at("transition").get<std::vector<std::vector<double>>>(),
                              j.at("initial").get<std::vector<double>>());
    }
    if (family == "product") {
        check_keys({"alphabet", "rows"});
        int alphabet = j.at("alphabet").get<int>();
        auto rows = j.at("rows").get<std::vector<std::vector<double>>>();
        if (rows.empty()) fail("product spec needs at least one row");
        return product_process(alphabet, [rows](int level) {
            return rows[std::min<std::size_t>(static_cast<std::size_t>(level), rows.size() - 1)];
        });
    }
    if (family == "kakutani") {
        check_keys({"M", "beta"});
        return kakutani_process(j.at("M").get<int>(), j.at("beta").get<double>());
    }
    if (family == "two_branch") {
        check_keys({"theta", "d1", "d2"});
        return two_branch_process(j.at("theta").get<double>(), j.at("d1").get<int>(),
                                  j.at("d2").get<int>());
    }
    if (family == "srw") {
        check_keys({"d"});
        return srw_regular_digraph(j.at("d").get<int>());
    }
    fail("unknown process family '" + family + "'");
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        fail("parse error in " + path + ": " + e.what());
    }
    return j;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void CsvWriter::comment(const std::string& text) { out_ << "# " << text << '\n'; }

void CsvWriter::header(const std::vector<std::string>& columns) { row(columns); }

void CsvWriter::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace treerate
