#include "qmlkit/maze.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <sstream>

#include "qmlkit/errors.hpp"
#include "qmlkit/random.hpp"

namespace qmlkit::maze {

namespace {

std::string pair_name(Node i, Node j) {
    return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

}  // namespace

MazeGraph::MazeGraph(int width, int height, Adjacency adjacency, Node entrance, Node exit,
                     std::uint64_t seed)
    : width_(width), height_(height), adjacency_(std::move(adjacency)), entrance_(entrance), exit_(exit),
      seed_(seed) {
    if (width_ < 1 || height_ < 1) throw InvalidInput("maze: width and height must be positive");
    const int n = node_count();
    if (n < 2) throw InvalidInput("maze: at least two cells are required");
    if (adjacency_.rows() != n || adjacency_.cols() != n)
        throw InvalidInput("maze: adjacency must be " + std::to_string(n) + "x" + std::to_string(n));
    for (Node i = 0; i < n; ++i) {
        if (adjacency_(i, i) != 0) throw InvalidInput("maze: nonzero diagonal at " + pair_name(i, i));
        for (Node j = 0; j < n; ++j) {
            const int a = adjacency_(i, j);
            if (a != 0 && a != 1) throw InvalidInput("maze: entry " + pair_name(i, j) + " is not 0 or 1");
            if (a != adjacency_(j, i)) throw InvalidInput("maze: asymmetric adjacency at " + pair_name(i, j));
            if (a == 1 && !grid_adjacent(i, j))
                throw InvalidInput("maze: link " + pair_name(i, j) + " joins non-adjacent cells");
        }
    }
    if (!valid_node(entrance_)) throw InvalidInput("maze: entrance out of range");
    if (!valid_node(exit_)) throw InvalidInput("maze: exit out of range");
    if (entrance_ == exit_) throw InvalidInput("maze: entrance and exit must differ");
}

MazeGraph MazeGraph::from_edges(int width, int height, const std::vector<Edge>& edges, Node entrance,
                                Node exit, std::uint64_t seed) {
    if (width < 1 || height < 1) throw InvalidInput("maze: width and height must be positive");
    const int n = width * height;
    Adjacency a = Adjacency::Zero(n, n);
    for (const auto& [i, j] : edges) {
        if (i < 0 || j < 0 || i >= n || j >= n) throw InvalidInput("maze: edge " + pair_name(i, j) + " out of range");
        a(i, j) = 1;
        a(j, i) = 1;
    }
    return MazeGraph(width, height, std::move(a), entrance, exit, seed);
}

bool MazeGraph::grid_adjacent(Node i, Node j) const noexcept {
    if (!valid_node(i) || !valid_node(j)) return false;
    return std::abs(row_of(i) - row_of(j)) + std::abs(col_of(i) - col_of(j)) == 1;
}

std::vector<Edge> MazeGraph::edges() const {
    std::vector<Edge> out;
    const int n = node_count();
    for (Node i = 0; i < n; ++i)
        for (Node j = i + 1; j < n; ++j)
            if (adjacency_(i, j)) out.emplace_back(i, j);
    return out;
}

int MazeGraph::edge_count() const { return adjacency_.sum() / 2; }

MazeGraph MazeGraph::with_exit(Node exit) const {
    return MazeGraph(width_, height_, adjacency_, entrance_, exit, seed_);
}

bool operator==(const MazeGraph& a, const MazeGraph& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.entrance_ == b.entrance_ &&
           a.exit_ == b.exit_ && a.seed_ == b.seed_ && a.adjacency_ == b.adjacency_;
}

MazeGraph generate_perfect_maze(int width, int height, std::uint64_t seed) {
    return generate_perfect_maze(width, height, seed, width * height - 1);
}

MazeGraph generate_perfect_maze(int width, int height, std::uint64_t seed, Node exit) {
    if (width < 2 || height < 2) throw InvalidInput("generate_perfect_maze: width and height must be >= 2");
    const int n = width * height;
    Adjacency a = Adjacency::Zero(n, n);
    std::vector<char> visited(n, 0);
    std::vector<Node> stack{0};
    visited[0] = 1;
    Rng rng(seed);

    constexpr std::array<std::array<int, 2>, 4> kSteps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    while (!stack.empty()) {
        const Node cur = stack.back();
        const int row = cur / width, col = cur % width;
        std::array<Node, 4> open{};
        int count = 0;
        for (const auto& [dr, dc] : kSteps) {
            const int r = row + dr, c = col + dc;
            if (r < 0 || r >= height || c < 0 || c >= width) continue;
            const Node next = r * width + c;
            if (!visited[next]) open[count++] = next;
        }
        if (count == 0) {
            stack.pop_back();
            continue;
        }
        const Node next = open[rng.below(static_cast<std::uint64_t>(count))];
        a(cur, next) = a(next, cur) = 1;
        visited[next] = 1;
        stack.push_back(next);
    }
    return MazeGraph(width, height, std::move(a), 0, exit, seed);
}

NodeDegrees degrees(const MazeGraph& maze) { return maze.adjacency().colwise().sum().transpose(); }

MazeGraph toggle_link(const MazeGraph& maze, Node i, Node j) {
    if (i == j) throw InvalidInput("toggle_link: i and j must differ");
    if (!maze.grid_adjacent(i, j))
        throw InvalidInput("toggle_link: cells " + pair_name(i, j) + " are not grid-adjacent");
    Adjacency a = maze.adjacency();
    a(i, j) = a(j, i) = 1 - a(i, j);
    return MazeGraph(maze.width(), maze.height(), std::move(a), maze.entrance(), maze.exit(), maze.seed());
}

std::vector<Edge> grid_adjacent_pairs(int width, int height) {
    std::vector<Edge> out;
    for (Node i = 0; i < width * height; ++i) {
        const int row = i / width, col = i % width;
        if (col + 1 < width) out.emplace_back(i, i + 1);
        if (row + 1 < height) out.emplace_back(i, i + width);
    }
    std::sort(out.begin(), out.end());
    return out;
}

int component_count(const MazeGraph& maze) {
    const int n = maze.node_count();
    std::vector<int> label(n, -1);
    int components = 0;
    std::vector<Node> stack;
    for (Node s = 0; s < n; ++s) {
        if (label[s] >= 0) continue;
        label[s] = components;
        stack.push_back(s);
        while (!stack.empty()) {
            const Node u = stack.back();
            stack.pop_back();
            for (Node v = 0; v < n; ++v)
                if (maze.linked(u, v) && label[v] < 0) {
                    label[v] = components;
                    stack.push_back(v);
                }
        }
        ++components;
    }
    return components;
}

bool is_connected(const MazeGraph& maze) { return component_count(maze) == 1; }

bool is_perfect(const MazeGraph& maze) {
    return maze.edge_count() == maze.node_count() - 1 && is_connected(maze);
}

int cycle_rank(const MazeGraph& maze) {
    return maze.edge_count() - maze.node_count() + component_count(maze);
}

std::string serialize(const MazeGraph& maze) {
    std::ostringstream os;
    os << "{\n"
       << "  \"width\": " << maze.width() << ",\n"
       << "  \"height\": " << maze.height() << ",\n"
       << "  \"entrance\": " << maze.entrance() << ",\n"
       << "  \"exit\": " << maze.exit() << ",\n"
       << "  \"seed\": " << maze.seed() << ",\n"
       << "  \"edges\": [";
    bool first = true;
    for (const auto& [i, j] : maze.edges()) {
        os << (first ? "" : ", ") << '[' << i << ", " << j << ']';
        first = false;
    }
    os << "]\n}\n";
    return os.str();
}

namespace {

using nlohmann::json;

const json& require_key(const json& doc, const char* key) {
    const auto it = doc.find(key);
    if (it == doc.end()) throw ParseError(std::string("/") + key, "missing required key");
    return *it;
}

long long require_integer(const json& doc, const char* key) {
    const json& v = require_key(doc, key);
    if (!v.is_number_integer()) throw ParseError(std::string("/") + key, "expected an integer");
    return v.get<long long>();
}

}  // namespace

MazeGraph deserialize(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError("byte " + std::to_string(e.byte), "malformed JSON");
    }
    if (!doc.is_object()) throw ParseError("/", "expected a JSON object");

    const long long width = require_integer(doc, "width");
    const long long height = require_integer(doc, "height");
    if (width < 1 || width > 1024) throw ParseError("/width", "out of range");
    if (height < 1 || height > 1024) throw ParseError("/height", "out of range");
    const long long n = width * height;
    if (n < 2) throw ParseError("/width", "maze needs at least two cells");

    const long long entrance = require_integer(doc, "entrance");
    const long long exit = require_integer(doc, "exit");
    if (entrance < 0 || entrance >= n) throw ParseError("/entrance", "node index out of range");
    if (exit < 0 || exit >= n) throw ParseError("/exit", "node index out of range");
    if (entrance == exit) throw ParseError("/exit", "exit must differ from entrance");

    const json& seed_v = require_key(doc, "seed");
    if (!seed_v.is_number_unsigned() && !(seed_v.is_number_integer() && seed_v.get<long long>() >= 0))
        throw ParseError("/seed", "expected a non-negative integer");
    const auto seed = seed_v.get<std::uint64_t>();

    const auto w = static_cast<int>(width), h = static_cast<int>(height);
    auto adjacent = [w](long long i, long long j) {
        return std::abs(i / w - j / w) + std::abs(i % w - j % w) == 1;
    };

    Adjacency a = Adjacency::Zero(n, n);
    const bool has_edges = doc.contains("edges");
    const bool has_matrix = doc.contains("adjacency");
    if (has_edges == has_matrix) throw ParseError("/edges", "exactly one of 'edges' or 'adjacency' is required");

    if (has_edges) {
        const json& edges = doc["edges"];
        if (!edges.is_array()) throw ParseError("/edges", "expected an array");
        for (std::size_t k = 0; k < edges.size(); ++k) {
            const std::string loc = "/edges/" + std::to_string(k);
            const json& e = edges[k];
            if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
                throw ParseError(loc, "expected a pair of integers");
            const auto i = e[0].get<long long>(), j = e[1].get<long long>();
            if (i < 0 || j < 0 || i >= n || j >= n) throw ParseError(loc, "node index out of range");
            if (i >= j) throw ParseError(loc, "edge must be written with i < j");
            if (!adjacent(i, j)) throw ParseError(loc, "cells are not grid-adjacent");
            if (a(i, j)) throw ParseError(loc, "duplicate edge");
            a(i, j) = a(j, i) = 1;
        }
    } else {
        // Full-matrix form, accepted on input only.
        const json& m = doc["adjacency"];
        if (!m.is_array() || static_cast<long long>(m.size()) != n)
            throw ParseError("/adjacency", "expected " + std::to_string(n) + " rows");
        for (long long i = 0; i < n; ++i) {
            const json& row = m[i];
            const std::string loc = "/adjacency/" + std::to_string(i);
            if (!row.is_array() || static_cast<long long>(row.size()) != n)
                throw ParseError(loc, "expected " + std::to_string(n) + " entries");
            for (long long j = 0; j < n; ++j) {
                if (!row[j].is_number_integer() || (row[j] != 0 && row[j] != 1))
                    throw ParseError(loc + "/" + std::to_string(j), "entry must be 0 or 1");
                a(i, j) = row[j].get<int>();
            }
        }
        for (long long i = 0; i < n; ++i)
            for (long long j = 0; j < n; ++j) {
                const std::string loc = "/adjacency/" + std::to_string(i) + "/" + std::to_string(j);
                if (a(i, j) != a(j, i))
                    throw ParseError(loc, "asymmetric adjacency at " + pair_name(static_cast<Node>(i), static_cast<Node>(j)));
                if (i == j && a(i, j)) throw ParseError(loc, "self-link");
                if (a(i, j) && !adjacent(i, j)) throw ParseError(loc, "cells are not grid-adjacent");
            }
    }
    return MazeGraph(w, h, std::move(a), static_cast<Node>(entrance), static_cast<Node>(exit), seed);
}

}  // namespace qmlkit::maze
