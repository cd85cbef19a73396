#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qmlkit::maze {

using Node = int;
using Adjacency = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
using NodeDegrees = Eigen::VectorXi;
using Edge = std::pair<Node, Node>;  // first < second

/// A grid of width x height cells whose passages form an undirected graph.
///
/// Cells are indexed row-major with row 0 at the bottom, so node 0 is the
/// lower-left cell. Links may only join grid-adjacent cells. A freshly
/// generated maze is a spanning tree of the grid; later toggles may break that.
class MazeGraph {
public:
    /// Validates every structural invariant. Throws InvalidInput naming the offending entry.
    MazeGraph(int width, int height, Adjacency adjacency, Node entrance, Node exit, std::uint64_t seed);

    static MazeGraph from_edges(int width, int height, const std::vector<Edge>& edges, Node entrance,
                                Node exit, std::uint64_t seed = 0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int node_count() const noexcept { return width_ * height_; }
    Node entrance() const noexcept { return entrance_; }
    Node exit() const noexcept { return exit_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const Adjacency& adjacency() const noexcept { return adjacency_; }

    bool linked(Node i, Node j) const { return adjacency_(i, j) != 0; }
    int row_of(Node i) const noexcept { return i / width_; }
    int col_of(Node i) const noexcept { return i % width_; }
    Node node_at(int row, int col) const noexcept { return row * width_ + col; }
    bool valid_node(Node i) const noexcept { return i >= 0 && i < node_count(); }
    bool grid_adjacent(Node i, Node j) const noexcept;

    /// Edges with i < j in lexicographic order.
    std::vector<Edge> edges() const;
    int edge_count() const;

    /// Same maze with a different exit cell.
    MazeGraph with_exit(Node exit) const;

    friend bool operator==(const MazeGraph& a, const MazeGraph& b);

private:
    int width_;
    int height_;
    Adjacency adjacency_;
    Node entrance_;
    Node exit_;
    std::uint64_t seed_;
};

/// Randomized depth-first search (recursive backtracker) over the grid, started
/// at the entrance. Entrance is node 0; exit defaults to the upper-right cell.
MazeGraph generate_perfect_maze(int width, int height, std::uint64_t seed);
MazeGraph generate_perfect_maze(int width, int height, std::uint64_t seed, Node exit);

NodeDegrees degrees(const MazeGraph& maze);

/// Flips A_ij and A_ji. Rejects i == j or cells that are not grid-adjacent.
MazeGraph toggle_link(const MazeGraph& maze, Node i, Node j);

/// Every grid-adjacent pair (i < j) in lexicographic order, linked or not.
std::vector<Edge> grid_adjacent_pairs(int width, int height);

int component_count(const MazeGraph& maze);
bool is_connected(const MazeGraph& maze);
/// Connected and exactly N - 1 links.
bool is_perfect(const MazeGraph& maze);
/// Number of independent cycles: E - N + components.
int cycle_rank(const MazeGraph& maze);

std::string serialize(const MazeGraph& maze);
/// Throws ParseError with a JSON-pointer style location.
MazeGraph deserialize(std::string_view text);

}  // namespace qmlkit::maze
