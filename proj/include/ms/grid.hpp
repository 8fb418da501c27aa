#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace ms {

class GridHierarchy;

// Subdomain of the fine triangulation with its own contiguous node numbering.
// Boundary nodes are the nodes lying on the topological boundary of the
// triangle set (including the part on the global domain boundary).
struct Region {
    const GridHierarchy* grid = nullptr;
    std::vector<int> tris;           // sorted fine triangle ids
    std::vector<int> nodes;          // sorted global fine node ids
    std::vector<int> boundary_nodes; // subset of nodes, sorted
    std::vector<char> is_boundary;   // per local node

    int local(int global_node) const {
        auto it = global_to_local_.find(global_node);
        if (it == global_to_local_.end()) return -1;
        return it->second;
    }
    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_interior() const {
        return num_nodes() - static_cast<int>(boundary_nodes.size());
    }

    static Region from_tris(const GridHierarchy& g, std::vector<int> tris);

  private:
    std::unordered_map<int, int> global_to_local_;
};

// Two-level structured mesh on the unit square: nx x ny coarse blocks, each
// refined into refine x refine fine cells, every cell split into two
// triangles along the (0,0)-(1,1) diagonal. Node numbering is row-major.
// Immutable after construction.
class GridHierarchy {
  public:
    GridHierarchy(int nx, int ny, int refine);

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int refine() const { return refine_; }
    int nxf() const { return nxf_; }
    int nyf() const { return nyf_; }
    double hx() const { return 1.0 / nxf_; }
    double hy() const { return 1.0 / nyf_; }
    double Hx() const { return 1.0 / nx_; }
    double Hy() const { return 1.0 / ny_; }

    // ---- fine mesh ----
    int num_fine_nodes() const { return (nxf_ + 1) * (nyf_ + 1); }
    int num_fine_cells() const { return nxf_ * nyf_; }
    int num_fine_tris() const { return 2 * nxf_ * nyf_; }

    int fine_node(int i, int j) const { return j * (nxf_ + 1) + i; }
    Eigen::Vector2d node_pos(int n) const {
        return {hx() * (n % (nxf_ + 1)), hy() * (n / (nxf_ + 1))};
    }
    int fine_cell(int i, int j) const { return j * nxf_ + i; }
    std::pair<int, int> cell_coords(int c) const { return {c % nxf_, c / nxf_}; }

    // Triangles 2c (lower, below the diagonal) and 2c+1 (upper) of cell c.
    std::array<int, 3> tri_nodes(int t) const;
    int tri_cell(int t) const { return t / 2; }
    double tri_area() const { return 0.5 * hx() * hy(); }

    bool node_on_domain_boundary(int n) const {
        int i = n % (nxf_ + 1), j = n / (nxf_ + 1);
        return i == 0 || i == nxf_ || j == 0 || j == nyf_;
    }
    std::vector<int> domain_boundary_nodes() const;

    // ---- coarse mesh ----
    int num_coarse_nodes() const { return (nx_ + 1) * (ny_ + 1); }
    int coarse_node(int I, int J) const { return J * (nx_ + 1) + I; }
    std::pair<int, int> coarse_node_coords(int cn) const {
        return {cn % (nx_ + 1), cn / (nx_ + 1)};
    }
    Eigen::Vector2d coarse_node_pos(int cn) const {
        auto [I, J] = coarse_node_coords(cn);
        return {Hx() * I, Hy() * J};
    }
    bool coarse_node_on_boundary(int cn) const {
        auto [I, J] = coarse_node_coords(cn);
        return I == 0 || I == nx_ || J == 0 || J == ny_;
    }

    int num_coarse_blocks() const { return nx_ * ny_; }
    int coarse_block(int I, int J) const { return J * nx_ + I; }
    std::pair<int, int> block_coords(int b) const { return {b % nx_, b / nx_}; }
    int block_of_fine_cell(int c) const {
        auto [i, j] = cell_coords(c);
        return coarse_block(i / refine_, j / refine_);
    }

    // Coarse triangles: 2b (lower) and 2b+1 (upper) of block b.
    int num_coarse_tris() const { return 2 * nx_ * ny_; }
    int coarse_tri_of_fine_tri(int t) const;
    std::array<int, 3> coarse_tri_nodes(int ct) const;
    int coarse_tri_block(int ct) const { return ct / 2; }

    // Edges of the coarse triangulation (block interfaces and diagonals).
    struct CoarseEdge {
        int a, b;        // coarse node ids
        int left, right; // adjacent coarse triangles, right = -1 on boundary
    };
    const std::vector<CoarseEdge>& coarse_edges() const { return coarse_edges_; }

    // ---- regions ----
    std::vector<int> cell_tris(const std::vector<int>& cells) const;
    std::vector<int> block_fine_cells(int b) const;
    Region block_region(int b) const;
    Region coarse_tri_region(int ct) const;
    Region full_region() const;

    // Blocks containing coarse node cn (1, 2, or 4 of them).
    std::vector<int> node_blocks(int cn) const;
    // Coarse neighborhood w_i: union of the blocks containing node cn.
    Region neighborhood(int cn) const;
    bool neighborhood_touches_boundary(int cn) const;

    // Region grown by `layers` rings of fine cells, clipped to the domain.
    Region oversample(const Region& r, int layers) const;
    // Default oversampling width: half a coarse block, rounded down.
    int default_layers() const { return refine_ / 2; }

    // ---- partition of unity ----
    // P1 hat of coarse node cn on the coarse triangulation, at point x.
    double hat(int cn, const Eigen::Vector2d& x) const;
    // Hat values at every fine node (dense vector, small support).
    Eigen::VectorXd hat_values(int cn) const;
    // Fine triangles where hat(cn) is nonzero: the coarse triangles
    // containing the node.
    std::vector<int> hat_support_tris(int cn) const;
    std::vector<int> coarse_tris_of_node(int cn) const;

  private:
    int nx_, ny_, refine_;
    int nxf_, nyf_;
    std::vector<CoarseEdge> coarse_edges_;
};

} // namespace ms
