#include "ms/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace ms {

Region Region::from_tris(const GridHierarchy& g, std::vector<int> tris) {
    if (tris.empty()) throw std::invalid_argument("Region: empty triangle set");
    std::sort(tris.begin(), tris.end());
    tris.erase(std::unique(tris.begin(), tris.end()), tris.end());

    Region r;
    r.grid = &g;
    r.tris = std::move(tris);

    std::set<int> node_set;
    // edge -> count; edges seen once bound the region
    std::map<std::pair<int, int>, int> edge_count;
    for (int t : r.tris) {
        auto nd = g.tri_nodes(t);
        for (int k = 0; k < 3; ++k) {
            node_set.insert(nd[k]);
            int a = nd[k], b = nd[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            ++edge_count[{a, b}];
        }
    }
    r.nodes.assign(node_set.begin(), node_set.end());
    for (int i = 0; i < static_cast<int>(r.nodes.size()); ++i)
        r.global_to_local_[r.nodes[i]] = i;

    std::set<int> bnd;
    for (auto& [e, c] : edge_count)
        if (c == 1) {
            bnd.insert(e.first);
            bnd.insert(e.second);
        }
    r.boundary_nodes.assign(bnd.begin(), bnd.end());
    r.is_boundary.assign(r.nodes.size(), 0);
    for (int n : r.boundary_nodes) r.is_boundary[r.global_to_local_[n]] = 1;
    return r;
}

GridHierarchy::GridHierarchy(int nx, int ny, int refine)
    : nx_(nx), ny_(ny), refine_(refine) {
    if (nx < 1 || ny < 1 || refine < 1)
        throw std::invalid_argument("GridHierarchy: dimensions must be >= 1");
    long long fn = (static_cast<long long>(nx) * refine + 1) *
                   (static_cast<long long>(ny) * refine + 1);
    if (fn > 100'000'000)
        throw std::invalid_argument("GridHierarchy: grid too large");
    nxf_ = nx * refine;
    nyf_ = ny * refine;

    // coarse triangulation edges
    std::map<std::pair<int, int>, std::vector<int>> adj;
    for (int ct = 0; ct < num_coarse_tris(); ++ct) {
        auto nd = coarse_tri_nodes(ct);
        for (int k = 0; k < 3; ++k) {
            int a = nd[k], b = nd[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            adj[{a, b}].push_back(ct);
        }
    }
    for (auto& [e, ts] : adj) {
        CoarseEdge ce;
        ce.a = e.first;
        ce.b = e.second;
        ce.left = ts[0];
        ce.right = ts.size() > 1 ? ts[1] : -1;
        coarse_edges_.push_back(ce);
    }
}

std::array<int, 3> GridHierarchy::tri_nodes(int t) const {
    int c = t / 2;
    auto [i, j] = cell_coords(c);
    int v00 = fine_node(i, j), v10 = fine_node(i + 1, j);
    int v01 = fine_node(i, j + 1), v11 = fine_node(i + 1, j + 1);
    if (t % 2 == 0) return {v00, v10, v11};
    return {v00, v11, v01};
}

std::vector<int> GridHierarchy::domain_boundary_nodes() const {
    std::vector<int> out;
    for (int n = 0; n < num_fine_nodes(); ++n)
        if (node_on_domain_boundary(n)) out.push_back(n);
    return out;
}

int GridHierarchy::coarse_tri_of_fine_tri(int t) const {
    int c = t / 2;
    auto [i, j] = cell_coords(c);
    int b = coarse_block(i / refine_, j / refine_);
    // local coords within the block; diagonal of the block separates
    // lower (li > lj band) from upper. Fine diagonal cells straddle: the
    // lower fine triangle of a diagonal cell is in the lower coarse triangle.
    int li = i % refine_, lj = j % refine_;
    if (li > lj) return 2 * b;
    if (li < lj) return 2 * b + 1;
    return 2 * b + (t % 2);
}

std::array<int, 3> GridHierarchy::coarse_tri_nodes(int ct) const {
    int b = ct / 2;
    auto [I, J] = block_coords(b);
    int v00 = coarse_node(I, J), v10 = coarse_node(I + 1, J);
    int v01 = coarse_node(I, J + 1), v11 = coarse_node(I + 1, J + 1);
    if (ct % 2 == 0) return {v00, v10, v11};
    return {v00, v11, v01};
}

std::vector<int> GridHierarchy::cell_tris(const std::vector<int>& cells) const {
    std::vector<int> tris;
    tris.reserve(cells.size() * 2);
    for (int c : cells) {
        tris.push_back(2 * c);
        tris.push_back(2 * c + 1);
    }
    return tris;
}

std::vector<int> GridHierarchy::block_fine_cells(int b) const {
    auto [I, J] = block_coords(b);
    std::vector<int> cells;
    cells.reserve(refine_ * refine_);
    for (int j = J * refine_; j < (J + 1) * refine_; ++j)
        for (int i = I * refine_; i < (I + 1) * refine_; ++i)
            cells.push_back(fine_cell(i, j));
    return cells;
}

Region GridHierarchy::block_region(int b) const {
    return Region::from_tris(*this, cell_tris(block_fine_cells(b)));
}

Region GridHierarchy::coarse_tri_region(int ct) const {
    std::vector<int> tris;
    int b = ct / 2;
    for (int c : block_fine_cells(b)) {
        for (int t : {2 * c, 2 * c + 1})
            if (coarse_tri_of_fine_tri(t) == ct) tris.push_back(t);
    }
    return Region::from_tris(*this, tris);
}

Region GridHierarchy::full_region() const {
    std::vector<int> tris(num_fine_tris());
    for (int t = 0; t < num_fine_tris(); ++t) tris[t] = t;
    return Region::from_tris(*this, std::move(tris));
}

std::vector<int> GridHierarchy::node_blocks(int cn) const {
    auto [I, J] = coarse_node_coords(cn);
    std::vector<int> blocks;
    for (int dj : {-1, 0})
        for (int di : {-1, 0}) {
            int bi = I + di, bj = J + dj;
            if (bi >= 0 && bi < nx_ && bj >= 0 && bj < ny_)
                blocks.push_back(coarse_block(bi, bj));
        }
    return blocks;
}

Region GridHierarchy::neighborhood(int cn) const {
    std::vector<int> cells;
    for (int b : node_blocks(cn)) {
        auto bc = block_fine_cells(b);
        cells.insert(cells.end(), bc.begin(), bc.end());
    }
    return Region::from_tris(*this, cell_tris(cells));
}

bool GridHierarchy::neighborhood_touches_boundary(int cn) const {
    auto [I, J] = coarse_node_coords(cn);
    return I <= 1 || I >= nx_ - 1 || J <= 1 || J >= ny_ - 1;
}

Region GridHierarchy::oversample(const Region& r, int layers) const {
    if (layers < 0) throw std::invalid_argument("oversample: layers < 0");
    if (layers == 0) return r;
    std::vector<char> in(num_fine_cells(), 0);
    for (int t : r.tris) in[tri_cell(t)] = 1;
    for (int l = 0; l < layers; ++l) {
        std::vector<char> grown = in;
        for (int c = 0; c < num_fine_cells(); ++c) {
            if (!in[c]) continue;
            auto [i, j] = cell_coords(c);
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    int ii = i + di, jj = j + dj;
                    if (ii >= 0 && ii < nxf_ && jj >= 0 && jj < nyf_)
                        grown[fine_cell(ii, jj)] = 1;
                }
        }
        in.swap(grown);
    }
    std::vector<int> tris = r.tris;
    for (int c = 0; c < num_fine_cells(); ++c)
        if (in[c]) {
            tris.push_back(2 * c);
            tris.push_back(2 * c + 1);
        }
    return Region::from_tris(*this, std::move(tris));
}

double GridHierarchy::hat(int cn, const Eigen::Vector2d& x) const {
    auto [I, J] = coarse_node_coords(cn);
    // block-local coordinates
    double gx = x[0] / Hx(), gy = x[1] / Hy();
    int bi = std::min(static_cast<int>(std::floor(gx)), nx_ - 1);
    int bj = std::min(static_cast<int>(std::floor(gy)), ny_ - 1);
    bi = std::max(bi, 0);
    bj = std::max(bj, 0);
    double xi = gx - bi, eta = gy - bj;
    // barycentric weights of the 4 block corners on the split square
    double w00, w10, w01, w11;
    if (eta <= xi) { // lower triangle (v00, v10, v11)
        w00 = 1.0 - xi;
        w10 = xi - eta;
        w11 = eta;
        w01 = 0.0;
    } else { // upper triangle (v00, v11, v01)
        w00 = 1.0 - eta;
        w11 = xi;
        w01 = eta - xi;
        w10 = 0.0;
    }
    if (I == bi && J == bj) return w00;
    if (I == bi + 1 && J == bj) return w10;
    if (I == bi && J == bj + 1) return w01;
    if (I == bi + 1 && J == bj + 1) return w11;
    return 0.0;
}

Eigen::VectorXd GridHierarchy::hat_values(int cn) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(num_fine_nodes());
    for (int n = 0; n < num_fine_nodes(); ++n) v[n] = hat(cn, node_pos(n));
    return v;
}

std::vector<int> GridHierarchy::coarse_tris_of_node(int cn) const {
    std::vector<int> out;
    for (int ct = 0; ct < num_coarse_tris(); ++ct) {
        auto nd = coarse_tri_nodes(ct);
        if (nd[0] == cn || nd[1] == cn || nd[2] == cn) out.push_back(ct);
    }
    return out;
}

std::vector<int> GridHierarchy::hat_support_tris(int cn) const {
    std::vector<int> tris;
    for (int ct : coarse_tris_of_node(cn)) {
        auto r = coarse_tri_region(ct);
        tris.insert(tris.end(), r.tris.begin(), r.tris.end());
    }
    std::sort(tris.begin(), tris.end());
    return tris;
}

} // namespace ms
