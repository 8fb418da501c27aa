#include "ms/dg.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace ms {

namespace {

struct SubEdge {
    int n0, n1;   // fine node ids, ordered along the edge
    int tri_r;    // triangle on the R side (left/below), -1 if absent
    int tri_l;    // triangle on the L side (right/above), -1 if absent
    double len;
};

// one coarse interface with a fixed orientation: n_E points from K_R
// into K_L; for boundary edges K_L is absent and n_E points outward
struct SkeletonEdge {
    int block_r = -1, block_l = -1;
    Eigen::Vector2d normal;
    std::vector<SubEdge> sub;
    double kbar = 0.0;
    bool boundary() const { return block_l < 0; }
};

double block_max_kappa(const GridHierarchy& g, const CoefficientField& kappa,
                       int b) {
    double m = 0.0;
    for (int c : g.block_fine_cells(b)) m = std::max(m, kappa.cell(c));
    return m;
}

std::vector<SkeletonEdge> skeleton(const GridHierarchy& g,
                                   const CoefficientField& kappa) {
    std::vector<SkeletonEdge> edges;
    int r = g.refine();
    auto kmax = [&](int b) { return block_max_kappa(g, kappa, b); };
    // vertical interfaces x = I*Hx; R = left block (n_E = +x), except at the
    // domain boundary where n_E is outward
    for (int I = 0; I <= g.nx(); ++I)
        for (int J = 0; J < g.ny(); ++J) {
            SkeletonEdge e;
            if (I == 0) {
                e.block_r = g.coarse_block(0, J);
                e.normal = {-1.0, 0.0};
            } else if (I == g.nx()) {
                e.block_r = g.coarse_block(g.nx() - 1, J);
                e.normal = {1.0, 0.0};
            } else {
                e.block_r = g.coarse_block(I - 1, J);
                e.block_l = g.coarse_block(I, J);
                e.normal = {1.0, 0.0};
            }
            e.kbar = e.boundary() ? kmax(e.block_r)
                                  : 0.5 * (kmax(e.block_r) + kmax(e.block_l));
            int i = I * r;
            for (int j = J * r; j < (J + 1) * r; ++j) {
                SubEdge s;
                s.n0 = g.fine_node(i, j);
                s.n1 = g.fine_node(i, j + 1);
                s.len = g.hy();
                // right face of the left cell is on the lower triangle; left
                // face of the right cell is on the upper one
                s.tri_r = i > 0 ? 2 * g.fine_cell(i - 1, j) : -1;
                s.tri_l = i < g.nxf() ? 2 * g.fine_cell(i, j) + 1 : -1;
                if (I == 0) std::swap(s.tri_r, s.tri_l); // single right side
                if (I == g.nx()) s.tri_l = -1;
                e.sub.push_back(s);
            }
            edges.push_back(std::move(e));
        }
    // horizontal interfaces y = J*Hy; R = bottom block (n_E = +y)
    for (int J = 0; J <= g.ny(); ++J)
        for (int I = 0; I < g.nx(); ++I) {
            SkeletonEdge e;
            if (J == 0) {
                e.block_r = g.coarse_block(I, 0);
                e.normal = {0.0, -1.0};
            } else if (J == g.ny()) {
                e.block_r = g.coarse_block(I, g.ny() - 1);
                e.normal = {0.0, 1.0};
            } else {
                e.block_r = g.coarse_block(I, J - 1);
                e.block_l = g.coarse_block(I, J);
                e.normal = {0.0, 1.0};
            }
            e.kbar = e.boundary() ? kmax(e.block_r)
                                  : 0.5 * (kmax(e.block_r) + kmax(e.block_l));
            int j = J * r;
            for (int i = I * r; i < (I + 1) * r; ++i) {
                SubEdge s;
                s.n0 = g.fine_node(i, j);
                s.n1 = g.fine_node(i + 1, j);
                s.len = g.hx();
                // top face of the lower cell is on the upper triangle; bottom
                // face of the upper cell is on the lower one
                s.tri_r = j > 0 ? 2 * g.fine_cell(i, j - 1) + 1 : -1;
                s.tri_l = j < g.nyf() ? 2 * g.fine_cell(i, j) : -1;
                if (J == 0) std::swap(s.tri_r, s.tri_l);
                if (J == g.ny()) s.tri_l = -1;
                e.sub.push_back(s);
            }
            edges.push_back(std::move(e));
        }
    return edges;
}

// trace values and normal flux of one local basis vector on one sub-edge
struct SideEval {
    double t0, t1; // traces at n0, n1
    double flux;   // kappa grad(phi) . n_E from this side's triangle
};

SideEval eval_side(const GridHierarchy& g, const CoefficientField& kappa,
                   const Region& region, const Vec& phi, const SubEdge& s,
                   int tri, Eigen::Vector2d n) {
    SideEval out;
    out.t0 = phi[region.local(s.n0)];
    out.t1 = phi[region.local(s.n1)];
    auto tn = g.tri_nodes(tri);
    std::array<double, 3> nodal;
    for (int k = 0; k < 3; ++k) nodal[k] = phi[region.local(tn[k])];
    out.flux = kappa.tri(tri) * tri_gradient(g, tri, nodal).dot(n);
    return out;
}

} // namespace

SpMat dg_boundary_mass(const GridHierarchy& g, const CoefficientField& kappa,
                       const Region& region) {
    // perimeter segments of the block, weighted by the inside-cell kappa
    std::vector<Eigen::Triplet<double>> trip;
    auto add_seg = [&](int n0, int n1, double len, double k) {
        int a = region.local(n0), b = region.local(n1);
        double w = k * len / 6.0;
        trip.emplace_back(a, a, 2 * w);
        trip.emplace_back(b, b, 2 * w);
        trip.emplace_back(a, b, w);
        trip.emplace_back(b, a, w);
    };
    // region is a block: recover its cell bounding box
    int i0 = g.nxf(), i1 = 0, j0 = g.nyf(), j1 = 0;
    for (int t : region.tris) {
        auto [i, j] = g.cell_coords(g.tri_cell(t));
        i0 = std::min(i0, i);
        i1 = std::max(i1, i + 1);
        j0 = std::min(j0, j);
        j1 = std::max(j1, j + 1);
    }
    for (int i = i0; i < i1; ++i) {
        add_seg(g.fine_node(i, j0), g.fine_node(i + 1, j0), g.hx(),
                kappa.cell(g.fine_cell(i, j0)));
        add_seg(g.fine_node(i, j1), g.fine_node(i + 1, j1), g.hx(),
                kappa.cell(g.fine_cell(i, j1 - 1)));
    }
    for (int j = j0; j < j1; ++j) {
        add_seg(g.fine_node(i0, j), g.fine_node(i0, j + 1), g.hy(),
                kappa.cell(g.fine_cell(i0, j)));
        add_seg(g.fine_node(i1, j), g.fine_node(i1, j + 1), g.hy(),
                kappa.cell(g.fine_cell(i1 - 1, j)));
    }
    SpMat S(region.num_nodes(), region.num_nodes());
    S.setFromTriplets(trip.begin(), trip.end());
    return S;
}

DgSnapshotSpace dg_snapshots(const GridHierarchy& g,
                             const CoefficientField& kappa, int block,
                             int layers) {
    DgSnapshotSpace snap;
    snap.block = block;
    snap.region = g.block_region(block);
    snap.solve_region =
        layers > 0 ? g.oversample(snap.region, layers) : snap.region;
    const Region& sr = snap.solve_region;

    DirichletSolver ds(g, kappa, sr);
    int nb = static_cast<int>(sr.boundary_nodes.size());
    snap.raw_count = nb;
    Mat raw(sr.num_nodes(), nb);
    for (int k = 0; k < nb; ++k) {
        Vec bc = Vec::Zero(nb);
        bc[k] = 1.0;
        raw.col(k) = ds.solve(bc);
    }

    // POD on the restrictions to K
    Mat restr(snap.region.num_nodes(), nb);
    for (int i = 0; i < snap.region.num_nodes(); ++i)
        restr.row(i) = raw.row(sr.local(snap.region.nodes[i]));
    Eigen::BDCSVD<Mat> svd(restr, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& sv = svd.singularValues();
    int keep = 0;
    while (keep < sv.size() && sv[keep] >= 1e-10 * sv[0]) ++keep;
    snap.truncated = nb - keep;
    snap.columns = raw * svd.matrixV().leftCols(keep);
    return snap;
}

DgFragment dg_spectral(const GridHierarchy& g, const CoefficientField& kappa,
                       const DgSnapshotSpace& snap, int l) {
    const Region& sr = snap.solve_region;
    SpMat Aplus = assemble_stiffness(g, kappa, sr);
    Mat A = snap.columns.transpose() * Aplus * snap.columns;

    Mat restr(snap.region.num_nodes(), snap.count());
    for (int i = 0; i < snap.region.num_nodes(); ++i)
        restr.row(i) = snap.columns.row(sr.local(snap.region.nodes[i]));
    SpMat Sb = dg_boundary_mass(g, kappa, snap.region);
    Mat S = restr.transpose() * Sb * restr;

    auto eig = generalized_eig(A, S, std::min(l, snap.count()));
    DgFragment frag;
    frag.block = snap.block;
    frag.eigenvalues = eig.values;
    frag.vectors.reserve(eig.vectors.cols());
    for (int k = 0; k < eig.vectors.cols(); ++k)
        frag.vectors.push_back(restr * eig.vectors.col(k));
    return frag;
}

int DgOfflineSpace::dof() const {
    int n = 0;
    for (const auto& b : basis) n += static_cast<int>(b.size());
    return n;
}

std::pair<int, int> DgOfflineSpace::locate(int column) const {
    for (int b = 0; b < static_cast<int>(basis.size()); ++b) {
        if (column < static_cast<int>(basis[b].size()))
            return {b, column};
        column -= static_cast<int>(basis[b].size());
    }
    throw std::out_of_range("DgOfflineSpace::locate");
}

DgOfflineSpace build_dg_offline(const GridHierarchy& g,
                                const CoefficientField& kappa, int l,
                                int layers, double gamma) {
    DgOfflineSpace off;
    off.l = l;
    int maxl = 0;
    for (int b = 0; b < g.num_coarse_blocks(); ++b) {
        DgSnapshotSpace snap = dg_snapshots(g, kappa, b, layers);
        int want = l > 0 ? l : snap.count();
        DgFragment frag = dg_spectral(g, kappa, snap, want);
        off.regions.push_back(snap.region);
        off.eigenvalues.push_back(frag.eigenvalues);
        off.basis.push_back(std::move(frag.vectors));
        maxl = std::max(maxl, static_cast<int>(off.basis.back().size()));
    }
    off.gamma = gamma > 0 ? gamma : 4.0 * maxl;
    return off;
}

DgSystem ipdg_assemble(const GridHierarchy& g, const CoefficientField& kappa,
                       const DgOfflineSpace& off,
                       const std::function<double(Eigen::Vector2d)>& f,
                       const std::function<double(Eigen::Vector2d)>& bc) {
    int nblocks = static_cast<int>(off.basis.size());
    std::vector<int> offset(nblocks + 1, 0);
    for (int b = 0; b < nblocks; ++b)
        offset[b + 1] = offset[b] + static_cast<int>(off.basis[b].size());
    int n = offset[nblocks];

    DgSystem sys;
    sys.A = Mat::Zero(n, n);
    sys.b = Vec::Zero(n);

    // volume terms
    for (int b = 0; b < nblocks; ++b) {
        const Region& reg = off.regions[b];
        SpMat Ak = assemble_stiffness(g, kappa, reg);
        SpMat Mk = assemble_mass(g, reg);
        Vec fk(reg.num_nodes());
        for (int i = 0; i < reg.num_nodes(); ++i)
            fk[i] = f(g.node_pos(reg.nodes[i]));
        Vec load = Mk * fk;
        int nb = static_cast<int>(off.basis[b].size());
        for (int a = 0; a < nb; ++a) {
            sys.b[offset[b] + a] += off.basis[b][a].dot(load);
            Vec Av = Ak * off.basis[b][a];
            for (int c = 0; c < nb; ++c)
                sys.A(offset[b] + a, offset[b] + c) +=
                    Av.dot(off.basis[b][c]);
        }
    }

    // skeleton terms
    struct Entry {
        int dof;
        double j0, j1; // signed trace (jump contribution)
        double wflux;  // weighted normal flux ({.} contribution)
    };
    for (const SkeletonEdge& e : skeleton(g, kappa)) {
        double w = e.boundary() ? 1.0 : 0.5;
        for (const SubEdge& s : e.sub) {
            std::vector<Entry> side;
            auto push_block = [&](int b, double sign, int tri) {
                const Region& reg = off.regions[b];
                for (size_t k = 0; k < off.basis[b].size(); ++k) {
                    SideEval ev = eval_side(g, kappa, reg, off.basis[b][k], s,
                                            tri, e.normal);
                    side.push_back({offset[b] + static_cast<int>(k),
                                    sign * ev.t0, sign * ev.t1, w * ev.flux});
                }
            };
            push_block(e.block_r, 1.0, s.tri_r);
            if (!e.boundary()) push_block(e.block_l, -1.0, s.tri_l);
            double pen = off.gamma / s.len * e.kbar;
            for (const Entry& a : side)
                for (const Entry& c : side) {
                    double v = -(a.wflux * s.len * (c.j0 + c.j1) / 2.0 +
                                 c.wflux * s.len * (a.j0 + a.j1) / 2.0);
                    v += pen * s.len / 6.0 *
                         (2 * a.j0 * c.j0 + a.j0 * c.j1 + a.j1 * c.j0 +
                          2 * a.j1 * c.j1);
                    sys.A(a.dof, c.dof) += v;
                }
            if (e.boundary()) {
                double g0 = bc(g.node_pos(s.n0)), g1 = bc(g.node_pos(s.n1));
                for (const Entry& a : side) {
                    double v = -a.wflux * s.len * (g0 + g1) / 2.0;
                    v += pen * s.len / 6.0 *
                         (2 * a.j0 * g0 + a.j0 * g1 + a.j1 * g0 +
                          2 * a.j1 * g1);
                    sys.b[a.dof] += v;
                }
            }
        }
    }
    return sys;
}

DgSolution ipdg_solve(const GridHierarchy& g, const CoefficientField& kappa,
                      const DgOfflineSpace& off, const FineProblem& fine,
                      const std::function<double(Eigen::Vector2d)>& f,
                      const std::function<double(Eigen::Vector2d)>& bc) {
    DgSystem sys = ipdg_assemble(g, kappa, off, f, bc);
    Eigen::LLT<Mat> llt(sys.A);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Mat> es(sys.A);
        throw std::runtime_error(
            "ipdg_solve: coarse system not positive definite (smallest "
            "eigenvalue " +
            std::to_string(es.eigenvalues().minCoeff()) +
            "); penalty parameter too small");
    }

    DgSolution sol;
    sol.coef = llt.solve(sys.b);
    int nblocks = static_cast<int>(off.basis.size());
    int at = 0;
    for (int b = 0; b < nblocks; ++b) {
        Vec u = Vec::Zero(off.regions[b].num_nodes());
        for (const Vec& phi : off.basis[b]) u += sol.coef[at++] * phi;
        sol.local.push_back(std::move(u));
    }

    // errors against the conforming fine solution
    Vec ref = fine.solve(f, bc);
    double broken = 0.0, broken_ref = 0.0, l2 = 0.0, l2_ref = 0.0;
    std::vector<Vec> diff(nblocks);
    for (int b = 0; b < nblocks; ++b) {
        const Region& reg = off.regions[b];
        Vec rloc(reg.num_nodes());
        for (int i = 0; i < reg.num_nodes(); ++i)
            rloc[i] = ref[reg.nodes[i]];
        diff[b] = sol.local[b] - rloc;
        SpMat Ak = assemble_stiffness(g, kappa, reg);
        SpMat Mk = assemble_mass(g, reg);
        broken += diff[b].dot(Ak * diff[b]);
        broken_ref += rloc.dot(Ak * rloc);
        l2 += diff[b].dot(Mk * diff[b]);
        l2_ref += rloc.dot(Mk * rloc);
    }
    double jump2 = 0.0;
    for (const SkeletonEdge& e : skeleton(g, kappa)) {
        for (const SubEdge& s : e.sub) {
            auto val = [&](int b, int node) {
                return diff[b][off.regions[b].local(node)];
            };
            double j0, j1;
            if (e.boundary()) {
                j0 = val(e.block_r, s.n0);
                j1 = val(e.block_r, s.n1);
            } else {
                j0 = val(e.block_r, s.n0) - val(e.block_l, s.n0);
                j1 = val(e.block_r, s.n1) - val(e.block_l, s.n1);
            }
            jump2 += off.gamma / s.len * e.kbar * s.len / 6.0 *
                     (2 * j0 * j0 + 2 * j1 * j1 + 2 * j0 * j1);
        }
    }
    sol.jump = std::sqrt(jump2);
    sol.energy_pct =
        100.0 * std::sqrt((broken + jump2) / std::max(broken_ref, 1e-300));
    sol.l2_pct = 100.0 * std::sqrt(l2 / std::max(l2_ref, 1e-300));
    return sol;
}

} // namespace ms
