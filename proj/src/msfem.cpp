#include "ms/msfem.hpp"

#include <Eigen/Dense>
#include <fstream>

namespace ms {

namespace {

int coarse_vertex_fine_node(const GridHierarchy& g, int cn) {
    auto [I, J] = g.coarse_node_coords(cn);
    return g.fine_node(I * g.refine(), J * g.refine());
}

// Barycentric coordinates of the coarse triangle, extended affinely.
std::array<std::function<double(Eigen::Vector2d)>, 3>
coarse_barycentrics(const GridHierarchy& g, int ct) {
    auto nd = g.coarse_tri_nodes(ct);
    Eigen::Vector2d p0 = g.coarse_node_pos(nd[0]), p1 = g.coarse_node_pos(nd[1]),
                    p2 = g.coarse_node_pos(nd[2]);
    double det = (p1 - p0).x() * (p2 - p0).y() - (p2 - p0).x() * (p1 - p0).y();
    std::array<std::function<double(Eigen::Vector2d)>, 3> lam;
    lam[0] = [=](Eigen::Vector2d p) {
        return ((p1 - p).x() * (p2 - p).y() - (p2 - p).x() * (p1 - p).y()) / det;
    };
    lam[1] = [=](Eigen::Vector2d p) {
        return ((p2 - p).x() * (p0 - p).y() - (p0 - p).x() * (p2 - p).y()) / det;
    };
    lam[2] = [=](Eigen::Vector2d p) {
        return ((p0 - p).x() * (p1 - p).y() - (p1 - p).x() * (p0 - p).y()) / det;
    };
    return lam;
}

// The three kappa-harmonic solves on K+ with affine boundary data, returned
// as local vectors on the K+ region.
struct OversampleSolves {
    Region region;
    std::array<Vec, 3> psi;
    Mat combination; // row b: coefficients of phi_b
};

OversampleSolves oversample_solves(const GridHierarchy& g,
                                   const CoefficientField& kappa, int ct,
                                   int layers) {
    OversampleSolves out;
    Region K = g.coarse_tri_region(ct);
    out.region = g.oversample(K, layers);
    DirichletSolver ds(g, kappa, out.region);
    auto lam = coarse_barycentrics(g, ct);
    for (int a = 0; a < 3; ++a) {
        Vec bc(out.region.boundary_nodes.size());
        for (size_t i = 0; i < out.region.boundary_nodes.size(); ++i)
            bc[i] = lam[a](g.node_pos(out.region.boundary_nodes[i]));
        out.psi[a] = ds.solve(bc);
    }
    // Psi(a,c) = psi_a at vertex x_c; phi = combination * psi with
    // combination * Psi = I gives phi_b(x_c) = delta_bc.
    auto nd = g.coarse_tri_nodes(ct);
    Mat Psi(3, 3);
    for (int a = 0; a < 3; ++a)
        for (int c = 0; c < 3; ++c)
            Psi(a, c) =
                out.psi[a][out.region.local(coarse_vertex_fine_node(g, nd[c]))];
    out.combination = Psi.inverse();
    return out;
}

} // namespace

Mat oversample_combination(const GridHierarchy& g, const CoefficientField& kappa,
                           int coarse_tri, int layers) {
    return oversample_solves(g, kappa, coarse_tri, layers).combination;
}

MsBasisSet ms_basis(const GridHierarchy& g, const CoefficientField& kappa) {
    MsBasisSet set;
    set.variant = MsBasisSet::Variant::LinearBc;
    set.values.assign(g.num_coarse_nodes(), Vec::Zero(g.num_fine_nodes()));
    for (int ct = 0; ct < g.num_coarse_tris(); ++ct) {
        Region K = g.coarse_tri_region(ct);
        DirichletSolver ds(g, kappa, K);
        for (int cn : g.coarse_tri_nodes(ct)) {
            Vec hat = g.hat_values(cn);
            Vec bc(K.boundary_nodes.size());
            for (size_t i = 0; i < K.boundary_nodes.size(); ++i)
                bc[i] = hat[K.boundary_nodes[i]];
            Vec u = ds.solve(bc);
            for (int i = 0; i < K.num_nodes(); ++i)
                set.values[cn][K.nodes[i]] = u[i];
        }
    }
    return set;
}

MsBasisSet ms_basis_oversampled(const GridHierarchy& g,
                                const CoefficientField& kappa, int layers) {
    MsBasisSet set;
    set.variant = MsBasisSet::Variant::Oversampled;
    set.layers = layers;
    set.values.assign(g.num_coarse_nodes(), Vec::Zero(g.num_fine_nodes()));
    // interface nodes receive one contribution per adjacent coarse element;
    // averaging restores conformity
    std::vector<Vec> weight(g.num_coarse_nodes(),
                            Vec::Zero(g.num_fine_nodes()));
    for (int ct = 0; ct < g.num_coarse_tris(); ++ct) {
        auto os = oversample_solves(g, kappa, ct, layers);
        Region K = g.coarse_tri_region(ct);
        auto nd = g.coarse_tri_nodes(ct);
        for (int b = 0; b < 3; ++b) {
            for (int n : K.nodes) {
                int ln = os.region.local(n);
                double v = 0.0;
                for (int a = 0; a < 3; ++a)
                    v += os.combination(b, a) * os.psi[a][ln];
                set.values[nd[b]][n] += v;
                weight[nd[b]][n] += 1.0;
            }
        }
    }
    for (int cn = 0; cn < g.num_coarse_nodes(); ++cn)
        for (int n = 0; n < g.num_fine_nodes(); ++n)
            if (weight[cn][n] > 0) set.values[cn][n] /= weight[cn][n];
    return set;
}

SpMat MsBasisSet::columns(const GridHierarchy& g) const {
    std::vector<Eigen::Triplet<double>> trip;
    for (int cn = 0; cn < g.num_coarse_nodes(); ++cn)
        for (int n = 0; n < g.num_fine_nodes(); ++n)
            if (values[cn][n] != 0.0) trip.emplace_back(n, cn, values[cn][n]);
    SpMat R(g.num_fine_nodes(), g.num_coarse_nodes());
    R.setFromTriplets(trip.begin(), trip.end());
    return R;
}

SpMat msfem_coarse_stiffness(const GridHierarchy& g, const MsBasisSet& basis,
                             const FineProblem& fine) {
    SpMat R = basis.columns(g);
    return SpMat(R.transpose() * fine.stiffness() * R).pruned(1e-300);
}

MsfemSolution msfem_solve(const GridHierarchy& g, const MsBasisSet& basis,
                          const FineProblem& fine,
                          const std::function<double(Eigen::Vector2d)>& f,
                          const std::function<double(Eigen::Vector2d)>& bc) {
    SpMat R = basis.columns(g);
    SpMat A_H = SpMat(R.transpose() * fine.stiffness() * R);
    Vec b = R.transpose() * fine.load_vector(fine.interpolate(f));

    Vec u = Vec::Zero(g.num_coarse_nodes());
    std::vector<int> interior;
    for (int cn = 0; cn < g.num_coarse_nodes(); ++cn) {
        if (g.coarse_node_on_boundary(cn))
            u[cn] = bc(g.coarse_node_pos(cn));
        else
            interior.push_back(cn);
    }
    b -= A_H * u;
    Mat A_ii(interior.size(), interior.size());
    Vec b_i(interior.size());
    for (size_t i = 0; i < interior.size(); ++i) {
        b_i[i] = b[interior[i]];
        for (size_t j = 0; j < interior.size(); ++j)
            A_ii(i, j) = A_H.coeff(interior[i], interior[j]);
    }
    Vec u_i = A_ii.ldlt().solve(b_i);
    for (size_t i = 0; i < interior.size(); ++i) u[interior[i]] = u_i[i];

    MsfemSolution out;
    out.coarse = u;
    out.fine = R * u;
    out.errors = relative_errors(fine, out.fine, fine.solve(f, bc));
    return out;
}

void save_basis(const MsBasisSet& basis, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_basis: cannot open " + path);
    std::uint64_t n_basis = basis.values.size();
    std::uint64_t n_fine = basis.values.empty() ? 0 : basis.values[0].size();
    os.write(reinterpret_cast<const char*>(&n_basis), sizeof(n_basis));
    os.write(reinterpret_cast<const char*>(&n_fine), sizeof(n_fine));
    for (const Vec& v : basis.values)
        os.write(reinterpret_cast<const char*>(v.data()),
                 static_cast<std::streamsize>(sizeof(double) * v.size()));
}

} // namespace ms
