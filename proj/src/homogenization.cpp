#include "ms/homogenization.hpp"

#include <Eigen/Dense>
#include <fstream>

namespace ms {

namespace {

// Flux average of the cell-problem solutions over the target block.
Eigen::Matrix2d flux_average(const GridHierarchy& g,
                             const CoefficientField& kappa,
                             const Region& solve_region,
                             const std::vector<int>& target_tris,
                             const std::array<Vec, 2>& cell_solutions) {
    Eigen::Matrix2d K = Eigen::Matrix2d::Zero();
    double volume = 0.0;
    for (int t : target_tris) {
        auto nd = g.tri_nodes(t);
        auto geo = tri_geometry(g, t);
        volume += geo.area;
        for (int l = 0; l < 2; ++l) {
            Eigen::Vector2d grad = Eigen::Vector2d::Zero();
            for (int a = 0; a < 3; ++a)
                grad += cell_solutions[l][solve_region.local(nd[a])] *
                        geo.grad[a];
            K.col(l) += kappa.tri(t) * geo.area * grad;
        }
    }
    return K / volume;
}

std::array<Vec, 2> solve_cell_problems(const GridHierarchy& g,
                                       const CoefficientField& kappa,
                                       const Region& region) {
    DirichletSolver ds(g, kappa, region);
    std::array<Vec, 2> sol;
    for (int l = 0; l < 2; ++l) {
        Vec bc(region.boundary_nodes.size());
        for (size_t i = 0; i < region.boundary_nodes.size(); ++i)
            bc[i] = g.node_pos(region.boundary_nodes[i])[l];
        sol[l] = ds.solve(bc);
    }
    return sol;
}

} // namespace

Eigen::Matrix2d homogenize_block(const GridHierarchy& g,
                                 const CoefficientField& kappa, int block) {
    Region K = g.block_region(block);
    auto sol = solve_cell_problems(g, kappa, K);
    return flux_average(g, kappa, K, K.tris, sol);
}

Eigen::Matrix2d homogenize_block_oversampled(const GridHierarchy& g,
                                             const CoefficientField& kappa,
                                             int block, int layers) {
    Region K = g.block_region(block);
    Region Kp = g.oversample(K, layers);
    auto sol = solve_cell_problems(g, kappa, Kp);
    return flux_average(g, kappa, Kp, K.tris, sol);
}

UpscaledTensorField homogenize_all(const GridHierarchy& g,
                                   const CoefficientField& kappa, int layers) {
    UpscaledTensorField out;
    out.variant = layers > 0 ? UpscaledTensorField::Variant::Oversampled
                             : UpscaledTensorField::Variant::Plain;
    out.tensors.resize(g.num_coarse_blocks());
    for (int b = 0; b < g.num_coarse_blocks(); ++b)
        out.tensors[b] = layers > 0
                             ? homogenize_block_oversampled(g, kappa, b, layers)
                             : homogenize_block(g, kappa, b);
    return out;
}

void UpscaledTensorField::save_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_csv: cannot open " + path);
    os << "block,k11,k12,k21,k22\n";
    os.precision(17);
    for (size_t b = 0; b < tensors.size(); ++b)
        os << b << "," << tensors[b](0, 0) << "," << tensors[b](0, 1) << ","
           << tensors[b](1, 0) << "," << tensors[b](1, 1) << "\n";
}

namespace {

struct CoarseTriGeometry {
    std::array<Eigen::Vector2d, 3> grad;
    double area;
};

CoarseTriGeometry coarse_tri_geometry(const GridHierarchy& g, int ct) {
    auto nd = g.coarse_tri_nodes(ct);
    Eigen::Vector2d p0 = g.coarse_node_pos(nd[0]), p1 = g.coarse_node_pos(nd[1]),
                    p2 = g.coarse_node_pos(nd[2]);
    double det = (p1 - p0).x() * (p2 - p0).y() - (p2 - p0).x() * (p1 - p0).y();
    CoarseTriGeometry geo;
    geo.area = 0.5 * std::abs(det);
    geo.grad[0] = Eigen::Vector2d(p1.y() - p2.y(), p2.x() - p1.x()) / det;
    geo.grad[1] = Eigen::Vector2d(p2.y() - p0.y(), p0.x() - p2.x()) / det;
    geo.grad[2] = Eigen::Vector2d(p0.y() - p1.y(), p1.x() - p0.x()) / det;
    return geo;
}

} // namespace

SpMat coarse_tensor_stiffness(const GridHierarchy& g,
                              const UpscaledTensorField& tensors) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int ct = 0; ct < g.num_coarse_tris(); ++ct) {
        Eigen::Matrix2d K = tensors.tensors[g.coarse_tri_block(ct)];
        K = 0.5 * (K + K.transpose()); // flux averaging can be slightly asymmetric
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(K);
        if (es.eigenvalues().minCoeff() <= 0)
            throw std::runtime_error(
                "coarse_tensor_stiffness: non-SPD tensor in block " +
                std::to_string(g.coarse_tri_block(ct)));
        auto nd = g.coarse_tri_nodes(ct);
        auto geo = coarse_tri_geometry(g, ct);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                trip.emplace_back(nd[a], nd[b],
                                  geo.area * geo.grad[a].dot(K * geo.grad[b]));
    }
    SpMat A(g.num_coarse_nodes(), g.num_coarse_nodes());
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

// P1 evaluation of a coarse nodal function at every fine node.
Vec evaluate_coarse_p1(const GridHierarchy& g, const Vec& coarse) {
    Vec fine = Vec::Zero(g.num_fine_nodes());
    for (int cn = 0; cn < g.num_coarse_nodes(); ++cn) {
        if (coarse[cn] == 0.0) continue;
        fine += coarse[cn] * g.hat_values(cn);
    }
    return fine;
}

HomogenizedSolution solve_homogenized(
    const GridHierarchy& g, const UpscaledTensorField& tensors,
    const FineProblem& fine, const std::function<double(Eigen::Vector2d)>& f,
    const std::function<double(Eigen::Vector2d)>& bc) {
    if (static_cast<int>(tensors.tensors.size()) != g.num_coarse_blocks())
        throw std::invalid_argument("solve_homogenized: tensor field size");
    SpMat A = coarse_tensor_stiffness(g, tensors);

    // coarse mass for the load
    std::vector<Eigen::Triplet<double>> trip;
    for (int ct = 0; ct < g.num_coarse_tris(); ++ct) {
        auto nd = g.coarse_tri_nodes(ct);
        double w = 0.5 * g.Hx() * g.Hy() / 12.0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                trip.emplace_back(nd[a], nd[b], w * (a == b ? 2.0 : 1.0));
    }
    SpMat M(g.num_coarse_nodes(), g.num_coarse_nodes());
    M.setFromTriplets(trip.begin(), trip.end());
    Vec f_c(g.num_coarse_nodes());
    for (int cn = 0; cn < g.num_coarse_nodes(); ++cn)
        f_c[cn] = f(g.coarse_node_pos(cn));
    Vec b = M * f_c;

    // eliminate Dirichlet rows at boundary coarse nodes
    std::vector<int> interior;
    Vec u = Vec::Zero(g.num_coarse_nodes());
    for (int cn = 0; cn < g.num_coarse_nodes(); ++cn) {
        if (g.coarse_node_on_boundary(cn))
            u[cn] = bc(g.coarse_node_pos(cn));
        else
            interior.push_back(cn);
    }
    b -= A * u;
    Mat A_ii(interior.size(), interior.size());
    Vec b_i(interior.size());
    for (size_t i = 0; i < interior.size(); ++i) {
        b_i[i] = b[interior[i]];
        for (size_t j = 0; j < interior.size(); ++j)
            A_ii(i, j) = A.coeff(interior[i], interior[j]);
    }
    Vec u_i = A_ii.ldlt().solve(b_i);
    for (size_t i = 0; i < interior.size(); ++i) u[interior[i]] = u_i[i];

    HomogenizedSolution out;
    out.coarse = u;
    out.fine = evaluate_coarse_p1(g, u);
    Vec ref = fine.solve(f, bc);
    out.errors = relative_errors(fine, out.fine, ref);
    return out;
}

} // namespace ms
