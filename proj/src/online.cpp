#include "ms/online.hpp"

#include <algorithm>
#include <numeric>

namespace ms {

OnlineBasis online_basis(const DirichletSolver& local, const GridHierarchy& g,
                         const Vec& global_residual, int node, int iteration) {
    const Region& w = local.region();
    Vec rhs(w.num_nodes());
    for (int i = 0; i < w.num_nodes(); ++i) rhs[i] = global_residual[w.nodes[i]];
    Vec z = local.solve_zero_bc(rhs);

    OnlineBasis out;
    out.node = node;
    out.iteration = iteration;
    out.norm = std::sqrt(std::max(0.0, z.dot(local.stiffness() * z)));
    out.phi = Vec::Zero(g.num_fine_nodes());
    for (int i = 0; i < w.num_nodes(); ++i) out.phi[w.nodes[i]] = z[i];
    out.zero = out.norm < 1e-14;
    return out;
}

std::vector<int> nonoverlap_select(const std::vector<int>& marked,
                                   const std::vector<double>& eta2,
                                   const GridHierarchy& g) {
    std::vector<int> order = marked;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return eta2[a] > eta2[b]; });
    // w_i and w_j share a coarse block iff the nodes are within Chebyshev
    // distance 1 on the coarse lattice
    std::vector<int> picked;
    for (int cn : order) {
        auto [I, J] = g.coarse_node_coords(cn);
        bool clash = false;
        for (int p : picked) {
            auto [Ip, Jp] = g.coarse_node_coords(p);
            if (std::abs(I - Ip) <= 1 && std::abs(J - Jp) <= 1) {
                clash = true;
                break;
            }
        }
        if (!clash) picked.push_back(cn);
    }
    return picked;
}

OnlineResult online_loop(const GridHierarchy& g, const CoefficientField& kappa,
                         const OfflineSpace& offline, const FineProblem& fine,
                         const std::function<double(Eigen::Vector2d)>& f,
                         const std::function<double(Eigen::Vector2d)>& bc,
                         const OnlineOptions& opts) {
    OnlineResult out;
    out.space = offline;
    NeighborhoodSolvers locals(g, kappa);
    const Vec load = fine.load_vector(fine.interpolate(f));

    for (int iter = 0; ; ++iter) {
        out.solution = gmsfem_solve(g, out.space, fine, f, bc);
        Vec resid = load - fine.stiffness() * out.solution.fine;
        IndicatorSet ind = compute_indicators(locals, offline.excluded, resid);

        HistoryRow row;
        row.iteration = iter;
        row.dof = out.space.dof();
        row.energy_pct = out.solution.errors.energy_pct;
        row.l2_pct = out.solution.errors.l2_pct;
        row.eta2_sum = ind.total();
        row.kind = iter == 0 ? "offline" : "online";

        bool stop = row.eta2_sum <= opts.tol || iter >= opts.max_iter;
        // one iteration enriches every marked neighborhood, processed in
        // batches of pairwise-disjoint supports; within a batch the local
        // solves share one residual, and the residual is refreshed between
        // batches by re-solving
        std::vector<int> remaining;
        if (!stop) remaining = dorfler_mark(ind.eta2, opts.theta);
        bool grew = false;
        while (!remaining.empty()) {
            std::vector<int> batch = nonoverlap_select(remaining, ind.eta2, g);
            for (int cn : batch) {
                OnlineBasis phi = online_basis(locals[cn], g, resid, cn, iter);
                remaining.erase(
                    std::find(remaining.begin(), remaining.end(), cn));
                if (phi.zero) continue;
                out.space.columns.push_back(phi.phi);
                out.space.column_node.push_back(cn);
                out.added.push_back(std::move(phi));
                ++row.marked;
                grew = true;
            }
            if (!remaining.empty()) {
                auto mid = gmsfem_solve(g, out.space, fine, f, bc);
                resid = load - fine.stiffness() * mid.fine;
            }
        }
        out.history.push_back(row);
        if (stop || !grew) break;
    }
    return out;
}

} // namespace ms
