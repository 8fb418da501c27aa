#include "ms/adaptivity.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ms {

double residual_norm(const DirichletSolver& local, const Vec& global_residual) {
    const Region& r = local.region();
    Vec rhs(r.num_nodes());
    for (int i = 0; i < r.num_nodes(); ++i) rhs[i] = global_residual[r.nodes[i]];
    Vec z = local.solve_zero_bc(rhs);
    return std::sqrt(std::max(0.0, z.dot(local.stiffness() * z)));
}

double residual_norm(const GridHierarchy& g, const CoefficientField& kappa,
                     int coarse_node, const Vec& global_residual) {
    Region w = g.neighborhood(coarse_node);
    DirichletSolver local(g, kappa, w);
    return residual_norm(local, global_residual);
}

NeighborhoodSolvers::NeighborhoodSolvers(const GridHierarchy& g,
                                         const CoefficientField& kappa) {
    regions_.reserve(g.num_coarse_nodes());
    for (int cn = 0; cn < g.num_coarse_nodes(); ++cn)
        regions_.push_back(g.neighborhood(cn));
    solvers_.reserve(regions_.size());
    for (const Region& r : regions_)
        solvers_.push_back(std::make_unique<DirichletSolver>(g, kappa, r));
}

double IndicatorSet::total() const {
    return std::accumulate(eta2.begin(), eta2.end(), 0.0);
}

IndicatorSet compute_indicators(const NeighborhoodSolvers& locals,
                                const std::vector<double>& excluded,
                                const Vec& global_residual) {
    IndicatorSet ind;
    ind.r.reserve(locals.size());
    ind.eta2.reserve(locals.size());
    for (int i = 0; i < locals.size(); ++i) {
        double r = residual_norm(locals[i], global_residual);
        ind.r.push_back(r);
        double lam = excluded[i];
        ind.eta2.push_back(std::isfinite(lam) && lam > 0 ? r * r / lam : 0.0);
    }
    return ind;
}

std::vector<int> dorfler_mark(const std::vector<double>& eta2, double theta) {
    double total = std::accumulate(eta2.begin(), eta2.end(), 0.0);
    if (total <= 0.0) return {};
    std::vector<int> order(eta2.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return eta2[a] > eta2[b]; });
    std::vector<int> marked;
    double acc = 0.0;
    for (int i : order) {
        if (acc >= theta * total) break;
        if (eta2[i] <= 0.0) break;
        marked.push_back(i);
        acc += eta2[i];
    }
    return marked;
}

void save_history_csv(const std::vector<HistoryRow>& history,
                      const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_history_csv: cannot open " + path);
    os << "iteration,dof,energy_pct,l2_pct,eta2_sum,marked,kind\n";
    for (const HistoryRow& row : history) {
        std::ostringstream line;
        line.precision(17);
        line << row.iteration << ',' << row.dof << ',' << row.energy_pct << ','
             << row.l2_pct << ',' << row.eta2_sum << ',' << row.marked << ','
             << row.kind << '\n';
        os << line.str();
    }
}

namespace {

// Per-neighborhood cache: snapshot space and its full local spectrum kept in
// snapshot-coefficient form; fine eigenvectors are expanded on demand.
struct LocalCache {
    SnapshotSpace snap;
    LocalSpectrum spec;
};

} // namespace

AdaptResult adapt_loop(const GridHierarchy& g, const CoefficientField& kappa,
                       const FineProblem& fine,
                       const std::function<double(Eigen::Vector2d)>& f,
                       const std::function<double(Eigen::Vector2d)>& bc,
                       const AdaptOptions& opts) {
    const int nc = g.num_coarse_nodes();
    std::vector<Vec> pou = partition_of_unity(g, kappa, opts.gms.pou);
    WeightField weight = compute_weight(g, kappa, pou);
    SnapshotOpts sopts;
    sopts.layers = opts.gms.layers > 0 ? opts.gms.layers : g.default_layers();
    sopts.seed = opts.gms.seed;
    sopts.count = opts.gms.l + opts.gms.buffer;

    std::vector<LocalCache> cache(nc);
    for (int cn = 0; cn < nc; ++cn) {
        cache[cn].snap = build_snapshots(g, kappa, cn, opts.gms.kind, sopts);
        cache[cn].spec = local_spectrum(g, kappa, weight, cache[cn].snap);
    }
    NeighborhoodSolvers locals(g, kappa);

    AdaptResult out;
    out.l.assign(nc, std::max(1, opts.gms.l));
    OfflineSpace& off = out.space;
    off.kind = opts.gms.kind;
    off.seed = opts.gms.seed;
    off.l = out.l;
    off.eigenvalues.assign(nc, Vec());
    off.excluded.assign(nc, std::numeric_limits<double>::infinity());

    auto sync_node = [&](int cn) {
        // append eigenvector columns so the space matches out.l[cn]
        const LocalCache& c = cache[cn];
        int avail = static_cast<int>(c.spec.values.size());
        int want = std::min(out.l[cn], avail);
        int have = off.eigenvalues[cn].size();
        off.eigenvalues[cn] = c.spec.values.head(want);
        off.excluded[cn] = want < avail
                               ? c.spec.values[want]
                               : std::numeric_limits<double>::infinity();
        off.l[cn] = want;
        out.l[cn] = want;
        for (int k = have; k < want; ++k) {
            Vec v = expand_eigenvector(g, c.snap, c.spec.coefs.col(k));
            off.columns.push_back(pou[cn].cwiseProduct(v));
            off.column_node.push_back(cn);
        }
    };
    for (int cn = 0; cn < nc; ++cn) sync_node(cn);

    const Vec load = fine.load_vector(fine.interpolate(f));
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        out.solution = gmsfem_solve(g, off, fine, f, bc);
        Vec resid = load - fine.stiffness() * out.solution.fine;
        IndicatorSet ind = compute_indicators(locals, off.excluded, resid);

        HistoryRow row;
        row.iteration = iter;
        row.dof = off.dof();
        row.energy_pct = out.solution.errors.energy_pct;
        row.l2_pct = out.solution.errors.l2_pct;
        row.eta2_sum = ind.total();
        row.kind = "offline";

        bool stop = row.eta2_sum <= opts.tol || off.dof() >= opts.max_dof ||
                    iter == opts.max_iter - 1;
        std::vector<int> marked;
        if (!stop) marked = dorfler_mark(ind.eta2, opts.theta);
        row.marked = static_cast<int>(marked.size());
        out.history.push_back(row);
        if (stop || marked.empty()) break;

        bool grew = false;
        for (int cn : marked) {
            int avail = static_cast<int>(cache[cn].spec.values.size());
            if (out.l[cn] >= avail) {
                out.warnings.push_back(
                    "neighborhood " + std::to_string(cn) +
                    ": snapshot space exhausted, enrichment skipped");
                continue;
            }
            out.l[cn] = std::min(out.l[cn] + opts.increment, avail);
            sync_node(cn);
            grew = true;
        }
        if (!grew) break;
    }
    return out;
}

} // namespace ms
