#include "ms/gmsfem.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>

namespace ms {

namespace {

uint64_t splitmix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic standard Gaussian stream per (seed, node, column).
class GaussianStream {
  public:
    GaussianStream(uint64_t seed, uint64_t node, uint64_t col)
        : state_(splitmix(seed ^ splitmix(node + 1) ^ splitmix((col + 1) << 20))) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

  private:
    double uniform() {
        state_ = splitmix(state_);
        // (0, 1]: avoids log(0)
        return (static_cast<double>(state_ >> 11) + 1.0) / 9007199254740993.0;
    }
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// POD dedup: keep the original columns when they are well conditioned,
// otherwise replace by the dominant left singular directions.
void pod_dedup(SnapshotSpace& snap) {
    if (snap.columns.cols() == 0) return;
    Eigen::BDCSVD<Mat> svd(snap.columns,
                           Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& sv = svd.singularValues();
    double tol = 1e-10 * sv[0];
    int keep = 0;
    while (keep < sv.size() && sv[keep] > tol) ++keep;
    if (keep < snap.columns.cols()) {
        snap.truncated = static_cast<int>(snap.columns.cols()) - keep;
        snap.columns = svd.matrixU().leftCols(keep);
    }
}

} // namespace

SnapshotSpace::Kind snapshot_kind_from_string(const std::string& s) {
    if (s == "all-fine") return SnapshotSpace::Kind::AllFine;
    if (s == "harmonic") return SnapshotSpace::Kind::Harmonic;
    if (s == "harmonic-oversampled")
        return SnapshotSpace::Kind::HarmonicOversampled;
    if (s == "randomized") return SnapshotSpace::Kind::Randomized;
    throw std::invalid_argument("unknown snapshot kind: " + s);
}

std::string to_string(SnapshotSpace::Kind kind) {
    switch (kind) {
        case SnapshotSpace::Kind::AllFine: return "all-fine";
        case SnapshotSpace::Kind::Harmonic: return "harmonic";
        case SnapshotSpace::Kind::HarmonicOversampled:
            return "harmonic-oversampled";
        case SnapshotSpace::Kind::Randomized: return "randomized";
    }
    throw std::logic_error("bad snapshot kind");
}

SnapshotSpace build_snapshots(const GridHierarchy& g,
                              const CoefficientField& kappa, int node,
                              SnapshotSpace::Kind kind,
                              const SnapshotOpts& opts) {
    SnapshotSpace snap;
    snap.kind = kind;
    snap.node = node;
    snap.seed = opts.seed;
    snap.region = g.neighborhood(node);

    bool oversampled = kind == SnapshotSpace::Kind::HarmonicOversampled ||
                       kind == SnapshotSpace::Kind::Randomized;
    // neighborhoods at the global boundary use no oversampled domain
    if (oversampled && !g.neighborhood_touches_boundary(node)) {
        int layers = opts.layers > 0 ? opts.layers : g.default_layers();
        snap.solve_region = g.oversample(snap.region, layers);
    } else {
        snap.solve_region = snap.region;
    }
    const Region& sr = snap.solve_region;

    switch (kind) {
        case SnapshotSpace::Kind::AllFine: {
            std::vector<int> interior;
            for (int i = 0; i < sr.num_nodes(); ++i)
                if (!sr.is_boundary[i]) interior.push_back(i);
            snap.columns = Mat::Zero(sr.num_nodes(), interior.size());
            for (size_t c = 0; c < interior.size(); ++c)
                snap.columns(interior[c], c) = 1.0;
            break;
        }
        case SnapshotSpace::Kind::Harmonic:
        case SnapshotSpace::Kind::HarmonicOversampled: {
            DirichletSolver ds(g, kappa, sr);
            int nb = static_cast<int>(sr.boundary_nodes.size());
            snap.columns = Mat::Zero(sr.num_nodes(), nb);
            for (int c = 0; c < nb; ++c) {
                Vec bc = Vec::Zero(nb);
                bc[c] = 1.0;
                snap.columns.col(c) = ds.solve(bc);
            }
            break;
        }
        case SnapshotSpace::Kind::Randomized: {
            if (opts.count <= 0)
                throw std::invalid_argument(
                    "randomized snapshots need a positive count");
            DirichletSolver ds(g, kappa, sr);
            int nb = static_cast<int>(sr.boundary_nodes.size());
            int count = std::min(opts.count, nb);
            // the constant (the known zero-energy mode) plus random draws
            snap.columns = Mat::Zero(sr.num_nodes(), count + 1);
            snap.columns.col(0).setOnes();
            for (int c = 0; c < count; ++c) {
                GaussianStream gs(opts.seed, node, c);
                Vec bc(nb);
                for (int i = 0; i < nb; ++i) bc[i] = gs.next();
                snap.columns.col(c + 1) = ds.solve(bc);
            }
            break;
        }
    }
    pod_dedup(snap);
    return snap;
}

WeightField compute_weight(const GridHierarchy& g, const CoefficientField& kappa,
                           const std::vector<Vec>& pou) {
    WeightField w;
    w.tri = Vec::Zero(g.num_fine_tris());
    for (const Vec& chi : pou) {
        for (int t = 0; t < g.num_fine_tris(); ++t) {
            auto nd = g.tri_nodes(t);
            if (chi[nd[0]] == 0.0 && chi[nd[1]] == 0.0 && chi[nd[2]] == 0.0)
                continue;
            Eigen::Vector2d grad =
                tri_gradient(g, t, {chi[nd[0]], chi[nd[1]], chi[nd[2]]});
            w.tri[t] += kappa.tri(t) * grad.squaredNorm();
        }
    }
    return w;
}

LocalSpectrum local_spectrum(const GridHierarchy& g,
                             const CoefficientField& kappa,
                             const WeightField& weight,
                             const SnapshotSpace& snap) {
    const Region& sr = snap.solve_region;
    SpMat A = assemble_stiffness(g, kappa, sr);
    SpMat S = assemble_weighted_mass(
        g, [&](int t) { return weight.tri[t]; }, sr);
    Mat Ai = snap.columns.transpose() * A * snap.columns;
    Mat Si = snap.columns.transpose() * S * snap.columns;

    // robust reduction: drop near-null directions of the s-matrix
    Eigen::SelfAdjointEigenSolver<Mat> es(Si);
    const Vec& d = es.eigenvalues();
    double tol = 1e-12 * std::max(d.cwiseAbs().maxCoeff(), 1e-300);
    int first = 0;
    while (first < d.size() && d[first] <= tol) ++first;
    int kept = static_cast<int>(d.size()) - first;
    if (kept == 0)
        throw std::runtime_error("local_spectrum: s-matrix is zero");
    Mat Q = es.eigenvectors().rightCols(kept);
    Vec dinv = d.tail(kept).cwiseSqrt().cwiseInverse();
    Mat T = Q * dinv.asDiagonal(); // T^T Si T = I
    Eigen::SelfAdjointEigenSolver<Mat> ges(T.transpose() * Ai * T);

    LocalSpectrum spec;
    spec.node = snap.node;
    spec.truncated = first;
    spec.values = ges.eigenvalues();
    spec.coefs = T * ges.eigenvectors();
    return spec;
}

Vec expand_eigenvector(const GridHierarchy& g, const SnapshotSpace& snap,
                       const Vec& coef) {
    Vec local = snap.columns * coef; // solve_region nodal values
    Vec fine = Vec::Zero(g.num_fine_nodes());
    // restrict to w_i (identical to solve_region for the plain kinds)
    for (int n : snap.region.nodes) fine[n] = local[snap.solve_region.local(n)];
    return fine;
}

OfflineFragment spectral_offline(const GridHierarchy& g,
                                 const CoefficientField& kappa,
                                 const WeightField& weight,
                                 const SnapshotSpace& snap, int l) {
    LocalSpectrum spec = local_spectrum(g, kappa, weight, snap);
    OfflineFragment frag;
    frag.node = snap.node;
    frag.truncated = spec.truncated;
    int kept = static_cast<int>(spec.values.size());
    int take = std::min(l, kept);
    frag.eigenvalues = spec.values.head(take);
    if (take < kept) frag.excluded = spec.values[take];
    frag.vectors.reserve(take);
    for (int k = 0; k < take; ++k)
        frag.vectors.push_back(expand_eigenvector(g, snap, spec.coefs.col(k)));
    return frag;
}

double OfflineSpace::lambda_star() const {
    double m = std::numeric_limits<double>::infinity();
    for (double e : excluded) m = std::min(m, e);
    return m;
}

SpMat OfflineSpace::matrix(int num_fine_nodes) const {
    std::vector<Eigen::Triplet<double>> trip;
    for (size_t c = 0; c < columns.size(); ++c)
        for (int n = 0; n < columns[c].size(); ++n)
            if (columns[c][n] != 0.0)
                trip.emplace_back(n, static_cast<int>(c), columns[c][n]);
    SpMat R(num_fine_nodes, static_cast<int>(columns.size()));
    R.setFromTriplets(trip.begin(), trip.end());
    return R;
}

OfflineSpace assemble_offline(const GridHierarchy& g,
                              const std::vector<OfflineFragment>& fragments,
                              const std::vector<Vec>& pou,
                              SnapshotSpace::Kind kind, std::uint64_t seed) {
    OfflineSpace off;
    off.kind = kind;
    off.seed = seed;
    off.l.assign(g.num_coarse_nodes(), 0);
    off.eigenvalues.assign(g.num_coarse_nodes(), Vec());
    off.excluded.assign(g.num_coarse_nodes(),
                        std::numeric_limits<double>::infinity());
    for (const OfflineFragment& frag : fragments) {
        off.l[frag.node] = static_cast<int>(frag.vectors.size());
        off.eigenvalues[frag.node] = frag.eigenvalues;
        off.excluded[frag.node] = frag.excluded;
        for (const Vec& v : frag.vectors) {
            Vec col = pou[frag.node].cwiseProduct(v);
            off.columns.push_back(std::move(col));
            off.column_node.push_back(frag.node);
        }
    }
    return off;
}

std::vector<Vec> partition_of_unity(const GridHierarchy& g,
                                    const CoefficientField& kappa,
                                    PouKind kind) {
    std::vector<Vec> pou;
    pou.reserve(g.num_coarse_nodes());
    if (kind == PouKind::Linear) {
        for (int cn = 0; cn < g.num_coarse_nodes(); ++cn)
            pou.push_back(g.hat_values(cn));
    } else {
        auto basis = ms_basis(g, kappa);
        pou = std::move(basis.values);
    }
    return pou;
}

OfflineSpace build_offline(const GridHierarchy& g, const CoefficientField& kappa,
                           const GmsfemOptions& opts) {
    std::vector<Vec> pou = partition_of_unity(g, kappa, opts.pou);
    WeightField weight = compute_weight(g, kappa, pou);
    SnapshotOpts sopts;
    sopts.layers = opts.layers > 0 ? opts.layers : g.default_layers();
    sopts.seed = opts.seed;
    sopts.count = opts.l + opts.buffer;
    std::vector<OfflineFragment> fragments;
    fragments.reserve(g.num_coarse_nodes());
    for (int cn = 0; cn < g.num_coarse_nodes(); ++cn) {
        SnapshotSpace snap = build_snapshots(g, kappa, cn, opts.kind, sopts);
        // l <= 0 selects the whole snapshot space (exactness runs)
        int l = opts.l > 0 ? opts.l : snap.count();
        fragments.push_back(spectral_offline(g, kappa, weight, snap, l));
    }
    return assemble_offline(g, fragments, pou, opts.kind, opts.seed);
}

GmsfemSolution gmsfem_solve(const GridHierarchy& g, const OfflineSpace& off,
                            const FineProblem& fine,
                            const std::function<double(Eigen::Vector2d)>& f,
                            const std::function<double(Eigen::Vector2d)>& bc) {
    // boundary rows of the trial columns are eliminated; bc enters through
    // the lifting u_p supported on the boundary nodes
    SpMat R = off.matrix(g.num_fine_nodes());
    std::vector<char> on_bdry(g.num_fine_nodes(), 0);
    for (int n : g.domain_boundary_nodes()) on_bdry[n] = 1;
    for (int k = 0; k < R.outerSize(); ++k)
        for (SpMat::InnerIterator it(R, k); it; ++it)
            if (on_bdry[it.row()]) it.valueRef() = 0.0;
    R.prune(0.0);

    Vec u_p = Vec::Zero(g.num_fine_nodes());
    for (int n : g.domain_boundary_nodes()) u_p[n] = bc(g.node_pos(n));

    const SpMat& A = fine.stiffness();
    Vec b = fine.load_vector(fine.interpolate(f)) - A * u_p;
    Mat A_H = Mat(R.transpose() * A * R);
    Vec b_H = R.transpose() * b;
    Eigen::LDLT<Mat> ldlt(A_H);
    Vec c = ldlt.solve(b_H);
    // overlapping bases can make the spanning set dependent; fall back to a
    // rank-revealing minimum-norm solve
    if (!c.allFinite() ||
        (A_H * c - b_H).norm() > 1e-8 * (b_H.norm() + A_H.norm())) {
        c = A_H.completeOrthogonalDecomposition().solve(b_H);
        if (!c.allFinite())
            throw std::runtime_error("gmsfem_solve: singular coarse matrix");
    }

    GmsfemSolution sol;
    sol.coef = c;
    sol.fine = u_p + R * c;
    sol.errors = relative_errors(fine, sol.fine, fine.solve(f, bc));
    return sol;
}

namespace {

template <class T> void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T> T read_pod(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("offline file truncated");
    return v;
}

constexpr uint64_t kOfflineMagic = 0x4d534f46464c4e31ULL; // "MSOFFLN1"

} // namespace

void save_offline(const OfflineSpace& off, const GridHierarchy& g,
                  const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_offline: cannot open " + path);
    write_pod(os, kOfflineMagic);
    write_pod(os, static_cast<int32_t>(g.nx()));
    write_pod(os, static_cast<int32_t>(g.ny()));
    write_pod(os, static_cast<int32_t>(g.refine()));
    write_pod(os, static_cast<int32_t>(off.kind));
    write_pod(os, off.seed);
    write_pod(os, static_cast<int32_t>(off.l.size()));
    for (size_t cn = 0; cn < off.l.size(); ++cn) {
        write_pod(os, static_cast<int32_t>(off.l[cn]));
        write_pod(os, static_cast<int32_t>(off.eigenvalues[cn].size()));
        os.write(reinterpret_cast<const char*>(off.eigenvalues[cn].data()),
                 static_cast<std::streamsize>(8 * off.eigenvalues[cn].size()));
        write_pod(os, off.excluded[cn]);
    }
    write_pod(os, static_cast<int32_t>(off.columns.size()));
    for (size_t c = 0; c < off.columns.size(); ++c) {
        write_pod(os, static_cast<int32_t>(off.column_node[c]));
        const Vec& v = off.columns[c];
        int32_t nnz = 0;
        for (int n = 0; n < v.size(); ++n)
            if (v[n] != 0.0) ++nnz;
        write_pod(os, nnz);
        for (int n = 0; n < v.size(); ++n)
            if (v[n] != 0.0) {
                write_pod(os, static_cast<int32_t>(n));
                write_pod(os, v[n]);
            }
    }
}

OfflineSpace load_offline(const std::string& path, const GridHierarchy& g) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_offline: cannot open " + path);
    if (read_pod<uint64_t>(is) != kOfflineMagic)
        throw std::runtime_error("load_offline: bad magic in " + path);
    int nx = read_pod<int32_t>(is), ny = read_pod<int32_t>(is),
        refine = read_pod<int32_t>(is);
    if (nx != g.nx() || ny != g.ny() || refine != g.refine())
        throw std::runtime_error("load_offline: grid mismatch in " + path);
    OfflineSpace off;
    off.kind = static_cast<SnapshotSpace::Kind>(read_pod<int32_t>(is));
    off.seed = read_pod<uint64_t>(is);
    int ncn = read_pod<int32_t>(is);
    if (ncn != g.num_coarse_nodes())
        throw std::runtime_error("load_offline: node count mismatch");
    off.l.resize(ncn);
    off.eigenvalues.resize(ncn);
    off.excluded.resize(ncn);
    for (int cn = 0; cn < ncn; ++cn) {
        off.l[cn] = read_pod<int32_t>(is);
        int ne = read_pod<int32_t>(is);
        off.eigenvalues[cn].resize(ne);
        is.read(reinterpret_cast<char*>(off.eigenvalues[cn].data()), 8 * ne);
        off.excluded[cn] = read_pod<double>(is);
    }
    int ncol = read_pod<int32_t>(is);
    off.columns.resize(ncol);
    off.column_node.resize(ncol);
    for (int c = 0; c < ncol; ++c) {
        off.column_node[c] = read_pod<int32_t>(is);
        int nnz = read_pod<int32_t>(is);
        off.columns[c] = Vec::Zero(g.num_fine_nodes());
        for (int k = 0; k < nnz; ++k) {
            int n = read_pod<int32_t>(is);
            off.columns[c][n] = read_pod<double>(is);
        }
    }
    if (!is) throw std::runtime_error("load_offline: truncated file");
    return off;
}

} // namespace ms
