#include "ms/coefficient.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace ms {

CoefficientField::CoefficientField(const GridHierarchy& g,
                                   Eigen::VectorXd cell_values)
    : values_(std::move(cell_values)) {
    if (values_.size() != g.num_fine_cells())
        throw std::invalid_argument("CoefficientField: wrong cell count");
    min_ = values_.minCoeff();
    max_ = values_.maxCoeff();
    if (!(min_ > 0) || !std::isfinite(max_))
        throw std::invalid_argument(
            "CoefficientField: values must be positive and finite");
}

CoefficientField CoefficientField::constant(const GridHierarchy& g, double v) {
    return CoefficientField(g, Eigen::VectorXd::Constant(g.num_fine_cells(), v));
}

CoefficientField CoefficientField::transposed(const GridHierarchy& g) const {
    if (g.nxf() != g.nyf())
        throw std::invalid_argument("transposed: fine grid must be square");
    Eigen::VectorXd v(values_.size());
    for (int j = 0; j < g.nyf(); ++j)
        for (int i = 0; i < g.nxf(); ++i)
            v[g.fine_cell(i, j)] = values_[g.fine_cell(j, i)];
    return CoefficientField(g, std::move(v));
}

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
    // splitmix-style combine; stable across platforms
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Eigen::VectorXd channels_field(const FieldSpec& spec, const GridHierarchy& g) {
    // Horizontal high-permeability channels spanning the domain, one fine
    // cell thick, plus a few random blobs; seeded random walk in y.
    Eigen::VectorXd v = Eigen::VectorXd::Ones(g.num_fine_cells());
    std::mt19937_64 rng(mix_seed(spec.seed, 0xc4a, 0));
    std::uniform_int_distribution<int> ystart(1, std::max(1, g.nyf() - 2));
    std::uniform_int_distribution<int> step(-1, 1);
    for (int ch = 0; ch < spec.num_channels; ++ch) {
        int y = ystart(rng);
        for (int i = 0; i < g.nxf(); ++i) {
            v[g.fine_cell(i, y)] = spec.contrast;
            y = std::clamp(y + step(rng), 0, g.nyf() - 1);
        }
    }
    return v;
}

Eigen::VectorXd inclusions_field(const FieldSpec& spec, const GridHierarchy& g) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(g.num_fine_cells());
    std::mt19937_64 rng(mix_seed(spec.seed, 0x1c5, 0));
    std::uniform_int_distribution<int> xd(0, g.nxf() - 1), yd(0, g.nyf() - 1);
    std::uniform_int_distribution<int> rd(1, std::max(1, g.refine() / 2));
    for (int k = 0; k < spec.num_inclusions; ++k) {
        int cx = xd(rng), cy = yd(rng), r = rd(rng);
        for (int j = std::max(0, cy - r); j <= std::min(g.nyf() - 1, cy + r); ++j)
            for (int i = std::max(0, cx - r); i <= std::min(g.nxf() - 1, cx + r); ++i)
                v[g.fine_cell(i, j)] = spec.contrast;
    }
    return v;
}

} // namespace

CoefficientField generate_field(const FieldSpec& spec, const GridHierarchy& g) {
    Eigen::VectorXd v;
    if (spec.kind == "constant") {
        v = Eigen::VectorXd::Constant(g.num_fine_cells(), spec.value);
    } else if (spec.kind == "laminate") {
        // alternating horizontal layers of thickness period (in fine cells)
        v.resize(g.num_fine_cells());
        for (int j = 0; j < g.nyf(); ++j) {
            double val = ((j / spec.period) % 2 == 0) ? 1.0 : spec.contrast;
            for (int i = 0; i < g.nxf(); ++i) v[g.fine_cell(i, j)] = val;
        }
    } else if (spec.kind == "checkerboard") {
        v.resize(g.num_fine_cells());
        for (int j = 0; j < g.nyf(); ++j)
            for (int i = 0; i < g.nxf(); ++i) {
                bool odd = ((i / spec.period) + (j / spec.period)) % 2;
                v[g.fine_cell(i, j)] = odd ? spec.contrast : 1.0;
            }
    } else if (spec.kind == "channels") {
        v = channels_field(spec, g);
    } else if (spec.kind == "inclusions") {
        v = inclusions_field(spec, g);
    } else if (spec.kind == "file") {
        return load_field(g, spec.path);
    } else {
        throw std::invalid_argument("generate_field: unknown kind " + spec.kind);
    }
    return CoefficientField(g, std::move(v));
}

void save_field(const CoefficientField& f, const GridHierarchy& g,
                const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_field: cannot open " + path);
    os << g.nxf() << " " << g.nyf() << "\n";
    os.precision(17);
    for (int j = 0; j < g.nyf(); ++j) {
        for (int i = 0; i < g.nxf(); ++i) {
            if (i) os << " ";
            os << f.cell(g.fine_cell(i, j));
        }
        os << "\n";
    }
}

CoefficientField load_field(const GridHierarchy& g, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_field: cannot open " + path);
    int nxf, nyf;
    is >> nxf >> nyf;
    if (nxf != g.nxf() || nyf != g.nyf())
        throw std::runtime_error("load_field: dimension mismatch with grid");
    Eigen::VectorXd v(g.num_fine_cells());
    for (int j = 0; j < nyf; ++j)
        for (int i = 0; i < nxf; ++i) {
            if (!(is >> v[g.fine_cell(i, j)]))
                throw std::runtime_error("load_field: truncated file");
        }
    return CoefficientField(g, std::move(v));
}

} // namespace ms
