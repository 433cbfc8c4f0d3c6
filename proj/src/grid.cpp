#include "bachflow/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace bachflow {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Dense circulant derivative matrices.  offsets/coeffs describe an FD
// stencil; the spectral variant is assembled from the exact Fourier symbol.
std::vector<double> stencil_matrix(int N, double scale,
                                   const int* off, const double* co, int m) {
    std::vector<double> D(static_cast<std::size_t>(N) * N, 0.0);
    for (int j = 0; j < N; ++j)
        for (int q = 0; q < m; ++q) {
            const int col = ((j + off[q]) % N + N) % N;
            D[static_cast<std::size_t>(j) * N + col] += scale * co[q];
        }
    return D;
}

std::vector<double> spectral_matrix(int N, double L, int order) {
    // D[j][m] = (1/N) sum_k sym(k) exp(2 pi i k (j-m)/N), real by symmetry.
    // k runs over the centered set; the unpaired N/2 mode (even N) is kept
    // for the second derivative and dropped from the first.
    std::vector<double> D(static_cast<std::size_t>(N) * N, 0.0);
    const int klo = -(N / 2), khi = (N - 1) / 2;
    for (int d = 0; d < N; ++d) { // matrix depends on (j - m) mod N
        double v = 0.0;
        for (int k = klo; k <= khi; ++k) {
            const double w = kTwoPi * k / L;
            const double ang = kTwoPi * k * d / N;
            if (order == 1) {
                if (2 * k == -N) continue;
                v += -w * std::sin(ang);
            } else {
                v += -w * w * std::cos(ang);
            }
        }
        v /= N;
        for (int j = 0; j < N; ++j) {
            const int m = ((j - d) % N + N) % N;
            D[static_cast<std::size_t>(j) * N + m] = v;
        }
    }
    return D;
}

std::vector<double> build_matrix(const Axis& ax, int order) {
    const int N = ax.npts;
    const double h = ax.spacing();
    switch (ax.scheme) {
        case AxisScheme::Spectral:
            return spectral_matrix(N, ax.length, order);
        case AxisScheme::FD4: {
            if (order == 1) {
                static const int off[] = {-2, -1, 1, 2};
                static const double co[] = {1.0, -8.0, 8.0, -1.0};
                return stencil_matrix(N, 1.0 / (12.0 * h), off, co, 4);
            }
            static const int off[] = {-2, -1, 0, 1, 2};
            static const double co[] = {-1.0, 16.0, -30.0, 16.0, -1.0};
            return stencil_matrix(N, 1.0 / (12.0 * h * h), off, co, 5);
        }
        case AxisScheme::FD6: {
            if (order == 1) {
                static const int off[] = {-3, -2, -1, 1, 2, 3};
                static const double co[] = {-1.0, 9.0, -45.0, 45.0, -9.0, 1.0};
                return stencil_matrix(N, 1.0 / (60.0 * h), off, co, 6);
            }
            static const int off[] = {-3, -2, -1, 0, 1, 2, 3};
            static const double co[] = {2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0};
            return stencil_matrix(N, 1.0 / (180.0 * h * h), off, co, 7);
        }
    }
    throw std::logic_error("unknown axis scheme");
}

} // namespace

Grid::Grid(const ModelSpace& model, std::vector<Axis> axes, std::vector<double> frozen)
    : model_(model), axes_(std::move(axes)) {
    const int n = model_.n;
    if (axes_.empty() || axes_.size() > 4)
        throw std::invalid_argument("Grid: need 1..4 axes");
    coord_axis_.assign(static_cast<std::size_t>(n), -1);
    for (int t = 0; t < naxes(); ++t) {
        const Axis& ax = axes_[static_cast<std::size_t>(t)];
        if (ax.coord < 0 || ax.coord >= n)
            throw std::invalid_argument("Grid: axis coordinate out of range");
        if (coord_axis_[static_cast<std::size_t>(ax.coord)] != -1)
            throw std::invalid_argument("Grid: duplicate axis coordinate");
        if (ax.npts < 8) throw std::invalid_argument("Grid: need at least 8 points per axis");
        coord_axis_[static_cast<std::size_t>(ax.coord)] = t;
    }
    frozen_ = std::move(frozen);
    frozen_.resize(static_cast<std::size_t>(n), 0.0);
    if (model_.chart == ChartKind::HyperbolicHalfSpace && coord_axis_[0] == -1)
        throw std::invalid_argument("Grid: hyperbolic grids must make x_0 active");
    if (model_.chart == ChartKind::SphereStereographic &&
        naxes() != n)
        throw std::invalid_argument("Grid: sphere grids must cover all coordinates");

    // Row-major strides: last axis fastest.
    strides_.assign(axes_.size(), 1);
    nodes_ = 1;
    for (int t = naxes() - 1; t >= 0; --t) {
        strides_[static_cast<std::size_t>(t)] = nodes_;
        nodes_ *= static_cast<std::size_t>(axes_[static_cast<std::size_t>(t)].npts);
    }
    cell_ = 1.0;
    for (const Axis& ax : axes_) cell_ *= ax.spacing();

    d1_.resize(axes_.size());
    d2_.resize(axes_.size());
    line_base_.resize(axes_.size());
    for (int t = 0; t < naxes(); ++t) {
        d1_[static_cast<std::size_t>(t)] = build_matrix(axes_[static_cast<std::size_t>(t)], 1);
        d2_[static_cast<std::size_t>(t)] = build_matrix(axes_[static_cast<std::size_t>(t)], 2);
        auto& bases = line_base_[static_cast<std::size_t>(t)];
        const std::size_t N = static_cast<std::size_t>(axes_[static_cast<std::size_t>(t)].npts);
        const std::size_t stride = strides_[static_cast<std::size_t>(t)];
        bases.reserve(nodes_ / N);
        for (std::size_t node = 0; node < nodes_; ++node)
            if ((node / stride) % N == 0) bases.push_back(node);
    }

    flat_ = (model_.chart == ChartKind::FlatTorus);
    if (!flat_) {
        phi_.resize(nodes_);
        phinv2_.resize(nodes_);
        psi_.resize(nodes_ * static_cast<std::size_t>(n));
        wt_.resize(nodes_);
        std::vector<double> x(static_cast<std::size_t>(n));
        for (std::size_t node = 0; node < nodes_; ++node) {
            coords(node, x.data());
            const double p = model_.conf(x.data());
            phi_[node] = p;
            phinv2_[node] = 1.0 / (p * p);
            model_.psi(x.data(), &psi_[node * static_cast<std::size_t>(n)]);
            wt_[node] = std::pow(p, n) * cell_;
        }
    }
}

void Grid::coords(std::size_t node, double* x) const {
    for (int j = 0; j < n(); ++j) x[j] = frozen_[static_cast<std::size_t>(j)];
    for (int t = 0; t < naxes(); ++t) {
        const Axis& ax = axes_[static_cast<std::size_t>(t)];
        const std::size_t i = (node / strides_[static_cast<std::size_t>(t)]) %
                              static_cast<std::size_t>(ax.npts);
        x[ax.coord] = ax.x0 + (static_cast<double>(i) + 0.5) * ax.spacing();
    }
}

double Grid::volume() const {
    if (flat_) return cell_ * static_cast<double>(nodes_);
    double v = 0.0;
    for (std::size_t node = 0; node < nodes_; ++node) v += wt_[node];
    return v;
}

void Grid::apply_matrix(const std::vector<double>& D, int t,
                        const double* a, double* out) const {
    const std::size_t N = static_cast<std::size_t>(axes_[static_cast<std::size_t>(t)].npts);
    const std::size_t stride = strides_[static_cast<std::size_t>(t)];
    std::vector<double> buf(N);
    for (const std::size_t base : line_base_[static_cast<std::size_t>(t)]) {
        for (std::size_t m = 0; m < N; ++m) buf[m] = a[base + m * stride];
        const double* row = D.data();
        for (std::size_t j = 0; j < N; ++j, row += N) {
            double acc = 0.0;
            for (std::size_t m = 0; m < N; ++m) acc += row[m] * buf[m];
            out[base + j * stride] = acc;
        }
    }
}

void Grid::dx(int t, const double* a, double* out) const {
    apply_matrix(d1_[static_cast<std::size_t>(t)], t, a, out);
}

void Grid::dxx(int t, const double* a, double* out) const {
    apply_matrix(d2_[static_cast<std::size_t>(t)], t, a, out);
}

int Grid::edge_cells(int t, std::size_t node) const {
    const int N = axes_[static_cast<std::size_t>(t)].npts;
    const int i = static_cast<int>((node / strides_[static_cast<std::size_t>(t)]) %
                                   static_cast<std::size_t>(N));
    return i < N - 1 - i ? i : N - 1 - i;
}

void metric_at(const Grid& g, std::size_t node, double* h) {
    std::vector<double> x(static_cast<std::size_t>(g.n()));
    if (node >= g.nodes()) throw std::out_of_range("metric_at: node out of range");
    g.coords(node, x.data());
    g.model().metric_at(x.data(), h);
}

void christoffel_at(const Grid& g, std::size_t node, double* G) {
    std::vector<double> x(static_cast<std::size_t>(g.n()));
    if (node >= g.nodes()) throw std::out_of_range("christoffel_at: node out of range");
    g.coords(node, x.data());
    g.model().christoffel_at(x.data(), G);
}

double volume_weight_at(const Grid& g, std::size_t node) {
    if (node >= g.nodes()) throw std::out_of_range("volume_weight_at: node out of range");
    return g.weight(node);
}

Grid torus_grid(const ModelSpace& m, int npts, AxisScheme s, int active) {
    if (active < 0) active = m.n;
    std::vector<Axis> axes;
    for (int j = 0; j < active; ++j)
        axes.push_back(Axis{j, npts, 0.0, m.period, s});
    return Grid(m, std::move(axes));
}

Grid slab_grid(const ModelSpace& m, int npts_x, int npts_y, AxisScheme s) {
    const double len = m.x_max - m.x_min;
    std::vector<Axis> axes;
    axes.push_back(Axis{0, npts_x, m.x_min, len, s});
    axes.push_back(Axis{1, npts_y, -0.5 * len, len, s});
    return Grid(m, std::move(axes));
}

Grid sphere_grid(const ModelSpace& m, int npts, AxisScheme s, double box) {
    std::vector<Axis> axes;
    for (int j = 0; j < m.n; ++j)
        axes.push_back(Axis{j, npts, -box, 2.0 * box, s});
    return Grid(m, std::move(axes));
}

} // namespace bachflow
