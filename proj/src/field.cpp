#include "bachflow/field.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace bachflow {

std::size_t ipow(int b, int e) {
    std::size_t r = 1;
    for (int i = 0; i < e; ++i) r *= static_cast<std::size_t>(b);
    return r;
}

Field::Field(const Grid& g, int r) : grid(&g), rank(r) {
    a.assign(ipow(g.n(), r) * g.nodes(), 0.0);
}

std::size_t Field::comps() const { return ipow(n(), rank); }

void Field::zero() { std::fill(a.begin(), a.end(), 0.0); }

Field& Field::operator+=(const Field& o) {
    assert(a.size() == o.a.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += o.a[i];
    return *this;
}

Field& Field::operator-=(const Field& o) {
    assert(a.size() == o.a.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= o.a[i];
    return *this;
}

Field& Field::operator*=(double s) {
    for (double& v : a) v *= s;
    return *this;
}

Field operator+(Field u, const Field& w) { u += w; return u; }
Field operator-(Field u, const Field& w) { u -= w; return u; }
Field operator*(double s, Field u) { u *= s; return u; }

void axpy(Field& u, double s, const Field& w) {
    assert(u.a.size() == w.a.size());
    for (std::size_t i = 0; i < u.a.size(); ++i) u.a[i] += s * w.a[i];
}

double linf(const Field& u) {
    double m = 0.0;
    for (double v : u.a) m = std::max(m, std::fabs(v));
    return m;
}

namespace {

double bump(double t, double a) {
    const double t2 = t * t;
    if (t2 >= 1.0) return 0.0;
    return std::exp(a - a / (1.0 - t2));
}

bool axis_is_periodic(const Grid& g, int t) {
    // The torus chart is periodic; on the hyperbolic slab the transverse
    // axis is an exact translation symmetry of the chart, so periodic
    // wraparound there is geometrically consistent and needs no envelope.
    if (g.model().chart == ChartKind::FlatTorus) return true;
    if (g.model().chart == ChartKind::HyperbolicHalfSpace)
        return g.axis(t).coord != 0;
    return false;
}

} // namespace

double envelope_at(const Grid& g, std::size_t node, double sharp, double support) {
    double e = 1.0;
    std::vector<double> x(static_cast<std::size_t>(g.n()));
    g.coords(node, x.data());
    for (int t = 0; t < g.naxes(); ++t) {
        if (axis_is_periodic(g, t)) continue;
        const Axis& ax = g.axis(t);
        const double center = ax.x0 + 0.5 * ax.length;
        const double half = 0.5 * ax.length * support;
        e *= bump((x[static_cast<std::size_t>(ax.coord)] - center) / half, sharp);
    }
    return e;
}

Field random_field(const Grid& g, int rank, Rng& rng, const FieldSpec& spec) {
    Field u(g, rank);
    const std::size_t nn = g.nodes();
    const int na = g.naxes();
    const int max_mode = spec.max_mode;
    const double amplitude = spec.amplitude;

    // Shared envelope table.
    std::vector<double> env(nn, 1.0);
    if (g.model().chart != ChartKind::FlatTorus)
        for (std::size_t node = 0; node < nn; ++node)
            env[node] = envelope_at(g, node, spec.sharp, spec.support);

    std::vector<double> x(static_cast<std::size_t>(g.n()));
    const int nterms = 4;
    std::vector<double> amp(static_cast<std::size_t>(nterms));
    std::vector<int> mode(static_cast<std::size_t>(nterms * na));
    std::vector<double> phase(static_cast<std::size_t>(nterms * na));

    for (std::size_t c = 0; c < u.comps(); ++c) {
        for (int r = 0; r < nterms; ++r) {
            amp[static_cast<std::size_t>(r)] = amplitude * rng.normal();
            for (int t = 0; t < na; ++t) {
                mode[static_cast<std::size_t>(r * na + t)] =
                    static_cast<int>(rng.below(static_cast<std::uint64_t>(max_mode) + 1));
                phase[static_cast<std::size_t>(r * na + t)] = rng.uniform(0.0, 6.283185307179586);
            }
        }
        double* dst = u.comp(c);
        for (std::size_t node = 0; node < nn; ++node) {
            g.coords(node, x.data());
            double v = 0.0;
            for (int r = 0; r < nterms; ++r) {
                double term = amp[static_cast<std::size_t>(r)];
                for (int t = 0; t < na; ++t) {
                    const Axis& ax = g.axis(t);
                    const double xt = x[static_cast<std::size_t>(ax.coord)];
                    term *= std::cos(6.283185307179586 *
                                         mode[static_cast<std::size_t>(r * na + t)] *
                                         (xt - ax.x0) / ax.length +
                                     phase[static_cast<std::size_t>(r * na + t)]);
                }
                v += term;
            }
            dst[node] = v * env[node];
        }
    }
    return u;
}

bool margin_is_zero(const Field& u, int cells) {
    const Grid& g = *u.grid;
    if (g.model().chart == ChartKind::FlatTorus) return true;
    for (std::size_t node = 0; node < g.nodes(); ++node) {
        int edge = 1 << 20;
        for (int t = 0; t < g.naxes(); ++t) {
            if (axis_is_periodic(g, t)) continue;
            edge = std::min(edge, g.edge_cells(t, node));
        }
        if (edge >= cells) continue;
        for (std::size_t c = 0; c < u.comps(); ++c)
            if (u.comp(c)[node] != 0.0) return false;
    }
    return true;
}

} // namespace bachflow
