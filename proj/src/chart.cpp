#include "bachflow/chart.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace bachflow {

double ModelSpace::conf(const double* x) const {
    switch (chart) {
        case ChartKind::FlatTorus: return 1.0;
        case ChartKind::SphereStereographic: {
            double r2 = 0.0;
            for (int i = 0; i < n; ++i) r2 += x[i] * x[i];
            return 2.0 / (1.0 + r2);
        }
        case ChartKind::HyperbolicHalfSpace: return 1.0 / x[0];
    }
    return 1.0;
}

void ModelSpace::psi(const double* x, double* out) const {
    switch (chart) {
        case ChartKind::FlatTorus:
            for (int i = 0; i < n; ++i) out[i] = 0.0;
            return;
        case ChartKind::SphereStereographic: {
            // log phi = log 2 - log(1+|x|^2)  =>  psi_j = -2 x_j / (1+|x|^2)
            double r2 = 0.0;
            for (int i = 0; i < n; ++i) r2 += x[i] * x[i];
            const double s = -2.0 / (1.0 + r2);
            for (int i = 0; i < n; ++i) out[i] = s * x[i];
            return;
        }
        case ChartKind::HyperbolicHalfSpace:
            // log phi = -log x_0  =>  psi_0 = -1/x_0
            out[0] = -1.0 / x[0];
            for (int i = 1; i < n; ++i) out[i] = 0.0;
            return;
    }
}

void ModelSpace::dpsi(const double* x, double* out) const {
    std::memset(out, 0, sizeof(double) * n * n);
    switch (chart) {
        case ChartKind::FlatTorus:
            return;
        case ChartKind::SphereStereographic: {
            // psi_j = -2 x_j / u, u = 1+|x|^2:
            // d_m psi_j = -2 delta_mj / u + 4 x_j x_m / u^2
            double r2 = 0.0;
            for (int i = 0; i < n; ++i) r2 += x[i] * x[i];
            const double u = 1.0 + r2;
            for (int j = 0; j < n; ++j)
                for (int m = 0; m < n; ++m)
                    out[j * n + m] = 4.0 * x[j] * x[m] / (u * u) - (j == m ? 2.0 / u : 0.0);
            return;
        }
        case ChartKind::HyperbolicHalfSpace:
            out[0] = 1.0 / (x[0] * x[0]); // d_0 psi_0
            return;
    }
}

void ModelSpace::metric_at(const double* x, double* h) const {
    const double p2 = conf(x) * conf(x);
    std::memset(h, 0, sizeof(double) * n * n);
    for (int i = 0; i < n; ++i) h[i * n + i] = p2;
}

void ModelSpace::christoffel_at(const double* x, double* G) const {
    double ps[16];
    psi(x, ps);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double v = 0.0;
                if (i == k) v += ps[j];
                if (j == k) v += ps[i];
                if (i == j) v -= ps[k];
                G[(k * n + i) * n + j] = v;
            }
}

double ModelSpace::volume_density(const double* x) const {
    return std::pow(conf(x), n);
}

double ModelSpace::rho(const double* x) const {
    return chart == ChartKind::HyperbolicHalfSpace ? x[0] : 1.0;
}

std::string ModelSpace::chart_name() const {
    switch (chart) {
        case ChartKind::FlatTorus: return "flat_torus";
        case ChartKind::SphereStereographic: return "sphere_stereographic";
        case ChartKind::HyperbolicHalfSpace: return "hyperbolic_half_space";
    }
    return "?";
}

ModelSpace make_model(ChartKind chart, int n, int c, double p0, double p1) {
    if (n < 3) throw std::invalid_argument("make_model: dimension must be >= 3");
    if (n > 16) throw std::invalid_argument("make_model: dimension too large (max 16)");
    ModelSpace m;
    m.chart = chart;
    m.n = n;
    m.c = c;
    switch (chart) {
        case ChartKind::FlatTorus:
            if (c != 0) throw std::invalid_argument("make_model: flat torus requires c = 0");
            if (!(p0 > 0.0)) throw std::invalid_argument("make_model: torus period must be > 0");
            m.period = p0;
            break;
        case ChartKind::SphereStereographic:
            if (c != 1) throw std::invalid_argument("make_model: stereographic sphere requires c = +1");
            break;
        case ChartKind::HyperbolicHalfSpace:
            if (c != -1) throw std::invalid_argument("make_model: hyperbolic half-space requires c = -1");
            if (!(p0 > 0.0)) throw std::invalid_argument("make_model: x_min must be > 0");
            if (!(p1 > p0)) throw std::invalid_argument("make_model: x_max must exceed x_min");
            m.x_min = p0;
            m.x_max = p1;
            break;
    }
    return m;
}

} // namespace bachflow
