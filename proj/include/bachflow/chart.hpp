#pragma once
#include <string>

namespace bachflow {

// The three constant-curvature backgrounds, each presented on a single
// conformally flat chart:  h_ij = phi(x)^2 delta_ij.
//
//   FlatTorus           phi = 1,            c = 0,  periodic box [0,L)^n
//   SphereStereographic phi = 2/(1+|x|^2),  c = +1, radius-1 round sphere
//   HyperbolicHalfSpace phi = 1/x_0,        c = -1, slab x_0 in [x_min, x_max]
//
// Because the chart is conformally flat, the Christoffel symbols are
//   Gamma^k_ij = delta_ik psi_j + delta_jk psi_i - delta_ij psi_k,
// with psi = grad log phi, and every raised index is a pointwise scalar
// factor phi^-2.  All geometry below is closed-form; nothing is ever
// differentiated numerically on the background.
enum class ChartKind { FlatTorus, SphereStereographic, HyperbolicHalfSpace };

struct ModelSpace {
    ChartKind chart = ChartKind::FlatTorus;
    int n = 4;      // manifold dimension
    int c = 0;      // sectional curvature sign: -1, 0, +1
    double period = 1.0;          // torus only
    double x_min = 0.0, x_max = 0.0; // hyperbolic slab only

    // Conformal factor phi(x).
    double conf(const double* x) const;

    // psi_j = (log phi)_{,j} (chart partials).
    void psi(const double* x, double* out) const;

    // dpsi[j*n + m] = partial_m psi_j (chart partials; symmetric in j,m).
    void dpsi(const double* x, double* out) const;

    // h_ij = phi^2 delta_ij.
    void metric_at(const double* x, double* h) const;

    // G[(k*n + i)*n + j] = Gamma^k_{ij}.
    void christoffel_at(const double* x, double* G) const;

    // sqrt(det h) = phi^n.
    double volume_density(const double* x) const;

    // Boundary defining function: x_0 on the hyperbolic chart, 1 otherwise.
    double rho(const double* x) const;

    std::string chart_name() const;
};

// Validates and builds a background.  Parameter meaning depends on chart:
//   FlatTorus:            p0 = period L (> 0), p1 unused
//   SphereStereographic:  radius fixed to 1, p0/p1 unused
//   HyperbolicHalfSpace:  p0 = x_min (> 0), p1 = x_max (> x_min)
// Throws std::invalid_argument on n < 3, x_min <= 0, or a chart whose
// curvature sign does not match c.
ModelSpace make_model(ChartKind chart, int n, int c, double p0 = 1.0, double p1 = 0.0);

} // namespace bachflow
