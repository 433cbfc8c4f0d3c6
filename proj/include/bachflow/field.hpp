#pragma once
#include "bachflow/grid.hpp"
#include "bachflow/rng.hpp"

#include <cstddef>
#include <vector>

namespace bachflow {

// A rank-k covariant tensor field sampled on a Grid.  Components are stored
// component-major: a[comp * nodes + node], with the component multi-index
// packed row-major (last tensor index fastest).  Covariant differentiation
// appends its index at the end, so the derivative index of grad(u) is the
// fastest-varying one.
struct Field {
    const Grid* grid = nullptr;
    int rank = 0;
    std::vector<double> a;

    Field() = default;
    Field(const Grid& g, int r);

    int n() const { return grid->n(); }
    std::size_t nodes() const { return grid->nodes(); }
    std::size_t comps() const;
    double* comp(std::size_t c) { return a.data() + c * nodes(); }
    const double* comp(std::size_t c) const { return a.data() + c * nodes(); }

    // Pack helpers for low ranks.
    std::size_t ix2(int i, int j) const { return static_cast<std::size_t>(i * n() + j); }
    std::size_t ix3(int i, int j, int k) const {
        return static_cast<std::size_t>((i * n() + j) * n() + k);
    }
    std::size_t ix4(int i, int j, int k, int l) const {
        return static_cast<std::size_t>(((i * n() + j) * n() + k) * n() + l);
    }

    void zero();
    Field& operator+=(const Field& o);
    Field& operator-=(const Field& o);
    Field& operator*=(double s);
};

std::size_t ipow(int b, int e);

Field operator+(Field u, const Field& w);
Field operator-(Field u, const Field& w);
Field operator*(double s, Field u);

// u += s * w
void axpy(Field& u, double s, const Field& w);

// Pointwise sup of the full component block.
double linf(const Field& u);

// Shape of the random test fields below.  `sharp` is the exponent scale a
// of the bump envelope exp(a - a/(1-t^2)); larger a trades amplitude near
// the support edge for a faster-decaying Fourier tail (measured tail of the
// spectral derivative: 1.4e-4 at a=5, N=48; 1.1e-10 at a=12, N=96).
struct FieldSpec {
    int max_mode = 3;
    double amplitude = 1.0;
    double sharp = 5.0;
    double support = 0.72; // bump support / half box length
};

// Random smooth test fields: a low-order trigonometric polynomial per
// component, multiplied on non-periodic axes by a C^inf bump so support
// stays inside the chart box with a safe margin.  Deterministic in `rng`.
Field random_field(const Grid& g, int rank, Rng& rng, const FieldSpec& spec = {});

// The bump envelope itself (1 on the torus).
double envelope_at(const Grid& g, std::size_t node, double sharp = 5.0,
                   double support = 0.72);

// Checks that the outermost `cells` grid cells of every non-periodic axis
// carry exactly zero data (compact support margin).
bool margin_is_zero(const Field& u, int cells);

} // namespace bachflow
