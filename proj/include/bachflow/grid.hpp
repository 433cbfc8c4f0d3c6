#pragma once
#include "bachflow/chart.hpp"

#include <cstddef>
#include <vector>

namespace bachflow {

// Differentiation scheme along one grid axis.  All three build a dense
// N x N circulant matrix so a single application path serves every case:
//   Spectral — trigonometric-interpolation derivative (exact for resolved
//              Fourier modes; the unpaired N/2 mode is dropped from D1)
//   FD4/FD6  — centered finite differences of order 4 / 6 with wraparound
// Wraparound indexing is harmless for non-periodic charts because every
// differentiated field is compactly supported inside a declared margin.
enum class AxisScheme { Spectral, FD4, FD6 };

struct Axis {
    int coord = 0;          // which chart coordinate this axis varies
    int npts = 16;
    double x0 = 0.0;        // coordinate of node 0
    double length = 1.0;    // box length; spacing = length / npts
    AxisScheme scheme = AxisScheme::Spectral;
    double spacing() const { return length / npts; }
};

// A structured grid over 1..4 active chart coordinates of a ModelSpace.
// Coordinates not covered by an axis are frozen at fixed values, which is
// valid whenever the chart data depends only on active coordinates (true
// for the torus, and for the hyperbolic chart when axis 0 covers x_0; the
// sphere factor depends on all coordinates, so sphere grids are full-
// dimensional).  Component arrays are indexed row-major over the axes.
class Grid {
public:
    Grid(const ModelSpace& model, std::vector<Axis> axes,
         std::vector<double> frozen = {});

    const ModelSpace& model() const { return model_; }
    int n() const { return model_.n; }
    int naxes() const { return static_cast<int>(axes_.size()); }
    const Axis& axis(int t) const { return axes_[static_cast<std::size_t>(t)]; }
    std::size_t nodes() const { return nodes_; }
    std::size_t stride(int t) const { return strides_[static_cast<std::size_t>(t)]; }

    // Axis position handling a chart coordinate, or -1 if frozen.
    int coord_axis(int coordIdx) const { return coord_axis_[static_cast<std::size_t>(coordIdx)]; }

    // Full n-vector of chart coordinates at a node.
    void coords(std::size_t node, double* x) const;

    bool flat() const { return flat_; }              // Gamma == 0, phi == 1
    double conf(std::size_t node) const { return flat_ ? 1.0 : phi_[node]; }
    double inv2(std::size_t node) const { return flat_ ? 1.0 : phinv2_[node]; }
    // psi vector (n entries) at a node; null for flat charts.
    const double* psi(std::size_t node) const {
        return flat_ ? nullptr : &psi_[node * static_cast<std::size_t>(model_.n)];
    }

    double cell() const { return cell_; }            // product of spacings
    // Quadrature weight sqrt(det h) x cell measure.
    double weight(std::size_t node) const {
        return flat_ ? cell_ : wt_[node];
    }
    // Total chart-box volume by quadrature.
    double volume() const;

    // First / second derivative of one component array along axis t.
    void dx(int t, const double* a, double* out) const;
    void dxx(int t, const double* a, double* out) const;

    // Distance (in cells) from a node to the nearest box edge along axis t.
    int edge_cells(int t, std::size_t node) const;

private:
    void apply_matrix(const std::vector<double>& D, int t,
                      const double* a, double* out) const;

    ModelSpace model_;
    std::vector<Axis> axes_;
    std::vector<double> frozen_;       // length n; active entries ignored
    std::vector<int> coord_axis_;      // length n
    std::vector<std::size_t> strides_;
    std::size_t nodes_ = 0;
    double cell_ = 1.0;
    bool flat_ = false;

    std::vector<std::vector<double>> d1_, d2_;            // dense per-axis
    std::vector<std::vector<std::size_t>> line_base_;     // per-axis line starts
    std::vector<double> phi_, phinv2_, psi_, wt_;         // per-node tables
};

// Closed-form background data at a grid node (spec'd accessors).
void metric_at(const Grid& g, std::size_t node, double* h);
void christoffel_at(const Grid& g, std::size_t node, double* G);
double volume_weight_at(const Grid& g, std::size_t node);

// Convenience constructors used throughout the test and experiment code.
// torus_grid: all n coordinates active unless `active` (< n) is given.
Grid torus_grid(const ModelSpace& m, int npts, AxisScheme s, int active = -1);
// slab_grid: axis 0 covers x in [x_min, x_max], axis 1 one transverse
// periodic coordinate of the same extent; remaining coordinates frozen at
// the slab midpoint.
Grid slab_grid(const ModelSpace& m, int npts_x, int npts_y, AxisScheme s);
// sphere_grid: all n coordinates active on [-box, box]^n.
Grid sphere_grid(const ModelSpace& m, int npts, AxisScheme s, double box = 1.25);

} // namespace bachflow
