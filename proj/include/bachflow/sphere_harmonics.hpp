#pragma once
#include <Eigen/Dense>

#include <vector>

namespace bachflow {

// Exact Galerkin treatment of the pure-trace component on the round
// n-sphere of curvature +1.
//
// Basis elements are restrictions to S^n of harmonic homogeneous
// polynomials in n+1 variables, degrees 1..kmax.  The constant (degree 0)
// is excluded: the flow preserves volume, so admissible trace
// perturbations are mean-zero.  Every inner product reduces to monomial
// moments over the sphere, which have closed forms, so the mass and
// gradient matrices are exact up to round-off and no grid is involved.
//
// Only polynomial algebra enters the assembly.  With P, Q homogeneous of
// degrees k, l and degree-zero extensions off the sphere,
//
//   (f, g)                   = int_S P Q,
//   (grad f, grad g)         = int_S DP . DQ  -  k l  int_S P Q,
//
// and the spherical Laplacian is recovered weakly as the matrix of the
// gradient form in the mass-orthonormal frame (the span is invariant, so
// the weak representation is exact).  Computed eigenvalues therefore
// cross-check the closed forms lambda_k = k(k+n-1) and the trace-component
// eigenvalue of the linearization, -lambda^2/2 + (n/2) lambda, rather than
// assuming them.
struct HarmonicBasis {
    int n = 0;               // sphere dimension
    int kmax = 0;            // highest polynomial degree included
    std::vector<int> degree; // degree of each basis element
    Eigen::MatrixXd mass;    // (Y_i, Y_j)
    Eigen::MatrixXd grad;    // (grad Y_i, grad Y_j)
};

HarmonicBasis harmonic_basis(int n, int kmax);

// Dimension of the degree-k spherical-harmonic space on S^n.
int harmonic_dimension(int n, int k);

// Closed forms: scalar Laplacian eigenvalue k(k+n-1) (with the sign
// convention Delta Y = -lambda Y) and the trace-component eigenvalue
// -lambda^2/2 + (n/2) lambda of the linearized operator at c = +1.
double sphere_laplace_eigenvalue(int n, int k);
double sphere_trace_eigenvalue(int n, int k);

// Symmetric matrix of the scalar Laplacian in the mass-orthonormal frame
// (nonpositive spectrum), and of the trace component of the linearized
// operator, f -> -1/2 Delta^2 f - (n/2) Delta f.  Both are assembled from
// mass and grad only.
Eigen::MatrixXd laplace_matrix(const HarmonicBasis& B);
Eigen::MatrixXd trace_operator_matrix(const HarmonicBasis& B);

// Eigenvalues of trace_operator_matrix, sorted ascending.
std::vector<double> trace_spectrum(const HarmonicBasis& B);

// Numerical null space of the trace operator: the singular values are
// sorted ascending and split at the largest consecutive ratio; `dimension`
// counts those below the split and `separation` is the ratio across it.
struct KernelInfo {
    int dimension = 0;
    double separation = 0.0;
};
KernelInfo trace_kernel(const HarmonicBasis& B);

} // namespace bachflow
