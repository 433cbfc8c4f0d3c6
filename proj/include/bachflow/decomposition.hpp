#pragma once
#include "bachflow/calculus.hpp"

namespace bachflow {

// Splitting of a symmetric 2-tensor field into the three summands the
// stability analysis works with:
//
//   v = K alpha + f h + tt,
//
// where K alpha = delta* alpha + (1/n)(delta alpha) h is the trace-free
// conformal Killing image, f = tr v / n is the pure-trace scalar, and tt is
// the orthogonal remainder: trace free pointwise, orthogonal to im(K) in
// the quadrature inner product, hence transverse (delta tt = 0) to the
// discretization's accuracy.  alpha solves the normal equation
// K^T K alpha = K^T (traceless part of v) by conjugate gradients, where K^T
// is the exact discrete adjoint of K (so the normal operator is symmetric
// to machine precision and CG is well behaved); on charts without compactly
// supported conformal Killing fields K^T K is positive definite.
//
// On grids whose axes wrap a non-periodic chart (the half-space slab), the
// potential of a compactly supported field does not decay inside the box
// (it is O(1) at the slab faces), so tt = v~ - K alpha carries O(1) content
// across the wrap seam.  All quadrature-level statements -- orthogonality,
// reconstruction, idempotency, component norms -- remain exact, but fields
// returned by the slab split must not be differentiated: circulant
// derivatives across the seam turn the jump into grid-scale noise, which a
// fourth-order quadratic form amplifies by N^4.  Smooth divergence-free
// samplers for Rayleigh-quotient work are constructed directly (stream
// potentials) rather than by projection; on the torus the modal split below
// is exact and seam-free.
struct SplitResult {
    Field alpha;        // potential 1-form
    Field kpart;        // K alpha
    Field trace_scalar; // rank 0, tr v / n
    Field tt;           // traceless part minus kpart
    double rel_residual = 0.0; // |K^T (K alpha - v~)| / |K^T v~|
    int iterations = 0;
};

// Iterative split: conjugate gradients on the normal equation, stopped at
// relative residual `tol` or `maxit` iterations (whichever first; the
// achieved residual is reported, not asserted).
SplitResult split_sym2(const Field& v, double tol = 1e-10, int maxit = 4000);

// The transverse-traceless component alone.
Field tt_project(const Field& v, double tol = 1e-10);

// Exact per-Fourier-mode split on the flat torus (dense DFT along the
// active axes; each mode reduces to a small least-squares problem with a
// closed-form solution).  Cross-validates the iterative path.  Constant
// traceless modes are transverse, so they land in tt.
SplitResult split_torus_modal(const Field& v);

} // namespace bachflow
