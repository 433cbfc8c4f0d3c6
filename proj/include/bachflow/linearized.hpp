#pragma once
#include "bachflow/curvature.hpp"

namespace bachflow {

// Closed-form linearization of the gauge-adjusted fourth-order flow at the
// constant-curvature background, as an operator on symmetric 2-tensor
// perturbations v.  Normalization: the derivative of flow_rhs(., mu, nu) at
// w = 0 is (1/(n-2)) * apply_L_general(., mu, nu); tests check this against
// a symmetric finite difference in the flow parameter.
//
// The operator reads (indices after the comma are covariant derivatives,
// c is the sectional curvature of the background):
//
//   L v = -1/2 Lap^2 v + c(n+2)/2 Lap v
//         - c (div div v) h - c (Lap tr v) h
//         + (c-2mu)/2 (v_{ip,}{}^p{}_j + v_{jp,}{}^p{}_i)
//         - (c-4nu)/2 Hess(tr v) + c^2 (tr v) h - c^2 n v.
//
// Its formal L2 adjoint is the same expression with the coefficients of
// (div div v) h and Hess(tr v) exchanged, so L is self-adjoint exactly at
// mu = -c(n-1)/2, nu = -c/4 (the gauge flow_rhs(w) uses).
Field apply_L_general(const Field& v, double mu, double nu);
Field apply_L_adjoint_general(const Field& v, double mu, double nu);

// Self-adjoint gauge mu = -c(n-1)/2, nu = -c/4.
Field apply_L(const Field& v);

// In the self-adjoint gauge L preserves the pure-trace and the
// transverse-traceless summands; these are the restricted actions.
//   L(f h) = (apply_L_trace f) h,  apply_L_trace f = -1/2 Lap^2 f - cn/2 Lap f
//   L v    = apply_L_tt v = -1/2 Lap^2 v + c(n+2)/2 Lap v - c^2 n v  (v TT)
Field apply_L_trace(const Field& f);
Field apply_L_tt(const Field& v);

// (v, L v) in the quadrature L2 inner product, self-adjoint gauge.
double quadratic_form(const Field& v);

// First variations of curvature at the background, d/ds at s = 0 along
// g = h + s v (independent targets for the finite-difference oracle):
//   Ricci:    -1/2 Lap v + sym pair - 1/2 Hess(tr v) - c (tr v) h + cn v
//   scalar:   -Lap(tr v) + div div v - c(n-1) tr v
//   Schouten: the Ricci/scalar combination P = (Rc - S/(2(n-1)) g)/(n-2)
Field linearized_ricci(const Field& v);
Field linearized_scal(const Field& v);
Field linearized_schouten(const Field& v);

} // namespace bachflow
