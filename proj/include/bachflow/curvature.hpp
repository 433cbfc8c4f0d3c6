#pragma once
#include "bachflow/calculus.hpp"

namespace bachflow {

// Curvature of a perturbed metric g = h + w on a background chart.  All
// numerical derivatives act on w (and tensors built from it); background
// data enters only through closed-form tables, so the background itself is
// never differentiated numerically.
//
// Index conventions:
//   - riem is stored all-lower as R_{ijkl}, normalized so the background
//     value is c (g_il g_jk - g_ik g_jl);
//   - ric_{jk} = g^{il} R_{ijkl}, scal = g^{jk} ric_{jk};
//   - schouten = (ric - scal/(2(n-1)) g) / (n-2);
//   - weyl = riem - kulkarni_nomizu(schouten, g).

// The background metric h as a component field.
Field metric_field(const Grid& g);

// Pointwise inverse / volume density of a full metric field.
Field invert_sym2(const Field& gfull);
Field sqrt_det(const Field& gfull);
double metric_volume(const Field& gfull);

// Contraction of two slots against a pointwise (full-matrix) inverse metric.
Field g_trace(const Field& u, int slotA, int slotB, const Field& ginv);

// Both indices of a symmetric 2-tensor raised: p^{kl} = g^{ka} g^{lb} p_ab.
Field raise_both(const Field& p, const Field& ginv);

// Connection difference C^k_{ij} between g = h + w and h (slot order k,i,j).
Field c_tensor(const Field& w, const Field& ginv);

// Covariant derivative of an all-lower tensor with respect to g's
// connection; derivative index appended last.  The input must be compactly
// supported / periodic (it goes through the numerical derivative).
Field g_covariant(const Field& u, const Field& ctensor);

// Same, for a field that levels off to the h-parallel value kappa * h at
// the box edges (e.g. Ricci with kappa = c(n-1), Schouten with c/2): only
// u - kappa h is differentiated numerically, the Christoffel correction
// sees the full u.
Field g_covariant_about_h(const Field& u, double kappa, const Field& ctensor);

// (a ^ b)_{ijkl} = a_il b_jk + a_jk b_il - a_ik b_jl - a_jl b_ik.
Field kulkarni_nomizu(const Field& a, const Field& b);

struct CurvatureSet {
    Field gfull, ginv, ctensor;
    Field riem, ric, schouten, weyl;
    Field scal;
};

// Closed-form background curvature (no differentiation).
CurvatureSet background_curvature(const Grid& g);

// Full pipeline for g = h + w.
CurvatureSet curvature_of(const Field& w);

// B_ij = P_{ij,k}^k - P_{ik,j}^k + P^{kl} W_{kijl}, everything w.r.t. g.
Field bach_tensor(const CurvatureSet& cs);

// Bianchi one-form of g = h + w relative to h: delta_h g + (1/2) d tr_h g.
// Linear in g and exactly zero at g = h, so it takes the perturbation w
// (keeps h-parallel data away from the numerical derivative).
Field bianchi_operator(const Field& w);

// omega = (1/2) Delta_h beta_h(g) + mu delta_h g + nu d tr_h g; takes the
// perturbation w for the same reason as bianchi_operator.
Field gauge_one_form(const Field& w, double mu, double nu);

// Symmetrized g-covariant derivative of a 1-form.
Field delta_star_g(const Field& omega, const Field& ctensor);

// Right-hand side of the gauge-adjusted flow with parameters (mu, nu).
// The self-adjoint gauge is mu = -c(n-1)/2, nu = -c/4; flow_rhs(w) uses it.
Field flow_rhs(const Field& w, double mu, double nu);
Field flow_rhs(const Field& w);

} // namespace bachflow
