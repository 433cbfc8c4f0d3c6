#include "bachflow/linearized.hpp"

#include <utility>

namespace bachflow {

namespace {

// Shared assembly for L and its adjoint: the two differ only in which of
// (div div v) h and Hess(tr v) carries -c and which carries -(c-4nu)/2.
// Zero coefficients skip their term entirely (on the flat background with
// mu = nu = 0 the operator collapses to -1/2 Lap^2).
Field l_core(const Field& v, double mu, double nu, bool adjoint) {
    const Grid& g = *v.grid;
    const int n = g.n();
    const double c = g.model().c;

    Field lap = rough_laplacian(v);
    Field out = rough_laplacian(lap);
    out *= -0.5;
    if (c != 0.0) axpy(out, c * (n + 2) / 2.0, lap);

    const double a_pair = (c - 2.0 * mu) / 2.0;
    if (a_pair != 0.0) {
        Field dvec = covariant_derivative(div_vector(v));
        axpy(out, 2.0 * a_pair, symmetrize_pair(dvec, 0, 1));
    }

    double a_ddh = -c;
    double a_hess = -(c - 4.0 * nu) / 2.0;
    if (adjoint) std::swap(a_ddh, a_hess);

    if (a_ddh != 0.0)
        axpy(out, a_ddh, times_metric(hodge_dstar_1form(divergence(v))));

    if (c != 0.0 || a_hess != 0.0) {
        Field tr = trace_of(v);
        if (c != 0.0) {
            axpy(out, -c, times_metric(rough_laplacian(tr)));
            axpy(out, c * c, times_metric(tr));
        }
        if (a_hess != 0.0)
            axpy(out, a_hess, covariant_derivative(covariant_derivative(tr)));
    }
    if (c != 0.0) axpy(out, -c * c * n, v);
    return out;
}

} // namespace

Field apply_L_general(const Field& v, double mu, double nu) {
    return l_core(v, mu, nu, false);
}

Field apply_L_adjoint_general(const Field& v, double mu, double nu) {
    return l_core(v, mu, nu, true);
}

Field apply_L(const Field& v) {
    const double c = v.grid->model().c;
    const int n = v.grid->n();
    return l_core(v, -c * (n - 1) / 2.0, -c / 4.0, false);
}

Field apply_L_trace(const Field& f) {
    const double c = f.grid->model().c;
    const int n = f.grid->n();
    Field lap = rough_laplacian(f);
    Field out = rough_laplacian(lap);
    out *= -0.5;
    if (c != 0.0) axpy(out, -c * n / 2.0, lap);
    return out;
}

Field apply_L_tt(const Field& v) {
    const double c = v.grid->model().c;
    const int n = v.grid->n();
    Field lap = rough_laplacian(v);
    Field out = rough_laplacian(lap);
    out *= -0.5;
    if (c != 0.0) {
        axpy(out, c * (n + 2) / 2.0, lap);
        axpy(out, -c * c * n, v);
    }
    return out;
}

double quadratic_form(const Field& v) { return l2_inner(v, apply_L(v)); }

Field linearized_ricci(const Field& v) {
    const Grid& g = *v.grid;
    const int n = g.n();
    const double c = g.model().c;

    Field out = rough_laplacian(v);
    out *= -0.5;
    Field dvec = covariant_derivative(div_vector(v));
    out += symmetrize_pair(dvec, 0, 1);
    Field tr = trace_of(v);
    axpy(out, -0.5, covariant_derivative(covariant_derivative(tr)));
    if (c != 0.0) {
        axpy(out, -c, times_metric(tr));
        axpy(out, c * n, v);
    }
    return out;
}

Field linearized_scal(const Field& v) {
    const double c = v.grid->model().c;
    const int n = v.n();

    Field tr = trace_of(v);
    Field out = rough_laplacian(tr);
    out *= -1.0;
    out += hodge_dstar_1form(divergence(v));
    if (c != 0.0) axpy(out, -c * (n - 1), tr);
    return out;
}

Field linearized_schouten(const Field& v) {
    const Grid& g = *v.grid;
    const int n = g.n();
    const double c = g.model().c;
    const double q = 1.0 / (n - 2);
    const double r = 1.0 / (2.0 * (n - 1) * (n - 2));

    Field out = rough_laplacian(v);
    out *= -0.5 * q;
    Field dvec = covariant_derivative(div_vector(v));
    axpy(out, q, symmetrize_pair(dvec, 0, 1));
    Field tr = trace_of(v);
    axpy(out, -0.5 * q, covariant_derivative(covariant_derivative(tr)));
    axpy(out, r, times_metric(rough_laplacian(tr)));
    axpy(out, -r, times_metric(hodge_dstar_1form(divergence(v))));
    if (c != 0.0) {
        axpy(out, -c * 0.5 * q, times_metric(tr));
        axpy(out, c * n * 0.5 * q, v);
    }
    return out;
}

} // namespace bachflow
