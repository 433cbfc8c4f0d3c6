#pragma once
#include "bachflow/chart.hpp"

#include <cstdint>
#include <unordered_map>
#include <vector>

namespace bachflow {

// Grid-free counterparts of the field calculus, built on two exact scalar
// types that share one templated tensor pipeline:
//
//   Jet    — the degree-4 Taylor expansion of a smooth function at one chart
//            point.  Ring operations are exact on the stored coefficients and
//            each derivative lowers the trusted degree by one (tracked in
//            order()), so any expression applying at most four derivatives to
//            degree-4 data still has an exact value().  This evaluates the
//            nonlinear curvature quantities and the flow right-hand side
//            pointwise, with no stencil truncation error and no boundary or
//            wrap-seam caveats — the independent oracle for the grid pipeline
//            and the workhorse for derivative checks of the linearization.
//
//   CPoly  — the ring of finite sums  coef * x^alpha * (1+|x|^2)^(-t)  on the
//            stereographic chart.  The chart data (phi = 2/(1+|x|^2), psi,
//            phi^-2) lives inside the ring, the ring is closed under the
//            covariant calculus, and every element has a closed-form integral
//            over R^n (Gamma-function moments).  Round-sphere L2 inner
//            products of polynomial-type fields are therefore evaluated
//            exactly, with no quadrature grid at all.
//
// The two scalar backends are independent implementations run through the
// same templated index logic; the grid pipeline shares no code with either.
// Cross-checks pairing them (jet vs grid at a node, jet vs ring at a point)
// appear in the test suite.

// ---------------------------------------------------------------------- Jet

// Truncated Taylor expansion of degree 4 in nvar <= 6 variables about an
// implicit base point.  Coefficients are Taylor-normalized: the stored value
// for multi-index alpha is  (d^alpha f)(x0) / alpha!,  so multiplication is a
// plain truncated polynomial product.  order() is the highest total degree
// whose coefficients are still those of the represented function; it starts
// at 4 and drops by one per derivative (coefficients above order() are kept
// but must not be trusted).  value() requires order() >= 0, which holds for
// any expression with at most four derivatives — exactly the budget of the
// fourth-order operators in this project.
class Jet {
  public:
    Jet() = default;            // unusable placeholder (nvar 0)
    explicit Jet(int nvar);     // zero jet, order 4
    static Jet constant(int nvar, double value);
    static Jet variable(int nvar, int var, double center);

    int nvar() const { return nv; }
    int order() const { return ord; }
    double value() const;
    // Taylor coefficient f^(alpha)/alpha!; alpha.size() must equal nvar().
    double coeff(const std::vector<int>& alpha) const;
    void set_coeff(const std::vector<int>& alpha, double v);
    const std::vector<double>& coeffs() const { return a; }

    Jet operator+(const Jet& o) const;
    Jet operator-(const Jet& o) const;
    Jet operator*(const Jet& o) const;
    Jet operator-() const;
    Jet& operator+=(const Jet& o);
    Jet& operator-=(const Jet& o);
    Jet scaled(double s) const;
    Jet& scale(double s);

    // d/dx_v; trusted degree drops by one (requires order() >= 1).
    Jet derivative(int v) const;

    // 1/f; requires value() != 0.  Exact in truncated arithmetic.
    Jet reciprocal() const;

  private:
    int nv = 0;
    int ord = 4;
    std::vector<double> a;
};

Jet jsqrt(const Jet& f); // requires value() > 0
Jet jexp(const Jet& f);
Jet jsin(const Jet& f);
Jet jcos(const Jet& f);

// Max coefficient difference over the shared trusted degree range.
double jet_distance(const Jet& x, const Jet& y);

// -------------------------------------------------------------------- CPoly

// Sparse element of the ring spanned by  x^alpha * u^(-t),  u = 1 + |x|^2,
// with integer t of either sign and exponents alpha_i >= 0.  Closed under
// +, *, and d/dx_i:  d_i (x^a u^-t) = a_i x^(a-e_i) u^-t - 2t x^(a+e_i)
// u^-(t+1).  Representations are not unique (u itself equals 1 + sum x_i^2),
// so comparisons go through value_at() or integral(), never term lists.
class CPoly {
  public:
    CPoly() = default;          // unusable placeholder (nvar 0)
    explicit CPoly(int nvar);   // zero element
    static CPoly constant(int nvar, double v);
    // coef * x^alpha * u^(-upow); alpha.size() must equal nvar.
    static CPoly term(int nvar, double coef, const std::vector<int>& alpha, int upow);

    int nvar() const { return nv; }
    std::size_t terms() const { return a.size(); }

    CPoly operator+(const CPoly& o) const;
    CPoly operator-(const CPoly& o) const;
    CPoly operator*(const CPoly& o) const;
    CPoly operator-() const;
    CPoly& operator+=(const CPoly& o);
    CPoly& operator-=(const CPoly& o);
    CPoly scaled(double s) const;
    CPoly& scale(double s);

    CPoly derivative(int v) const;

    double value_at(const double* x) const;
    double value_at(const std::vector<double>& x) const;

    // Exact integral over R^n:  int x^alpha u^-t dx = [prod Gamma(b_i)] *
    // Gamma(t - sum b_i) / Gamma(t)  with b_i = (alpha_i + 1)/2, and zero
    // when any alpha_i is odd.  Throws std::domain_error if any term with a
    // nonzero coefficient fails the convergence condition t > sum b_i —
    // integrands must decay termwise, which well-chosen samplers guarantee.
    double integral() const;

    // Drop terms with |coef| <= atol (default: exact zeros only).
    void prune(double atol = 0.0);

  private:
    int nv = 0;
    std::unordered_map<std::uint64_t, double> a;
};

// --------------------------------------------------------- germ tensor layer

// Background chart data at germ level: phi, phi^2, phi^-2 and psi_i as ring
// elements of the scalar type S.  flat marks the torus chart (psi == 0,
// phi == 1), which lets the hot loops skip no-op products.
template <class S>
struct GermChart {
    int n = 0;
    int c = 0;
    bool flat = false;
    S conf, conf2, inv2;
    std::vector<S> psi;
};

// Taylor data of the chart at the point x (n entries); slab charts require
// x[0] > 0.  Built by jet arithmetic from closed forms, independent of the
// tabulated per-node chart data the grids use.
GermChart<Jet> jet_chart(const ModelSpace& m, const double* x);

// Global closed-form chart of the round unit sphere in the CPoly ring.
GermChart<CPoly> ring_sphere_chart(int n);

// Dense tensor of germ scalars, component-major with the last index fastest
// (same packing as Field).
template <class S>
struct GermTensor {
    int n = 0;
    int rank = 0;
    std::vector<S> comp;

    GermTensor() = default;
    GermTensor(int n_, int rank_) : n(n_), rank(rank_) {
        std::size_t m = 1;
        for (int t = 0; t < rank_; ++t) m *= static_cast<std::size_t>(n_);
        comp.assign(m, S(n_));
    }
    std::size_t comps() const { return comp.size(); }
    std::size_t ix2(int i, int j) const {
        return static_cast<std::size_t>(i * n + j);
    }
    std::size_t ix3(int i, int j, int k) const {
        return static_cast<std::size_t>((i * n + j) * n + k);
    }
    std::size_t ix4(int i, int j, int k, int l) const {
        return static_cast<std::size_t>(((i * n + j) * n + k) * n + l);
    }

    GermTensor& operator+=(const GermTensor& o) {
        for (std::size_t k = 0; k < comp.size(); ++k) comp[k] += o.comp[k];
        return *this;
    }
    GermTensor& operator-=(const GermTensor& o) {
        for (std::size_t k = 0; k < comp.size(); ++k) comp[k] -= o.comp[k];
        return *this;
    }
    GermTensor& operator*=(double s) {
        for (std::size_t k = 0; k < comp.size(); ++k) comp[k].scale(s);
        return *this;
    }
};

template <class S>
void axpy(GermTensor<S>& out, double s, const GermTensor<S>& w) {
    for (std::size_t k = 0; k < out.comp.size(); ++k) out.comp[k] += w.comp[k].scaled(s);
}

// Covariant calculus on germs, mirroring the Field versions (same operator
// conventions: derivative index appended last, divergence = -v_{ij,}{}^j,
// conformal Killing operator exactly trace-free, raised indices via phi^-2).
template <class S> GermTensor<S> partial_derivative(const GermTensor<S>& u);
template <class S>
GermTensor<S> covariant_derivative(const GermChart<S>& ch, const GermTensor<S>& u);
template <class S>
GermTensor<S> contract_pair(const GermChart<S>& ch, const GermTensor<S>& u, int slotA,
                            int slotB);
template <class S> GermTensor<S> trace_of(const GermChart<S>& ch, const GermTensor<S>& v);
template <class S> GermTensor<S> times_metric(const GermChart<S>& ch, const GermTensor<S>& f);
template <class S>
GermTensor<S> traceless_part(const GermChart<S>& ch, const GermTensor<S>& v);
template <class S> GermTensor<S> swap_slots(const GermTensor<S>& u, int slotA, int slotB);
template <class S>
GermTensor<S> symmetrize_pair(const GermTensor<S>& u, int slotA, int slotB);
template <class S> GermTensor<S> divergence(const GermChart<S>& ch, const GermTensor<S>& v);
template <class S> GermTensor<S> div_vector(const GermChart<S>& ch, const GermTensor<S>& v);
template <class S> GermTensor<S> delta_star(const GermChart<S>& ch, const GermTensor<S>& om);
template <class S>
GermTensor<S> conformal_killing(const GermChart<S>& ch, const GermTensor<S>& om);
template <class S>
GermTensor<S> rough_laplacian(const GermChart<S>& ch, const GermTensor<S>& u);
template <class S> GermTensor<S> grad_scalar(const GermChart<S>& ch, const GermTensor<S>& f);
template <class S>
GermTensor<S> hodge_dstar_1form(const GermChart<S>& ch, const GermTensor<S>& al);
template <class S> GermTensor<S> metric_field(const GermChart<S>& ch);

// The linearized operator at the chart's background, germ-level mirror of
// apply_L_general / apply_L on grids (same coefficients, same gauge default).
template <class S>
GermTensor<S> apply_L_general(const GermChart<S>& ch, const GermTensor<S>& v, double mu,
                              double nu);
template <class S> GermTensor<S> apply_L(const GermChart<S>& ch, const GermTensor<S>& v);

// L2 inner product on the CPoly ring: all indices contracted with phi^-2,
// integrated against phi^n dx over the whole chart — the exact round-sphere
// pairing for ring-valued fields.
CPoly l2_integrand(const GermChart<CPoly>& ch, const GermTensor<CPoly>& u,
                   const GermTensor<CPoly>& w);
double l2_inner(const GermChart<CPoly>& ch, const GermTensor<CPoly>& u,
                const GermTensor<CPoly>& w);
double l2_norm2(const GermChart<CPoly>& ch, const GermTensor<CPoly>& u);

// ------------------------------------------------- nonlinear pipeline (jets)

// Pointwise mirrors of the grid curvature pipeline.  Jets differentiate
// exactly, so none of the background-splitting tricks the grids need apply
// here; the formulas are otherwise identical, which is what makes these
// useful as an independent oracle.  All quantities are fourth order in the
// metric at most, so values are exact for order-4 input jets.
GermTensor<Jet> invert_sym2(const GermTensor<Jet>& gfull); // Newton iteration
GermTensor<Jet> c_tensor(const GermChart<Jet>& ch, const GermTensor<Jet>& w,
                         const GermTensor<Jet>& ginv);
GermTensor<Jet> g_covariant(const GermChart<Jet>& ch, const GermTensor<Jet>& u,
                            const GermTensor<Jet>& ctensor);
GermTensor<Jet> g_trace(const GermTensor<Jet>& u, int slotA, int slotB,
                        const GermTensor<Jet>& ginv);
GermTensor<Jet> raise_both(const GermTensor<Jet>& p, const GermTensor<Jet>& ginv);
GermTensor<Jet> kulkarni_nomizu(const GermTensor<Jet>& a, const GermTensor<Jet>& b);

struct JetCurvature {
    GermTensor<Jet> gfull, ginv, ctensor;
    GermTensor<Jet> riem, ric, scal, schouten, weyl; // scal has rank 0
};

JetCurvature curvature_of(const GermChart<Jet>& ch, const GermTensor<Jet>& w);
GermTensor<Jet> bach_tensor(const GermChart<Jet>& ch, const JetCurvature& cs);
GermTensor<Jet> bianchi_operator(const GermChart<Jet>& ch, const GermTensor<Jet>& w);
GermTensor<Jet> gauge_one_form(const GermChart<Jet>& ch, const GermTensor<Jet>& w,
                               double mu, double nu);
GermTensor<Jet> delta_star_g(const GermChart<Jet>& ch, const GermTensor<Jet>& omega,
                             const GermTensor<Jet>& ctensor);
GermTensor<Jet> flow_rhs(const GermChart<Jet>& ch, const GermTensor<Jet>& w, double mu,
                         double nu);
// Gauge defaults matching the grid version: mu = -c(n-1)/2, nu = -c/4.
GermTensor<Jet> flow_rhs(const GermChart<Jet>& ch, const GermTensor<Jet>& w);

} // namespace bachflow
