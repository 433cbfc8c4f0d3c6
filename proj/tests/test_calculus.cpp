#include <catch2/catch_amalgamated.hpp>

#include "bachflow/calculus.hpp"
#include "bachflow/chart.hpp"
#include "bachflow/field.hpp"
#include "bachflow/grid.hpp"
#include "bachflow/rng.hpp"

#include <cmath>
#include <utility>
#include <vector>

using namespace bachflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

double rel_linf(const Field& a, const Field& b) {
    double scale = std::max(linf(a), linf(b));
    Field d = a;
    d -= b;
    return linf(d) / (scale > 0 ? scale : 1.0);
}

Field sym2(const Field& u) { return symmetrize_pair(u, 0, 1); }

// Antisymmetrize slots (0,2) of a rank-3 field (T*M-valued 2-form layout).
Field alt02(const Field& u) {
    Field out = u;
    out -= swap_slots(u, 0, 2);
    out *= 0.5;
    return out;
}

// Full antisymmetrizer over slots {0,2,3} of a rank-4 field (3-form layout).
Field alt023(const Field& u) {
    Field out = u;
    out -= swap_slots(u, 0, 2);
    out -= swap_slots(u, 0, 3);
    out -= swap_slots(u, 2, 3);
    out += swap_slots(swap_slots(u, 2, 3), 0, 2);
    out += swap_slots(swap_slots(u, 0, 2), 2, 3);
    out *= 1.0 / 6.0;
    return out;
}

// (w x h)_{iik} = h_{ii} w_k  -- the tensor that grad(f h) must equal when
// w = grad f, by metric compatibility of the connection.
Field tensor_with_metric(const Field& w) {
    const Grid& g = *w.grid;
    const int n = g.n();
    Field out(g, 3);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            double* dst = out.comp(out.ix3(i, i, k));
            const double* src = w.comp(static_cast<std::size_t>(k));
            for (std::size_t nd = 0; nd < g.nodes(); ++nd) {
                const double p = g.conf(nd);
                dst[nd] = p * p * src[nd];
            }
        }
    return out;
}

// Covariant derivative assembled the slow way: chart partials plus a raw
// Christoffel contraction from the per-node Gamma table.  The production
// path uses the collapsed conformal form of the correction, so agreement
// here validates that collapse against the chart's own Gamma.
Field raw_covariant(const Field& u) {
    const Grid& g = *u.grid;
    Field out = partial_derivative(u);
    if (g.flat()) return out;
    const int n = g.n();
    const int r = u.rank;
    std::vector<std::size_t> place(static_cast<std::size_t>(r), 1);
    for (int t = r - 2; t >= 0; --t)
        place[static_cast<std::size_t>(t)] =
            place[static_cast<std::size_t>(t + 1)] * static_cast<std::size_t>(n);
    std::vector<double> G(static_cast<std::size_t>(n * n * n));
    std::vector<int> I(static_cast<std::size_t>(r));
    for (std::size_t node = 0; node < g.nodes(); ++node) {
        christoffel_at(g, node, G.data());
        for (std::size_t c = 0; c < u.comps(); ++c) {
            std::size_t cc = c;
            for (int t = r - 1; t >= 0; --t) {
                I[static_cast<std::size_t>(t)] = static_cast<int>(cc % static_cast<std::size_t>(n));
                cc /= static_cast<std::size_t>(n);
            }
            for (int s = 0; s < n; ++s) {
                double corr = 0;
                for (int t = 0; t < r; ++t) {
                    const int it = I[static_cast<std::size_t>(t)];
                    for (int m = 0; m < n; ++m) {
                        const std::size_t cm =
                            c + (static_cast<std::size_t>(m) - static_cast<std::size_t>(it)) *
                                    place[static_cast<std::size_t>(t)];
                        corr += G[static_cast<std::size_t>((m * n + s) * n + it)] *
                                u.comp(cm)[node];
                    }
                }
                out.comp(c * static_cast<std::size_t>(n) + static_cast<std::size_t>(s))[node] -=
                    corr;
            }
        }
    }
    return out;
}

} // namespace

TEST_CASE("collapsed Christoffel correction matches the raw Gamma contraction", "[calculus]") {
    auto mh = make_model(ChartKind::HyperbolicHalfSpace, 4, -1, 0.5, 1.5);
    Grid gh = slab_grid(mh, 16, 16, AxisScheme::FD4);
    auto ms = make_model(ChartKind::SphereStereographic, 4, 1);
    Grid gs = sphere_grid(ms, 10, AxisScheme::FD4);
    for (const Grid* g : {&gh, &gs}) {
        Rng rng(31);
        for (int rank : {1, 2, 3}) {
            Field u = random_field(*g, rank, rng);
            REQUIRE(rel_linf(covariant_derivative(u), raw_covariant(u)) < 1e-12);
        }
    }
}

TEST_CASE("metric compatibility: grad(f h) equals grad f tensor h", "[calculus]") {
    auto mh = make_model(ChartKind::HyperbolicHalfSpace, 4, -1, 0.5, 1.5);
    struct Case {
        Grid g;
        FieldSpec spec;
        double tol;
    };
    FieldSpec gentle;
    gentle.max_mode = 2;
    gentle.sharp = 5.0;
    FieldSpec sharp;
    sharp.max_mode = 2;
    sharp.sharp = 12.0;
    FieldSpec sph;
    sph.max_mode = 1;
    sph.sharp = 2.0;
    auto ms = make_model(ChartKind::SphereStereographic, 4, 1);
    // Tolerances sit ~5x above measured residuals: 1.4e-5 (48-pt spectral,
    // gentle bump), 8.4e-12 (96-pt spectral, sharp bump), 2.0e-2 (16^4 FD6).
    std::vector<Case> cases;
    cases.push_back({slab_grid(mh, 48, 16, AxisScheme::Spectral), gentle, 1e-4});
    cases.push_back({slab_grid(mh, 96, 16, AxisScheme::Spectral), sharp, 1e-10});
    cases.push_back({sphere_grid(ms, 16, AxisScheme::FD6), sph, 8e-2});
    for (const Case& cs : cases) {
        Rng rng(77);
        Field f = random_field(cs.g, 0, rng, cs.spec);
        Field lhs = covariant_derivative(times_metric(f));
        Field rhs = tensor_with_metric(grad_scalar(f));
        REQUIRE(rel_linf(lhs, rhs) < cs.tol);
    }
}

TEST_CASE("divergence of a pure-trace field is minus the gradient", "[calculus]") {
    auto mt = make_model(ChartKind::FlatTorus, 4, 0, 1.0);
    Grid gt = torus_grid(mt, 10, AxisScheme::Spectral, 4);
    auto mh = make_model(ChartKind::HyperbolicHalfSpace, 4, -1, 0.5, 1.5);
    Grid gh = slab_grid(mh, 48, 16, AxisScheme::Spectral);
    FieldSpec spec;
    spec.max_mode = 2;
    spec.sharp = 5.0;
    for (const Grid* g : {&gt, &gh}) {
        Rng rng(5);
        Field f = random_field(*g, 0, rng, spec);
        Field lhs = divergence(times_metric(f));
        Field rhs = grad_scalar(f);
        rhs *= -1.0;
        REQUIRE(rel_linf(lhs, rhs) < (g->flat() ? 1e-13 : 5e-5));
    }
}

TEST_CASE("first-order adjoints hold discretely", "[calculus]") {
    // The divergence/symmetrized-gradient pair and the trace-free variant
    // are adjoint already at the discrete level (antisymmetric derivative
    // matrices), so the residuals are roundoff, not quadrature error.
    auto mt = make_model(ChartKind::FlatTorus, 4, 0, 1.0);
    Grid gt = torus_grid(mt, 10, AxisScheme::Spectral, 4);
    auto mh = make_model(ChartKind::HyperbolicHalfSpace, 4, -1, 0.5, 1.5);
    Grid gh = slab_grid(mh, 48, 16, AxisScheme::Spectral);
    auto ms = make_model(ChartKind::SphereStereographic, 4, 1);
    Grid gs = sphere_grid(ms, 12, AxisScheme::FD4);
    FieldSpec spec;
    spec.max_mode = 2;
    spec.sharp = 5.0;
    for (const Grid* g : {&gt, &gh, &gs}) {
        Rng rng(9);
        Field om = random_field(*g, 1, rng, spec);
        Field v = sym2(random_field(*g, 2, rng, spec));
        const double scale =
            std::sqrt(l2_norm2(delta_star(om)) * l2_norm2(v)) + 1e-30;
        const double a1 = l2_inner(delta_star(om), v);
        const double a2 = l2_inner(om, divergence(v));
        REQUIRE(std::fabs(a1 - a2) / scale < 1e-10);
        Field vt = traceless_part(v);
        const double k1 = l2_inner(conformal_killing(om), vt);
        const double k2 = l2_inner(om, divergence(vt));
        REQUIRE(std::fabs(k1 - k2) / scale < 1e-10);
    }
}

TEST_CASE("covariant exterior derivative pairs adjointly with form factors", "[calculus]") {
    auto mt = make_model(ChartKind::FlatTorus, 4, 0, 1.0);
    Grid gt = torus_grid(mt, 10, AxisScheme::Spectral, 4);
    auto mh = make_model(ChartKind::HyperbolicHalfSpace, 4, -1, 0.5, 1.5);
    Grid gh = slab_grid(mh, 48, 16, AxisScheme::Spectral);
    auto ms = make_model(ChartKind::SphereStereographic, 4, 1);
    Grid gs = sphere_grid(ms, 12, AxisScheme::FD4);
    // Measured: ~5e-12 on both spectral grids, ~2e-2 on the coarse FD sphere.
    struct Case {
        const Grid* g;
        double tol;
    };
    FieldSpec spec;
    spec.max_mode = 2;
    spec.sharp = 5.0;
    FieldSpec sph;
    sph.max_mode = 1;
    sph.sharp = 2.0;
    for (const Case& cs : {Case{&gt, 1e-10}, Case{&gh, 1e-8}, Case{&gs, 8e-2}}) {
        const Grid& g = *cs.g;
        Rng rng(123);
        const FieldSpec& sp = g.model().chart == ChartKind::SphereStereographic ? sph : spec;
        Field eta1 = random_field(g, 2, rng, sp);          // value-valued 1-form
        Field w2 = alt02(random_field(g, 3, rng, sp));     // 2-form
        Field w3 = alt023(random_field(g, 4, rng, sp));    // 3-form
        const double p11 = form_inner(d_nabla(eta1, 1), w2, 2);
        const double p12 = form_inner(eta1, d_nabla_star(w2, 2), 1);
        double scale = std::sqrt(form_inner(eta1, eta1, 1) * form_inner(w2, w2, 2)) + 1e-30;
        REQUIRE(std::fabs(p11 - p12) / scale < cs.tol);
        Field eta2 = alt02(random_field(g, 3, rng, sp));
        const double p21 = form_inner(d_nabla(eta2, 2), w3, 3);
        const double p22 = form_inner(eta2, d_nabla_star(w3, 3), 2);
        scale = std::sqrt(form_inner(eta2, eta2, 2) * form_inner(w3, w3, 3)) + 1e-30;
        REQUIRE(std::fabs(p21 - p22) / scale < cs.tol);
    }
}

TEST_CASE("covariant exterior derivatives land in antisymmetric forms", "[calculus]") {
    auto mh = make_model(ChartKind::HyperbolicHalfSpace, 4, -1, 0.5, 1.5);
    Grid gh = slab_grid(mh, 24, 16, AxisScheme::FD4);
    Rng rng(4);
    Field eta1 = random_field(gh, 2, rng);
    Field d1 = d_nabla(eta1, 1);
    Field s = swap_slots(d1, 0, 2);
    s += d1;
    REQUIRE(linf(s) < 1e-12 * linf(d1));
    Field eta2 = alt02(random_field(gh, 3, rng));
    Field d2 = d_nabla(eta2, 2);
    for (auto pr : {std::pair<int, int>{0, 2}, {0, 3}, {2, 3}}) {
        Field q = swap_slots(d2, pr.first, pr.second);
        q += d2;
        REQUIRE(linf(q) < 1e-12 * linf(d2));
    }
}

TEST_CASE("T is -2 d_nabla(v) and its exterior derivative vanishes", "[calculus]") {
    // T_{ijk} = v_{ij,k} - v_{jk,i} for symmetric v equals -2 [d_nabla v]_{ijk},
    // so d_nabla(T,2) = -2 (d_nabla)^2 v, which vanishes identically on the
    // constant-curvature backgrounds.  The residual measures the
    // differentiation scheme, not the identity.
    auto mt = make_model(ChartKind::FlatTorus, 4, 0, 1.0);
    Grid gt = torus_grid(mt, 10, AxisScheme::Spectral, 4);
    auto mh = make_model(ChartKind::HyperbolicHalfSpace, 4, -1, 0.5, 1.5);
    Grid gh = slab_grid(mh, 96, 16, AxisScheme::Spectral);
    FieldSpec sharp;
    sharp.max_mode = 2;
    sharp.sharp = 12.0;
    struct Case {
        const Grid* g;
        double tol;
    };
    for (const Case& cs : {Case{&gt, 1e-12}, Case{&gh, 1e-10}}) {
        Rng rng(8);
        Field v = sym2(random_field(*cs.g, 2, rng, sharp));
        Field T = t_tensor(v);
        Field d1 = d_nabla(v, 1);
        d1 *= -2.0;
        REQUIRE(rel_linf(T, d1) < 1e-13);
        Field dT = d_nabla(T, 2);
        REQUIRE(linf(dT) < cs.tol * linf(covariant_derivative(T)));
    }
}

TEST_CASE("single torus modes reproduce the flat symbols", "[calculus]") {
    auto m = make_model(ChartKind::FlatTorus, 4, 0, 1.0);
    Grid g = torus_grid(m, 10, AxisScheme::Spectral, 4);
    const int n = 4;
    const double w[4] = {2 * kPi * 2, 2 * kPi * 1, 0.0, 2 * kPi * 3};
    const double w2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[3] * w[3];
    Rng rng(55);
    double A[4][4];
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) A[i][j] = A[j][i] = rng.normal();
    Field v(g, 2);
    std::vector<double> x(4), cosv(g.nodes()), sinv(g.nodes());
    for (std::size_t nd = 0; nd < g.nodes(); ++nd) {
        g.coords(nd, x.data());
        const double ph = w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + w[3] * x[3] + 0.37;
        cosv[nd] = std::cos(ph);
        sinv[nd] = std::sin(ph);
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double* dst = v.comp(v.ix2(i, j));
            for (std::size_t nd = 0; nd < g.nodes(); ++nd) dst[nd] = A[i][j] * cosv[nd];
        }

    // Rough Laplacian multiplies by -|w|^2.
    Field lap = rough_laplacian(v);
    Field expect = v;
    expect *= -w2;
    REQUIRE(rel_linf(lap, expect) < 1e-9);

    // Fast flat path agrees with the generic contraction route.
    Field generic = contract_pair(covariant_derivative(covariant_derivative(v)), 2, 3);
    REQUIRE(rel_linf(lap, generic) < 1e-11);

    // Divergence symbol: [delta v]_i = sum_j A_ij w_j sin(phase).
    Field dv = divergence(v);
    Field dexp(g, 1);
    for (int i = 0; i < n; ++i) {
        double coef = 0;
        double* dst = dexp.comp(static_cast<std::size_t>(i));
        for (int j = 0; j < n; ++j) coef += A[i][j] * w[j];
        for (std::size_t nd = 0; nd < g.nodes(); ++nd) dst[nd] = coef * sinv[nd];
    }
    REQUIRE(rel_linf(dv, dexp) < 1e-9);

    // Hodge Laplacian coincides with the rough Laplacian on flat 1-forms.
    Field alpha(g, 1);
    for (int i = 0; i < n; ++i) {
        double* dst = alpha.comp(static_cast<std::size_t>(i));
        const double c = A[0][i];
        for (std::size_t nd = 0; nd < g.nodes(); ++nd) dst[nd] = c * cosv[nd];
    }
    REQUIRE(rel_linf(hodge_laplacian_1form(alpha), rough_laplacian(alpha)) < 1e-9);

    // d of d of a scalar vanishes.
    Field f(g, 0);
    for (std::size_t nd = 0; nd < g.nodes(); ++nd) f.comp(0)[nd] = cosv[nd];
    Field ddf = hodge_d(grad_scalar(f));
    REQUIRE(linf(ddf) < 1e-10 * w2);
}

TEST_CASE("Koiso-type tensor of a pure-trace field has the closed norm", "[calculus]") {
    // v = f h gives 0.5 ||T||^2 = (n-1) ||grad f||^2.
    auto mt = make_model(ChartKind::FlatTorus, 4, 0, 1.0);
    Grid gt = torus_grid(mt, 10, AxisScheme::Spectral, 4);
    auto mh = make_model(ChartKind::HyperbolicHalfSpace, 4, -1, 0.5, 1.5);
    Grid gh = slab_grid(mh, 48, 16, AxisScheme::Spectral);
    auto ms = make_model(ChartKind::SphereStereographic, 4, 1);
    Grid gs = sphere_grid(ms, 12, AxisScheme::FD6);
    FieldSpec spec;
    spec.max_mode = 2;
    spec.sharp = 5.0;
    FieldSpec sph;
    sph.max_mode = 1;
    sph.sharp = 2.0;
    struct Case {
        const Grid* g;
        double tol;
    };
    // Measured: 1.6e-16 torus, 3.8e-11 slab, 1.5e-4 sphere FD6.
    for (const Case& cs : {Case{&gt, 1e-12}, Case{&gh, 1e-8}, Case{&gs, 1e-3}}) {
        Rng rng(21);
        const FieldSpec& sp =
            cs.g->model().chart == ChartKind::SphereStereographic ? sph : spec;
        Field f = random_field(*cs.g, 0, rng, sp);
        const double lhs = 0.5 * l2_norm2(t_tensor(times_metric(f)));
        const double rhs = (cs.g->n() - 1.0) * l2_norm2(grad_scalar(f));
        REQUIRE(std::fabs(lhs - rhs) / rhs < cs.tol);
    }
}

TEST_CASE("trace-free constructions are trace-free to roundoff", "[calculus]") {
    auto mh = make_model(ChartKind::HyperbolicHalfSpace, 4, -1, 0.5, 1.5);
    Grid gh = slab_grid(mh, 24, 16, AxisScheme::FD4);
    auto ms = make_model(ChartKind::SphereStereographic, 4, 1);
    Grid gs = sphere_grid(ms, 10, AxisScheme::FD4);
    for (const Grid* g : {&gh, &gs}) {
        Rng rng(3);
        Field om = random_field(*g, 1, rng);
        Field v = random_field(*g, 2, rng);
        const double s1 = linf(trace_of(conformal_killing(om)));
        const double s2 = linf(trace_of(traceless_part(v)));
        REQUIRE(s1 < 1e-12 * (1.0 + linf(covariant_derivative(om))));
        REQUIRE(s2 < 1e-12 * (1.0 + linf(v)));
    }
}

TEST_CASE("Hessian of the height coordinate from the chart tables", "[calculus]") {
    // f = x_0 on the half-space has covariant Hessian diag(1/x, -1/x, ...),
    // assembled per node as -Gamma^0_{ij} since the chart partials of f are
    // constant.
    auto m = make_model(ChartKind::HyperbolicHalfSpace, 4, -1, 0.25, 1.25);
    Grid g = slab_grid(m, 16, 16, AxisScheme::FD4);
    std::vector<double> G(64), x(4);
    for (std::size_t node = 0; node < g.nodes(); node += 37) {
        christoffel_at(g, node, G.data());
        g.coords(node, x.data());
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                const double hess = -G[static_cast<std::size_t>((0 * 4 + i) * 4 + j)];
                double expect = 0;
                if (i == j) expect = (i == 0 ? 1.0 : -1.0) / x[0];
                REQUIRE(hess == Catch::Approx(expect).margin(1e-13));
            }
    }
}

TEST_CASE("norm of the metric recovers n times the volume", "[calculus]") {
    auto mt = make_model(ChartKind::FlatTorus, 4, 0, 1.0);
    Grid gt = torus_grid(mt, 8, AxisScheme::Spectral, 4);
    auto mh = make_model(ChartKind::HyperbolicHalfSpace, 4, -1, 0.5, 1.5);
    Grid gh = slab_grid(mh, 32, 16, AxisScheme::FD4);
    for (const Grid* g : {&gt, &gh}) {
        Field one(*g, 0);
        for (std::size_t nd = 0; nd < g->nodes(); ++nd) one.comp(0)[nd] = 1.0;
        const double got = l2_norm2(times_metric(one));
        REQUIRE(got == Catch::Approx(4.0 * g->volume()).epsilon(1e-12));
    }
}

TEST_CASE("div_vector is minus the divergence", "[calculus]") {
    auto mh = make_model(ChartKind::HyperbolicHalfSpace, 4, -1, 0.5, 1.5);
    Grid gh = slab_grid(mh, 16, 16, AxisScheme::FD4);
    Rng rng(2);
    Field v = random_field(gh, 2, rng);
    Field a = div_vector(v);
    Field b = divergence(v);
    a += b;
    REQUIRE(linf(a) < 1e-13 * (1.0 + linf(b)));
}
