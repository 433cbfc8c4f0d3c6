#include "bachflow/curvature.hpp"

#include <Eigen/Dense>

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace bachflow {

namespace {

// Multiply every component by phi^p (lower/raise one slot of a tensor
// against the diagonal conformal background metric).
Field conf_scale(const Field& u, int p) {
    const Grid& g = *u.grid;
    Field out = u;
    if (g.flat() || p == 0) return out;
    const std::size_t nn = g.nodes();
    std::vector<double> f(nn);
    for (std::size_t node = 0; node < nn; ++node) f[node] = std::pow(g.conf(node), p);
    for (std::size_t c = 0; c < out.comps(); ++c) {
        double* a = out.comp(c);
        for (std::size_t node = 0; node < nn; ++node) a[node] *= f[node];
    }
    return out;
}

// Pointwise symmetric rank-2 matrix per node, gathered across components.
void gather(const Field& u, std::size_t node, Eigen::MatrixXd& M) {
    const int n = u.n();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = u.comp(u.ix2(i, j))[node];
}

} // namespace

Field raise_both(const Field& p, const Field& ginv) {
    const Grid& g = *p.grid;
    const int n = g.n();
    Field out(g, 2);
    const std::size_t nn = g.nodes();
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            double* dst = out.comp(out.ix2(k, l));
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    const double* gi1 = ginv.comp(ginv.ix2(k, a));
                    const double* gi2 = ginv.comp(ginv.ix2(b, l));
                    const double* src = p.comp(p.ix2(a, b));
                    for (std::size_t node = 0; node < nn; ++node)
                        dst[node] += gi1[node] * src[node] * gi2[node];
                }
        }
    return out;
}

Field metric_field(const Grid& g) {
    Field one(g, 0);
    for (std::size_t node = 0; node < g.nodes(); ++node) one.comp(0)[node] = 1.0;
    return times_metric(one);
}

Field invert_sym2(const Field& gfull) {
    assert(gfull.rank == 2);
    const Grid& g = *gfull.grid;
    const int n = g.n();
    Field out(g, 2);
    Eigen::MatrixXd M(n, n), Mi(n, n);
    for (std::size_t node = 0; node < g.nodes(); ++node) {
        gather(gfull, node, M);
        Mi = M.inverse();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out.comp(out.ix2(i, j))[node] = Mi(i, j);
    }
    return out;
}

Field sqrt_det(const Field& gfull) {
    assert(gfull.rank == 2);
    const Grid& g = *gfull.grid;
    const int n = g.n();
    Field out(g, 0);
    Eigen::MatrixXd M(n, n);
    for (std::size_t node = 0; node < g.nodes(); ++node) {
        gather(gfull, node, M);
        const double d = M.determinant();
        if (d <= 0.0) throw std::domain_error("sqrt_det: metric not positive definite");
        out.comp(0)[node] = std::sqrt(d);
    }
    return out;
}

double metric_volume(const Field& gfull) {
    const Grid& g = *gfull.grid;
    Field s = sqrt_det(gfull);
    double total = 0.0;
    for (std::size_t node = 0; node < g.nodes(); ++node) total += s.comp(0)[node];
    return total * g.cell();
}

Field g_trace(const Field& u, int slotA, int slotB, const Field& ginv) {
    assert(u.rank >= 2 && slotA != slotB);
    const Grid& g = *u.grid;
    const int n = g.n();
    const int r = u.rank;
    if (slotA > slotB) std::swap(slotA, slotB);
    Field out(g, r - 2);
    const std::size_t nn = g.nodes();
    std::vector<std::size_t> place(static_cast<std::size_t>(r), 1);
    for (int t = r - 2; t >= 0; --t)
        place[static_cast<std::size_t>(t)] =
            place[static_cast<std::size_t>(t + 1)] * static_cast<std::size_t>(n);
    std::vector<int> J(static_cast<std::size_t>(r - 2 > 0 ? r - 2 : 1));
    for (std::size_t co = 0; co < out.comps(); ++co) {
        std::size_t cc = co;
        for (int t = r - 3; t >= 0; --t) {
            J[static_cast<std::size_t>(t)] = static_cast<int>(cc % static_cast<std::size_t>(n));
            cc /= static_cast<std::size_t>(n);
        }
        std::size_t base = 0;
        int jpos = 0;
        for (int t = 0; t < r; ++t) {
            if (t == slotA || t == slotB) continue;
            base += static_cast<std::size_t>(J[static_cast<std::size_t>(jpos++)]) *
                    place[static_cast<std::size_t>(t)];
        }
        double* dst = out.comp(co);
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q) {
                const double* src =
                    u.comp(base + static_cast<std::size_t>(p) * place[static_cast<std::size_t>(slotA)] +
                           static_cast<std::size_t>(q) * place[static_cast<std::size_t>(slotB)]);
                const double* gi = ginv.comp(ginv.ix2(p, q));
                for (std::size_t node = 0; node < nn; ++node)
                    dst[node] += gi[node] * src[node];
            }
    }
    return out;
}

Field c_tensor(const Field& w, const Field& ginv) {
    assert(w.rank == 2);
    const Grid& g = *w.grid;
    const int n = g.n();
    Field dw = covariant_derivative(w); // w_{ab,s}
    const std::size_t nn = g.nodes();
    // Lower-index form first: T_{lij} = (1/2)(w_{jl,i} + w_{il,j} - w_{ij,l}).
    Field T(g, 3);
    for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double* dst = T.comp(T.ix3(l, i, j));
                const double* a = dw.comp(dw.ix3(j, l, i));
                const double* b = dw.comp(dw.ix3(i, l, j));
                const double* c = dw.comp(dw.ix3(i, j, l));
                for (std::size_t node = 0; node < nn; ++node)
                    dst[node] = 0.5 * (a[node] + b[node] - c[node]);
            }
    // C^k_{ij} = g^{kl} T_{lij}.
    Field out(g, 3);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double* dst = out.comp(out.ix3(k, i, j));
                for (int l = 0; l < n; ++l) {
                    const double* gi = ginv.comp(ginv.ix2(k, l));
                    const double* src = T.comp(T.ix3(l, i, j));
                    for (std::size_t node = 0; node < nn; ++node)
                        dst[node] += gi[node] * src[node];
                }
            }
    return out;
}

namespace {

// Subtract the difference-Christoffel correction sum_t C^m_{s I_t} u_{I[t->m]}
// from an already-computed background-covariant derivative.
void c_correct(Field& out, const Field& u, const Field& ctensor) {
    const Grid& g = *u.grid;
    const int n = g.n();
    const int r = u.rank;
    if (r == 0) return;
    const std::size_t nn = g.nodes();
    std::vector<std::size_t> place(static_cast<std::size_t>(r), 1);
    for (int t = r - 2; t >= 0; --t)
        place[static_cast<std::size_t>(t)] =
            place[static_cast<std::size_t>(t + 1)] * static_cast<std::size_t>(n);
    std::vector<int> I(static_cast<std::size_t>(r));
    for (std::size_t c = 0; c < u.comps(); ++c) {
        std::size_t cc = c;
        for (int t = r - 1; t >= 0; --t) {
            I[static_cast<std::size_t>(t)] = static_cast<int>(cc % static_cast<std::size_t>(n));
            cc /= static_cast<std::size_t>(n);
        }
        for (int s = 0; s < n; ++s) {
            double* dst = out.comp(c * static_cast<std::size_t>(n) + static_cast<std::size_t>(s));
            for (int t = 0; t < r; ++t) {
                const int it = I[static_cast<std::size_t>(t)];
                for (int m = 0; m < n; ++m) {
                    const double* cm = ctensor.comp(ctensor.ix3(m, s, it));
                    const double* um =
                        u.comp(c + (static_cast<std::size_t>(m) - static_cast<std::size_t>(it)) *
                                       place[static_cast<std::size_t>(t)]);
                    for (std::size_t node = 0; node < nn; ++node)
                        dst[node] -= cm[node] * um[node];
                }
            }
        }
    }
}

} // namespace

Field g_covariant(const Field& u, const Field& ctensor) {
    Field out = covariant_derivative(u);
    c_correct(out, u, ctensor);
    return out;
}

Field g_covariant_about_h(const Field& u, double kappa, const Field& ctensor) {
    // The background part kappa h is parallel for the background connection,
    // so only u - kappa h goes through the numerical derivative; the
    // difference-Christoffel correction still sees the full u.
    const Grid& g = *u.grid;
    Field pert = u;
    Field kh = metric_field(g);
    kh *= kappa;
    pert -= kh;
    Field out = covariant_derivative(pert);
    c_correct(out, u, ctensor);
    return out;
}

Field kulkarni_nomizu(const Field& a, const Field& b) {
    assert(a.rank == 2 && b.rank == 2);
    const Grid& g = *a.grid;
    const int n = g.n();
    Field out(g, 4);
    const std::size_t nn = g.nodes();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    double* dst = out.comp(out.ix4(i, j, k, l));
                    const double* ail = a.comp(a.ix2(i, l));
                    const double* bjk = b.comp(b.ix2(j, k));
                    const double* ajk = a.comp(a.ix2(j, k));
                    const double* bil = b.comp(b.ix2(i, l));
                    const double* aik = a.comp(a.ix2(i, k));
                    const double* bjl = b.comp(b.ix2(j, l));
                    const double* ajl = a.comp(a.ix2(j, l));
                    const double* bik = b.comp(b.ix2(i, k));
                    for (std::size_t node = 0; node < nn; ++node)
                        dst[node] = ail[node] * bjk[node] + ajk[node] * bil[node] -
                                    aik[node] * bjl[node] - ajl[node] * bik[node];
                }
    return out;
}

CurvatureSet background_curvature(const Grid& g) {
    CurvatureSet cs;
    cs.gfull = metric_field(g);
    cs.ginv = invert_sym2(cs.gfull);
    cs.ctensor = Field(g, 3);
    const double c = static_cast<double>(g.model().c);
    const int n = g.n();
    Field half = cs.gfull;
    half *= 0.5;
    cs.riem = kulkarni_nomizu(half, cs.gfull);
    cs.riem *= c;
    cs.ric = cs.gfull;
    cs.ric *= c * (n - 1.0);
    cs.scal = Field(g, 0);
    for (std::size_t node = 0; node < g.nodes(); ++node)
        cs.scal.comp(0)[node] = c * n * (n - 1.0);
    cs.schouten = cs.gfull;
    cs.schouten *= 0.5 * c;
    cs.weyl = Field(g, 4);
    return cs;
}

CurvatureSet curvature_of(const Field& w) {
    assert(w.rank == 2);
    const Grid& g = *w.grid;
    const int n = g.n();
    const double c = static_cast<double>(g.model().c);
    CurvatureSet cs;
    cs.gfull = metric_field(g);
    cs.gfull += w;
    cs.ginv = invert_sym2(cs.gfull);
    cs.ctensor = c_tensor(w, cs.ginv);

    // Derivative of C: lower the upper slot against h, differentiate, raise
    // back (exact by metric compatibility of the background connection).
    Field dC = conf_scale(covariant_derivative(conf_scale(cs.ctensor, 2)), -2);

    // Up-index curvature U^l_{kij} = R_h^l_{kij} + C^l_{jk,i} - C^l_{ik,j}
    //                               + C^l_{im} C^m_{jk} - C^l_{jm} C^m_{ik}.
    const std::size_t nn = g.nodes();
    Field U(g, 4);
    for (int l = 0; l < n; ++l)
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    double* dst = U.comp(U.ix4(l, k, i, j));
                    const double* a = dC.comp(dC.ix4(l, j, k, i));
                    const double* b = dC.comp(dC.ix4(l, i, k, j));
                    for (std::size_t node = 0; node < nn; ++node)
                        dst[node] = a[node] - b[node];
                    for (int m = 0; m < n; ++m) {
                        const double* c1 = cs.ctensor.comp(cs.ctensor.ix3(l, i, m));
                        const double* c2 = cs.ctensor.comp(cs.ctensor.ix3(m, j, k));
                        const double* c3 = cs.ctensor.comp(cs.ctensor.ix3(l, j, m));
                        const double* c4 = cs.ctensor.comp(cs.ctensor.ix3(m, i, k));
                        for (std::size_t node = 0; node < nn; ++node)
                            dst[node] += c1[node] * c2[node] - c3[node] * c4[node];
                    }
                    if (c != 0.0 && (l == i || l == j)) {
                        // c (delta^l_i h_{kj} - delta^l_j h_{ki})
                        if (l == i) {
                            const double* hkj = cs.gfull.comp(cs.gfull.ix2(k, j));
                            const double* wkj = w.comp(w.ix2(k, j));
                            for (std::size_t node = 0; node < nn; ++node)
                                dst[node] += c * (hkj[node] - wkj[node]);
                        }
                        if (l == j) {
                            const double* hki = cs.gfull.comp(cs.gfull.ix2(k, i));
                            const double* wki = w.comp(w.ix2(k, i));
                            for (std::size_t node = 0; node < nn; ++node)
                                dst[node] -= c * (hki[node] - wki[node]);
                        }
                    }
                }

    // Lower the upper slot with the full metric onto the SECOND position:
    // riem_{klij} = g_{lm} U^m_{kij}, which realizes the normalization
    // riem_{ijkl} = c (g_il g_jk - g_ik g_jl) at the background.
    cs.riem = Field(g, 4);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    double* dst = cs.riem.comp(cs.riem.ix4(k, l, i, j));
                    for (int m = 0; m < n; ++m) {
                        const double* gm = cs.gfull.comp(cs.gfull.ix2(l, m));
                        const double* um = U.comp(U.ix4(m, k, i, j));
                        for (std::size_t node = 0; node < nn; ++node)
                            dst[node] += gm[node] * um[node];
                    }
                }

    cs.ric = g_trace(cs.riem, 0, 3, cs.ginv);
    cs.scal = g_trace(cs.ric, 0, 1, cs.ginv);
    cs.schouten = cs.ric;
    Field strace(*w.grid, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double* dst = strace.comp(strace.ix2(i, j));
            const double* gm = cs.gfull.comp(cs.gfull.ix2(i, j));
            const double* sc = cs.scal.comp(0);
            for (std::size_t node = 0; node < nn; ++node)
                dst[node] = sc[node] * gm[node] / (2.0 * (n - 1.0));
        }
    cs.schouten -= strace;
    cs.schouten *= 1.0 / (n - 2.0);
    cs.weyl = cs.riem;
    cs.weyl -= kulkarni_nomizu(cs.schouten, cs.gfull);
    return cs;
}

Field bach_tensor(const CurvatureSet& cs) {
    const Grid& g = *cs.gfull.grid;
    const int n = g.n();
    const double c = static_cast<double>(g.model().c);
    const std::size_t nn = g.nodes();
    Field dP = g_covariant_about_h(cs.schouten, 0.5 * c, cs.ctensor);
    Field ddP = g_covariant(dP, cs.ctensor);
    Field b = g_trace(ddP, 2, 3, cs.ginv);      // P_{ij,k}^k
    Field b2 = g_trace(ddP, 1, 3, cs.ginv);     // P_{ik,j}^k, free slots (i, j)
    b -= b2;
    Field pup = raise_both(cs.schouten, cs.ginv);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double* dst = b.comp(b.ix2(i, j));
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    const double* p = pup.comp(pup.ix2(k, l));
                    const double* wv = cs.weyl.comp(cs.weyl.ix4(k, i, j, l));
                    for (std::size_t node = 0; node < nn; ++node)
                        dst[node] += p[node] * wv[node];
                }
        }
    return b;
}

Field bianchi_operator(const Field& w) {
    // Linear in its argument, and exactly zero on the background metric, so
    // callers pass the perturbation w = g - h; that way no h-parallel data
    // ever reaches a numerical derivative.
    Field out = divergence(w); // -w_{ij,}^j w.r.t. h
    Field tr = trace_of(w);
    Field dtr = grad_scalar(tr);
    dtr *= 0.5;
    out += dtr;
    return out;
}

Field gauge_one_form(const Field& w, double mu, double nu) {
    Field beta = bianchi_operator(w);
    Field out = rough_laplacian(beta);
    out *= 0.5;
    Field dg = divergence(w);
    dg *= mu;
    out += dg;
    Field dtr = grad_scalar(trace_of(w));
    dtr *= nu;
    out += dtr;
    return out;
}

Field delta_star_g(const Field& omega, const Field& ctensor) {
    Field dw = g_covariant(omega, ctensor);
    return symmetrize_pair(dw, 0, 1);
}

Field flow_rhs(const Field& w, double mu, double nu) {
    const Grid& g = *w.grid;
    const int n = g.n();
    const double c = static_cast<double>(g.model().c);
    const std::size_t nn = g.nodes();
    CurvatureSet cs = curvature_of(w);

    // (1/(n-2)) [ Ric_{ij,k}^k + 2 delta*_g(omega) ], all-g derivatives in the
    // leading term; the Ricci background c(n-1)h is split off before the
    // numerical derivative (first derivative of the remainder is compactly
    // supported / periodic, so the second derivative is safe as-is).
    Field dric = g_covariant_about_h(cs.ric, c * (n - 1.0), cs.ctensor);
    Field lead = g_trace(g_covariant(dric, cs.ctensor), 2, 3, cs.ginv);
    Field gauge = delta_star_g(gauge_one_form(w, mu, nu), cs.ctensor);
    gauge *= 2.0;
    lead += gauge;
    lead *= 1.0 / (n - 2.0);

    // -2 R_{jki}^m P_m^k - Rc_j^m P_{im} - P^{kl} (P ^ g)_{kijl}
    Field pup = raise_both(cs.schouten, cs.ginv);
    Field quad(g, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double* dst = quad.comp(quad.ix2(i, j));
            for (int k = 0; k < n; ++k)
                for (int a = 0; a < n; ++a) {
                    const double* rr = cs.riem.comp(cs.riem.ix4(j, k, i, a));
                    const double* p = pup.comp(pup.ix2(a, k));
                    for (std::size_t node = 0; node < nn; ++node)
                        dst[node] -= 2.0 * rr[node] * p[node];
                }
        }
    // Rc_j^m P_{im} with Rc_j^m = g^{ma} Ric_{ja}
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double* dst = quad.comp(quad.ix2(i, j));
            for (int m = 0; m < n; ++m)
                for (int a = 0; a < n; ++a) {
                    const double* gi = cs.ginv.comp(cs.ginv.ix2(m, a));
                    const double* rc = cs.ric.comp(cs.ric.ix2(j, a));
                    const double* p = cs.schouten.comp(cs.schouten.ix2(i, m));
                    for (std::size_t node = 0; node < nn; ++node)
                        dst[node] -= gi[node] * rc[node] * p[node];
                }
        }
    Field kn = kulkarni_nomizu(cs.schouten, cs.gfull);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double* dst = quad.comp(quad.ix2(i, j));
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    const double* p = pup.comp(pup.ix2(k, l));
                    const double* kv = kn.comp(kn.ix4(k, i, j, l));
                    for (std::size_t node = 0; node < nn; ++node)
                        dst[node] -= p[node] * kv[node];
                }
        }
    lead += quad;
    return lead;
}

Field flow_rhs(const Field& w) {
    const double c = static_cast<double>(w.grid->model().c);
    const int n = w.grid->n();
    return flow_rhs(w, -c * (n - 1.0) / 2.0, -c / 4.0);
}

} // namespace bachflow
