#include "bachflow/decomposition.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace bachflow {

namespace {

using cd = std::complex<double>;

Eigen::MatrixXcd dft_matrix(int N, bool inverse) {
    Eigen::MatrixXcd F(N, N);
    const double sgn = inverse ? 1.0 : -1.0;
    for (int k = 0; k < N; ++k)
        for (int x = 0; x < N; ++x) {
            double ph = sgn * 2.0 * M_PI * double(k) * double(x) / double(N);
            F(k, x) = cd(std::cos(ph), std::sin(ph));
        }
    if (inverse) F *= 1.0 / double(N);
    return F;
}

// Apply a dense per-axis transform to every component of a complex array.
void axis_transform(const Grid& g, std::vector<cd>& a, std::size_t comps,
                    const Eigen::MatrixXcd& F, int t) {
    const std::size_t nodes = g.nodes();
    const std::size_t st = g.stride(t);
    const int Nt = g.axis(t).npts;
    Eigen::VectorXcd line(Nt), out(Nt);
    for (std::size_t c = 0; c < comps; ++c) {
        cd* base = a.data() + c * nodes;
        for (std::size_t p = 0; p < nodes; ++p) {
            if ((p / st) % static_cast<std::size_t>(Nt) != 0) continue;
            for (int j = 0; j < Nt; ++j) line(j) = base[p + st * static_cast<std::size_t>(j)];
            out.noalias() = F * line;
            for (int j = 0; j < Nt; ++j) base[p + st * static_cast<std::size_t>(j)] = out(j);
        }
    }
}

std::vector<cd> to_complex(const Field& u) {
    std::vector<cd> a(u.a.size());
    for (std::size_t i = 0; i < u.a.size(); ++i) a[i] = u.a[i];
    return a;
}

Field to_real(const Grid& g, int rank, const std::vector<cd>& a) {
    Field u(g, rank);
    for (std::size_t i = 0; i < u.a.size(); ++i) u.a[i] = a[i].real();
    return u;
}

// Physical wavevector of the mode a node index denotes, zero on frozen
// coordinates.  kappa_j includes the 2 pi / length factor.
void mode_wavevector(const Grid& g, std::size_t p, double* kappa) {
    for (int j = 0; j < g.n(); ++j) kappa[j] = 0.0;
    for (int t = 0; t < g.naxes(); ++t) {
        const int Nt = g.axis(t).npts;
        int m = static_cast<int>((p / g.stride(t)) % static_cast<std::size_t>(Nt));
        if (m > Nt / 2) m -= Nt;
        kappa[g.axis(t).coord] = 2.0 * M_PI * double(m) / g.axis(t).length;
    }
}

// Exact discrete adjoint of the conformal Killing operator with respect to
// the quadrature inner products (rank-1 weight w phi^-2, rank-2 weight
// w phi^-4).  K factors as S o D with D alpha_ij = D1^(j) alpha_i -
// Gamma^k_ij alpha_k and the pointwise symmetric map S(m) = sym(m) -
// (tr m / n) I, so the adjoint is assembled from the transposed pieces; the
// per-axis derivative matrices are antisymmetric circulants (D1^T = -D1 for
// the trigonometric and the centered-difference schemes alike), which makes
// the identity <K a, w>_2 = <a, K^T w>_1 hold to machine precision.  Running
// conjugate gradients on K^T K instead of (divergence) o K keeps the normal
// operator exactly symmetric positive semidefinite.
Field killing_transpose(const Field& w) {
    const Grid& g = *w.grid;
    const int n = g.n();
    const std::size_t nodes = g.nodes();

    // W = sym(w) - (tr_plain w / n) I, scaled by the rank-2 weight phi^-4 w
    Field W(g, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double* dst = W.comp(W.ix2(i, j));
            const double* a = w.comp(w.ix2(i, j));
            const double* b = w.comp(w.ix2(j, i));
            for (std::size_t p = 0; p < nodes; ++p) dst[p] = 0.5 * (a[p] + b[p]);
        }
    std::vector<double> trp(nodes, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* a = W.comp(W.ix2(i, i));
        for (std::size_t p = 0; p < nodes; ++p) trp[p] += a[p];
    }
    for (int i = 0; i < n; ++i) {
        double* dst = W.comp(W.ix2(i, i));
        for (std::size_t p = 0; p < nodes; ++p) dst[p] -= trp[p] / n;
    }
    for (std::size_t c = 0; c < W.comps(); ++c) {
        double* dst = W.comp(c);
        for (std::size_t p = 0; p < nodes; ++p) {
            const double ph2 = g.inv2(p);
            dst[p] *= g.weight(p) * ph2 * ph2;
        }
    }

    Field out(g, 1);
    std::vector<double> tmp(nodes), dtmp(nodes);
    for (int m = 0; m < n; ++m) {
        double* dst = out.comp(m);
        for (int j = 0; j < n; ++j) {
            const int t = g.coord_axis(j);
            if (t < 0) continue;
            g.dx(t, W.comp(W.ix2(m, j)), dtmp.data());
            for (std::size_t p = 0; p < nodes; ++p) dst[p] -= dtmp[p];
        }
    }
    // Christoffel part: -(Gamma^m_ij W_ij) per node
    std::vector<double> G(static_cast<std::size_t>(n) * n * n);
    for (std::size_t p = 0; p < nodes; ++p) {
        christoffel_at(g, p, G.data());
        for (int m = 0; m < n; ++m) {
            double s = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    s += G[(static_cast<std::size_t>(m) * n + i) * n + j] *
                         W.comp(W.ix2(i, j))[p];
            out.comp(m)[p] -= s;
        }
    }
    // divide by the rank-1 weight
    for (int m = 0; m < n; ++m) {
        double* dst = out.comp(m);
        for (std::size_t p = 0; p < nodes; ++p) dst[p] /= g.weight(p) * g.inv2(p);
    }
    return out;
}

} // namespace

SplitResult split_sym2(const Field& v, double tol, int maxit) {
    const Grid& g = *v.grid;
    SplitResult out;

    Field vt = traceless_part(v);
    out.trace_scalar = trace_of(v);
    out.trace_scalar *= 1.0 / g.n();

    Field b = killing_transpose(vt);
    const double bn = std::sqrt(l2_norm2(b));
    Field x(g, 1);
    x.zero();
    Field r = b;
    double rn2 = l2_norm2(r);
    int it = 0;
    if (bn > 0.0) {
        Field p = r;
        for (; it < maxit && std::sqrt(rn2) / bn > tol; ++it) {
            Field Ap = killing_transpose(conformal_killing(p));
            const double step = rn2 / l2_inner(p, Ap);
            axpy(x, step, p);
            axpy(r, -step, Ap);
            const double rn2new = l2_norm2(r);
            const double beta = rn2new / rn2;
            rn2 = rn2new;
            Field pn = r;
            axpy(pn, beta, p);
            p = pn;
        }
    }
    out.alpha = x;
    out.kpart = conformal_killing(x);
    out.tt = vt;
    out.tt -= out.kpart;
    out.rel_residual = bn > 0.0 ? std::sqrt(rn2) / bn : 0.0;
    out.iterations = it;
    return out;
}

Field tt_project(const Field& v, double tol) { return split_sym2(v, tol).tt; }

SplitResult split_torus_modal(const Field& v) {
    const Grid& g = *v.grid;
    if (!g.flat()) throw std::invalid_argument("split_torus_modal: flat torus only");
    const int n = g.n();
    const std::size_t nodes = g.nodes();
    const std::size_t c2 = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);

    // forward DFT of every tensor component
    std::vector<cd> vc = to_complex(v);
    std::vector<Eigen::MatrixXcd> Fwd(g.naxes()), Inv(g.naxes());
    for (int t = 0; t < g.naxes(); ++t) {
        Fwd[t] = dft_matrix(g.axis(t).npts, false);
        Inv[t] = dft_matrix(g.axis(t).npts, true);
        axis_transform(g, vc, c2, Fwd[t], t);
    }

    std::vector<cd> ac(static_cast<std::size_t>(n) * nodes, cd(0));
    std::vector<cd> kc(c2 * nodes, cd(0));
    std::vector<cd> ttc(c2 * nodes, cd(0));
    std::vector<cd> trc(nodes, cd(0));

    std::vector<double> kap(static_cast<std::size_t>(n));
    Eigen::MatrixXcd A(n, n), T(n, n);
    Eigen::VectorXcd a(n), btt(n);
    for (std::size_t p = 0; p < nodes; ++p) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) A(i, j) = vc[(static_cast<std::size_t>(i) * n + j) * nodes + p];
        const cd tr = A.trace() / double(n);
        trc[p] = tr;
        for (int i = 0; i < n; ++i) A(i, i) -= tr;

        mode_wavevector(g, p, kap.data());
        double k2 = 0.0;
        for (int j = 0; j < n; ++j) k2 += kap[j] * kap[j];
        if (k2 > 0.0) {
            // least squares against K^(a) = i [ sym(kappa (x) a) - (kappa.a/n) I ]:
            // the normal operator is (1/2)|kappa|^2 I + (1/2 - 1/n) kappa kappa^T,
            // inverted in closed form on the parallel / orthogonal split of
            // b = -i A kappa.
            btt.setZero();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) btt(i) += A(i, j) * kap[j];
            btt *= cd(0, -1);
            cd bpar = 0.0;
            for (int j = 0; j < n; ++j) bpar += btt(j) * kap[j];
            bpar /= k2;
            for (int i = 0; i < n; ++i) {
                cd bperp = btt(i) - bpar * kap[i];
                a(i) = 2.0 * bperp / k2 + double(n) / ((n - 1.0) * k2) * bpar * kap[i];
            }
            cd ka = 0.0;
            for (int j = 0; j < n; ++j) ka += kap[j] * a(j);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    T(i, j) = cd(0, 1) * (0.5 * (kap[i] * a(j) + kap[j] * a(i)) -
                                          (i == j ? ka / double(n) : cd(0)));
                }
        } else {
            a.setZero();
            T.setZero();
        }
        for (int i = 0; i < n; ++i) ac[static_cast<std::size_t>(i) * nodes + p] = a(i);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const std::size_t idx = (static_cast<std::size_t>(i) * n + j) * nodes + p;
                kc[idx] = T(i, j);
                ttc[idx] = A(i, j) - T(i, j);
            }
    }

    for (int t = 0; t < g.naxes(); ++t) {
        axis_transform(g, ac, static_cast<std::size_t>(n), Inv[t], t);
        axis_transform(g, kc, c2, Inv[t], t);
        axis_transform(g, ttc, c2, Inv[t], t);
        axis_transform(g, trc, 1, Inv[t], t);
    }

    SplitResult out;
    out.alpha = to_real(g, 1, ac);
    out.kpart = to_real(g, 2, kc);
    out.tt = to_real(g, 2, ttc);
    out.trace_scalar = to_real(g, 0, trc);
    Field vt = traceless_part(v);
    const double dn = std::sqrt(l2_norm2(divergence(vt)));
    out.rel_residual = dn > 0.0 ? std::sqrt(l2_norm2(divergence(out.tt))) / dn : 0.0;
    out.iterations = 0;
    return out;
}

} // namespace bachflow
