#include "bachflow/calculus.hpp"

#include <cassert>
#include <stdexcept>
#include <vector>

namespace bachflow {

namespace {

// Digit place values of the packed component index (last index fastest).
std::vector<std::size_t> places(int n, int rank) {
    std::vector<std::size_t> p(static_cast<std::size_t>(rank), 1);
    for (int t = rank - 2; t >= 0; --t)
        p[static_cast<std::size_t>(t)] =
            p[static_cast<std::size_t>(t + 1)] * static_cast<std::size_t>(n);
    return p;
}

void decode(std::size_t c, int n, int rank, int* I) {
    for (int t = rank - 1; t >= 0; --t) {
        I[t] = static_cast<int>(c % static_cast<std::size_t>(n));
        c /= static_cast<std::size_t>(n);
    }
}

} // namespace

Field partial_derivative(const Field& u) {
    const Grid& g = *u.grid;
    Field out(g, u.rank + 1);
    const int n = g.n();
    for (std::size_t c = 0; c < u.comps(); ++c)
        for (int j = 0; j < n; ++j) {
            double* dst = out.comp(c * static_cast<std::size_t>(n) + static_cast<std::size_t>(j));
            const int t = g.coord_axis(j);
            if (t < 0) continue; // frozen coordinate: derivative is zero
            g.dx(t, u.comp(c), dst);
        }
    return out;
}

Field covariant_derivative(const Field& u) {
    Field out = partial_derivative(u);
    const Grid& g = *u.grid;
    if (g.flat() || u.rank == 0) return out;

    const int n = g.n();
    const int r = u.rank;
    const std::size_t nn = g.nodes();
    const auto place = places(n, r);
    std::vector<int> I(static_cast<std::size_t>(r));
    std::vector<const double*> um(static_cast<std::size_t>(n));

    // (grad u)_{I,s} = d_s u_I - sum_t Gamma^m_{s I_t} u_{I[t->m]}, and with
    // Gamma^k_{ij} = d_ik psi_j + d_jk psi_i - d_ij psi_k the correction for
    // slot t collapses to
    //   psi_{I_t} u_{I[t->s]} + psi_s u_I - (I_t == s) sum_m psi_m u_{I[t->m]}.
    for (std::size_t c = 0; c < u.comps(); ++c) {
        decode(c, n, r, I.data());
        const double* ui = u.comp(c);
        for (int s = 0; s < n; ++s) {
            double* dst = out.comp(c * static_cast<std::size_t>(n) + static_cast<std::size_t>(s));
            for (int t = 0; t < r; ++t) {
                const int it = I[static_cast<std::size_t>(t)];
                const std::size_t cs =
                    c + (static_cast<std::size_t>(s) - static_cast<std::size_t>(it)) *
                            place[static_cast<std::size_t>(t)];
                const double* us = u.comp(cs);
                if (it == s) {
                    for (int m = 0; m < n; ++m)
                        um[static_cast<std::size_t>(m)] = u.comp(
                            c + (static_cast<std::size_t>(m) - static_cast<std::size_t>(it)) *
                                    place[static_cast<std::size_t>(t)]);
                    for (std::size_t node = 0; node < nn; ++node) {
                        const double* ps = g.psi(node);
                        double acc = ps[it] * us[node] + ps[s] * ui[node];
                        for (int m = 0; m < n; ++m)
                            acc -= ps[m] * um[static_cast<std::size_t>(m)][node];
                        dst[node] -= acc;
                    }
                } else {
                    for (std::size_t node = 0; node < nn; ++node) {
                        const double* ps = g.psi(node);
                        dst[node] -= ps[it] * us[node] + ps[s] * ui[node];
                    }
                }
            }
        }
    }
    return out;
}

Field contract_pair(const Field& u, int slotA, int slotB) {
    assert(slotA != slotB && u.rank >= 2);
    const Grid& g = *u.grid;
    const int n = g.n();
    const int r = u.rank;
    if (slotA > slotB) std::swap(slotA, slotB);
    Field out(g, r - 2);
    const std::size_t nn = g.nodes();
    const auto place = places(n, r);
    std::vector<int> J(static_cast<std::size_t>(r - 2 > 0 ? r - 2 : 1));
    for (std::size_t co = 0; co < out.comps(); ++co) {
        decode(co, n, r - 2, J.data());
        // Build the input component with digits slotA/slotB set to 0, other
        // digits taken from J in order.
        std::size_t base = 0;
        int jpos = 0;
        for (int t = 0; t < r; ++t) {
            if (t == slotA || t == slotB) continue;
            base += static_cast<std::size_t>(J[static_cast<std::size_t>(jpos++)]) *
                    place[static_cast<std::size_t>(t)];
        }
        const std::size_t step = place[static_cast<std::size_t>(slotA)] +
                                 place[static_cast<std::size_t>(slotB)];
        double* dst = out.comp(co);
        for (int m = 0; m < n; ++m) {
            const double* src = u.comp(base + static_cast<std::size_t>(m) * step);
            if (m == 0)
                for (std::size_t node = 0; node < nn; ++node) dst[node] = src[node];
            else
                for (std::size_t node = 0; node < nn; ++node) dst[node] += src[node];
        }
        if (!g.flat())
            for (std::size_t node = 0; node < nn; ++node) dst[node] *= g.inv2(node);
    }
    return out;
}

Field trace_of(const Field& v) {
    assert(v.rank == 2);
    return contract_pair(v, 0, 1);
}

Field times_metric(const Field& f) {
    assert(f.rank == 0);
    const Grid& g = *f.grid;
    const int n = g.n();
    Field out(g, 2);
    const std::size_t nn = g.nodes();
    for (int i = 0; i < n; ++i) {
        double* dst = out.comp(out.ix2(i, i));
        const double* src = f.comp(0);
        if (g.flat())
            for (std::size_t node = 0; node < nn; ++node) dst[node] = src[node];
        else
            for (std::size_t node = 0; node < nn; ++node) {
                const double p = g.conf(node);
                dst[node] = src[node] * p * p;
            }
    }
    return out;
}

Field traceless_part(const Field& v) {
    Field tr = trace_of(v);
    for (double& x : tr.a) x /= v.n();
    Field out = v;
    out -= times_metric(tr);
    return out;
}

Field divergence(const Field& v) {
    assert(v.rank == 2);
    Field dv = covariant_derivative(v);
    Field out = contract_pair(dv, 1, 2);
    out *= -1.0;
    return out;
}

Field div_vector(const Field& v) {
    assert(v.rank == 2);
    Field dv = covariant_derivative(v);
    return contract_pair(dv, 1, 2);
}

Field delta_star(const Field& omega) {
    assert(omega.rank == 1);
    const Grid& g = *omega.grid;
    Field dw = covariant_derivative(omega);
    Field out(g, 2);
    const int n = g.n();
    const std::size_t nn = g.nodes();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double* dst = out.comp(out.ix2(i, j));
            const double* aij = dw.comp(dw.ix2(i, j));
            const double* aji = dw.comp(dw.ix2(j, i));
            for (std::size_t node = 0; node < nn; ++node)
                dst[node] = 0.5 * (aij[node] + aji[node]);
        }
    return out;
}

Field conformal_killing(const Field& omega) {
    assert(omega.rank == 1);
    const Grid& g = *omega.grid;
    Field dw = covariant_derivative(omega);
    const int n = g.n();
    const std::size_t nn = g.nodes();
    // Plain diagonal sum s = sum_k omega_{k,k}; subtracting s/n from each
    // diagonal entry of the symmetrized derivative keeps tr_h exactly zero.
    std::vector<double> s(nn, 0.0);
    for (int k = 0; k < n; ++k) {
        const double* d = dw.comp(dw.ix2(k, k));
        for (std::size_t node = 0; node < nn; ++node) s[node] += d[node];
    }
    Field out(g, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double* dst = out.comp(out.ix2(i, j));
            const double* aij = dw.comp(dw.ix2(i, j));
            const double* aji = dw.comp(dw.ix2(j, i));
            if (i == j)
                for (std::size_t node = 0; node < nn; ++node)
                    dst[node] = aij[node] - s[node] / n;
            else
                for (std::size_t node = 0; node < nn; ++node)
                    dst[node] = 0.5 * (aij[node] + aji[node]);
        }
    return out;
}

Field rough_laplacian(const Field& u) {
    const Grid& g = *u.grid;
    if (g.flat()) {
        // Component-wise sum of plain second derivatives along the active
        // axes; avoids materializing the rank+2 intermediate, which matters
        // for rank-2 fields on large 4-D grids.
        Field out(g, u.rank);
        const std::size_t nn = g.nodes();
        std::vector<double> tmp(nn);
        for (std::size_t c = 0; c < u.comps(); ++c) {
            double* dst = out.comp(c);
            for (int t = 0; t < g.naxes(); ++t) {
                g.dxx(t, u.comp(c), tmp.data());
                for (std::size_t node = 0; node < nn; ++node) dst[node] += tmp[node];
            }
        }
        return out;
    }
    Field d2 = covariant_derivative(covariant_derivative(u));
    return contract_pair(d2, u.rank, u.rank + 1);
}

Field swap_slots(const Field& u, int slotA, int slotB) {
    assert(slotA != slotB && slotA >= 0 && slotB >= 0 && slotA < u.rank && slotB < u.rank);
    const Grid& g = *u.grid;
    const int n = g.n();
    const int r = u.rank;
    Field out(g, r);
    const std::size_t nn = g.nodes();
    const auto place = places(n, r);
    std::vector<int> I(static_cast<std::size_t>(r));
    for (std::size_t c = 0; c < u.comps(); ++c) {
        decode(c, n, r, I.data());
        const int ia = I[static_cast<std::size_t>(slotA)];
        const int ib = I[static_cast<std::size_t>(slotB)];
        const std::size_t cs = c +
                               (static_cast<std::size_t>(ib) - static_cast<std::size_t>(ia)) *
                                   place[static_cast<std::size_t>(slotA)] +
                               (static_cast<std::size_t>(ia) - static_cast<std::size_t>(ib)) *
                                   place[static_cast<std::size_t>(slotB)];
        const double* src = u.comp(cs);
        double* dst = out.comp(c);
        for (std::size_t node = 0; node < nn; ++node) dst[node] = src[node];
    }
    return out;
}

Field symmetrize_pair(const Field& u, int slotA, int slotB) {
    Field out = swap_slots(u, slotA, slotB);
    out += u;
    out *= 0.5;
    return out;
}

Field grad_scalar(const Field& f) {
    assert(f.rank == 0);
    return covariant_derivative(f);
}

double l2_inner(const Field& u, const Field& w) {
    assert(u.rank == w.rank && u.grid == w.grid);
    const Grid& g = *u.grid;
    const std::size_t nn = g.nodes();
    std::vector<double> q(nn);
    for (std::size_t node = 0; node < nn; ++node) {
        double f = g.weight(node);
        const double iv = g.inv2(node);
        for (int k = 0; k < u.rank; ++k) f *= iv;
        q[node] = f;
    }
    double total = 0.0;
    for (std::size_t c = 0; c < u.comps(); ++c) {
        const double* ua = u.comp(c);
        const double* wa = w.comp(c);
        double acc = 0.0;
        for (std::size_t node = 0; node < nn; ++node) acc += q[node] * ua[node] * wa[node];
        total += acc;
    }
    return total;
}

double l2_norm2(const Field& u) { return l2_inner(u, u); }

double form_inner(const Field& u, const Field& w, int p) {
    double f = 1.0;
    for (int k = 2; k <= p; ++k) f *= k;
    return f * l2_inner(u, w);
}

Field hodge_d(const Field& alpha) {
    assert(alpha.rank == 1);
    const Grid& g = *alpha.grid;
    Field da = covariant_derivative(alpha);
    Field out(g, 2);
    const int n = g.n();
    const std::size_t nn = g.nodes();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double* dst = out.comp(out.ix2(i, j));
            const double* aji = da.comp(da.ix2(j, i));
            const double* aij = da.comp(da.ix2(i, j));
            for (std::size_t node = 0; node < nn; ++node)
                dst[node] = aji[node] - aij[node];
        }
    return out;
}

Field hodge_dstar_1form(const Field& alpha) {
    assert(alpha.rank == 1);
    Field da = covariant_derivative(alpha);
    Field out = contract_pair(da, 0, 1);
    out *= -1.0;
    return out;
}

Field hodge_dstar_2form(const Field& omega) {
    assert(omega.rank == 2);
    Field dw = covariant_derivative(omega);
    Field out = contract_pair(dw, 0, 2); // -w_{ij,}{}^i, free index j
    out *= -1.0;
    return out;
}

Field hodge_laplacian_1form(const Field& alpha) {
    Field a = covariant_derivative(hodge_dstar_1form(alpha)); // d d* alpha
    Field b = hodge_dstar_2form(hodge_d(alpha));              // d* d alpha
    a += b;
    a *= -1.0;
    return a;
}

Field t_tensor(const Field& v) {
    assert(v.rank == 2);
    const Grid& g = *v.grid;
    Field dv = covariant_derivative(v);
    Field out(g, 3);
    const int n = g.n();
    const std::size_t nn = g.nodes();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                double* dst = out.comp(out.ix3(i, j, k));
                const double* a = dv.comp(dv.ix3(i, j, k)); // v_{ij,k}
                const double* b = dv.comp(dv.ix3(j, k, i)); // v_{jk,i}
                for (std::size_t node = 0; node < nn; ++node)
                    dst[node] = a[node] - b[node];
            }
    return out;
}

Field a_tensor(const Field& v) { return covariant_derivative(t_tensor(v)); }

Field d_nabla(const Field& eta, int p) {
    const Grid& g = *eta.grid;
    const int n = g.n();
    const std::size_t nn = g.nodes();
    Field de = covariant_derivative(eta);
    if (p == 1) {
        assert(eta.rank == 2);
        Field out(g, 3);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    double* dst = out.comp(out.ix3(i, j, k));
                    const double* a = de.comp(de.ix3(k, j, i)); // eta_{kj,i}
                    const double* b = de.comp(de.ix3(i, j, k)); // eta_{ij,k}
                    for (std::size_t node = 0; node < nn; ++node)
                        dst[node] = 0.5 * (a[node] - b[node]);
                }
        return out;
    }
    if (p == 2) {
        assert(eta.rank == 3);
        Field out(g, 4);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l) {
                        double* dst = out.comp(out.ix4(i, j, k, l));
                        const double* a = de.comp(de.ix4(k, j, l, i)); // T_{kjl,i}
                        const double* b = de.comp(de.ix4(l, j, i, k)); // T_{lji,k}
                        const double* c = de.comp(de.ix4(i, j, k, l)); // T_{ijk,l}
                        for (std::size_t node = 0; node < nn; ++node)
                            dst[node] = (a[node] + b[node] + c[node]) / 3.0;
                    }
        return out;
    }
    throw std::invalid_argument("d_nabla: p must be 1 or 2");
}

Field d_nabla_star(const Field& omega, int p) {
    const Grid& g = *omega.grid;
    Field dw = covariant_derivative(omega);
    if (p == 2) {
        // 2-form omega_{kji} -> eta_{ij} = -2 omega_{kji,}{}^k
        assert(omega.rank == 3);
        const int n = g.n();
        const std::size_t nn = g.nodes();
        Field out(g, 2);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double* dst = out.comp(out.ix2(i, j));
                for (int k = 0; k < n; ++k) {
                    const double* src = dw.comp(dw.ix4(k, j, i, k));
                    if (k == 0)
                        for (std::size_t node = 0; node < nn; ++node) dst[node] = src[node];
                    else
                        for (std::size_t node = 0; node < nn; ++node) dst[node] += src[node];
                }
                for (std::size_t node = 0; node < nn; ++node)
                    dst[node] *= -2.0 * g.inv2(node);
            }
        return out;
    }
    if (p == 3) {
        // 3-form omega_{ljik} -> T_{ijk} = -3 omega_{ljik,}{}^l
        assert(omega.rank == 4);
        const int n = g.n();
        const std::size_t nn = g.nodes();
        Field out(g, 3);
        const auto hi = [&](int a, int b, int c, int d, int e) {
            return ((((static_cast<std::size_t>(a) * n + b) * n + c) * n + d) * n + e);
        };
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    double* dst = out.comp(out.ix3(i, j, k));
                    for (int l = 0; l < n; ++l) {
                        const double* src = dw.comp(hi(l, j, i, k, l));
                        if (l == 0)
                            for (std::size_t node = 0; node < nn; ++node) dst[node] = src[node];
                        else
                            for (std::size_t node = 0; node < nn; ++node) dst[node] += src[node];
                    }
                    for (std::size_t node = 0; node < nn; ++node)
                        dst[node] *= -3.0 * g.inv2(node);
                }
        return out;
    }
    throw std::invalid_argument("d_nabla_star: p must be 2 or 3");
}

} // namespace bachflow
