#include "bachflow/meshless.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

namespace bachflow {

// ================================================================ Jet tables

namespace {

constexpr int kMaxVar = 6;
constexpr int kDeg = 4;

// Per-dimension static tables: the monomial basis of degree <= 4 in lex-by-
// degree order, a radix-5 lookup (exponents never exceed 4), the truncated
// product triples, and the derivative reindexing per variable.
struct JetTables {
    int n = 0;
    std::vector<std::array<std::uint8_t, kMaxVar>> mono;
    std::vector<std::uint8_t> deg;
    std::vector<int> lookup; // radix-5 packed multi-index -> position
    struct Triple {
        std::uint16_t i, j, k;
    };
    std::vector<Triple> prod; // out[k] += a[i] * b[j]
    struct DEntry {
        std::uint16_t dst, src;
        double fac;
    };
    std::vector<std::vector<DEntry>> dtab; // per variable, covers deg(dst) <= 3

    std::size_t count() const { return mono.size(); }
};

int pack5(const std::array<std::uint8_t, kMaxVar>& alpha, int n) {
    int key = 0, base = 1;
    for (int v = 0; v < n; ++v) {
        key += alpha[static_cast<std::size_t>(v)] * base;
        base *= 5;
    }
    return key;
}

void enumerate_compositions(int n, int pos, int left,
                            std::array<std::uint8_t, kMaxVar>& cur,
                            std::vector<std::array<std::uint8_t, kMaxVar>>& out) {
    if (pos == n - 1) {
        cur[static_cast<std::size_t>(pos)] = static_cast<std::uint8_t>(left);
        out.push_back(cur);
        return;
    }
    for (int e = left; e >= 0; --e) {
        cur[static_cast<std::size_t>(pos)] = static_cast<std::uint8_t>(e);
        enumerate_compositions(n, pos + 1, left - e, cur, out);
    }
}

JetTables build_tables(int n) {
    JetTables t;
    t.n = n;
    std::array<std::uint8_t, kMaxVar> cur{};
    for (int d = 0; d <= kDeg; ++d)
        enumerate_compositions(n, 0, d, cur, t.mono);

    int span = 1;
    for (int v = 0; v < n; ++v) span *= 5;
    t.lookup.assign(static_cast<std::size_t>(span), -1);
    t.deg.resize(t.mono.size());
    for (std::size_t k = 0; k < t.mono.size(); ++k) {
        int d = 0;
        for (int v = 0; v < n; ++v) d += t.mono[k][static_cast<std::size_t>(v)];
        t.deg[k] = static_cast<std::uint8_t>(d);
        t.lookup[static_cast<std::size_t>(pack5(t.mono[k], n))] = static_cast<int>(k);
    }

    for (std::size_t i = 0; i < t.mono.size(); ++i)
        for (std::size_t j = 0; j < t.mono.size(); ++j) {
            if (t.deg[i] + t.deg[j] > kDeg) continue;
            const int k = t.lookup[static_cast<std::size_t>(pack5(t.mono[i], n) +
                                                            pack5(t.mono[j], n))];
            t.prod.push_back({static_cast<std::uint16_t>(i), static_cast<std::uint16_t>(j),
                              static_cast<std::uint16_t>(k)});
        }

    t.dtab.resize(static_cast<std::size_t>(n));
    int p5 = 1;
    for (int v = 0; v < n; ++v) {
        for (std::size_t k = 0; k < t.mono.size(); ++k) {
            if (t.deg[k] >= kDeg) continue;
            const int src = t.lookup[static_cast<std::size_t>(pack5(t.mono[k], n) + p5)];
            t.dtab[static_cast<std::size_t>(v)].push_back(
                {static_cast<std::uint16_t>(k), static_cast<std::uint16_t>(src),
                 static_cast<double>(t.mono[k][static_cast<std::size_t>(v)] + 1)});
        }
        p5 *= 5;
    }
    return t;
}

const JetTables& jet_tables(int n) {
    assert(n >= 1 && n <= kMaxVar);
    static const std::array<JetTables, kMaxVar + 1> tabs = [] {
        std::array<JetTables, kMaxVar + 1> a;
        for (int n2 = 1; n2 <= kMaxVar; ++n2) a[static_cast<std::size_t>(n2)] = build_tables(n2);
        return a;
    }();
    return tabs[static_cast<std::size_t>(n)];
}

} // namespace

// ======================================================================= Jet

Jet::Jet(int nvar) : nv(nvar), ord(kDeg) {
    a.assign(jet_tables(nvar).count(), 0.0);
}

Jet Jet::constant(int nvar, double value) {
    Jet f(nvar);
    f.a[0] = value;
    return f;
}

Jet Jet::variable(int nvar, int var, double center) {
    assert(var >= 0 && var < nvar);
    Jet f(nvar);
    f.a[0] = center;
    std::vector<int> alpha(static_cast<std::size_t>(nvar), 0);
    alpha[static_cast<std::size_t>(var)] = 1;
    f.set_coeff(alpha, 1.0);
    return f;
}

double Jet::value() const {
    assert(nv > 0 && ord >= 0);
    return a[0];
}

namespace {

std::size_t coeff_index(const JetTables& t, const std::vector<int>& alpha) {
    assert(static_cast<int>(alpha.size()) == t.n);
    std::array<std::uint8_t, kMaxVar> m{};
    int d = 0;
    for (int v = 0; v < t.n; ++v) {
        assert(alpha[static_cast<std::size_t>(v)] >= 0);
        d += alpha[static_cast<std::size_t>(v)];
        m[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>(alpha[static_cast<std::size_t>(v)]);
    }
    assert(d <= kDeg);
    (void)d;
    const int k = t.lookup[static_cast<std::size_t>(pack5(m, t.n))];
    assert(k >= 0);
    return static_cast<std::size_t>(k);
}

} // namespace

double Jet::coeff(const std::vector<int>& alpha) const {
    return a[coeff_index(jet_tables(nv), alpha)];
}

void Jet::set_coeff(const std::vector<int>& alpha, double v) {
    a[coeff_index(jet_tables(nv), alpha)] = v;
}

Jet Jet::operator+(const Jet& o) const {
    Jet r = *this;
    r += o;
    return r;
}

Jet Jet::operator-(const Jet& o) const {
    Jet r = *this;
    r -= o;
    return r;
}

Jet& Jet::operator+=(const Jet& o) {
    assert(nv == o.nv);
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += o.a[k];
    ord = std::min(ord, o.ord);
    return *this;
}

Jet& Jet::operator-=(const Jet& o) {
    assert(nv == o.nv);
    for (std::size_t k = 0; k < a.size(); ++k) a[k] -= o.a[k];
    ord = std::min(ord, o.ord);
    return *this;
}

Jet Jet::operator*(const Jet& o) const {
    assert(nv == o.nv);
    const JetTables& t = jet_tables(nv);
    Jet r(nv);
    r.ord = std::min(ord, o.ord);
    for (const auto& p : t.prod) r.a[p.k] += a[p.i] * o.a[p.j];
    return r;
}

Jet Jet::operator-() const {
    Jet r = *this;
    for (double& x : r.a) x = -x;
    return r;
}

Jet Jet::scaled(double s) const {
    Jet r = *this;
    r.scale(s);
    return r;
}

Jet& Jet::scale(double s) {
    for (double& x : a) x *= s;
    return *this;
}

Jet Jet::derivative(int v) const {
    assert(v >= 0 && v < nv);
    assert(ord >= 1);
    const JetTables& t = jet_tables(nv);
    Jet r(nv);
    r.ord = ord - 1;
    for (const auto& e : t.dtab[static_cast<std::size_t>(v)]) r.a[e.dst] = e.fac * a[e.src];
    return r;
}

namespace {

// c[0] + c[1] N + ... + c[4] N^4 with N = f - value(f): the Taylor series of
// an outer function applied to the jet, exact in truncated arithmetic
// because N is nilpotent (N^5 truncates to zero).
Jet compose_series(const Jet& f, const std::array<double, kDeg + 1>& c) {
    Jet nil = f;
    Jet r = Jet::constant(f.nvar(), c[kDeg]);
    std::vector<int> zero(static_cast<std::size_t>(f.nvar()), 0);
    nil.set_coeff(zero, 0.0);
    for (int k = kDeg - 1; k >= 0; --k) {
        r = r * nil;
        r.set_coeff(zero, r.coeff(zero) + c[static_cast<std::size_t>(k)]);
    }
    return r;
}

} // namespace

Jet Jet::reciprocal() const {
    const double c = a[0];
    if (c == 0.0) throw std::domain_error("Jet::reciprocal: zero value part");
    Jet t = scaled(1.0 / c);
    Jet r = compose_series(t, {1.0, -1.0, 1.0, -1.0, 1.0});
    r.scale(1.0 / c);
    return r;
}

Jet jsqrt(const Jet& f) {
    const double c = f.value();
    if (c <= 0.0) throw std::domain_error("jsqrt: value part not positive");
    Jet t = f.scaled(1.0 / c);
    Jet r = compose_series(t, {1.0, 0.5, -0.125, 0.0625, -5.0 / 128.0});
    r.scale(std::sqrt(c));
    return r;
}

Jet jexp(const Jet& f) {
    const double c = f.value();
    Jet r = compose_series(f, {1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0});
    r.scale(std::exp(c));
    return r;
}

Jet jsin(const Jet& f) {
    const double c = f.value();
    const double s = std::sin(c), co = std::cos(c);
    return compose_series(f, {s, co, -s / 2.0, -co / 6.0, s / 24.0});
}

Jet jcos(const Jet& f) {
    const double c = f.value();
    const double s = std::sin(c), co = std::cos(c);
    return compose_series(f, {co, -s, -co / 2.0, s / 6.0, co / 24.0});
}

double jet_distance(const Jet& x, const Jet& y) {
    assert(x.nvar() == y.nvar() && x.nvar() > 0);
    const JetTables& t = jet_tables(x.nvar());
    const int shared = std::min(x.order(), y.order());
    double m = 0.0;
    for (std::size_t k = 0; k < t.count(); ++k) {
        if (t.deg[k] > shared) continue;
        m = std::max(m, std::abs(x.coeffs()[k] - y.coeffs()[k]));
    }
    return m;
}

// ===================================================================== CPoly

namespace {

// Key layout: biased u-power in the low 16 bits, then 5 bits per exponent.
constexpr int kTBias = 512;
constexpr int kMaxExp = 31;

std::uint64_t ckey(const int* alpha, int n, int t) {
    assert(t + kTBias >= 0 && t + kTBias < 65536);
    std::uint64_t key = static_cast<std::uint64_t>(t + kTBias);
    for (int v = 0; v < n; ++v) {
        assert(alpha[v] >= 0 && alpha[v] <= kMaxExp);
        key |= static_cast<std::uint64_t>(alpha[v]) << (16 + 5 * v);
    }
    return key;
}

void cunpack(std::uint64_t key, int n, int* alpha, int* t) {
    *t = static_cast<int>(key & 0xFFFFu) - kTBias;
    for (int v = 0; v < n; ++v)
        alpha[v] = static_cast<int>((key >> (16 + 5 * v)) & 0x1Fu);
}

void cacc(std::unordered_map<std::uint64_t, double>& m, std::uint64_t key, double v) {
    if (v == 0.0) return;
    auto it = m.find(key);
    if (it == m.end()) {
        m.emplace(key, v);
        return;
    }
    it->second += v;
    if (it->second == 0.0) m.erase(it);
}

} // namespace

CPoly::CPoly(int nvar) : nv(nvar) {
    assert(nvar >= 1 && nvar <= kMaxVar);
}

CPoly CPoly::constant(int nvar, double v) {
    CPoly p(nvar);
    std::vector<int> zero(static_cast<std::size_t>(nvar), 0);
    cacc(p.a, ckey(zero.data(), nvar, 0), v);
    return p;
}

CPoly CPoly::term(int nvar, double coef, const std::vector<int>& alpha, int upow) {
    assert(static_cast<int>(alpha.size()) == nvar);
    CPoly p(nvar);
    cacc(p.a, ckey(alpha.data(), nvar, upow), coef);
    return p;
}

CPoly CPoly::operator+(const CPoly& o) const {
    CPoly r = *this;
    r += o;
    return r;
}

CPoly CPoly::operator-(const CPoly& o) const {
    CPoly r = *this;
    r -= o;
    return r;
}

CPoly& CPoly::operator+=(const CPoly& o) {
    assert(nv == o.nv);
    for (const auto& [k, v] : o.a) cacc(a, k, v);
    return *this;
}

CPoly& CPoly::operator-=(const CPoly& o) {
    assert(nv == o.nv);
    for (const auto& [k, v] : o.a) cacc(a, k, -v);
    return *this;
}

CPoly CPoly::operator*(const CPoly& o) const {
    assert(nv == o.nv);
    CPoly r(nv);
    r.a.reserve(a.size() + o.a.size());
    int aa[kMaxVar], ab[kMaxVar], sum[kMaxVar];
    int ta = 0, tb = 0;
    for (const auto& [ka, va] : a) {
        cunpack(ka, nv, aa, &ta);
        for (const auto& [kb, vb] : o.a) {
            cunpack(kb, nv, ab, &tb);
            for (int v = 0; v < nv; ++v) sum[v] = aa[v] + ab[v];
            cacc(r.a, ckey(sum, nv, ta + tb), va * vb);
        }
    }
    return r;
}

CPoly CPoly::operator-() const {
    CPoly r = *this;
    for (auto& [k, v] : r.a) {
        (void)k;
        v = -v;
    }
    return r;
}

CPoly CPoly::scaled(double s) const {
    CPoly r = *this;
    r.scale(s);
    return r;
}

CPoly& CPoly::scale(double s) {
    if (s == 0.0) {
        a.clear();
        return *this;
    }
    for (auto& [k, v] : a) {
        (void)k;
        v *= s;
    }
    return *this;
}

CPoly CPoly::derivative(int dv) const {
    assert(dv >= 0 && dv < nv);
    CPoly r(nv);
    int alpha[kMaxVar];
    int t = 0;
    for (const auto& [k, coef] : a) {
        cunpack(k, nv, alpha, &t);
        if (alpha[dv] > 0) {
            alpha[dv] -= 1;
            cacc(r.a, ckey(alpha, nv, t), coef * (alpha[dv] + 1));
            alpha[dv] += 1;
        }
        if (t != 0) {
            alpha[dv] += 1;
            cacc(r.a, ckey(alpha, nv, t + 1), -2.0 * t * coef);
            alpha[dv] -= 1;
        }
    }
    return r;
}

double CPoly::value_at(const double* x) const {
    double u = 1.0;
    for (int v = 0; v < nv; ++v) u += x[v] * x[v];
    double total = 0.0;
    int alpha[kMaxVar];
    int t = 0;
    for (const auto& [k, coef] : a) {
        cunpack(k, nv, alpha, &t);
        double f = coef * std::pow(u, -t);
        for (int v = 0; v < nv; ++v)
            for (int e = 0; e < alpha[v]; ++e) f *= x[v];
        total += f;
    }
    return total;
}

double CPoly::value_at(const std::vector<double>& x) const {
    assert(static_cast<int>(x.size()) == nv);
    return value_at(x.data());
}

double CPoly::integral() const {
    double total = 0.0;
    int alpha[kMaxVar];
    int t = 0;
    for (const auto& [k, coef] : a) {
        if (coef == 0.0) continue;
        cunpack(k, nv, alpha, &t);
        bool odd = false;
        for (int v = 0; v < nv; ++v)
            if (alpha[v] % 2 == 1) odd = true;
        double s = 0.0, lg = 0.0;
        for (int v = 0; v < nv; ++v) {
            const double b = (alpha[v] + 1) / 2.0;
            s += b;
            lg += std::lgamma(b);
        }
        if (!(static_cast<double>(t) > s))
            throw std::domain_error("CPoly::integral: divergent term");
        if (odd) continue;
        total += coef * std::exp(lg + std::lgamma(t - s) - std::lgamma(static_cast<double>(t)));
    }
    return total;
}

void CPoly::prune(double atol) {
    for (auto it = a.begin(); it != a.end();) {
        if (std::abs(it->second) <= atol)
            it = a.erase(it);
        else
            ++it;
    }
}

// ========================================================== germ calculus ops

namespace {

std::vector<std::size_t> g_places(int n, int rank) {
    std::vector<std::size_t> p(static_cast<std::size_t>(rank), 1);
    for (int t = rank - 2; t >= 0; --t)
        p[static_cast<std::size_t>(t)] =
            p[static_cast<std::size_t>(t + 1)] * static_cast<std::size_t>(n);
    return p;
}

void g_decode(std::size_t c, int n, int rank, int* I) {
    for (int t = rank - 1; t >= 0; --t) {
        I[t] = static_cast<int>(c % static_cast<std::size_t>(n));
        c /= static_cast<std::size_t>(n);
    }
}

} // namespace

template <class S>
GermTensor<S> partial_derivative(const GermTensor<S>& u) {
    GermTensor<S> out(u.n, u.rank + 1);
    const int n = u.n;
    for (std::size_t c = 0; c < u.comps(); ++c)
        for (int s = 0; s < n; ++s)
            out.comp[c * static_cast<std::size_t>(n) + static_cast<std::size_t>(s)] =
                u.comp[c].derivative(s);
    return out;
}

template <class S>
GermTensor<S> covariant_derivative(const GermChart<S>& ch, const GermTensor<S>& u) {
    GermTensor<S> out = partial_derivative(u);
    if (ch.flat || u.rank == 0) return out;
    const int n = u.n;
    const int r = u.rank;
    const auto place = g_places(n, r);
    std::vector<int> I(static_cast<std::size_t>(r));
    // Same collapsed Christoffel correction as the grid pipeline: for slot t
    //   psi_{I_t} u_{I[t->s]} + psi_s u_I - (I_t == s) sum_m psi_m u_{I[t->m]}.
    for (std::size_t c = 0; c < u.comps(); ++c) {
        g_decode(c, n, r, I.data());
        for (int s = 0; s < n; ++s) {
            S& dst = out.comp[c * static_cast<std::size_t>(n) + static_cast<std::size_t>(s)];
            for (int t = 0; t < r; ++t) {
                const int it = I[static_cast<std::size_t>(t)];
                const std::size_t cs =
                    c + (static_cast<std::size_t>(s) - static_cast<std::size_t>(it)) *
                            place[static_cast<std::size_t>(t)];
                dst -= ch.psi[static_cast<std::size_t>(it)] * u.comp[cs];
                dst -= ch.psi[static_cast<std::size_t>(s)] * u.comp[c];
                if (it == s)
                    for (int m = 0; m < n; ++m)
                        dst += ch.psi[static_cast<std::size_t>(m)] *
                               u.comp[c + (static_cast<std::size_t>(m) -
                                           static_cast<std::size_t>(it)) *
                                              place[static_cast<std::size_t>(t)]];
            }
        }
    }
    return out;
}

template <class S>
GermTensor<S> contract_pair(const GermChart<S>& ch, const GermTensor<S>& u, int slotA,
                            int slotB) {
    assert(slotA != slotB && u.rank >= 2);
    const int n = u.n;
    const int r = u.rank;
    if (slotA > slotB) std::swap(slotA, slotB);
    GermTensor<S> out(n, r - 2);
    const auto place = g_places(n, r);
    std::vector<int> J(static_cast<std::size_t>(r - 2 > 0 ? r - 2 : 1));
    for (std::size_t co = 0; co < out.comps(); ++co) {
        g_decode(co, n, r - 2, J.data());
        std::size_t base = 0;
        int jpos = 0;
        for (int t = 0; t < r; ++t) {
            if (t == slotA || t == slotB) continue;
            base += static_cast<std::size_t>(J[static_cast<std::size_t>(jpos++)]) *
                    place[static_cast<std::size_t>(t)];
        }
        const std::size_t step =
            place[static_cast<std::size_t>(slotA)] + place[static_cast<std::size_t>(slotB)];
        S& dst = out.comp[co];
        for (int m = 0; m < n; ++m)
            dst += u.comp[base + static_cast<std::size_t>(m) * step];
        if (!ch.flat) dst = dst * ch.inv2;
    }
    return out;
}

template <class S>
GermTensor<S> trace_of(const GermChart<S>& ch, const GermTensor<S>& v) {
    assert(v.rank == 2);
    return contract_pair(ch, v, 0, 1);
}

template <class S>
GermTensor<S> times_metric(const GermChart<S>& ch, const GermTensor<S>& f) {
    assert(f.rank == 0);
    GermTensor<S> out(f.n, 2);
    for (int i = 0; i < f.n; ++i)
        out.comp[out.ix2(i, i)] = ch.flat ? f.comp[0] : f.comp[0] * ch.conf2;
    return out;
}

template <class S>
GermTensor<S> traceless_part(const GermChart<S>& ch, const GermTensor<S>& v) {
    GermTensor<S> tr = trace_of(ch, v);
    tr.comp[0].scale(1.0 / v.n);
    GermTensor<S> out = v;
    out -= times_metric(ch, tr);
    return out;
}

template <class S>
GermTensor<S> swap_slots(const GermTensor<S>& u, int slotA, int slotB) {
    assert(slotA != slotB && slotA >= 0 && slotB >= 0 && slotA < u.rank && slotB < u.rank);
    const int n = u.n;
    const int r = u.rank;
    GermTensor<S> out(n, r);
    const auto place = g_places(n, r);
    std::vector<int> I(static_cast<std::size_t>(r));
    for (std::size_t c = 0; c < u.comps(); ++c) {
        g_decode(c, n, r, I.data());
        const int ia = I[static_cast<std::size_t>(slotA)];
        const int ib = I[static_cast<std::size_t>(slotB)];
        const std::size_t cs = c +
                               (static_cast<std::size_t>(ib) - static_cast<std::size_t>(ia)) *
                                   place[static_cast<std::size_t>(slotA)] +
                               (static_cast<std::size_t>(ia) - static_cast<std::size_t>(ib)) *
                                   place[static_cast<std::size_t>(slotB)];
        out.comp[c] = u.comp[cs];
    }
    return out;
}

template <class S>
GermTensor<S> symmetrize_pair(const GermTensor<S>& u, int slotA, int slotB) {
    GermTensor<S> out = swap_slots(u, slotA, slotB);
    out += u;
    out *= 0.5;
    return out;
}

template <class S>
GermTensor<S> divergence(const GermChart<S>& ch, const GermTensor<S>& v) {
    assert(v.rank == 2);
    GermTensor<S> out = contract_pair(ch, covariant_derivative(ch, v), 1, 2);
    out *= -1.0;
    return out;
}

template <class S>
GermTensor<S> div_vector(const GermChart<S>& ch, const GermTensor<S>& v) {
    assert(v.rank == 2);
    return contract_pair(ch, covariant_derivative(ch, v), 1, 2);
}

template <class S>
GermTensor<S> delta_star(const GermChart<S>& ch, const GermTensor<S>& om) {
    assert(om.rank == 1);
    return symmetrize_pair(covariant_derivative(ch, om), 0, 1);
}

template <class S>
GermTensor<S> conformal_killing(const GermChart<S>& ch, const GermTensor<S>& om) {
    assert(om.rank == 1);
    const int n = om.n;
    GermTensor<S> dw = covariant_derivative(ch, om);
    // Plain diagonal sum; subtracting s/n keeps tr_h exactly zero, mirroring
    // the grid implementation.
    S s(n);
    for (int k = 0; k < n; ++k) s += dw.comp[dw.ix2(k, k)];
    s.scale(1.0 / n);
    GermTensor<S> out(n, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) {
                out.comp[out.ix2(i, i)] = dw.comp[dw.ix2(i, i)] - s;
            } else {
                S t = dw.comp[dw.ix2(i, j)] + dw.comp[dw.ix2(j, i)];
                t.scale(0.5);
                out.comp[out.ix2(i, j)] = t;
            }
        }
    return out;
}

template <class S>
GermTensor<S> rough_laplacian(const GermChart<S>& ch, const GermTensor<S>& u) {
    GermTensor<S> d2 = covariant_derivative(ch, covariant_derivative(ch, u));
    return contract_pair(ch, d2, u.rank, u.rank + 1);
}

template <class S>
GermTensor<S> grad_scalar(const GermChart<S>& ch, const GermTensor<S>& f) {
    assert(f.rank == 0);
    return covariant_derivative(ch, f);
}

template <class S>
GermTensor<S> hodge_dstar_1form(const GermChart<S>& ch, const GermTensor<S>& al) {
    assert(al.rank == 1);
    GermTensor<S> out = contract_pair(ch, covariant_derivative(ch, al), 0, 1);
    out *= -1.0;
    return out;
}

template <class S>
GermTensor<S> metric_field(const GermChart<S>& ch) {
    GermTensor<S> out(ch.n, 2);
    for (int i = 0; i < ch.n; ++i) out.comp[out.ix2(i, i)] = ch.conf2;
    return out;
}

template <class S>
GermTensor<S> apply_L_general(const GermChart<S>& ch, const GermTensor<S>& v, double mu,
                              double nu) {
    const int n = ch.n;
    const double c = static_cast<double>(ch.c);

    GermTensor<S> lap = rough_laplacian(ch, v);
    GermTensor<S> out = rough_laplacian(ch, lap);
    out *= -0.5;
    if (c != 0.0) axpy(out, c * (n + 2) / 2.0, lap);

    const double a_pair = (c - 2.0 * mu) / 2.0;
    if (a_pair != 0.0) {
        GermTensor<S> dvec = covariant_derivative(ch, div_vector(ch, v));
        axpy(out, 2.0 * a_pair, symmetrize_pair(dvec, 0, 1));
    }

    const double a_ddh = -c;
    const double a_hess = -(c - 4.0 * nu) / 2.0;

    if (a_ddh != 0.0)
        axpy(out, a_ddh, times_metric(ch, hodge_dstar_1form(ch, divergence(ch, v))));

    if (c != 0.0 || a_hess != 0.0) {
        GermTensor<S> tr = trace_of(ch, v);
        if (c != 0.0) {
            axpy(out, -c, times_metric(ch, rough_laplacian(ch, tr)));
            axpy(out, c * c, times_metric(ch, tr));
        }
        if (a_hess != 0.0)
            axpy(out, a_hess, covariant_derivative(ch, covariant_derivative(ch, tr)));
    }
    if (c != 0.0) axpy(out, -c * c * n, v);
    return out;
}

template <class S>
GermTensor<S> apply_L(const GermChart<S>& ch, const GermTensor<S>& v) {
    const double c = static_cast<double>(ch.c);
    return apply_L_general(ch, v, -c * (ch.n - 1) / 2.0, -c / 4.0);
}

// Explicit instantiations for the two scalar backends.
#define BACHFLOW_GERM_OPS(S)                                                              \
    template GermTensor<S> partial_derivative(const GermTensor<S>&);                      \
    template GermTensor<S> covariant_derivative(const GermChart<S>&, const GermTensor<S>&); \
    template GermTensor<S> contract_pair(const GermChart<S>&, const GermTensor<S>&, int,  \
                                         int);                                            \
    template GermTensor<S> trace_of(const GermChart<S>&, const GermTensor<S>&);           \
    template GermTensor<S> times_metric(const GermChart<S>&, const GermTensor<S>&);       \
    template GermTensor<S> traceless_part(const GermChart<S>&, const GermTensor<S>&);     \
    template GermTensor<S> swap_slots(const GermTensor<S>&, int, int);                    \
    template GermTensor<S> symmetrize_pair(const GermTensor<S>&, int, int);               \
    template GermTensor<S> divergence(const GermChart<S>&, const GermTensor<S>&);         \
    template GermTensor<S> div_vector(const GermChart<S>&, const GermTensor<S>&);         \
    template GermTensor<S> delta_star(const GermChart<S>&, const GermTensor<S>&);         \
    template GermTensor<S> conformal_killing(const GermChart<S>&, const GermTensor<S>&);  \
    template GermTensor<S> rough_laplacian(const GermChart<S>&, const GermTensor<S>&);    \
    template GermTensor<S> grad_scalar(const GermChart<S>&, const GermTensor<S>&);        \
    template GermTensor<S> hodge_dstar_1form(const GermChart<S>&, const GermTensor<S>&);  \
    template GermTensor<S> metric_field(const GermChart<S>&);                             \
    template GermTensor<S> apply_L_general(const GermChart<S>&, const GermTensor<S>&,     \
                                           double, double);                               \
    template GermTensor<S> apply_L(const GermChart<S>&, const GermTensor<S>&);

BACHFLOW_GERM_OPS(Jet)
BACHFLOW_GERM_OPS(CPoly)
#undef BACHFLOW_GERM_OPS

// ================================================================ germ charts

GermChart<Jet> jet_chart(const ModelSpace& m, const double* x) {
    const int n = m.n;
    GermChart<Jet> ch;
    ch.n = n;
    ch.c = m.c;
    ch.psi.assign(static_cast<std::size_t>(n), Jet(n));
    switch (m.chart) {
    case ChartKind::FlatTorus: {
        ch.flat = true;
        ch.conf = Jet::constant(n, 1.0);
        ch.conf2 = ch.conf;
        ch.inv2 = ch.conf;
        break;
    }
    case ChartKind::SphereStereographic: {
        Jet u = Jet::constant(n, 1.0);
        for (int v = 0; v < n; ++v) {
            Jet xv = Jet::variable(n, v, x[v]);
            u += xv * xv;
        }
        Jet r = u.reciprocal();
        ch.conf = r.scaled(2.0);
        ch.conf2 = ch.conf * ch.conf;
        ch.inv2 = (u * u).scaled(0.25);
        for (int v = 0; v < n; ++v)
            ch.psi[static_cast<std::size_t>(v)] = (Jet::variable(n, v, x[v]) * r).scaled(-2.0);
        break;
    }
    case ChartKind::HyperbolicHalfSpace: {
        if (!(x[0] > 0.0))
            throw std::invalid_argument("jet_chart: half-space point needs x[0] > 0");
        Jet x0 = Jet::variable(n, 0, x[0]);
        Jet r = x0.reciprocal();
        ch.conf = r;
        ch.conf2 = r * r;
        ch.inv2 = x0 * x0;
        ch.psi[0] = -r;
        break;
    }
    }
    return ch;
}

GermChart<CPoly> ring_sphere_chart(int n) {
    GermChart<CPoly> ch;
    ch.n = n;
    ch.c = 1;
    std::vector<int> zero(static_cast<std::size_t>(n), 0);
    ch.conf = CPoly::term(n, 2.0, zero, 1);
    ch.conf2 = CPoly::term(n, 4.0, zero, 2);
    ch.inv2 = CPoly::term(n, 0.25, zero, -2);
    ch.psi.assign(static_cast<std::size_t>(n), CPoly(n));
    for (int v = 0; v < n; ++v) {
        std::vector<int> e = zero;
        e[static_cast<std::size_t>(v)] = 1;
        ch.psi[static_cast<std::size_t>(v)] = CPoly::term(n, -2.0, e, 1);
    }
    return ch;
}

// ============================================================ ring L2 pairing

CPoly l2_integrand(const GermChart<CPoly>& ch, const GermTensor<CPoly>& u,
                   const GermTensor<CPoly>& w) {
    assert(u.n == ch.n && u.rank == w.rank && u.n == w.n);
    CPoly acc(ch.n);
    for (std::size_t c = 0; c < u.comps(); ++c) acc += u.comp[c] * w.comp[c];
    CPoly meas = CPoly::constant(ch.n, 1.0);
    for (int k = 0; k < ch.n; ++k) meas = meas * ch.conf;
    for (int k = 0; k < u.rank; ++k) meas = meas * ch.inv2;
    return acc * meas;
}

double l2_inner(const GermChart<CPoly>& ch, const GermTensor<CPoly>& u,
                const GermTensor<CPoly>& w) {
    return l2_integrand(ch, u, w).integral();
}

double l2_norm2(const GermChart<CPoly>& ch, const GermTensor<CPoly>& u) {
    return l2_inner(ch, u, u);
}

// ==================================================== nonlinear pipeline (jets)

namespace {

GermTensor<Jet> scale_each(const GermTensor<Jet>& u, const Jet& f) {
    GermTensor<Jet> out = u;
    for (auto& c : out.comp) c = c * f;
    return out;
}

GermTensor<Jet> mat_mul(const GermTensor<Jet>& A, const GermTensor<Jet>& B) {
    assert(A.rank == 2 && B.rank == 2 && A.n == B.n);
    const int n = A.n;
    GermTensor<Jet> out(n, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Jet& dst = out.comp[out.ix2(i, j)];
            for (int k = 0; k < n; ++k)
                dst += A.comp[A.ix2(i, k)] * B.comp[B.ix2(k, j)];
        }
    return out;
}

// Subtract sum_t C^m_{s I_t} u_{I[t->m]} from an already-computed background
// covariant derivative (same difference-Christoffel correction as the grid).
void c_correct(GermTensor<Jet>& out, const GermTensor<Jet>& u, const GermTensor<Jet>& ct) {
    const int n = u.n;
    const int r = u.rank;
    if (r == 0) return;
    const auto place = g_places(n, r);
    std::vector<int> I(static_cast<std::size_t>(r));
    for (std::size_t c = 0; c < u.comps(); ++c) {
        g_decode(c, n, r, I.data());
        for (int s = 0; s < n; ++s) {
            Jet& dst = out.comp[c * static_cast<std::size_t>(n) + static_cast<std::size_t>(s)];
            for (int t = 0; t < r; ++t) {
                const int it = I[static_cast<std::size_t>(t)];
                for (int m = 0; m < n; ++m)
                    dst -= ct.comp[ct.ix3(m, s, it)] *
                           u.comp[c + (static_cast<std::size_t>(m) -
                                       static_cast<std::size_t>(it)) *
                                          place[static_cast<std::size_t>(t)]];
            }
        }
    }
}

} // namespace

GermTensor<Jet> invert_sym2(const GermTensor<Jet>& gfull) {
    assert(gfull.rank == 2);
    const int n = gfull.n;
    const int nv = gfull.comp[0].nvar();
    Eigen::MatrixXd V(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) V(i, j) = gfull.comp[gfull.ix2(i, j)].value();
    Eigen::MatrixXd Vi = V.inverse();

    GermTensor<Jet> X(n, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) X.comp[X.ix2(i, j)] = Jet::constant(nv, Vi(i, j));

    // Newton iteration X <- X (2I - G X).  The initial residual has no value
    // part, so it is nilpotent and three iterations already close the
    // truncated inverse exactly; a fourth is kept as margin.
    for (int it = 0; it < 4; ++it) {
        GermTensor<Jet> E = mat_mul(gfull, X);
        E *= -1.0;
        for (int i = 0; i < n; ++i)
            E.comp[E.ix2(i, i)] += Jet::constant(nv, 2.0);
        X = mat_mul(X, E);
    }
    return X;
}

GermTensor<Jet> c_tensor(const GermChart<Jet>& ch, const GermTensor<Jet>& w,
                         const GermTensor<Jet>& ginv) {
    assert(w.rank == 2);
    const int n = w.n;
    GermTensor<Jet> dw = covariant_derivative(ch, w); // w_{ab,s}
    // Lower-index form first: T_{lij} = (1/2)(w_{jl,i} + w_{il,j} - w_{ij,l}).
    GermTensor<Jet> T(n, 3);
    for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                Jet t = dw.comp[dw.ix3(j, l, i)] + dw.comp[dw.ix3(i, l, j)] -
                        dw.comp[dw.ix3(i, j, l)];
                t.scale(0.5);
                T.comp[T.ix3(l, i, j)] = t;
            }
    // C^k_{ij} = g^{kl} T_{lij}.
    GermTensor<Jet> out(n, 3);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                Jet& dst = out.comp[out.ix3(k, i, j)];
                for (int l = 0; l < n; ++l)
                    dst += ginv.comp[ginv.ix2(k, l)] * T.comp[T.ix3(l, i, j)];
            }
    return out;
}

GermTensor<Jet> g_covariant(const GermChart<Jet>& ch, const GermTensor<Jet>& u,
                            const GermTensor<Jet>& ctensor) {
    GermTensor<Jet> out = covariant_derivative(ch, u);
    c_correct(out, u, ctensor);
    return out;
}

GermTensor<Jet> g_trace(const GermTensor<Jet>& u, int slotA, int slotB,
                        const GermTensor<Jet>& ginv) {
    assert(u.rank >= 2 && slotA != slotB);
    const int n = u.n;
    const int r = u.rank;
    if (slotA > slotB) std::swap(slotA, slotB);
    GermTensor<Jet> out(n, r - 2);
    const auto place = g_places(n, r);
    std::vector<int> J(static_cast<std::size_t>(r - 2 > 0 ? r - 2 : 1));
    for (std::size_t co = 0; co < out.comps(); ++co) {
        g_decode(co, n, r - 2, J.data());
        std::size_t base = 0;
        int jpos = 0;
        for (int t = 0; t < r; ++t) {
            if (t == slotA || t == slotB) continue;
            base += static_cast<std::size_t>(J[static_cast<std::size_t>(jpos++)]) *
                    place[static_cast<std::size_t>(t)];
        }
        Jet& dst = out.comp[co];
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q)
                dst += ginv.comp[ginv.ix2(p, q)] *
                       u.comp[base + static_cast<std::size_t>(p) * place[static_cast<std::size_t>(slotA)] +
                              static_cast<std::size_t>(q) * place[static_cast<std::size_t>(slotB)]];
    }
    return out;
}

GermTensor<Jet> raise_both(const GermTensor<Jet>& p, const GermTensor<Jet>& ginv) {
    const int n = p.n;
    GermTensor<Jet> out(n, 2);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            Jet& dst = out.comp[out.ix2(k, l)];
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    dst += ginv.comp[ginv.ix2(k, a)] * p.comp[p.ix2(a, b)] *
                           ginv.comp[ginv.ix2(b, l)];
        }
    return out;
}

GermTensor<Jet> kulkarni_nomizu(const GermTensor<Jet>& a, const GermTensor<Jet>& b) {
    assert(a.rank == 2 && b.rank == 2);
    const int n = a.n;
    GermTensor<Jet> out(n, 4);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    out.comp[out.ix4(i, j, k, l)] =
                        a.comp[a.ix2(i, l)] * b.comp[b.ix2(j, k)] +
                        a.comp[a.ix2(j, k)] * b.comp[b.ix2(i, l)] -
                        a.comp[a.ix2(i, k)] * b.comp[b.ix2(j, l)] -
                        a.comp[a.ix2(j, l)] * b.comp[b.ix2(i, k)];
    return out;
}

JetCurvature curvature_of(const GermChart<Jet>& ch, const GermTensor<Jet>& w) {
    assert(w.rank == 2);
    const int n = ch.n;
    const double c = static_cast<double>(ch.c);
    JetCurvature cs;
    cs.gfull = metric_field(ch);
    cs.gfull += w;
    cs.ginv = invert_sym2(cs.gfull);
    cs.ctensor = c_tensor(ch, w, cs.ginv);

    // Derivative of C: lower the upper slot against h, differentiate, raise
    // back (exact by metric compatibility of the background connection).
    GermTensor<Jet> dC =
        scale_each(covariant_derivative(ch, scale_each(cs.ctensor, ch.conf2)), ch.inv2);

    // Up-index curvature U^l_{kij} = R_h^l_{kij} + C^l_{jk,i} - C^l_{ik,j}
    //                               + C^l_{im} C^m_{jk} - C^l_{jm} C^m_{ik}.
    GermTensor<Jet> h = metric_field(ch);
    GermTensor<Jet> U(n, 4);
    for (int l = 0; l < n; ++l)
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    Jet& dst = U.comp[U.ix4(l, k, i, j)];
                    dst = dC.comp[dC.ix4(l, j, k, i)] - dC.comp[dC.ix4(l, i, k, j)];
                    for (int m = 0; m < n; ++m)
                        dst += cs.ctensor.comp[cs.ctensor.ix3(l, i, m)] *
                                   cs.ctensor.comp[cs.ctensor.ix3(m, j, k)] -
                               cs.ctensor.comp[cs.ctensor.ix3(l, j, m)] *
                                   cs.ctensor.comp[cs.ctensor.ix3(m, i, k)];
                    if (c != 0.0) {
                        // c (delta^l_i h_{kj} - delta^l_j h_{ki})
                        if (l == i) dst += h.comp[h.ix2(k, j)].scaled(c);
                        if (l == j) dst -= h.comp[h.ix2(k, i)].scaled(c);
                    }
                }

    // Lower the upper slot with the full metric onto the SECOND position:
    // riem_{klij} = g_{lm} U^m_{kij}.
    cs.riem = GermTensor<Jet>(n, 4);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    Jet& dst = cs.riem.comp[cs.riem.ix4(k, l, i, j)];
                    for (int m = 0; m < n; ++m)
                        dst += cs.gfull.comp[cs.gfull.ix2(l, m)] * U.comp[U.ix4(m, k, i, j)];
                }

    cs.ric = g_trace(cs.riem, 0, 3, cs.ginv);
    cs.scal = g_trace(cs.ric, 0, 1, cs.ginv);
    cs.schouten = cs.ric;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            cs.schouten.comp[cs.schouten.ix2(i, j)] -=
                (cs.scal.comp[0] * cs.gfull.comp[cs.gfull.ix2(i, j)]).scaled(1.0 / (2.0 * (n - 1.0)));
    cs.schouten *= 1.0 / (n - 2.0);
    cs.weyl = cs.riem;
    cs.weyl -= kulkarni_nomizu(cs.schouten, cs.gfull);
    return cs;
}

GermTensor<Jet> bach_tensor(const GermChart<Jet>& ch, const JetCurvature& cs) {
    const int n = ch.n;
    // Jets differentiate exactly, so no background split of the Schouten
    // tensor is needed before taking derivatives (the grids split off c/2 h
    // purely for stencil hygiene; the operator is the same).
    GermTensor<Jet> dP = g_covariant(ch, cs.schouten, cs.ctensor);
    GermTensor<Jet> ddP = g_covariant(ch, dP, cs.ctensor);
    GermTensor<Jet> b = g_trace(ddP, 2, 3, cs.ginv);  // P_{ij,k}^k
    GermTensor<Jet> b2 = g_trace(ddP, 1, 3, cs.ginv); // P_{ik,j}^k
    b -= b2;
    GermTensor<Jet> pup = raise_both(cs.schouten, cs.ginv);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Jet& dst = b.comp[b.ix2(i, j)];
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    dst += pup.comp[pup.ix2(k, l)] * cs.weyl.comp[cs.weyl.ix4(k, i, j, l)];
        }
    return b;
}

GermTensor<Jet> bianchi_operator(const GermChart<Jet>& ch, const GermTensor<Jet>& w) {
    GermTensor<Jet> out = divergence(ch, w);
    GermTensor<Jet> dtr = grad_scalar(ch, trace_of(ch, w));
    dtr *= 0.5;
    out += dtr;
    return out;
}

GermTensor<Jet> gauge_one_form(const GermChart<Jet>& ch, const GermTensor<Jet>& w,
                               double mu, double nu) {
    GermTensor<Jet> out = rough_laplacian(ch, bianchi_operator(ch, w));
    out *= 0.5;
    GermTensor<Jet> dg = divergence(ch, w);
    dg *= mu;
    out += dg;
    GermTensor<Jet> dtr = grad_scalar(ch, trace_of(ch, w));
    dtr *= nu;
    out += dtr;
    return out;
}

GermTensor<Jet> delta_star_g(const GermChart<Jet>& ch, const GermTensor<Jet>& omega,
                             const GermTensor<Jet>& ctensor) {
    return symmetrize_pair(g_covariant(ch, omega, ctensor), 0, 1);
}

GermTensor<Jet> flow_rhs(const GermChart<Jet>& ch, const GermTensor<Jet>& w, double mu,
                         double nu) {
    const int n = ch.n;
    JetCurvature cs = curvature_of(ch, w);

    // (1/(n-2)) [ Ric_{ij,k}^k + 2 delta*_g(omega) ], all-g derivatives in
    // the leading term (exact here, so no background split of Ric either).
    GermTensor<Jet> dric = g_covariant(ch, cs.ric, cs.ctensor);
    GermTensor<Jet> lead = g_trace(g_covariant(ch, dric, cs.ctensor), 2, 3, cs.ginv);
    GermTensor<Jet> gauge = delta_star_g(ch, gauge_one_form(ch, w, mu, nu), cs.ctensor);
    gauge *= 2.0;
    lead += gauge;
    lead *= 1.0 / (n - 2.0);

    // -2 R_{jki}^m P_m^k - Rc_j^m P_{im} - P^{kl} (P ^ g)_{kijl}
    GermTensor<Jet> pup = raise_both(cs.schouten, cs.ginv);
    GermTensor<Jet> quad(n, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Jet& dst = quad.comp[quad.ix2(i, j)];
            for (int k = 0; k < n; ++k)
                for (int a = 0; a < n; ++a)
                    dst -= (cs.riem.comp[cs.riem.ix4(j, k, i, a)] * pup.comp[pup.ix2(a, k)])
                               .scaled(2.0);
            for (int m = 0; m < n; ++m)
                for (int a = 0; a < n; ++a)
                    dst -= cs.ginv.comp[cs.ginv.ix2(m, a)] * cs.ric.comp[cs.ric.ix2(j, a)] *
                           cs.schouten.comp[cs.schouten.ix2(i, m)];
        }
    GermTensor<Jet> kn = kulkarni_nomizu(cs.schouten, cs.gfull);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Jet& dst = quad.comp[quad.ix2(i, j)];
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    dst -= pup.comp[pup.ix2(k, l)] * kn.comp[kn.ix4(k, i, j, l)];
        }
    lead += quad;
    return lead;
}

GermTensor<Jet> flow_rhs(const GermChart<Jet>& ch, const GermTensor<Jet>& w) {
    const double c = static_cast<double>(ch.c);
    return flow_rhs(ch, w, -c * (ch.n - 1.0) / 2.0, -c / 4.0);
}

} // namespace bachflow
