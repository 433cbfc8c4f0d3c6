#include "bachflow/sphere_harmonics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <unordered_map>

namespace bachflow {
namespace {

using Eigen::MatrixXd;

// all exponent vectors of total degree k in d variables, in a fixed order
std::vector<std::vector<int>> monomials(int d, int k) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(d), 0);
    std::function<void(int, int)> rec = [&](int var, int left) {
        if (var == d - 1) {
            cur[static_cast<std::size_t>(var)] = left;
            out.push_back(cur);
            return;
        }
        for (int e = left; e >= 0; --e) {
            cur[static_cast<std::size_t>(var)] = e;
            rec(var + 1, left - e);
        }
    };
    rec(0, k);
    return out;
}

std::uint64_t pack(const std::vector<int>& a) {
    std::uint64_t key = 0;
    for (int e : a) key = key * 16 + static_cast<std::uint64_t>(e);
    return key;
}

// integral of x^alpha over the unit sphere: zero for any odd exponent,
// otherwise 2 prod Gamma(b_i) / Gamma(sum b_i) with b_i = (alpha_i + 1)/2
double sphere_moment(const std::vector<int>& a) {
    double lg = 0.0, bs = 0.0;
    for (int e : a) {
        if (e % 2) return 0.0;
        const double b = 0.5 * (e + 1);
        lg += std::lgamma(b);
        bs += b;
    }
    return 2.0 * std::exp(lg - std::lgamma(bs));
}

struct DegreeData {
    std::vector<std::vector<int>> mono;
    std::unordered_map<std::uint64_t, int> index;
};

DegreeData degree_data(int d, int k) {
    DegreeData dd;
    dd.mono = monomials(d, k);
    for (std::size_t i = 0; i < dd.mono.size(); ++i)
        dd.index[pack(dd.mono[i])] = static_cast<int>(i);
    return dd;
}

// moment matrix between two monomial lists: Q_ab = int x^(alpha_a + alpha_b)
MatrixXd moment_matrix(const DegreeData& A, const DegreeData& B) {
    MatrixXd Q(A.mono.size(), B.mono.size());
    std::vector<int> s;
    for (std::size_t a = 0; a < A.mono.size(); ++a)
        for (std::size_t b = 0; b < B.mono.size(); ++b) {
            s = A.mono[a];
            for (std::size_t v = 0; v < s.size(); ++v) s[v] += B.mono[b][v];
            Q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                sphere_moment(s);
        }
    return Q;
}

// matrix of d/dx_v from degree-k coefficients to degree-(k-1) coefficients
MatrixXd diff_matrix(const DegreeData& lo, const DegreeData& hi, int v) {
    MatrixXd D = MatrixXd::Zero(static_cast<Eigen::Index>(lo.mono.size()),
                                static_cast<Eigen::Index>(hi.mono.size()));
    std::vector<int> s;
    for (std::size_t col = 0; col < hi.mono.size(); ++col) {
        const int e = hi.mono[col][static_cast<std::size_t>(v)];
        if (e == 0) continue;
        s = hi.mono[col];
        s[static_cast<std::size_t>(v)] -= 1;
        D(lo.index.at(pack(s)), static_cast<Eigen::Index>(col)) = e;
    }
    return D;
}

// coefficient matrix of the ambient Laplacian, degree k -> degree k-2
MatrixXd ambient_laplacian(const DegreeData& lo, const DegreeData& hi) {
    MatrixXd L = MatrixXd::Zero(static_cast<Eigen::Index>(lo.mono.size()),
                                static_cast<Eigen::Index>(hi.mono.size()));
    std::vector<int> s;
    for (std::size_t col = 0; col < hi.mono.size(); ++col)
        for (std::size_t v = 0; v < hi.mono[col].size(); ++v) {
            const int e = hi.mono[col][v];
            if (e < 2) continue;
            s = hi.mono[col];
            s[v] -= 2;
            L(lo.index.at(pack(s)), static_cast<Eigen::Index>(col)) +=
                double(e) * double(e - 1);
        }
    return L;
}

// inverse square root of a symmetric positive definite matrix
MatrixXd inv_sqrt(const MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
    return es.eigenvectors() *
           es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

} // namespace

int harmonic_dimension(int n, int k) {
    assert(n >= 2 && k >= 0);
    if (k == 0) return 1;
    const int d = n + 1;
    auto binom = [](int a, int b) {
        if (b < 0 || b > a) return 0LL;
        long long r = 1;
        for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
        return r;
    };
    return static_cast<int>(binom(d + k - 1, k) - binom(d + k - 3, k - 2));
}

double sphere_laplace_eigenvalue(int n, int k) { return double(k) * (k + n - 1); }

double sphere_trace_eigenvalue(int n, int k) {
    const double lam = sphere_laplace_eigenvalue(n, k);
    return -0.5 * lam * lam + 0.5 * n * lam;
}

HarmonicBasis harmonic_basis(int n, int kmax) {
    assert(n >= 2 && kmax >= 1);
    const int d = n + 1;

    std::vector<DegreeData> deg;
    for (int k = 0; k <= kmax; ++k) deg.push_back(degree_data(d, k));

    // harmonic coefficient bases: degree < 2 is all of the monomial space,
    // higher degrees are the null space of the ambient Laplacian
    std::vector<MatrixXd> C(static_cast<std::size_t>(kmax) + 1);
    for (int k = 1; k <= kmax; ++k) {
        const auto m = static_cast<Eigen::Index>(deg[static_cast<std::size_t>(k)].mono.size());
        if (k < 2)
            C[static_cast<std::size_t>(k)] = MatrixXd::Identity(m, m);
        else {
            Eigen::FullPivLU<MatrixXd> lu(ambient_laplacian(
                deg[static_cast<std::size_t>(k - 2)], deg[static_cast<std::size_t>(k)]));
            C[static_cast<std::size_t>(k)] = lu.kernel();
        }
    }

    HarmonicBasis B;
    B.n = n;
    B.kmax = kmax;
    std::vector<Eigen::Index> offset(static_cast<std::size_t>(kmax) + 1, 0);
    Eigen::Index total = 0;
    for (int k = 1; k <= kmax; ++k) {
        offset[static_cast<std::size_t>(k)] = total;
        total += C[static_cast<std::size_t>(k)].cols();
        for (Eigen::Index i = 0; i < C[static_cast<std::size_t>(k)].cols(); ++i)
            B.degree.push_back(k);
    }
    B.mass = MatrixXd::Zero(total, total);
    B.grad = MatrixXd::Zero(total, total);

    for (int k = 1; k <= kmax; ++k)
        for (int l = k; l <= kmax; ++l) {
            if ((k + l) % 2) continue; // odd total degree: every moment vanishes
            const auto& Ck = C[static_cast<std::size_t>(k)];
            const auto& Cl = C[static_cast<std::size_t>(l)];
            MatrixXd Q = moment_matrix(deg[static_cast<std::size_t>(k)],
                                       deg[static_cast<std::size_t>(l)]);
            MatrixXd Mblk = Ck.transpose() * Q * Cl;

            MatrixXd Qlo = moment_matrix(deg[static_cast<std::size_t>(k - 1)],
                                         deg[static_cast<std::size_t>(l - 1)]);
            MatrixXd Gblk = MatrixXd::Zero(Ck.cols(), Cl.cols());
            for (int v = 0; v < d; ++v) {
                MatrixXd Dk = diff_matrix(deg[static_cast<std::size_t>(k - 1)],
                                          deg[static_cast<std::size_t>(k)], v) * Ck;
                MatrixXd Dl = diff_matrix(deg[static_cast<std::size_t>(l - 1)],
                                          deg[static_cast<std::size_t>(l)], v) * Cl;
                Gblk += Dk.transpose() * Qlo * Dl;
            }
            Gblk -= double(k) * double(l) * Mblk;

            B.mass.block(offset[static_cast<std::size_t>(k)], offset[static_cast<std::size_t>(l)],
                         Ck.cols(), Cl.cols()) = Mblk;
            B.grad.block(offset[static_cast<std::size_t>(k)], offset[static_cast<std::size_t>(l)],
                         Ck.cols(), Cl.cols()) = Gblk;
            if (l > k) {
                B.mass.block(offset[static_cast<std::size_t>(l)], offset[static_cast<std::size_t>(k)],
                             Cl.cols(), Ck.cols()) = Mblk.transpose();
                B.grad.block(offset[static_cast<std::size_t>(l)], offset[static_cast<std::size_t>(k)],
                             Cl.cols(), Ck.cols()) = Gblk.transpose();
            }
        }
    return B;
}

Eigen::MatrixXd laplace_matrix(const HarmonicBasis& B) {
    MatrixXd W = inv_sqrt(B.mass);
    MatrixXd G = W * B.grad * W;
    G = 0.5 * (G + G.transpose()).eval();
    return -G;
}

Eigen::MatrixXd trace_operator_matrix(const HarmonicBasis& B) {
    MatrixXd L = laplace_matrix(B);
    MatrixXd A = -0.5 * L * L - 0.5 * double(B.n) * L;
    return 0.5 * (A + A.transpose()).eval();
}

std::vector<double> trace_spectrum(const HarmonicBasis& B) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(trace_operator_matrix(B));
    const auto& ev = es.eigenvalues();
    return std::vector<double>(ev.data(), ev.data() + ev.size());
}

KernelInfo trace_kernel(const HarmonicBasis& B) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(trace_operator_matrix(B));
    std::vector<double> sv(static_cast<std::size_t>(es.eigenvalues().size()));
    for (std::size_t i = 0; i < sv.size(); ++i)
        sv[i] = std::abs(es.eigenvalues()[static_cast<Eigen::Index>(i)]);
    std::sort(sv.begin(), sv.end());

    KernelInfo info;
    if (sv.size() < 2) return info;
    // ratios are taken against at least the round-off scale of the matrix,
    // so exact zeros do not create spurious splits inside the noise cluster
    const double floor = sv.back() * 1e-15 + 1e-300;
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < sv.size(); ++i) {
        const double r = sv[i + 1] / std::max(sv[i], floor);
        if (r > best) {
            best = r;
            info.dimension = static_cast<int>(i) + 1;
            info.separation = r;
        }
    }
    return info;
}

} // namespace bachflow
