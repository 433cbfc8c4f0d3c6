#pragma once
#include "bachflow/field.hpp"

namespace bachflow {

// Covariant calculus against the background metric h = phi^2 delta.
// Index conventions used throughout:
//   - commas denote covariant derivatives; each new derivative index is
//     appended at the END of the component multi-index, so in v_{ij,kl}
//     the k-derivative was applied first and l last;
//   - the divergence of a symmetric 2-tensor is [delta v]_i = -v_{ij,}{}^j;
//   - delta* is the symmetrized covariant derivative of a 1-form;
//   - K alpha = delta* alpha + (1/n)(delta alpha) h is trace-free;
//   - the rough Laplacian is the h-trace of the second covariant
//     derivative (nonpositive spectrum).
// All raised indices use the exact inverse metric phi^-2 delta.

// Chart partial derivatives only (no Christoffel terms), index appended last.
Field partial_derivative(const Field& u);

// Full covariant derivative with exact Christoffel corrections.
Field covariant_derivative(const Field& u);

// h^{-1}-contraction of two slots (0-based positions in the multi-index).
Field contract_pair(const Field& u, int slotA, int slotB);

// Pointwise h-trace of a sym2 field (rank 0 result).
Field trace_of(const Field& v);

// f |-> f h (rank0 -> sym2).
Field times_metric(const Field& f);

// Pointwise trace-free part v - (tr v / n) h.
Field traceless_part(const Field& v);

// Transpose two slots of the component multi-index / average with the swap.
Field swap_slots(const Field& u, int slotA, int slotB);
Field symmetrize_pair(const Field& u, int slotA, int slotB);

Field divergence(const Field& v);          // sym2 -> 1-form, -v_{ij,}{}^j
Field delta_star(const Field& omega);      // 1-form -> sym2
Field conformal_killing(const Field& omega); // 1-form -> traceless sym2
Field rough_laplacian(const Field& u);     // any rank
Field grad_scalar(const Field& f);         // rank0 -> 1-form (= covariant_derivative)

// The vector field v_{ip,}{}^p (index order (i)), i.e. minus the divergence.
Field div_vector(const Field& v);

// L2 inner product by quadrature: all indices contracted with h^{-1},
// integrated against the volume weight.
double l2_inner(const Field& u, const Field& w);
double l2_norm2(const Field& u);

// Hodge operators on 1-forms (and the 2-form pieces they need).
Field hodge_d(const Field& alpha);            // 1-form -> 2-form, (da)_{ij} = a_{j,i} - a_{i,j}
Field hodge_dstar_1form(const Field& alpha);  // 1-form -> rank0, d*a = -a_{k,}{}^k
Field hodge_dstar_2form(const Field& omega);  // 2-form -> 1-form
Field hodge_laplacian_1form(const Field& alpha); // Delta_H = -(d d* + d* d)

// Inner product of T*M-valued p-forms: p! times the plain all-index
// contraction (the factor that makes the printed adjoint formulas exact).
double form_inner(const Field& u, const Field& w, int p);

// The 3-tensor T_{ijk} = v_{ij,k} - v_{jk,i} and A = grad T.
Field t_tensor(const Field& v);
Field a_tensor(const Field& v);

// Covariant exterior derivative on T*M-valued p-forms and its adjoint,
// with the value index in the SECOND slot:
//   p=1: eta_{ij}    (form i, value j)   -> [d eta]_{ijk} = (1/2)(eta_{kj,i} - eta_{ij,k})
//   p=2: T_{ijk}     (form i,k, value j) -> [d T]_{ijkl}  = (1/3)(T_{kjl,i} + T_{lji,k} + T_{ijk,l})
//   adjoints: [(d)* w]_{ij} = -2 w_{kji,}{}^k   (from 2-form w_{ikj}-indexed rank 3)
//             [(d)* w]_{ijk} = -3 w_{ljik,}{}^l (from 3-form rank 4)
Field d_nabla(const Field& eta, int p);
Field d_nabla_star(const Field& omega, int p);

} // namespace bachflow
