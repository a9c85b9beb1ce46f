#pragma once

#include <algorithm>
#include <cstdint>

#include "ubpod/linops.hpp"
#include "ubpod/snapshots.hpp"

namespace ubpod {

/// Dense (A, B, C) in coordinates where the state and output inner products
/// are Euclidean: (F A F^{-1}, F B, F_out C F^{-1}). With `theta` the output
/// is replaced by its coefficients Theta' W_out C F^{-1}.
struct DenseRealization {
  Matrix A, B, C;
};

DenseRealization euclidean_realization(const StateSpaceSystem& sys,
                                       const PODBasis* theta = nullptr);

/// A = T diag(A_u, A_s) T^{-1} with T = [T_u T_s], T^{-1} = [S_u'; S_s'].
struct DecoupledRealization {
  Matrix a_u, b_u, c_u;
  Matrix a_s, b_s, c_s;
  Matrix t_u, t_s, s_u, s_s;

  int n_u() const { return static_cast<int>(a_u.rows()); }
  /// |T diag(A_u, A_s) T^{-1} - A|_F / |A|_F.
  double reconstruction_error(const Matrix& a) const;
};

/// Ordered real Schur form plus a Sylvester solve for the coupling block.
DecoupledRealization decouple(const Matrix& a, const Matrix& b,
                              const Matrix& c, double axis_tol = 1e-8);

struct FrequencyOptions {
  /// Upper cutoff; non-positive means 1e3 max|lambda|.
  double omega_max = -1.0;
  /// Lower cutoff; non-positive means 1e-4 min|lambda|.
  double omega_min = -1.0;
  /// Initial number of log-spaced intervals; doubled until converged.
  int n_quad = 256;
  double tol = 1e-10;
  int max_doublings = 10;
};

struct FrequencyGramians {
  Matrix wc;
  Matrix wo;
  /// Relative change at the last refinement.
  double achieved_tol = 0.0;
  int nodes = 0;
  bool converged = false;
};

/// (1/2pi) integral over the imaginary axis of the resolvent products, by
/// Romberg-extrapolated trapezoid sums in log(omega) with analytic head and
/// 1/omega^2 tail corrections. Valid for any hyperbolic A.
FrequencyGramians freq_domain_gramians(const Matrix& a, const Matrix& b,
                                       const Matrix& c,
                                       const FrequencyOptions& options = {});

struct BalancedTruncation {
  /// All Hankel singular values (numerically zero ones included).
  Vector hsv;
  /// Reduced realization of the requested order.
  Matrix a, b, c;
  /// Balancing and adjoint transformations: a = S' A T, S' T = I.
  Matrix t, s;
  int order = 0;
};

/// Square-root balanced truncation of a stable system; `r` < 0 keeps every
/// state with a numerically positive HSV.
BalancedTruncation exact_bt_stable(const Matrix& a, const Matrix& b,
                                   const Matrix& c, int r = -1);

struct UnstableBalancedTruncation {
  /// Generalized HSVs of the antistable block (balanced as (-A_u, B_u, C_u)).
  Vector hsv_u;
  /// Generalized HSVs of the stable block.
  Vector hsv_s;
  /// Reduced realization diag(A_u, A_s) of order r_u + r_s.
  Matrix a, b, c;
  /// Modes in the original coordinates: Phi = [T_u Phi_u, T_s Phi_s].
  Matrix phi, psi;
  int r_u = 0;
  int r_s = 0;
};

/// Decouple, then balance each block separately. `r_u` < 0 keeps all
/// unstable states; `r_s` < 0 keeps all numerically positive stable HSVs.
UnstableBalancedTruncation exact_bt_unstable(const Matrix& a, const Matrix& b,
                                             const Matrix& c, int r_u = -1,
                                             int r_s = -1);

struct EquivalenceReport {
  int n_u = 0;
  /// Relative Frobenius discrepancies between the projected-system Gramians
  /// and the transformed stable-block Gramians.
  double controllability = 0.0;
  double observability = 0.0;
  double perturbation = 0.0;

  double worst() const { return std::max(controllability, observability); }
};

/// Gramians of the P_s-projected system restricted to Range(P_s) against
/// T_s W_c^s T_s' and S_s W_o^s S_s'. A nonzero `perturbation` adds a
/// relative random error to the left unstable basis before the projector is
/// built.
EquivalenceReport projected_gramian_check(const Matrix& a, const Matrix& b,
                                          const Matrix& c,
                                          double perturbation = 0.0,
                                          std::uint64_t seed = 1);

}  // namespace ubpod
