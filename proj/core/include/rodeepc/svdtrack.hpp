#pragma once

#include "rodeepc/common.hpp"
#include "rodeepc/trajectory.hpp"

namespace rodeepc {

/// How the small (r+1)-sized core matrix of a rank-one append is diagonalized.
enum class CoreSolver {
  secular,  // rank-one eigen-update of diag(d^2) + z z^T, O(r^2)
  dense,    // full SVD of the explicit core, O(r^3)
};

struct SvdOptions {
  double rel_tol = kDefaultRankTol;  // rank cut: sigma_i >= rel_tol * sigma_max
  double orth_tol = 1e-10;           // relative in-span test on the projected residual
  int reorth_interval = 100;         // 0 disables periodic re-orthonormalization
  CoreSolver core = CoreSolver::secular;
};

/// Truncated SVD M ~ U_r diag(sigma) V_r^T of a growing qK x L matrix with the
/// right factor discarded.
struct SvdState {
  Matrix left;   // rows x r, orthonormal columns
  Vector sigma;  // length r, nonincreasing, strictly positive
  Index rows = 0;
  std::int64_t update_count = 0;

  Index rank() const noexcept { return sigma.size(); }
  double sigma_r() const noexcept { return sigma.size() ? sigma(sigma.size() - 1) : 0.0; }
  double sigma_max() const noexcept { return sigma.size() ? sigma(0) : 0.0; }
};

enum class AppendKind { grew, kept_rank, in_span, full_row_rank };

struct AppendReport {
  AppendKind kind = AppendKind::kept_rank;
  double residual_norm = 0.0;  // ||(I - U U^T) w||
};

SvdState init_from_batch(const Eigen::Ref<const Matrix>& m, double rel_tol = kDefaultRankTol);
SvdState init_from_batch(const MosaicHankel& m, double rel_tol = kDefaultRankTol);

/// Rank-deficient branch (rank < rows). Requires state.rank() < state.rows.
AppendReport append_update_lowrank(SvdState& state, const Eigen::Ref<const Vector>& w,
                                   const SvdOptions& opt = {});

/// Full-row-rank branch (rank == rows).
AppendReport append_update_fullrank(SvdState& state, const Eigen::Ref<const Vector>& w,
                                    const SvdOptions& opt = {});

/// Picks the branch from the current rank and re-orthonormalizes every
/// `opt.reorth_interval` updates.
AppendReport append_update(SvdState& state, const Eigen::Ref<const Vector>& w,
                           const SvdOptions& opt = {});

inline bool informativeness_gate(double sigma_r, double threshold) {
  if (threshold < 0.0) throw DomainError("informativeness threshold must be >= 0");
  return sigma_r >= threshold;
}

struct OrderSelection {
  Index adaptive_order = 0;
  double threshold = 0.0;
  Index floor = 0;
  bool floor_clamped = false;  // floor exceeded the available rank
};

OrderSelection adaptive_order(const Eigen::Ref<const Vector>& singular_values, double threshold,
                              Index floor);

/// First `order` columns of U_r scaled by the matching singular values.
Matrix reduced_matrix(const SvdState& state, Index order);

void reorthonormalize(SvdState& state);

/// max |U^T U - I| entry.
double orthogonality_defect(const SvdState& state);

}  // namespace rodeepc
