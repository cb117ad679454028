#pragma once

#include "rodeepc/common.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace rodeepc {

/// Default relative threshold for numerical rank: sigma_i counts iff
/// sigma_i >= rel_tol * sigma_max.
inline constexpr double kDefaultRankTol = 1e-10;

/// Uniformly sampled multichannel series. Stored channels x length, one
/// column per sample.
class SignalSequence {
 public:
  SignalSequence() = default;
  explicit SignalSequence(Matrix samples);

  static SignalSequence scalar(std::span<const double> values);

  Index channels() const noexcept { return data_.rows(); }
  Index length() const noexcept { return data_.cols(); }
  auto sample(Index k) const { return data_.col(k); }
  const Matrix& data() const noexcept { return data_; }

 private:
  Matrix data_;
};

/// Ordered, possibly discontinuous segments sharing one channel count.
class TrajectoryDataset {
 public:
  TrajectoryDataset() = default;
  explicit TrajectoryDataset(std::vector<SignalSequence> segments);

  const std::vector<SignalSequence>& segments() const noexcept { return segments_; }
  std::size_t size() const noexcept { return segments_.size(); }
  Index channels() const noexcept;
  Index total_length() const noexcept;
  Index min_length() const noexcept;

 private:
  std::vector<SignalSequence> segments_;
};

/// Where a Hankel column came from. Offline columns carry their segment and
/// start index; online columns carry the caller-supplied sample index.
struct WindowOrigin {
  int segment = -1;
  Index start = 0;
  bool online = false;
  std::uint64_t sequence = 0;  // insertion order, used for FIFO eviction
};

/// Depth-K block Hankel / mosaic-Hankel matrix over q channels, stored as
/// qK x L with each column a sample-major stacked window
/// [w(t); w(t+1); ...; w(t+K-1)].
///
/// Offline columns are immutable: `remove_last_window` only removes online
/// columns. `replace_oldest` overwrites the oldest column in place (FIFO),
/// so column order is not chronological once it has been used.
class MosaicHankel {
 public:
  MosaicHankel() = default;
  MosaicHankel(Index depth, Index channels);

  Index depth() const noexcept { return depth_; }
  Index channels() const noexcept { return channels_; }
  Index rows() const noexcept { return depth_ * channels_; }
  Index cols() const noexcept { return cols_; }
  Index offline_cols() const noexcept { return offline_; }
  Index online_cols() const noexcept { return cols_ - offline_cols(); }

  Eigen::Ref<const Matrix> matrix() const { return storage_.leftCols(cols_); }
  auto column(Index j) const { return storage_.col(j); }
  const std::vector<WindowOrigin>& origins() const noexcept { return origins_; }

  void append_window(const Eigen::Ref<const Vector>& w, Index sample_index = 0);
  void remove_last_window();
  /// Overwrites the column with the smallest insertion sequence number and
  /// returns its slot.
  Index replace_oldest(const Eigen::Ref<const Vector>& w, Index sample_index = 0);

  void reserve(Index columns);

 private:
  friend MosaicHankel build_mosaic(const TrajectoryDataset&, Index);
  void push_column(const Eigen::Ref<const Vector>& w, const WindowOrigin& origin);

  Index depth_ = 0;
  Index channels_ = 0;
  Matrix storage_;
  Index cols_ = 0;
  Index offline_ = 0;
  std::vector<WindowOrigin> origins_;
  std::uint64_t next_sequence_ = 0;
};

MosaicHankel build_hankel(const SignalSequence& seq, Index depth);
MosaicHankel build_mosaic(const TrajectoryDataset& dataset, Index depth);

/// Interleaves inputs and outputs sample by sample (inputs first) and builds
/// the combined mosaic-Hankel matrix with q = m + p channels.
MosaicHankel stack_io(const TrajectoryDataset& u_data, const TrajectoryDataset& y_data,
                      Index depth);

SignalSequence interleave_io(const SignalSequence& u, const SignalSequence& y);

/// Past/future bookkeeping for input-first stacked windows.
struct IoLayout {
  Index t_ini = 1;
  Index horizon = 1;
  Index input_dim = 1;
  Index output_dim = 1;

  Index depth() const noexcept { return t_ini + horizon; }
  Index channels() const noexcept { return input_dim + output_dim; }
  Index rows() const noexcept { return depth() * channels(); }

  /// Source-row indices in the order [U_P; U_F; Y_P; Y_F].
  std::vector<Index> block_row_order() const;
};

struct BlockPartition {
  Matrix past_inputs;     // U_P: m*T_ini x L
  Matrix future_inputs;   // U_F: m*N x L
  Matrix past_outputs;    // Y_P: p*T_ini x L
  Matrix future_outputs;  // Y_F: p*N x L
};

BlockPartition partition(const Eigen::Ref<const Matrix>& stacked, const IoLayout& layout);
BlockPartition partition(const MosaicHankel& m, const IoLayout& layout);

/// Inverse of `partition`: interleaves the four blocks back by sample index.
Matrix restack(const BlockPartition& blocks, const IoLayout& layout);

/// Stacks K input samples (m x K) and output samples (p x K) into one window.
Vector stack_window(const Eigen::Ref<const Matrix>& inputs, const Eigen::Ref<const Matrix>& outputs);

struct RankInfo {
  Index rank = 0;
  double sigma_r = 0.0;    // smallest retained singular value (0 if rank 0)
  double sigma_max = 0.0;
};

RankInfo numerical_rank(const Eigen::Ref<const Matrix>& m, double rel_tol = kDefaultRankTol);
RankInfo numerical_rank(const MosaicHankel& m, double rel_tol = kDefaultRankTol);

bool is_persistently_exciting(const SignalSequence& u, Index order,
                              double rel_tol = kDefaultRankTol);

}  // namespace rodeepc
