#include "rodeepc/trajectory.hpp"

#include <algorithm>
#include <cmath>

namespace rodeepc {

SignalSequence::SignalSequence(Matrix samples) : data_(std::move(samples)) {
  if (data_.rows() < 1 || data_.cols() < 1)
    throw DimensionError("signal sequence needs at least one channel and one sample");
  if (!data_.allFinite()) throw DomainError("signal sequence contains non-finite entries");
}

SignalSequence SignalSequence::scalar(std::span<const double> values) {
  Matrix m(1, static_cast<Index>(values.size()));
  for (Index k = 0; k < m.cols(); ++k) m(0, k) = values[static_cast<std::size_t>(k)];
  return SignalSequence(std::move(m));
}

TrajectoryDataset::TrajectoryDataset(std::vector<SignalSequence> segments)
    : segments_(std::move(segments)) {
  if (segments_.empty()) throw DimensionError("dataset needs at least one segment");
  for (const auto& s : segments_)
    if (s.channels() != segments_.front().channels())
      throw ShapeError("dataset segments have mismatched channel counts");
}

Index TrajectoryDataset::channels() const noexcept {
  return segments_.empty() ? 0 : segments_.front().channels();
}

Index TrajectoryDataset::total_length() const noexcept {
  Index t = 0;
  for (const auto& s : segments_) t += s.length();
  return t;
}

Index TrajectoryDataset::min_length() const noexcept {
  Index t = segments_.empty() ? 0 : segments_.front().length();
  for (const auto& s : segments_) t = std::min(t, s.length());
  return t;
}

MosaicHankel::MosaicHankel(Index depth, Index channels) : depth_(depth), channels_(channels) {
  if (depth < 1 || channels < 1) throw DimensionError("Hankel depth and channels must be >= 1");
}

void MosaicHankel::reserve(Index columns) {
  if (columns <= storage_.cols()) return;
  Matrix grown(rows(), columns);
  grown.leftCols(cols_) = storage_.leftCols(cols_);
  storage_.swap(grown);
  origins_.reserve(static_cast<std::size_t>(columns));
}

void MosaicHankel::push_column(const Eigen::Ref<const Vector>& w, const WindowOrigin& origin) {
  if (w.size() != rows())
    throw ShapeError("window has " + std::to_string(w.size()) + " entries, expected " +
                     std::to_string(rows()));
  if (cols_ == storage_.cols()) reserve(std::max<Index>(16, 2 * cols_));
  storage_.col(cols_) = w;
  origins_.push_back(origin);
  origins_.back().sequence = next_sequence_++;
  if (!origin.online) ++offline_;
  ++cols_;
}

void MosaicHankel::append_window(const Eigen::Ref<const Vector>& w, Index sample_index) {
  push_column(w, WindowOrigin{-1, sample_index, true, 0});
}

void MosaicHankel::remove_last_window() {
  if (cols_ == 0 || !origins_.back().online)
    throw ProtocolError("only appended online windows may be removed");
  origins_.pop_back();
  --cols_;
}

Index MosaicHankel::replace_oldest(const Eigen::Ref<const Vector>& w, Index sample_index) {
  if (w.size() != rows()) throw ShapeError("window dimension mismatch in replace_oldest");
  if (cols_ == 0) throw ProtocolError("cannot replace a column of an empty matrix");
  auto it = std::min_element(origins_.begin(), origins_.end(),
                             [](const auto& a, const auto& b) { return a.sequence < b.sequence; });
  const Index slot = static_cast<Index>(it - origins_.begin());
  if (!it->online) --offline_;
  storage_.col(slot) = w;
  *it = WindowOrigin{-1, sample_index, true, next_sequence_++};
  return slot;
}

MosaicHankel build_hankel(const SignalSequence& seq, Index depth) {
  return build_mosaic(TrajectoryDataset({seq}), depth);
}

MosaicHankel build_mosaic(const TrajectoryDataset& dataset, Index depth) {
  if (depth < 1) throw DimensionError("Hankel depth must be >= 1");
  if (dataset.min_length() < depth)
    throw DimensionError("segment of length " + std::to_string(dataset.min_length()) +
                         " is shorter than depth " + std::to_string(depth));
  const Index q = dataset.channels();
  MosaicHankel h(depth, q);
  const auto s = static_cast<Index>(dataset.size());
  h.reserve(dataset.total_length() - s * (depth - 1));
  Vector col(q * depth);
  int seg_id = 0;
  for (const auto& seg : dataset.segments()) {
    for (Index j = 0; j + depth <= seg.length(); ++j) {
      // Column-major storage of the segment makes each window contiguous.
      col = Eigen::Map<const Vector>(seg.data().data() + j * q, q * depth);
      h.push_column(col, WindowOrigin{seg_id, j, false, 0});
    }
    ++seg_id;
  }
  return h;
}

SignalSequence interleave_io(const SignalSequence& u, const SignalSequence& y) {
  if (u.length() != y.length())
    throw ShapeError("input and output sequences differ in length");
  Matrix w(u.channels() + y.channels(), u.length());
  w.topRows(u.channels()) = u.data();
  w.bottomRows(y.channels()) = y.data();
  return SignalSequence(std::move(w));
}

MosaicHankel stack_io(const TrajectoryDataset& u_data, const TrajectoryDataset& y_data,
                      Index depth) {
  if (u_data.size() != y_data.size())
    throw ShapeError("input and output datasets have different segment counts");
  std::vector<SignalSequence> joined;
  joined.reserve(u_data.size());
  for (std::size_t i = 0; i < u_data.size(); ++i)
    joined.push_back(interleave_io(u_data.segments()[i], y_data.segments()[i]));
  return build_mosaic(TrajectoryDataset(std::move(joined)), depth);
}

std::vector<Index> IoLayout::block_row_order() const {
  const Index q = channels();
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(rows()));
  auto push_rows = [&](Index t0, Index t1, Index c0, Index n) {
    for (Index t = t0; t < t1; ++t)
      for (Index c = 0; c < n; ++c) order.push_back(t * q + c0 + c);
  };
  push_rows(0, t_ini, 0, input_dim);
  push_rows(t_ini, depth(), 0, input_dim);
  push_rows(0, t_ini, input_dim, output_dim);
  push_rows(t_ini, depth(), input_dim, output_dim);
  return order;
}

BlockPartition partition(const Eigen::Ref<const Matrix>& stacked, const IoLayout& layout) {
  if (stacked.rows() != layout.rows())
    throw ShapeError("matrix has " + std::to_string(stacked.rows()) + " rows, layout expects " +
                     std::to_string(layout.rows()));
  const auto order = layout.block_row_order();
  const Matrix permuted = stacked(order, Eigen::all);
  const Index mt = layout.input_dim * layout.t_ini;
  const Index mn = layout.input_dim * layout.horizon;
  const Index pt = layout.output_dim * layout.t_ini;
  const Index pn = layout.output_dim * layout.horizon;
  BlockPartition b;
  b.past_inputs = permuted.topRows(mt);
  b.future_inputs = permuted.middleRows(mt, mn);
  b.past_outputs = permuted.middleRows(mt + mn, pt);
  b.future_outputs = permuted.bottomRows(pn);
  return b;
}

BlockPartition partition(const MosaicHankel& m, const IoLayout& layout) {
  if (m.depth() != layout.depth() || m.channels() != layout.channels())
    throw ShapeError("Hankel depth/channels do not match T_ini + N and m + p");
  return partition(m.matrix(), layout);
}

Matrix restack(const BlockPartition& b, const IoLayout& layout) {
  const Index cols = b.past_inputs.cols();
  Matrix permuted(layout.rows(), cols);
  permuted << b.past_inputs, b.future_inputs, b.past_outputs, b.future_outputs;
  const auto order = layout.block_row_order();
  Matrix out(layout.rows(), cols);
  for (std::size_t i = 0; i < order.size(); ++i)
    out.row(order[i]) = permuted.row(static_cast<Index>(i));
  return out;
}

Vector stack_window(const Eigen::Ref<const Matrix>& inputs, const Eigen::Ref<const Matrix>& outputs) {
  if (inputs.cols() != outputs.cols()) throw ShapeError("input/output window lengths differ");
  const Index m = inputs.rows();
  const Index p = outputs.rows();
  Vector w((m + p) * inputs.cols());
  for (Index t = 0; t < inputs.cols(); ++t) {
    w.segment(t * (m + p), m) = inputs.col(t);
    w.segment(t * (m + p) + m, p) = outputs.col(t);
  }
  return w;
}

RankInfo numerical_rank(const Eigen::Ref<const Matrix>& m, double rel_tol) {
  if (m.size() == 0) throw DomainError("rank of an empty matrix");
  if (!(rel_tol > 0.0)) throw DomainError("rank tolerance must be positive");
  Eigen::BDCSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  RankInfo info;
  info.sigma_max = s.size() ? s(0) : 0.0;
  if (info.sigma_max <= 0.0) return info;
  const double cut = rel_tol * info.sigma_max;
  while (info.rank < s.size() && s(info.rank) >= cut) ++info.rank;
  info.sigma_r = s(info.rank - 1);
  return info;
}

RankInfo numerical_rank(const MosaicHankel& m, double rel_tol) {
  return numerical_rank(m.matrix(), rel_tol);
}

bool is_persistently_exciting(const SignalSequence& u, Index order, double rel_tol) {
  if (order < 1 || order > u.length())
    throw DimensionError("excitation order must lie in [1, length]");
  const auto h = build_hankel(u, order);
  return numerical_rank(h, rel_tol).rank == u.channels() * order;
}

}  // namespace rodeepc
