#include "cpkrylov/linops.hpp"

#include <algorithm>
#include <cmath>

namespace cpk {

namespace {

void check_symmetric_dense(const DenseMatrix& M) {
  if (M.rows() != M.cols())
    throw DimensionError("symmetric tag requires a square matrix");
  const double scale = M.cwiseAbs().maxCoeff();
  const double tol = 1e-14 * std::max(scale, 1e-300);
  for (Index j = 0; j < M.cols(); ++j)
    for (Index i = j + 1; i < M.rows(); ++i)
      if (std::abs(M(i, j) - M(j, i)) > tol)
        throw DimensionError("matrix tagged symmetric deviates from symmetry beyond 1e-14 relative");
}

}  // namespace

MatrixStorage MatrixStorage::dense(DenseMatrix values, Symmetry sym) {
  if (sym == Symmetry::Symmetric) check_symmetric_dense(values);
  MatrixStorage M;
  M.rows_ = values.rows();
  M.cols_ = values.cols();
  M.layout_ = Layout::Dense;
  M.sym_ = sym;
  M.dense_ = std::move(values);
  return M;
}

MatrixStorage MatrixStorage::from_triplets(Index rows, Index cols, std::vector<Triplet> entries,
                                           Symmetry sym) {
  if (sym == Symmetry::Symmetric && rows != cols)
    throw DimensionError("symmetric tag requires a square matrix");
  for (auto& e : entries) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
      throw DimensionError("triplet index out of bounds");
    if (sym == Symmetry::Symmetric && e.row < e.col) std::swap(e.row, e.col);
  }
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });
  std::vector<Triplet> merged;
  merged.reserve(entries.size());
  for (const auto& e : entries) {
    if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col)
      merged.back().value += e.value;
    else
      merged.push_back(e);
  }
  MatrixStorage M;
  M.rows_ = rows;
  M.cols_ = cols;
  M.layout_ = Layout::Triplet;
  M.sym_ = sym;
  M.trip_ = std::move(merged);
  return M;
}

MatrixStorage MatrixStorage::identity(Index n) {
  return dense(DenseMatrix::Identity(n, n), Symmetry::Symmetric);
}

MatrixStorage MatrixStorage::zero(Index rows, Index cols) {
  Symmetry sym = rows == cols ? Symmetry::Symmetric : Symmetry::General;
  return dense(DenseMatrix::Zero(rows, cols), sym);
}

MatrixStorage MatrixStorage::diagonal(const Vector& d) {
  std::vector<Triplet> t;
  t.reserve(d.size());
  for (Index i = 0; i < d.size(); ++i) t.push_back({i, i, d[i]});
  return from_triplets(d.size(), d.size(), std::move(t), Symmetry::Symmetric);
}

Index MatrixStorage::nonzeros() const {
  switch (layout_) {
    case Layout::Dense: return rows_ * cols_;
    case Layout::Triplet: return static_cast<Index>(trip_.size());
    case Layout::CompressedColumn: return static_cast<Index>(values_.size());
  }
  return 0;
}

Vector MatrixStorage::apply(const Vector& v) const {
  if (v.size() != cols_) throw DimensionError("apply: vector length does not match column count");
  if (layout_ == Layout::Dense) return dense_ * v;
  Vector y = Vector::Zero(rows_);
  const bool mirror = sym_ == Symmetry::Symmetric;
  for_each_entry([&](Index i, Index j, double a) {
    y[i] += a * v[j];
    if (mirror && i != j) y[j] += a * v[i];
  });
  return y;
}

Vector MatrixStorage::apply_transpose(const Vector& v) const {
  if (sym_ == Symmetry::Symmetric) return apply(v);
  if (v.size() != rows_) throw DimensionError("apply_transpose: vector length does not match row count");
  if (layout_ == Layout::Dense) return dense_.transpose() * v;
  Vector y = Vector::Zero(cols_);
  for_each_entry([&](Index i, Index j, double a) { y[j] += a * v[i]; });
  return y;
}

DenseMatrix MatrixStorage::to_dense() const {
  if (layout_ == Layout::Dense) return dense_;
  DenseMatrix M = DenseMatrix::Zero(rows_, cols_);
  const bool mirror = sym_ == Symmetry::Symmetric;
  for_each_entry([&](Index i, Index j, double a) {
    M(i, j) += a;
    if (mirror && i != j) M(j, i) += a;
  });
  return M;
}

MatrixStorage MatrixStorage::to_compressed_column() const {
  std::vector<Triplet> entries;
  if (layout_ == Layout::Dense) {
    for (Index j = 0; j < cols_; ++j)
      for (Index i = 0; i < rows_; ++i) {
        if (sym_ == Symmetry::Symmetric && i < j) continue;
        if (dense_(i, j) != 0.0) entries.push_back({i, j, dense_(i, j)});
      }
  } else {
    for_each_entry([&](Index i, Index j, double a) { entries.push_back({i, j, a}); });
  }
  // entries are already unique and lower-triangular when symmetric
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });
  MatrixStorage M;
  M.rows_ = rows_;
  M.cols_ = cols_;
  M.layout_ = Layout::CompressedColumn;
  M.sym_ = sym_;
  M.col_ptr_.assign(cols_ + 1, 0);
  M.row_idx_.reserve(entries.size());
  M.values_.reserve(entries.size());
  for (const auto& e : entries) {
    ++M.col_ptr_[e.col + 1];
    M.row_idx_.push_back(e.row);
    M.values_.push_back(e.value);
  }
  for (Index j = 0; j < cols_; ++j) M.col_ptr_[j + 1] += M.col_ptr_[j];
  return M;
}

double MatrixStorage::frobenius_norm() const {
  if (layout_ == Layout::Dense) return dense_.norm();
  double s = 0.0;
  const bool mirror = sym_ == Symmetry::Symmetric;
  for_each_entry([&](Index i, Index j, double a) { s += (mirror && i != j ? 2.0 : 1.0) * a * a; });
  return std::sqrt(s);
}

double MatrixStorage::max_abs() const {
  if (layout_ == Layout::Dense) return rows_ * cols_ == 0 ? 0.0 : dense_.cwiseAbs().maxCoeff();
  double s = 0.0;
  for_each_entry([&](Index, Index, double a) { s = std::max(s, std::abs(a)); });
  return s;
}

void MatrixStorage::for_each_entry(const std::function<void(Index, Index, double)>& fn) const {
  switch (layout_) {
    case Layout::Dense:
      for (Index j = 0; j < cols_; ++j)
        for (Index i = 0; i < rows_; ++i) fn(i, j, dense_(i, j));
      break;
    case Layout::Triplet:
      for (const auto& e : trip_) fn(e.row, e.col, e.value);
      break;
    case Layout::CompressedColumn:
      for (Index j = 0; j < cols_; ++j)
        for (Index k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) fn(row_idx_[k], j, values_[k]);
      break;
  }
}

LinearOperator::LinearOperator(Index rows, Index cols, ApplyFn apply, ApplyFn apply_transpose,
                               bool symmetric)
    : rows_(rows), cols_(cols), apply_(std::move(apply)), apply_t_(std::move(apply_transpose)),
      symmetric_(symmetric) {
  if (symmetric_ && rows_ != cols_) throw DimensionError("symmetric operator must be square");
}

LinearOperator LinearOperator::from_matrix(const MatrixStorage& M) {
  return from_matrix(std::make_shared<const MatrixStorage>(M));
}

LinearOperator LinearOperator::from_matrix(std::shared_ptr<const MatrixStorage> M) {
  auto ptr = std::move(M);
  LinearOperator op(
      ptr->rows(), ptr->cols(), [ptr](const Vector& v) { return ptr->apply(v); },
      [ptr](const Vector& v) { return ptr->apply_transpose(v); }, ptr->symmetric());
  op.matrix_ = ptr;
  return op;
}

LinearOperator LinearOperator::identity(Index n) {
  return LinearOperator(n, n, [](const Vector& v) { return v; },
                        [](const Vector& v) { return v; }, true);
}

LinearOperator LinearOperator::zero(Index rows, Index cols) {
  return LinearOperator(
      rows, cols, [rows](const Vector&) { return Vector::Zero(rows); },
      [cols](const Vector&) { return Vector::Zero(cols); }, rows == cols);
}

Vector LinearOperator::apply(const Vector& v) const {
  if (v.size() != cols_) throw DimensionError("apply: vector length does not match operator columns");
  Vector y = apply_(v);
  if (y.size() != rows_) throw DimensionError("operator apply produced a wrong-sized vector");
  return y;
}

Vector LinearOperator::apply_transpose(const Vector& v) const {
  if (symmetric_) return apply(v);
  if (!apply_t_) throw std::logic_error("operator has no transpose application");
  if (v.size() != rows_) throw DimensionError("apply_transpose: vector length does not match operator rows");
  return apply_t_(v);
}

Vector apply_operator(const LinearOperator& op, const Vector& v) { return op.apply(v); }

MatrixStorage assemble_block_2x2(const MatrixStorage& topleft, const MatrixStorage& B,
                                 const MatrixStorage& C) {
  const Index n = topleft.rows();
  const Index m = B.rows();
  if (topleft.cols() != n) throw DimensionError("assemble_block_2x2: topleft must be square");
  if (B.cols() != n) throw DimensionError("assemble_block_2x2: B column count must match topleft");
  if (C.rows() != m || C.cols() != m) throw DimensionError("assemble_block_2x2: C must be m-by-m");
  if (!C.symmetric()) throw DimensionError("assemble_block_2x2: C must be tagged symmetric");

  const Symmetry sym = topleft.symmetric() ? Symmetry::Symmetric : Symmetry::General;

  if (topleft.layout() == Layout::Dense && B.layout() == Layout::Dense &&
      C.layout() == Layout::Dense) {
    DenseMatrix K(n + m, n + m);
    K.topLeftCorner(n, n) = topleft.to_dense();
    K.topRightCorner(n, m) = B.to_dense().transpose();
    K.bottomLeftCorner(m, n) = B.to_dense();
    K.bottomRightCorner(m, m) = -C.to_dense();
    return MatrixStorage::dense(std::move(K), sym);
  }

  std::vector<Triplet> entries;
  entries.reserve(topleft.nonzeros() + 2 * B.nonzeros() + C.nonzeros());
  const bool full = sym == Symmetry::General;
  // Symmetric output keeps the lower triangle only; the full output carries
  // both triangles exactly once. Dense storage holds both triangles, sparse
  // symmetric storage the lower one, which decides mirroring per block.
  auto emit_symmetric_block = [&](const MatrixStorage& S, Index off, double scale) {
    const bool stored_lower_only = S.layout() != Layout::Dense;
    S.for_each_entry([&](Index i, Index j, double a) {
      if (!full && i < j) return;
      entries.push_back({off + i, off + j, scale * a});
      if (full && stored_lower_only && i != j) entries.push_back({off + j, off + i, scale * a});
    });
  };
  if (full)
    topleft.for_each_entry([&](Index i, Index j, double a) { entries.push_back({i, j, a}); });
  else
    emit_symmetric_block(topleft, 0, 1.0);
  B.for_each_entry([&](Index i, Index j, double a) {
    entries.push_back({n + i, j, a});            // B
    if (full) entries.push_back({j, n + i, a});  // B^T
  });
  emit_symmetric_block(C, n, -1.0);
  return MatrixStorage::from_triplets(n + m, n + m, std::move(entries), sym);
}

}  // namespace cpk
