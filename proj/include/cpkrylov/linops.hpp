/// \file linops.hpp
/// Vectors, matrix storage (dense, triplet, compressed-column) and abstract
/// linear operators shared by all other components.

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpk {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

/// Thrown when operand shapes do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a matrix required to be nonsingular is not.
class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a quadratic form that should be nonnegative is found negative
/// beyond the roundoff tolerance (indefinite preconditioner on the nullspace).
class IndefiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Layout { Dense, Triplet, CompressedColumn };
enum class Symmetry { General, Symmetric };

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Matrix container with three interchangeable layouts and a symmetry tag.
///
/// Symmetric sparse storage keeps the lower triangle only and mirrors it on
/// application; symmetric dense storage keeps the full matrix and is validated
/// at construction. Triplet input is finalized (bounds-checked, mapped to the
/// lower triangle when symmetric, sorted, duplicates summed) before any use,
/// so identical logical content always produces identical applications.
class MatrixStorage {
 public:
  MatrixStorage() = default;

  static MatrixStorage dense(DenseMatrix values, Symmetry sym = Symmetry::General);
  static MatrixStorage from_triplets(Index rows, Index cols, std::vector<Triplet> entries,
                                     Symmetry sym = Symmetry::General);
  static MatrixStorage identity(Index n);
  static MatrixStorage zero(Index rows, Index cols);
  static MatrixStorage diagonal(const Vector& d);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Layout layout() const { return layout_; }
  Symmetry symmetry() const { return sym_; }
  bool symmetric() const { return sym_ == Symmetry::Symmetric; }
  Index nonzeros() const;

  Vector apply(const Vector& v) const;
  Vector apply_transpose(const Vector& v) const;

  /// Full dense expansion (symmetric sparse content mirrored).
  DenseMatrix to_dense() const;
  /// Triplet storage compressed by column; other layouts pass through converted.
  MatrixStorage to_compressed_column() const;

  double frobenius_norm() const;
  double max_abs() const;

  /// Visits stored entries only (no symmetric mirroring).
  void for_each_entry(const std::function<void(Index, Index, double)>& fn) const;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  Layout layout_ = Layout::Dense;
  Symmetry sym_ = Symmetry::General;

  DenseMatrix dense_;

  std::vector<Triplet> trip_;  // finalized: column-major order, unique

  std::vector<Index> col_ptr_;
  std::vector<Index> row_idx_;
  std::vector<double> values_;
};

/// Abstract operator: shape, application, optional transpose, symmetry flag.
class LinearOperator {
 public:
  using ApplyFn = std::function<Vector(const Vector&)>;

  LinearOperator(Index rows, Index cols, ApplyFn apply, ApplyFn apply_transpose = nullptr,
                 bool symmetric = false);

  static LinearOperator from_matrix(const MatrixStorage& M);
  static LinearOperator from_matrix(std::shared_ptr<const MatrixStorage> M);
  static LinearOperator identity(Index n);
  static LinearOperator zero(Index rows, Index cols);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  bool symmetric() const { return symmetric_; }

  Vector apply(const Vector& v) const;
  Vector apply_transpose(const Vector& v) const;

  /// The backing matrix when this operator wraps one, nullptr otherwise.
  const MatrixStorage* matrix() const { return matrix_.get(); }

 private:
  Index rows_;
  Index cols_;
  ApplyFn apply_;
  ApplyFn apply_t_;
  bool symmetric_;
  std::shared_ptr<const MatrixStorage> matrix_;
};

Vector apply_operator(const LinearOperator& op, const Vector& v);

/// Assembles the block matrix [[topleft, B^T], [B, -C]]. The result is tagged
/// symmetric exactly when topleft is.
MatrixStorage assemble_block_2x2(const MatrixStorage& topleft, const MatrixStorage& B,
                                 const MatrixStorage& C);

}  // namespace cpk
