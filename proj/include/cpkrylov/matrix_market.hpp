/// \file matrix_market.hpp
/// Matrix Market exchange: coordinate real general/symmetric and array real
/// files. Vectors travel as n-by-1 array files.

#pragma once

#include "cpkrylov/linops.hpp"

#include <string>

namespace cpk {

/// Thrown on malformed input; the message carries the offending line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, long line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// Reads a coordinate or array file. Symmetry is taken from the header;
/// complex, pattern and integer fields are rejected.
MatrixStorage read_matrix_market(const std::string& path);

/// Writes storage losslessly: triplet/compressed layouts as coordinate files,
/// dense as array files, 17 significant digits either way.
void write_matrix_market(const std::string& path, const MatrixStorage& M);

Vector read_vector(const std::string& path);
void write_vector(const std::string& path, const Vector& v);

}  // namespace cpk
