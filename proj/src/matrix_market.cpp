#include "cpkrylov/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cpk {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

struct LineReader {
  std::ifstream in;
  std::string path;
  long line_no = 0;

  explicit LineReader(const std::string& p) : in(p), path(p) {
    if (!in) throw ParseError(p, 0, "cannot open file");
  }

  /// Next non-comment, non-blank line; false at end of file.
  bool next(std::string& out, bool skip_comments = true) {
    while (std::getline(in, out)) {
      ++line_no;
      auto first = out.find_first_not_of(" \t\r\n");
      if (first == std::string::npos) continue;
      if (skip_comments && out[first] == '%') continue;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path, line_no, what); }
};

double parse_double(LineReader& r, const std::string& tok) {
  try {
    size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) r.fail("trailing characters after number '" + tok + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    r.fail("expected a real number, got '" + tok + "'");
  }
}

long parse_index(LineReader& r, const std::string& tok) {
  long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    r.fail("expected an integer, got '" + tok + "'");
  return v;
}

std::vector<std::string> tokens(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

}  // namespace

MatrixStorage read_matrix_market(const std::string& path) {
  LineReader r(path);

  std::string header;
  if (!r.next(header, /*skip_comments=*/false)) r.fail("empty file, missing MatrixMarket header");
  auto h = tokens(lower(header));
  if (h.size() < 5 || h[0] != "%%matrixmarket") r.fail("malformed MatrixMarket header");
  if (h[1] != "matrix") r.fail("unsupported object '" + h[1] + "'");
  const std::string& format = h[2];
  const std::string& field = h[3];
  const std::string& symmetry = h[4];
  if (field != "real")
    r.fail("unsupported field type '" + field + "' (only real is accepted)");
  Symmetry sym;
  if (symmetry == "general")
    sym = Symmetry::General;
  else if (symmetry == "symmetric")
    sym = Symmetry::Symmetric;
  else
    r.fail("unsupported symmetry '" + symmetry + "'");

  std::string line;
  if (!r.next(line)) r.fail("missing size line");
  auto size_tok = tokens(line);

  if (format == "coordinate") {
    if (size_tok.size() != 3) r.fail("coordinate size line must read 'rows cols nnz'");
    const long rows = parse_index(r, size_tok[0]);
    const long cols = parse_index(r, size_tok[1]);
    const long nnz = parse_index(r, size_tok[2]);
    if (rows < 0 || cols < 0 || nnz < 0) r.fail("negative size");
    if (sym == Symmetry::Symmetric && rows != cols) r.fail("symmetric matrix must be square");
    std::vector<Triplet> entries;
    entries.reserve(nnz);
    for (long k = 0; k < nnz; ++k) {
      if (!r.next(line)) r.fail("unexpected end of file, expected " + std::to_string(nnz) + " entries");
      auto t = tokens(line);
      if (t.size() != 3) r.fail("coordinate entry must read 'row col value'");
      const long i = parse_index(r, t[0]);
      const long j = parse_index(r, t[1]);
      const double v = parse_double(r, t[2]);
      if (i < 1 || i > rows || j < 1 || j > cols) r.fail("entry index out of bounds");
      if (sym == Symmetry::Symmetric && i < j)
        r.fail("symmetric coordinate files store the lower triangle only");
      entries.push_back({i - 1, j - 1, v});
    }
    return MatrixStorage::from_triplets(rows, cols, std::move(entries), sym);
  }

  if (format == "array") {
    if (size_tok.size() != 2) r.fail("array size line must read 'rows cols'");
    const long rows = parse_index(r, size_tok[0]);
    const long cols = parse_index(r, size_tok[1]);
    if (rows < 0 || cols < 0) r.fail("negative size");
    if (sym == Symmetry::Symmetric && rows != cols) r.fail("symmetric matrix must be square");
    DenseMatrix M = DenseMatrix::Zero(rows, cols);
    auto read_value = [&]() {
      if (!r.next(line)) r.fail("unexpected end of file in array data");
      auto t = tokens(line);
      if (t.size() != 1) r.fail("array entries must appear one per line");
      return parse_double(r, t[0]);
    };
    if (sym == Symmetry::General) {
      for (long j = 0; j < cols; ++j)
        for (long i = 0; i < rows; ++i) M(i, j) = read_value();
    } else {
      for (long j = 0; j < cols; ++j)
        for (long i = j; i < rows; ++i) {
          const double v = read_value();
          M(i, j) = v;
          M(j, i) = v;
        }
    }
    if (r.next(line)) r.fail("trailing data after matrix entries");
    return MatrixStorage::dense(std::move(M), sym);
  }

  r.fail("unsupported format '" + format + "'");
}

void write_matrix_market(const std::string& path, const MatrixStorage& M) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  const char* sym = M.symmetric() ? "symmetric" : "general";
  if (M.layout() == Layout::Dense) {
    std::fprintf(f, "%%%%MatrixMarket matrix array real %s\n", sym);
    std::fprintf(f, "%ld %ld\n", static_cast<long>(M.rows()), static_cast<long>(M.cols()));
    const DenseMatrix D = M.to_dense();
    if (M.symmetric()) {
      for (Index j = 0; j < D.cols(); ++j)
        for (Index i = j; i < D.rows(); ++i) std::fprintf(f, "%.17g\n", D(i, j));
    } else {
      for (Index j = 0; j < D.cols(); ++j)
        for (Index i = 0; i < D.rows(); ++i) std::fprintf(f, "%.17g\n", D(i, j));
    }
  } else {
    std::fprintf(f, "%%%%MatrixMarket matrix coordinate real %s\n", sym);
    std::fprintf(f, "%ld %ld %ld\n", static_cast<long>(M.rows()), static_cast<long>(M.cols()),
                 static_cast<long>(M.nonzeros()));
    M.for_each_entry([&](Index i, Index j, double v) {
      std::fprintf(f, "%ld %ld %.17g\n", static_cast<long>(i + 1), static_cast<long>(j + 1), v);
    });
  }
  std::fclose(f);
}

Vector read_vector(const std::string& path) {
  MatrixStorage M = read_matrix_market(path);
  if (M.cols() != 1) throw std::runtime_error("'" + path + "' is not an n-by-1 vector file");
  return M.to_dense().col(0);
}

void write_vector(const std::string& path, const Vector& v) {
  DenseMatrix M(v.size(), 1);
  M.col(0) = v;
  write_matrix_market(path, MatrixStorage::dense(std::move(M)));
}

}  // namespace cpk
