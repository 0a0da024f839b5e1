#include "factorsde/path_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "factorsde/error.hpp"

namespace factorsde {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary path container assumes a little-endian host");

constexpr char kMagic[8] = {'F', 'S', 'D', 'P', 'A', 'T', 'H', '1'};

void put_double(std::ostream& out, double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.write(buf, len);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    out.push_back(field);
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::io, "path csv: bad number '" + s + "' on line " + std::to_string(line_no));
  }
}

Index count_prefix(const std::vector<std::string>& header, std::size_t from, char prefix) {
  Index count = 0;
  for (std::size_t i = from; i < header.size(); ++i) {
    if (header[i] != std::string(1, prefix) + std::to_string(count + 1)) break;
    ++count;
  }
  return count;
}

Matrix full_table(const SamplePath& path) {
  const Index rows = path.x.rows();
  const Index p = path.dim();
  const bool latent = path.f.has_value() && path.e.has_value();
  const Index k = latent ? path.f->cols() : 0;
  Matrix table(rows, 1 + p + (latent ? k + p : 0));
  for (Index i = 0; i < rows; ++i) table(i, 0) = path.time(i);
  table.middleCols(1, p) = path.x;
  if (latent) {
    table.middleCols(1 + p, k) = *path.f;
    table.middleCols(1 + p + k, p) = *path.e;
  }
  return table;
}

}  // namespace

void write_path_csv(const SamplePath& path, std::ostream& out) {
  const Index p = path.dim();
  const bool latent = path.f.has_value() && path.e.has_value();
  const Index k = latent ? path.f->cols() : 0;
  out << 't';
  for (Index i = 1; i <= p; ++i) out << ",x" << i;
  if (latent) {
    for (Index i = 1; i <= k; ++i) out << ",f" << i;
    for (Index i = 1; i <= p; ++i) out << ",e" << i;
  }
  out << '\n';
  const Matrix table = full_table(path);
  for (Index r = 0; r < table.rows(); ++r) {
    for (Index c = 0; c < table.cols(); ++c) {
      if (c > 0) out << ',';
      put_double(out, table(r, c));
    }
    out << '\n';
  }
}

SamplePath read_path_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::io, "path csv: empty input");
  const auto header = split_commas(line);
  if (header.empty() || header[0] != "t") {
    throw Error(ErrorCode::io, "path csv: header must start with 't'");
  }
  const Index p = count_prefix(header, 1, 'x');
  if (p < 1) throw Error(ErrorCode::io, "path csv: no x1..xp columns");
  Index k = 0;
  bool latent = false;
  if (static_cast<Index>(header.size()) > 1 + p) {
    k = count_prefix(header, static_cast<std::size_t>(1 + p), 'f');
    const Index pe = count_prefix(header, static_cast<std::size_t>(1 + p + k), 'e');
    if (k < 1 || pe != p || static_cast<Index>(header.size()) != 1 + p + k + p) {
      throw Error(ErrorCode::io, "path csv: unexpected columns after x1..xp");
    }
    latent = true;
  }
  const std::size_t cols = header.size();

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_commas(line);
    if (fields.size() != cols) {
      throw Error(ErrorCode::io, "path csv: line " + std::to_string(line_no) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(cols));
    }
    for (const auto& f : fields) values.push_back(parse_double(f, line_no));
    ++rows;
  }
  if (rows < 2) throw Error(ErrorCode::io, "path csv: need at least 2 observations");

  const Matrix table = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Index>(rows), static_cast<Index>(cols));
  const Index n = static_cast<Index>(rows) - 1;
  const double t0 = table(0, 0);
  const double h = (table(n, 0) - t0) / static_cast<double>(n);
  if (!(h > 0.0) || std::abs(t0) > 1e-9 * h) {
    throw Error(ErrorCode::io, "path csv: time column must start at 0 and increase");
  }
  for (Index i = 0; i <= n; ++i) {
    if (std::abs(table(i, 0) - static_cast<double>(i) * h) > 1e-9 * (1.0 + std::abs(table(i, 0)))) {
      throw Error(ErrorCode::io, "path csv: non-uniform grid at row " + std::to_string(i));
    }
  }
  SamplePath path;
  path.h = h;
  path.x = table.middleCols(1, p);
  if (latent) {
    path.f = table.middleCols(1 + p, k);
    path.e = table.middleCols(1 + p + k, p);
  }
  return path;
}

void write_path_binary(const SamplePath& path, std::ostream& out) {
  const Matrix table = full_table(path);
  const std::uint64_t rows = static_cast<std::uint64_t>(table.rows());
  const std::uint64_t p = static_cast<std::uint64_t>(path.dim());
  const std::uint64_t k = path.f && path.e ? static_cast<std::uint64_t>(path.f->cols()) : 0;
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&p), sizeof p);
  out.write(reinterpret_cast<const char*>(&k), sizeof k);
  out.write(reinterpret_cast<const char*>(&path.h), sizeof path.h);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = table;
  out.write(reinterpret_cast<const char*>(row_major.data()),
            static_cast<std::streamsize>(row_major.size() * sizeof(double)));
}

SamplePath read_path_binary(std::istream& in) {
  char magic[8];
  std::uint64_t rows = 0, p = 0, k = 0;
  double h = 0.0;
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorCode::io, "path binary: bad magic");
  }
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&p), sizeof p);
  in.read(reinterpret_cast<char*>(&k), sizeof k);
  in.read(reinterpret_cast<char*>(&h), sizeof h);
  if (!in || rows < 2 || p < 1 || !(h > 0.0) || rows > (1ULL << 40) || p > (1ULL << 20) || k > p) {
    throw Error(ErrorCode::io, "path binary: bad header");
  }
  const std::uint64_t cols = 1 + p + (k > 0 ? k + p : 0);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> table(
      static_cast<Index>(rows), static_cast<Index>(cols));
  in.read(reinterpret_cast<char*>(table.data()),
          static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (!in) throw Error(ErrorCode::io, "path binary: truncated data");
  SamplePath path;
  path.h = h;
  path.x = table.middleCols(1, static_cast<Index>(p));
  if (k > 0) {
    path.f = table.middleCols(static_cast<Index>(1 + p), static_cast<Index>(k));
    path.e = table.middleCols(static_cast<Index>(1 + p + k), static_cast<Index>(p));
  }
  return path;
}

void save_path(const SamplePath& path, const std::filesystem::path& file) {
  const bool binary = file.extension() == ".bin";
  std::ofstream out(file, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorCode::io, "cannot open " + file.string() + " for writing");
  if (binary) {
    write_path_binary(path, out);
  } else {
    write_path_csv(path, out);
  }
  if (!out) throw Error(ErrorCode::io, "write failed: " + file.string());
}

SamplePath load_path(const std::filesystem::path& file) {
  const bool binary = file.extension() == ".bin";
  std::ifstream in(file, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorCode::io, "cannot open " + file.string());
  return binary ? read_path_binary(in) : read_path_csv(in);
}

}  // namespace factorsde
