#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "rtucker/model.hpp"

namespace rtucker {

class format_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Text that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void write_header(std::ostream& os, const Shape& shape) {
  os << "order " << shape.size() << " shape";
  for (auto s : shape) os << ' ' << s;
}

inline void expect_word(std::istream& is, const std::string& word) {
  std::string got;
  if (!(is >> got) || got != word) throw format_error("expected '" + word + "', found '" + got + "'");
}

template <class V>
V read_value(std::istream& is, const char* what) {
  V v{};
  if (!(is >> v)) throw format_error(std::string("could not read ") + what);
  return v;
}

}  // namespace detail

inline void write_tensor(std::ostream& os, const DenseTensor& t) {
  detail::write_header(os, t.shape());
  os << " dense\n";
  const std::size_t line = t.shape().back();
  for (std::size_t i = 0; i < t.size(); ++i) {
    os << format_double(t[i]) << ((i + 1) % line == 0 ? '\n' : ' ');
  }
}

inline void write_tensor(std::ostream& os, const SparseTensor& t) {
  detail::write_header(os, t.shape());
  os << " nnz " << t.nnz() << '\n';
  for (std::size_t k = 0; k < t.nnz(); ++k) {
    for (std::size_t m = 0; m < t.order(); ++m) os << t.index(k, m) + 1 << ' ';
    os << format_double(t.value(k)) << '\n';
  }
}

inline void write_tensor(std::ostream& os, const AnyTensor& t) {
  std::visit([&](const auto& x) { write_tensor(os, x); }, t);
}

inline AnyTensor read_tensor(std::istream& is) {
  detail::expect_word(is, "order");
  const auto order = detail::read_value<std::size_t>(is, "order");
  if (order < 1) throw format_error("tensor order must be positive");
  detail::expect_word(is, "shape");
  Shape shape(order);
  for (auto& s : shape) s = detail::read_value<std::size_t>(is, "extent");
  std::string kind;
  is >> kind;
  if (kind == "dense") {
    std::vector<double> data(shape_product(shape));
    for (auto& v : data) v = detail::read_value<double>(is, "dense value");
    return DenseTensor(std::move(shape), std::move(data));
  }
  if (kind != "nnz") throw format_error("expected 'dense' or 'nnz', found '" + kind + "'");
  const auto nnz = detail::read_value<std::size_t>(is, "nnz");
  std::vector<Index> coords(nnz * order);
  std::vector<double> values(nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    for (std::size_t m = 0; m < order; ++m) {
      const auto i = detail::read_value<std::size_t>(is, "coordinate");
      if (i < 1 || i > shape[m]) throw format_error("coordinate out of range on entry " + std::to_string(k + 1));
      coords[k * order + m] = static_cast<Index>(i - 1);
    }
    values[k] = detail::read_value<double>(is, "value");
  }
  return SparseTensor(std::move(shape), std::move(coords), std::move(values));
}

inline void write_matrix(std::ostream& os, const Matrix& m) {
  os << "rows " << m.rows() << " cols " << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << format_double(m(i, j)) << (j + 1 == m.cols() ? '\n' : ' ');
  }
}

inline Matrix read_matrix(std::istream& is) {
  detail::expect_word(is, "rows");
  const auto rows = detail::read_value<Eigen::Index>(is, "rows");
  detail::expect_word(is, "cols");
  const auto cols = detail::read_value<Eigen::Index>(is, "cols");
  if (rows < 0 || cols < 0) throw format_error("negative matrix extent");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = detail::read_value<double>(is, "matrix entry");
  return m;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  return is;
}

}  // namespace detail

inline void save_tensor(const std::filesystem::path& p, const AnyTensor& t) {
  auto os = detail::open_out(p);
  write_tensor(os, t);
}

inline AnyTensor load_tensor(const std::filesystem::path& p) {
  auto is = detail::open_in(p);
  return read_tensor(is);
}

inline std::string factor_file(std::size_t n) { return "factor_" + std::to_string(n + 1) + ".mat"; }

// Directory layout: core.tns, factor_n.mat (1-based n), manifest.json.
inline void save_tucker_model(const std::filesystem::path& dir, const TuckerModel& model, nlohmann::json manifest = {}) {
  model.validate();
  std::filesystem::create_directories(dir);
  {
    auto os = detail::open_out(dir / "core.tns");
    write_tensor(os, model.core);
  }
  for (std::size_t n = 0; n < model.order(); ++n) {
    auto os = detail::open_out(dir / factor_file(n));
    write_matrix(os, model.factors[n]);
  }
  manifest["kind"] = "tucker";
  manifest["ranks"] = model.ranks();
  auto os = detail::open_out(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
}

inline TuckerModel load_tucker_model(const std::filesystem::path& dir) {
  TuckerModel model;
  auto core = load_tensor(dir / "core.tns");
  if (!std::holds_alternative<DenseTensor>(core)) throw format_error("core.tns must be dense");
  model.core = std::get<DenseTensor>(std::move(core));
  for (std::size_t n = 0; n < model.core.order(); ++n) {
    auto is = detail::open_in(dir / factor_file(n));
    model.factors.push_back(read_matrix(is));
  }
  model.validate();
  return model;
}

// Directory layout: factor_n.mat, weights.mat (R x 1), manifest.json.
inline void save_cp_model(const std::filesystem::path& dir, const CPModel& model, nlohmann::json manifest = {}) {
  model.validate();
  std::filesystem::create_directories(dir);
  for (std::size_t n = 0; n < model.order(); ++n) {
    auto os = detail::open_out(dir / factor_file(n));
    write_matrix(os, model.factors[n]);
  }
  {
    auto os = detail::open_out(dir / "weights.mat");
    write_matrix(os, Matrix(model.weights));
  }
  manifest["kind"] = "cp";
  manifest["rank"] = model.rank();
  manifest["order"] = model.order();
  auto os = detail::open_out(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
}

inline CPModel load_cp_model(const std::filesystem::path& dir) {
  auto is = detail::open_in(dir / "manifest.json");
  const auto manifest = nlohmann::json::parse(is);
  CPModel model;
  const auto order = manifest.at("order").get<std::size_t>();
  for (std::size_t n = 0; n < order; ++n) {
    auto fs = detail::open_in(dir / factor_file(n));
    model.factors.push_back(read_matrix(fs));
  }
  auto ws = detail::open_in(dir / "weights.mat");
  model.weights = read_matrix(ws).col(0);
  model.validate();
  return model;
}

}  // namespace rtucker
