#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "featline/bdfla.hpp"
#include "featline/errors.hpp"

namespace featline {

// Text container for a fitted BdflaModel:
//
//   featline-bdfla-model 1
//   dims <D1> <D2> <d1> <d2>
//   config <t_max> <epsilon>
//   state <iterations_run> <converged 0|1>
//   j_history <count> <v>...
//   l_map <rows> <cols>
//   <one matrix row per line, row-major>
//   r_map <rows> <cols>
//   ...
//   end
//
// Reals are written as C99 hex-floats so matrices round-trip bit-exactly.

inline constexpr const char* kModelFormatTag = "featline-bdfla-model";
inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline std::string hex_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, res.ptr);
}

inline double parse_hex_real(const std::string& token, const char* field) {
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v,
                                   std::chars_format::hex);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw ParseError(field, "bad real '" + token + "'");
  }
  return v;
}

inline void expect_word(std::istream& in, const char* word) {
  std::string got;
  if (!(in >> got) || got != word) {
    throw ParseError(word, "expected '" + std::string(word) + "', found '" + got + "'");
  }
}

template <typename T>
T read_value(std::istream& in, const char* field) {
  T v{};
  if (!(in >> v)) throw ParseError(field, "missing or malformed value");
  return v;
}

inline void write_matrix(std::ostream& out, const char* name, const Mat& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? " " : "") << hex_real(m(i, j));
    out << '\n';
  }
}

inline Mat read_matrix(std::istream& in, const char* name) {
  expect_word(in, name);
  const auto rows = read_value<std::size_t>(in, name);
  const auto cols = read_value<std::size_t>(in, name);
  if (rows == 0 || cols == 0) throw ParseError(name, "zero dimension");
  Mat m(rows, cols);
  for (double& v : m.data()) v = parse_hex_real(read_value<std::string>(in, name), name);
  return m;
}

}  // namespace detail

inline void save_model(std::ostream& out, const BdflaModel& model) {
  out << kModelFormatTag << ' ' << kModelFormatVersion << '\n';
  out << "dims " << model.input_rows() << ' ' << model.input_cols() << ' ' << model.l_map.cols()
      << ' ' << model.r_map.cols() << '\n';
  out << "config " << model.config.t_max << ' ' << detail::hex_real(model.config.epsilon) << '\n';
  out << "state " << model.iterations_run << ' ' << (model.converged ? 1 : 0) << '\n';
  out << "j_history " << model.j_history.size();
  for (double j : model.j_history) out << ' ' << detail::hex_real(j);
  out << '\n';
  detail::write_matrix(out, "l_map", model.l_map);
  detail::write_matrix(out, "r_map", model.r_map);
  out << "end\n";
}

inline BdflaModel load_model(std::istream& in) {
  detail::expect_word(in, kModelFormatTag);
  const int version = detail::read_value<int>(in, "version");
  if (version != kModelFormatVersion) {
    throw ParseError("version", "unsupported model format version " + std::to_string(version));
  }
  BdflaModel m;
  detail::expect_word(in, "dims");
  const auto rows = detail::read_value<std::size_t>(in, "dims");
  const auto cols = detail::read_value<std::size_t>(in, "dims");
  m.config.d1 = detail::read_value<std::size_t>(in, "dims");
  m.config.d2 = detail::read_value<std::size_t>(in, "dims");
  detail::expect_word(in, "config");
  m.config.t_max = detail::read_value<std::size_t>(in, "config");
  m.config.epsilon = detail::parse_hex_real(detail::read_value<std::string>(in, "config"), "config");
  detail::expect_word(in, "state");
  m.iterations_run = detail::read_value<std::size_t>(in, "state");
  m.converged = detail::read_value<int>(in, "state") != 0;
  detail::expect_word(in, "j_history");
  const auto count = detail::read_value<std::size_t>(in, "j_history");
  if (count != m.iterations_run) throw ParseError("j_history", "length differs from iterations_run");
  for (std::size_t k = 0; k < count; ++k) {
    m.j_history.push_back(detail::parse_hex_real(detail::read_value<std::string>(in, "j_history"), "j_history"));
  }
  m.l_map = detail::read_matrix(in, "l_map");
  m.r_map = detail::read_matrix(in, "r_map");
  detail::expect_word(in, "end");
  if (m.l_map.rows() != rows || m.l_map.cols() != m.config.d1 || m.r_map.rows() != cols ||
      m.r_map.cols() != m.config.d2) {
    throw ParseError("dims", "matrix shapes disagree with the dims line");
  }
  return m;
}

inline void save_model_file(const std::filesystem::path& path, const BdflaModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  save_model(out, model);
  if (!out) throw IoError("write failed for " + path.string());
}

inline BdflaModel load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return load_model(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string(), e.what());
  }
}

}  // namespace featline
