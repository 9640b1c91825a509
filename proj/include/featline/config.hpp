#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "featline/bdfla.hpp"
#include "featline/errors.hpp"

namespace featline {

enum class Method { pca, lda, udnfla, twod_pca, twod_lda, bdfla };

inline constexpr Method kAllMethods[] = {Method::pca,     Method::lda,      Method::udnfla,
                                         Method::twod_pca, Method::twod_lda, Method::bdfla};

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::pca: return "pca";
    case Method::lda: return "lda";
    case Method::udnfla: return "udnfla";
    case Method::twod_pca: return "2dpca";
    case Method::twod_lda: return "2dlda";
    case Method::bdfla: return "bdfla";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view name) {
  for (Method m : kAllMethods)
    if (method_name(m) == name) return m;
  return std::nullopt;
}

inline bool is_vector_method(Method m) {
  return m == Method::pca || m == Method::lda || m == Method::udnfla;
}

/// One scanned dimension: d1 alone for vector and one-sided methods,
/// (d1, d2) for BDFLA.
struct GridPoint {
  std::size_t d1 = 0;
  std::size_t d2 = 0;  // 0 unless the method is bilinear

  auto operator<=>(const GridPoint&) const = default;
};

struct ExperimentConfig {
  std::filesystem::path dataset_root;
  std::size_t image_rows = 48;
  std::size_t image_cols = 48;
  std::size_t per_class_train = 10;
  std::size_t runs = 20;
  std::uint64_t seed = 1;
  std::vector<Method> methods;
  std::map<Method, std::vector<GridPoint>> grids;
  double pca_energy = 0.97;
  BdflaConfig bdfla;  // t_max/epsilon for the scan; d1/d2 for fit-bdfla
  AnchorLines anchor_lines = AnchorLines::exclude;  // BDFLA and UDNFLA
  std::filesystem::path output_dir = "featline-out";

  void validate() const;
};

/// Environment variable that, when set, replaces dataset_root.
inline constexpr const char* kDatasetRootEnv = "FEATLINE_DATASET_ROOT";

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError(key + ": cannot parse '" + text + "'");
  }
  return v;
}

// "a", "a:b" or "a:b:step", inclusive.
inline std::vector<std::size_t> parse_range(const std::string& key, const std::string& text) {
  const auto parts = split_on(text, ':');
  if (parts.empty() || parts.size() > 3) throw ConfigError(key + ": bad range '" + text + "'");
  const auto lo = parse_number<std::size_t>(key, parts[0]);
  const auto hi = parts.size() > 1 ? parse_number<std::size_t>(key, parts[1]) : lo;
  const auto step = parts.size() > 2 ? parse_number<std::size_t>(key, parts[2]) : 1;
  if (step == 0 || hi < lo) throw ConfigError(key + ": bad range '" + text + "'");
  std::vector<std::size_t> out;
  for (std::size_t v = lo; v <= hi; v += step) out.push_back(v);
  return out;
}

}  // namespace detail

/// Parses a grid description: comma-separated items, each a range
/// ("10:200:10", "1:20", "5") or, for bilinear grids, a product of two
/// ranges joined by 'x' ("2:16:2 x 2:16:2", "14x8"). Points are sorted and
/// de-duplicated.
inline std::vector<GridPoint> parse_grid(const std::string& key, const std::string& text, bool bilinear) {
  std::vector<GridPoint> out;
  for (const auto& item : detail::split_on(text, ',')) {
    if (item.empty()) continue;
    const auto factors = detail::split_on(item, 'x');
    if (bilinear != (factors.size() == 2) || factors.size() > 2) {
      throw ConfigError(key + ": item '" + item + "' must be " +
                        (bilinear ? "of the form <rows>x<cols>" : "a single range"));
    }
    const auto first = detail::parse_range(key, factors[0]);
    const auto second = bilinear ? detail::parse_range(key, factors[1]) : std::vector<std::size_t>{0};
    for (auto a : first)
      for (auto b : second) out.push_back({a, b});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw ConfigError(key + ": empty grid");
  return out;
}

/// Default scan grids.
inline std::vector<GridPoint> default_grid(Method m) {
  switch (m) {
    case Method::pca:
    case Method::lda:
    case Method::udnfla:
      return parse_grid("default", "10:200:10", false);
    case Method::twod_pca:
    case Method::twod_lda:
      return parse_grid("default", "1:20", false);
    case Method::bdfla:
      return parse_grid("default", "2:16:2 x 2:16:2, 14x8, 15x10", true);
  }
  return {};
}

inline void ExperimentConfig::validate() const {
  if (runs < 1) throw ConfigError("runs must be at least 1");
  if (image_rows < 1 || image_cols < 1) throw ConfigError("image size must be positive");
  if (per_class_train < 1) throw ConfigError("per_class_train must be at least 1");
  if (!(pca_energy > 0.0 && pca_energy <= 1.0)) throw ConfigError("pca_energy must lie in (0, 1]");
  if (methods.empty()) throw ConfigError("no methods selected");
  if (bdfla.t_max < 1) throw ConfigError("bdfla.t_max must be at least 1");
  if (!(bdfla.epsilon > 0.0)) throw ConfigError("bdfla.epsilon must be positive");
  for (Method m : methods) {
    const auto it = grids.find(m);
    if (it == grids.end() || it->second.empty()) {
      throw ConfigError("empty grid for " + std::string(method_name(m)));
    }
    for (const auto& p : it->second) {
      const std::string where = "grid." + std::string(method_name(m));
      if (p.d1 < 1) throw ConfigError(where + ": dimensions must be positive");
      if (is_vector_method(m) && p.d1 > image_rows * image_cols) {
        throw ConfigError(where + ": " + std::to_string(p.d1) + " exceeds the image dimension");
      }
      if (!is_vector_method(m) && p.d1 > image_rows) {
        throw ConfigError(where + ": d1 " + std::to_string(p.d1) + " exceeds image_rows");
      }
      if (m == Method::bdfla && (p.d2 < 1 || p.d2 > image_cols)) {
        throw ConfigError(where + ": d2 " + std::to_string(p.d2) + " outside [1, image_cols]");
      }
    }
  }
}

/// Reads the `key = value` format. '#' starts a comment; blank lines are
/// ignored; unknown keys are errors. The dataset root can be overridden by
/// the FEATLINE_DATASET_ROOT environment variable.
inline ExperimentConfig parse_config(std::string_view text, bool honor_env = true) {
  ExperimentConfig cfg;
  std::vector<Method> selected(std::begin(kAllMethods), std::end(kAllMethods));
  std::map<Method, std::string> grid_text;
  bool have_d1 = false, have_d2 = false;

  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (value.empty()) throw ConfigError(key + ": empty value");

    if (key == "dataset_root") {
      cfg.dataset_root = value;
    } else if (key == "image_rows") {
      cfg.image_rows = detail::parse_number<std::size_t>(key, value);
    } else if (key == "image_cols") {
      cfg.image_cols = detail::parse_number<std::size_t>(key, value);
    } else if (key == "per_class_train") {
      cfg.per_class_train = detail::parse_number<std::size_t>(key, value);
    } else if (key == "runs") {
      cfg.runs = detail::parse_number<std::size_t>(key, value);
    } else if (key == "seed") {
      cfg.seed = detail::parse_number<std::uint64_t>(key, value);
    } else if (key == "pca_energy") {
      cfg.pca_energy = detail::parse_number<double>(key, value);
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else if (key == "methods") {
      selected.clear();
      for (const auto& name : detail::split_on(value, ',')) {
        const auto m = parse_method(name);
        if (!m) throw ConfigError("methods: unknown method '" + name + "'");
        if (std::find(selected.begin(), selected.end(), *m) == selected.end()) selected.push_back(*m);
      }
    } else if (key.rfind("grid.", 0) == 0) {
      const auto m = parse_method(key.substr(5));
      if (!m) throw ConfigError(key + ": unknown method");
      grid_text[*m] = value;
    } else if (key == "lines.anchor") {
      if (value == "exclude") {
        cfg.anchor_lines = AnchorLines::exclude;
      } else if (value == "include") {
        cfg.anchor_lines = AnchorLines::include;
      } else {
        throw ConfigError(key + ": expected exclude or include, got '" + value + "'");
      }
    } else if (key == "bdfla.t_max") {
      cfg.bdfla.t_max = detail::parse_number<std::size_t>(key, value);
    } else if (key == "bdfla.epsilon") {
      cfg.bdfla.epsilon = detail::parse_number<double>(key, value);
    } else if (key == "bdfla.d1") {
      cfg.bdfla.d1 = detail::parse_number<std::size_t>(key, value);
      have_d1 = true;
    } else if (key == "bdfla.d2") {
      cfg.bdfla.d2 = detail::parse_number<std::size_t>(key, value);
      have_d2 = true;
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }

  // Canonical method order keeps report layout independent of config order.
  for (Method m : kAllMethods) {
    if (std::find(selected.begin(), selected.end(), m) == selected.end()) continue;
    cfg.methods.push_back(m);
    const auto it = grid_text.find(m);
    cfg.grids[m] = it == grid_text.end()
                       ? default_grid(m)
                       : parse_grid("grid." + std::string(method_name(m)), it->second, m == Method::bdfla);
  }
  if (!have_d1) cfg.bdfla.d1 = std::min<std::size_t>(14, cfg.image_rows);
  if (!have_d2) cfg.bdfla.d2 = std::min<std::size_t>(8, cfg.image_cols);

  if (honor_env) {
    if (const char* env = std::getenv(kDatasetRootEnv); env != nullptr && *env != '\0') {
      cfg.dataset_root = env;
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path, bool honor_env = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), honor_env);
}

}  // namespace featline
