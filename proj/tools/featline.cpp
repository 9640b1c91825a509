// featline: benchmark, training and feature-extraction front end.
//
//   featline bench --config <path> [--out-dir <dir>] [--quiet]
//   featline fit-bdfla --config <path> --out <model>
//   featline extract --model <path> --image <pgm> --out <csv>
//
// Exit codes: 0 success, 1 config error, 2 dataset error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "featline/featline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

int exit_code_for(const featline::Error& e) {
  switch (e.kind()) {
    case featline::ErrorKind::config: return kExitConfig;
    case featline::ErrorKind::data: return kExitData;
    case featline::ErrorKind::numerical: return kExitNumerical;
  }
  return kExitNumerical;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw featline::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw featline::IoError("write failed for " + path.string());
}

featline::LabeledDataset load_dataset(const featline::ExperimentConfig& cfg) {
  if (cfg.dataset_root.empty()) {
    throw featline::ConfigError(std::string("dataset_root is not set (config key or ") +
                                featline::kDatasetRootEnv + ")");
  }
  return featline::load_directory(cfg.dataset_root, cfg.image_rows, cfg.image_cols);
}

int run_bench(const std::string& config_path, const std::string& out_dir_override, bool quiet) {
  const auto cfg = featline::load_config_file(config_path);
  const auto data = load_dataset(cfg);
  featline::ProgressFn progress;
  if (!quiet) progress = [](const std::string& s) { std::cerr << s << '\n'; };
  const auto report = featline::run_experiment(cfg, data, progress);

  const std::filesystem::path out_dir = out_dir_override.empty() ? cfg.output_dir : std::filesystem::path(out_dir_override);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw featline::IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_text(out_dir / "summary.csv", featline::emit_report(report, featline::ReportFormat::csv));
  write_text(out_dir / "rates.csv", featline::emit_report(report, featline::ReportFormat::long_csv));
  std::cout << featline::emit_report(report, featline::ReportFormat::table);

  for (const auto& r : report.methods) {
    for (const auto& msg : r.failure_messages) {
      std::cerr << "warning: " << featline::method_name(r.method) << " " << msg << '\n';
    }
  }
  return kExitOk;
}

int run_fit(const std::string& config_path, const std::string& out_path) {
  const auto cfg = featline::load_config_file(config_path);
  cfg.bdfla.validate(cfg.image_rows, cfg.image_cols);
  const auto data = load_dataset(cfg);
  const auto split = featline::split_random(data, cfg.per_class_train, cfg.seed);
  const auto model = featline::fit(split.train, featline::assign_lines(split.train, cfg.anchor_lines), cfg.bdfla);
  featline::save_model_file(out_path, model);
  std::cout << "fitted " << model.l_map.cols() << "x" << model.r_map.cols() << " maps on "
            << split.train.size() << " samples in " << model.iterations_run << " iteration(s)"
            << (model.converged ? ", converged" : "") << '\n';
  for (std::size_t t = 0; t < model.j_history.size(); ++t) {
    std::printf("  J[%zu] = %.10g\n", t + 1, model.j_history[t]);
  }
  return kExitOk;
}

// Images are resampled to the model's input size, as during training.
int run_extract(const std::string& model_path, const std::string& image_path, const std::string& out_path) {
  const auto model = featline::load_model_file(model_path);
  auto image = featline::load_pgm_file(image_path);
  if (image.rows() != model.input_rows() || image.cols() != model.input_cols()) {
    image = featline::resize_bilinear(image, model.input_rows(), model.input_cols());
  }
  const auto f = featline::extract(model, image);
  std::string csv;
  char buf[64];
  for (std::size_t i = 0; i < f.rows(); ++i) {
    for (std::size_t j = 0; j < f.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", f(i, j));
      csv += (j ? "," : "");
      csv += buf;
    }
    csv += '\n';
  }
  write_text(out_path, csv);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-line subspace learning benchmarks"};
  app.require_subcommand(1);

  std::string config_path, out_dir, out_path, model_path, image_path;
  bool quiet = false;

  auto* bench = app.add_subcommand("bench", "Run the seeded multi-run recognition benchmark");
  bench->add_option("--config", config_path, "Experiment config file")->required();
  bench->add_option("--out-dir", out_dir, "Directory for summary.csv and rates.csv");
  bench->add_flag("--quiet", quiet, "Suppress progress output");

  auto* fit = app.add_subcommand("fit-bdfla", "Fit BDFLA maps on the first training split");
  fit->add_option("--config", config_path, "Experiment config file")->required();
  fit->add_option("--out", out_path, "Model output path")->required();

  auto* extract = app.add_subcommand("extract", "Extract a BDFLA feature matrix from one image");
  extract->add_option("--model", model_path, "Model file")->required();
  extract->add_option("--image", image_path, "PGM image")->required();
  extract->add_option("--out", out_path, "CSV output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*bench) return run_bench(config_path, out_dir, quiet);
    if (*fit) return run_fit(config_path, out_path);
    if (*extract) return run_extract(model_path, image_path, out_path);
  } catch (const featline::Error& e) {
    std::cerr << "featline: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "featline: internal error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}
