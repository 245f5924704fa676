#include "ssimgen/cli.hpp"

#include "ssimgen/bench.hpp"
#include "ssimgen/error.hpp"
#include "ssimgen/image.hpp"
#include "ssimgen/io.hpp"
#include "ssimgen/kernels.hpp"
#include "ssimgen/mmd.hpp"
#include "ssimgen/models.hpp"
#include "ssimgen/ssim.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>

namespace ssimgen {

namespace fs = std::filesystem;

namespace {

constexpr int kInputError = 2;
constexpr int kNumericalError = 3;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeRadicand:
    case ErrorCode::NoConvergence:
    case ErrorCode::DomainError:
    case ErrorCode::NonFinite:
    case ErrorCode::NonFiniteLoss: return kNumericalError;
    default: return kInputError;
  }
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// "kind:side:count:seed"
Dataset synth_from_spec(const std::string& spec) {
  const auto parts = io::split(spec, ':');
  if (parts.size() != 4)
    throw Error(ErrorCode::InvalidParam, "synth spec must be kind:side:count:seed, got '" + spec + "'");
  try {
    return synth(parse_synth_kind(parts[0]), std::stoi(parts[1]), std::stoi(parts[2]),
                 static_cast<std::uint64_t>(std::stoull(parts[3])));
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidParam, "bad number in synth spec '" + spec + "'");
  }
}

/// A directory of PGMs, an IDX file, or "synth:kind:side:count:seed".
Dataset load_source(const std::string& source) {
  if (source.rfind("synth:", 0) == 0) return synth_from_spec(source.substr(6));
  if (fs::is_directory(source)) return load_pgm_dir(source);
  if (fs::is_regular_file(source)) {
    const std::string bytes = io::read_file(source);
    if (bytes.size() >= 2 && bytes[0] == 'P') {
      Dataset d;
      d.images.push_back(parse_pgm(bytes));
      d.name = source;
      return d;
    }
    return parse_idx_images(bytes, source);
  }
  throw Error(ErrorCode::IoFailure, "no such data source '" + source + "'");
}

void append_atomic(const fs::path& path, const std::string& header, const std::string& row) {
  std::string contents = fs::exists(path) ? io::read_file(path) : header;
  contents += row;
  io::write_file_atomic(path, contents);
}

// --- ssim ----------------------------------------------------------------

struct SsimArgs {
  std::string a, b, mode = "eq2", map_out;
  int window = 8, stride = 1;
};

int cmd_ssim(const SsimArgs& args, std::ostream& out) {
  const Image a = load_pgm(args.a);
  const Image b = load_pgm(args.b);
  const WindowSpec spec{args.window, args.stride};
  const DistanceMode mode = parse_distance_mode(args.mode);
  const DistanceMap eq1 = distance_map(a, b, spec, DistanceMode::Eq1);
  const DistanceMap eq2 = distance_map(a, b, spec, DistanceMode::Eq2);
  const DistanceMap& chosen = mode == DistanceMode::Eq1 ? eq1 : eq2;
  if (!args.map_out.empty()) io::write_file_atomic(args.map_out, io::matrix_to_csv(chosen.values));
  out << "mean_ssim=" << fixed6(mean_ssim(a, b, spec)) << '\n'
      << "mode=" << to_string(mode) << '\n'
      << "mean_distance=" << fixed6(chosen.values.mean()) << '\n'
      << "mean_distance_eq1=" << fixed6(eq1.values.mean()) << '\n'
      << "mean_distance_eq2=" << fixed6(eq2.values.mean()) << '\n'
      << "mse=" << fixed6(mse(a, b)) << '\n';
  return 0;
}

// --- kernel --------------------------------------------------------------

struct KernelArgs {
  std::string dir, synth, from_distance, mode = "eq1", out = ".";
  int window = 8, stride = 1;
  bool psd_fix = false, squared = false;
};

int cmd_kernel(const KernelArgs& args, std::ostream& out) {
  const int sources = !args.dir.empty() + !args.synth.empty() + !args.from_distance.empty();
  if (sources != 1) throw Error(ErrorCode::InvalidParam, "give exactly one of --dir, --synth, --from-distance");
  Eigen::MatrixXd d;
  if (!args.from_distance.empty()) {
    d = io::matrix_from_csv(io::read_file(args.from_distance));
  } else {
    const Dataset data = args.dir.empty() ? synth_from_spec(args.synth) : load_pgm_dir(args.dir);
    d = pairwise_distance_matrix(data, WindowSpec{args.window, args.stride}, parse_distance_mode(args.mode)).entries;
  }
  KernelMatrix k = double_center(d, args.squared);
  if (args.psd_fix) k = psd_project(k);
  const Spectrum s = spectrum(k);

  fs::create_directories(args.out);
  io::write_file_atomic(fs::path(args.out) / "D.csv", io::matrix_to_csv(d));
  io::write_file_atomic(fs::path(args.out) / "K.csv", io::matrix_to_csv(k.entries));
  io::write_file_atomic(fs::path(args.out) / "spectrum.csv", spectrum_to_csv(s));
  out << "n=" << k.entries.rows() << '\n'
      << "row_sum_max_dev=" << io::format_double(k.entries.rowwise().sum().cwiseAbs().maxCoeff()) << '\n'
      << "min_eigenvalue=" << io::format_double(s.eigenvalues.minCoeff()) << '\n'
      << "clipped_mass=" << io::format_double(k.clipped_mass) << '\n'
      << "psd_fixed=" << (k.psd_fixed ? 1 : 0) << '\n';
  return 0;
}

// --- mmd -----------------------------------------------------------------

struct MmdArgs {
  std::string x, y, kernel = "ssim", mode = "eq1", out;
  double gamma = 1.0;
  int permutations = 99, window = 8, stride = 1;
  std::uint64_t seed = 0;
  bool psd_fix = false;
};

int cmd_mmd(const MmdArgs& args, std::ostream& out) {
  const Dataset x = load_source(args.x);
  const Dataset y = load_source(args.y);
  const Dataset pooled = pool(x, y);
  KernelMatrix k;
  if (args.kernel == "ssim") {
    k = double_center(pairwise_distance_matrix(pooled, WindowSpec{args.window, args.stride},
                                               parse_distance_mode(args.mode)));
  } else if (args.kernel == "rbf") {
    k = rbf_kernel(pooled, args.gamma);
  } else {
    throw Error(ErrorCode::InvalidParam, "unknown kernel '" + args.kernel + "'");
  }
  if (args.psd_fix) k = psd_project(k);
  const auto nx = static_cast<Eigen::Index>(x.size());
  const auto ny = static_cast<Eigen::Index>(y.size());
  const PermutationTestResult r = permutation_test(k, nx, ny, args.permutations, args.seed);
  if (!args.out.empty()) append_atomic(args.out, mmd_report_header(), mmd_report_row(r, k.provenance, nx, ny));
  out << "mmd2=" << io::format_double(r.observed_mmd2) << '\n'
      << "p_value=" << io::format_double(r.p_value) << '\n'
      << "B=" << r.permutations << '\n'
      << "seed=" << r.seed << '\n'
      << "kernel=" << to_string(k.provenance) << '\n'
      << "n_x=" << nx << '\n'
      << "n_y=" << ny << '\n';
  return 0;
}

// --- train ---------------------------------------------------------------

struct RunConfig {
  TrainConfig train;
  std::string data;
  fs::path output_dir;
  std::string autoencoder;
};

RunConfig run_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  RunConfig rc;
  auto take_string = [&](const char* key, bool required) {
    if (!j.contains(key)) {
      if (required) throw Error(ErrorCode::ConfigError, std::string("config needs '") + key + "'");
      return std::string();
    }
    if (!j[key].is_string()) throw Error(ErrorCode::ConfigError, std::string("'") + key + "' must be a string");
    std::string v = j[key].get<std::string>();
    j.erase(key);
    return v;
  };
  rc.data = take_string("data", true);
  rc.output_dir = take_string("output_dir", true);
  rc.autoencoder = take_string("autoencoder", false);
  rc.train = train_config_from_json(j);
  return rc;
}

int cmd_train(const std::string& config_path, std::ostream& out, std::ostream& err) {
  const RunConfig rc = run_config_from_json(io::read_file(config_path));
  const Dataset data = load_source(rc.data);
  std::optional<Checkpoint> ae;
  if (!rc.autoencoder.empty()) ae = load_checkpoint(rc.autoencoder);
  auto on_epoch = [&](const HistoryRecord& r) {
    err << "epoch " << r.epoch << " total=" << io::format_double(r.total);
    for (const auto& [k, v] : r.metrics) err << ' ' << k << '=' << io::format_double(v);
    err << '\n';
  };
  const Checkpoint ckpt = train(data, rc.train, ae ? &*ae : nullptr, on_epoch);
  fs::create_directories(rc.output_dir);
  save_checkpoint(ckpt, rc.output_dir / "checkpoint.json");
  io::write_file_atomic(rc.output_dir / "history.csv", history_csv(ckpt));
  const HistoryRecord& last = ckpt.history.back();
  out << "variant=" << to_string(ckpt.config.variant) << '\n' << "epochs=" << last.epoch << '\n';
  out << "total=" << io::format_double(last.total) << '\n';
  for (const auto& [k, v] : last.metrics) out << k << '=' << io::format_double(v) << '\n';
  return 0;
}

// --- bench ---------------------------------------------------------------

struct BenchArgs {
  std::string image, synth, out;
  double target = 400.0;
  int window = 8, stride = 1, side = 128;
  std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs& args, std::ostream& out) {
  if (!args.image.empty() && !args.synth.empty())
    throw Error(ErrorCode::InvalidParam, "give at most one of --image and --synth");
  Image image;
  if (!args.image.empty()) image = load_pgm(args.image);
  else if (!args.synth.empty()) image = synth_from_spec(args.synth)[0];
  else image = test_card(args.side);
  BenchOptions opt;
  opt.target_mse = args.target;
  opt.spec = WindowSpec{args.window, args.stride};
  opt.seed = args.seed;
  const std::string csv = bench_csv(run_bench(image, opt));
  if (!args.out.empty()) io::write_file_atomic(args.out, csv);
  out << csv;
  return 0;
}

// --- sample --------------------------------------------------------------

struct SampleArgs {
  std::string ckpt, out, heldout;
  int n = 16;
  std::uint64_t seed = 0;
};

int cmd_sample(const SampleArgs& args, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(args.ckpt);
  const Dataset samples = sample(ckpt, args.n, args.seed);
  const Image grid = montage(samples);
  save_pgm(grid, args.out);
  out << "n=" << samples.size() << '\n' << "width=" << grid.width() << '\n' << "height=" << grid.height() << '\n';
  if (!args.heldout.empty()) {
    const Dataset held = load_source(args.heldout);
    out << "nn_ssim=" << io::format_double(evaluate_nn_ssim(samples, held, fit_window(samples[0], WindowSpec{})))
        << '\n';
  }
  return 0;
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string kind = "bars-stripes", out;
  int side = 8, count = 10;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& args, std::ostream& out) {
  const Dataset d = synth(parse_synth_kind(args.kind), args.side, args.count, args.seed);
  fs::create_directories(args.out);
  for (std::size_t i = 0; i < d.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img_%04zu.pgm", i);
    save_pgm(d[i], fs::path(args.out) / name);
  }
  out << "count=" << d.size() << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SSIM metrics, SSIM kernels, MMD tests and SSIM-loss generative models", "ssimgen"};
  app.require_subcommand(1);

  SsimArgs ssim_args;
  auto* ssim_cmd = app.add_subcommand("ssim", "Compare two PGM images");
  ssim_cmd->add_option("a", ssim_args.a, "First image")->required();
  ssim_cmd->add_option("b", ssim_args.b, "Second image")->required();
  ssim_cmd->add_option("--window", ssim_args.window, "Window side");
  ssim_cmd->add_option("--stride", ssim_args.stride, "Window stride");
  ssim_cmd->add_option("--mode", ssim_args.mode, "eq1 or eq2");
  ssim_cmd->add_option("--map-out", ssim_args.map_out, "Write the distance map as CSV");

  KernelArgs kernel_args;
  auto* kernel_cmd = app.add_subcommand("kernel", "Build the SSIM distance matrix and kernel");
  kernel_cmd->add_option("--dir", kernel_args.dir, "Directory of PGM images");
  kernel_cmd->add_option("--synth", kernel_args.synth, "kind:side:count:seed");
  kernel_cmd->add_option("--from-distance", kernel_args.from_distance, "Distance matrix CSV");
  kernel_cmd->add_option("--mode", kernel_args.mode, "eq1 or eq2");
  kernel_cmd->add_option("--window", kernel_args.window, "Window side");
  kernel_cmd->add_option("--stride", kernel_args.stride, "Window stride");
  kernel_cmd->add_flag("--psd-fix", kernel_args.psd_fix, "Clip negative eigenvalues");
  kernel_cmd->add_flag("--squared", kernel_args.squared, "Square distances before centering");
  kernel_cmd->add_option("--out", kernel_args.out, "Output directory");

  MmdArgs mmd_args;
  auto* mmd_cmd = app.add_subcommand("mmd", "Permutation two-sample test");
  mmd_cmd->add_option("--x", mmd_args.x, "First sample")->required();
  mmd_cmd->add_option("--y", mmd_args.y, "Second sample")->required();
  mmd_cmd->add_option("--kernel", mmd_args.kernel, "ssim or rbf");
  mmd_cmd->add_option("--gamma", mmd_args.gamma, "RBF bandwidth");
  mmd_cmd->add_option("--mode", mmd_args.mode, "SSIM distance, eq1 or eq2");
  mmd_cmd->add_option("--window", mmd_args.window, "Window side");
  mmd_cmd->add_option("--stride", mmd_args.stride, "Window stride");
  mmd_cmd->add_option("--permutations", mmd_args.permutations, "Number of permutations B");
  mmd_cmd->add_option("--seed", mmd_args.seed, "Permutation seed");
  mmd_cmd->add_flag("--psd-fix", mmd_args.psd_fix, "Clip negative eigenvalues first");
  mmd_cmd->add_option("--out", mmd_args.out, "Append a CSV row to this report");

  std::string config_path;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a run config");
  train_cmd->add_option("--config", config_path, "Run config JSON")->required();

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Equal-MSE distortion benchmark");
  bench_cmd->add_option("--image", bench_args.image, "PGM image");
  bench_cmd->add_option("--synth", bench_args.synth, "kind:side:count:seed, first image is used");
  bench_cmd->add_option("--side", bench_args.side, "Test card side when no image is given");
  bench_cmd->add_option("--target", bench_args.target, "Target MSE");
  bench_cmd->add_option("--window", bench_args.window, "Window side");
  bench_cmd->add_option("--stride", bench_args.stride, "Window stride");
  bench_cmd->add_option("--seed", bench_args.seed, "Distortion seed");
  bench_cmd->add_option("--out", bench_args.out, "Also write the table here");

  SampleArgs sample_args;
  auto* sample_cmd = app.add_subcommand("sample", "Sample a montage from a checkpoint");
  sample_cmd->add_option("--ckpt", sample_args.ckpt, "Checkpoint JSON")->required();
  sample_cmd->add_option("--n", sample_args.n, "Number of samples");
  sample_cmd->add_option("--seed", sample_args.seed, "Noise seed");
  sample_cmd->add_option("--out", sample_args.out, "Montage PGM")->required();
  sample_cmd->add_option("--heldout", sample_args.heldout, "Held-out data for nearest-neighbour SSIM");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset as PGMs");
  synth_cmd->add_option("--kind", synth_args.kind, "bars-stripes, blobs or uniform-noise");
  synth_cmd->add_option("--side", synth_args.side, "Image side");
  synth_cmd->add_option("--count", synth_args.count, "Number of images");
  synth_cmd->add_option("--seed", synth_args.seed, "Seed");
  synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();

  std::vector<const char*> argv{"ssimgen"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  try {
    if (*ssim_cmd) return cmd_ssim(ssim_args, out);
    if (*kernel_cmd) return cmd_kernel(kernel_args, out);
    if (*mmd_cmd) return cmd_mmd(mmd_args, out);
    if (*train_cmd) return cmd_train(config_path, out, err);
    if (*bench_cmd) return cmd_bench(bench_args, out);
    if (*sample_cmd) return cmd_sample(sample_args, out);
    if (*synth_cmd) return cmd_synth(synth_args, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace ssimgen
