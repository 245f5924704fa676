#include "ssimgen/io.hpp"
#include "ssimgen/models.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace ssimgen {

using nlohmann::json;

namespace {

std::string_view to_string(KernelKind k) { return k == KernelKind::Ssim ? "ssim" : "rbf"; }

KernelKind parse_kernel(std::string_view s) {
  if (s == "ssim") return KernelKind::Ssim;
  if (s == "rbf") return KernelKind::Rbf;
  throw Error(ErrorCode::ConfigError, "unknown kernel '" + std::string(s) + "'");
}

std::string_view to_string(ReconKind r) {
  switch (r) {
    case ReconKind::Ssim: return "ssim";
    case ReconKind::L2: return "l2";
    case ReconKind::Bce: return "bce";
  }
  return "?";
}

ReconKind parse_recon(std::string_view s) {
  if (s == "ssim") return ReconKind::Ssim;
  if (s == "l2") return ReconKind::L2;
  if (s == "bce") return ReconKind::Bce;
  throw Error(ErrorCode::ConfigError, "unknown recon '" + std::string(s) + "'");
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ConfigError, what);
}

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad value for '") + key + "': " + e.what());
  }
}

json record_to_json(const HistoryRecord& r) {
  return json{{"epoch", r.epoch}, {"losses", r.losses}, {"total", r.total}, {"metrics", r.metrics}};
}

HistoryRecord record_from_json(const json& j) {
  HistoryRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.losses = j.at("losses").get<std::map<std::string, double>>();
  r.total = j.at("total").get<double>();
  r.metrics = j.at("metrics").get<std::map<std::string, double>>();
  return r;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  require(cfg.epochs >= 1, "epochs must be >= 1");
  require(cfg.batch_size >= 2, "batch_size must be >= 2");
  require(std::isfinite(cfg.lr) && cfg.lr > 0.0, "lr must be positive");
  require(std::isfinite(cfg.gamma) && cfg.gamma > 0.0, "gamma must be positive");
  require(cfg.window.window >= 2, "window must be >= 2");
  require(cfg.window.stride >= 1, "stride must be >= 1");
  require(std::isfinite(cfg.lambda_ssim) && cfg.lambda_ssim >= 0.0, "lambda_ssim must be >= 0");
  require(cfg.latent_dim >= 1, "latent_dim must be >= 1");
  require(!cfg.hidden.empty(), "hidden must list at least one layer");
  require(std::all_of(cfg.hidden.begin(), cfg.hidden.end(), [](int w) { return w >= 1; }),
          "hidden widths must be positive");
  require(std::isfinite(cfg.lsgan_a) && std::isfinite(cfg.lsgan_b) && std::isfinite(cfg.lsgan_c),
          "lsgan targets must be finite");
  require(cfg.d_warmup >= 0, "d_warmup must be >= 0");
}

json to_json(const TrainConfig& cfg) {
  return json{{"variant", to_string(cfg.variant)},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"lr", cfg.lr},
              {"seed", cfg.seed},
              {"kernel", to_string(cfg.kernel)},
              {"gamma", cfg.gamma},
              {"recon", to_string(cfg.recon)},
              {"window", cfg.window.window},
              {"stride", cfg.window.stride},
              {"lambda_ssim", cfg.lambda_ssim},
              {"latent_dim", cfg.latent_dim},
              {"hidden", cfg.hidden},
              {"activation", nn::to_string(cfg.activation)},
              {"image_output", nn::to_string(cfg.image_output)},
              {"lsgan_a", cfg.lsgan_a},
              {"lsgan_b", cfg.lsgan_b},
              {"lsgan_c", cfg.lsgan_c},
              {"ssim_centered", cfg.ssim_centered},
              {"d_warmup", cfg.d_warmup}};
}

TrainConfig train_config_from_json(const json& j) {
  require(j.is_object(), "config must be a JSON object");
  const json defaults = to_json(TrainConfig{});
  for (const auto& [key, value] : j.items())
    require(defaults.contains(key), "unknown config key '" + key + "'");
  require(j.contains("variant"), "config needs 'variant'");
  json merged = defaults;
  merged.update(j);

  TrainConfig cfg;
  cfg.variant = parse_variant(get<std::string>(merged, "variant"));
  cfg.epochs = get<int>(merged, "epochs");
  cfg.batch_size = get<int>(merged, "batch_size");
  cfg.lr = get<double>(merged, "lr");
  cfg.seed = get<std::uint64_t>(merged, "seed");
  cfg.kernel = parse_kernel(get<std::string>(merged, "kernel"));
  cfg.gamma = get<double>(merged, "gamma");
  cfg.recon = parse_recon(get<std::string>(merged, "recon"));
  cfg.window.window = get<int>(merged, "window");
  cfg.window.stride = get<int>(merged, "stride");
  cfg.lambda_ssim = get<double>(merged, "lambda_ssim");
  cfg.latent_dim = get<int>(merged, "latent_dim");
  cfg.hidden = get<std::vector<int>>(merged, "hidden");
  cfg.activation = nn::parse_activation(get<std::string>(merged, "activation"));
  cfg.image_output = nn::parse_output_activation(get<std::string>(merged, "image_output"));
  cfg.lsgan_a = get<double>(merged, "lsgan_a");
  cfg.lsgan_b = get<double>(merged, "lsgan_b");
  cfg.lsgan_c = get<double>(merged, "lsgan_c");
  cfg.ssim_centered = get<bool>(merged, "ssim_centered");
  cfg.d_warmup = get<int>(merged, "d_warmup");
  validate(cfg);
  return cfg;
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  json specs = json::object();
  json params = json::object();
  for (const auto& [name, net] : ckpt.networks) {
    specs[name] = json{{"widths", net.spec().widths},
                       {"hidden", nn::to_string(net.spec().hidden)},
                       {"output", nn::to_string(net.spec().output)}};
    params[name] = net.flatten();
  }
  json history = json::array();
  for (const auto& r : ckpt.history) history.push_back(record_to_json(r));
  const json j{{"version", ckpt.version},
               {"variant", to_string(ckpt.config.variant)},
               {"config", to_json(ckpt.config)},
               {"shape", {{"height", ckpt.shape.height}, {"width", ckpt.shape.width}, {"range_l", ckpt.shape.range_l}}},
               {"specs", specs},
               {"params", params},
               {"initial", record_to_json(ckpt.initial)},
               {"history", history},
               {"seed_state", ckpt.seed_state}};
  return j.dump(1);
}

Checkpoint checkpoint_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IncompatibleCheckpoint, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  Checkpoint ckpt;
  try {
    ckpt.version = j.at("version").get<std::string>();
    if (ckpt.version != "1")
      throw Error(ErrorCode::IncompatibleCheckpoint, "unsupported checkpoint version '" + ckpt.version + "'");
    ckpt.config = train_config_from_json(j.at("config"));
    const auto& s = j.at("shape");
    ckpt.shape = {s.at("height").get<Eigen::Index>(), s.at("width").get<Eigen::Index>(), s.at("range_l").get<double>()};
    for (const auto& [name, spec_j] : j.at("specs").items()) {
      nn::MlpSpec spec{spec_j.at("widths").get<std::vector<int>>(),
                       nn::parse_activation(spec_j.at("hidden").get<std::string>()),
                       nn::parse_output_activation(spec_j.at("output").get<std::string>())};
      ckpt.networks[name] = nn::Mlp::unflatten(spec, j.at("params").at(name).get<std::vector<double>>());
    }
    ckpt.initial = record_from_json(j.at("initial"));
    for (const auto& r : j.at("history")) ckpt.history.push_back(record_from_json(r));
    ckpt.seed_state = j.at("seed_state").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IncompatibleCheckpoint, std::string("malformed checkpoint: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IncompatibleCheckpoint) throw;
    throw Error(ErrorCode::IncompatibleCheckpoint, std::string("malformed checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_file_atomic(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(io::read_file(path)); }

std::string history_csv(const Checkpoint& ckpt) {
  std::set<std::string> loss_names, metric_names;
  auto collect = [&](const HistoryRecord& r) {
    for (const auto& [k, v] : r.losses) loss_names.insert(k);
    for (const auto& [k, v] : r.metrics) metric_names.insert(k);
  };
  collect(ckpt.initial);
  for (const auto& r : ckpt.history) collect(r);

  std::ostringstream out;
  out << "epoch";
  for (const auto& k : loss_names) out << ',' << k;
  out << ",total";
  for (const auto& k : metric_names) out << ',' << k;
  out << '\n';
  auto row = [&](const HistoryRecord& r, bool initial) {
    out << r.epoch;
    for (const auto& k : loss_names) {
      auto it = r.losses.find(k);
      out << ',' << (it == r.losses.end() ? std::string() : io::format_double(it->second));
    }
    out << ',' << (initial ? std::string() : io::format_double(r.total));
    for (const auto& k : metric_names) {
      auto it = r.metrics.find(k);
      out << ',' << (it == r.metrics.end() ? std::string() : io::format_double(it->second));
    }
    out << '\n';
  };
  row(ckpt.initial, true);
  for (const auto& r : ckpt.history) row(r, false);
  return out.str();
}

}  // namespace ssimgen
