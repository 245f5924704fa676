#include "ssimgen/models.hpp"

#include "ssimgen/kernels.hpp"
#include "ssimgen/mmd.hpp"
#include "ssimgen/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ssimgen {

using ad::Matrix;
using ad::Tape;
using ad::Var;

Variant parse_variant(std::string_view name) {
  if (name == "gmmn-data") return Variant::GmmnData;
  if (name == "gmmn-code") return Variant::GmmnCode;
  if (name == "autoencoder") return Variant::Autoencoder;
  if (name == "vae") return Variant::Vae;
  if (name == "gan") return Variant::Gan;
  if (name == "gan-ssim") return Variant::GanSsim;
  if (name == "lsgan") return Variant::Lsgan;
  if (name == "lsgan-ssim") return Variant::LsganSsim;
  throw Error(ErrorCode::ConfigError, "unknown variant '" + std::string(name) + "'");
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::GmmnData: return "gmmn-data";
    case Variant::GmmnCode: return "gmmn-code";
    case Variant::Autoencoder: return "autoencoder";
    case Variant::Vae: return "vae";
    case Variant::Gan: return "gan";
    case Variant::GanSsim: return "gan-ssim";
    case Variant::Lsgan: return "lsgan";
    case Variant::LsganSsim: return "lsgan-ssim";
  }
  return "?";
}

bool is_generative(Variant v) { return v != Variant::Autoencoder; }

// --- losses -------------------------------------------------------------------

namespace losses {

double ssim_c(const WindowSpec& spec) {
  return SsimConstants::for_range(1.0).zero_mean_c(spec.window * spec.window);
}

Var gmmn_mmd2(Tape& tape, const nn::Mlp& gen, const std::vector<Var>& gen_params, const Matrix& noise,
              const Matrix& real, const TrainConfig& cfg, const ImageShape& shape, const nn::Mlp* decoder) {
  Var generated = gen.forward(tape, gen_params, tape.constant(noise));
  Var real_side = tape.constant(real);
  if (decoder && cfg.kernel == KernelKind::Ssim) {
    generated = decoder->forward(tape, decoder->bind(tape, false), generated);
    real_side = tape.constant(decoder->apply(real));
  }
  const Var pooled = ad::concat_rows(generated, real_side);
  Var k;
  if (cfg.kernel == KernelKind::Ssim) {
    if (!cfg.ssim_centered)
      throw Error(ErrorCode::ConfigError, "the pooled SSIM kernel path requires centered patches");
    k = ad::double_center(ad::pairwise_ssim_distance(pooled, shape.height, shape.width, cfg.window, ssim_c(cfg.window)));
  } else {
    k = ad::rbf_gram(pooled, cfg.gamma);
  }
  return ad::mmd2_biased_pooled(k, noise.rows());
}

Var reconstruction(Tape& tape, const Matrix& x, Var x_hat, Var logits, const TrainConfig& cfg,
                   const ImageShape& shape) {
  const Var target = tape.constant(x);
  switch (cfg.recon) {
    case ReconKind::L2:
      return ad::mean(ad::row_sums(ad::square(target - x_hat)));
    case ReconKind::Bce: {
      // -[x log s(l) + (1 - x) log(1 - s(l))] = softplus(l) - x l
      return ad::mean(ad::row_sums(ad::softplus(logits) - target * logits));
    }
    case ReconKind::Ssim:
      return ad::mean(ad::patch_ssim_dist2(target, x_hat, shape.height, shape.width, cfg.window,
                                           ssim_c(cfg.window), cfg.ssim_centered));
  }
  throw Error(ErrorCode::ConfigError, "unknown reconstruction kind");
}

VaeTerms vae(Tape& tape, const nn::Mlp& enc, const std::vector<Var>& enc_params, const nn::Mlp& dec,
             const std::vector<Var>& dec_params, const Matrix& x, const Matrix& eps, const TrainConfig& cfg,
             const ImageShape& shape) {
  const Eigen::Index latent = cfg.latent_dim;
  const Var heads = enc.forward(tape, enc_params, tape.constant(x));
  const Var mu = ad::slice_cols(heads, 0, latent);
  const Var logvar = ad::slice_cols(heads, latent, latent);
  const Var z = mu + ad::exp(0.5 * logvar) * tape.constant(eps);
  const Var logits = dec.forward(tape, dec_params, z, false);
  const Var x_hat = dec.spec().output == nn::OutputActivation::Sigmoid ? ad::sigmoid(logits) : logits;
  VaeTerms t;
  t.kl = ad::mean(-0.5 * ad::row_sums(1.0 + logvar - ad::square(mu) - ad::exp(logvar)));
  t.recon = reconstruction(tape, x, x_hat, logits, cfg, shape);
  t.total = t.kl + t.recon;
  return t;
}

Var gan_discriminator(Tape& tape, const nn::Mlp& disc, const std::vector<Var>& disc_params, const Matrix& real,
                      Var fake) {
  const Var real_logits = disc.forward(tape, disc_params, tape.constant(real), false);
  const Var fake_logits = disc.forward(tape, disc_params, fake, false);
  // -log s(l) = softplus(-l); -log(1 - s(l)) = softplus(l)
  return ad::mean(ad::softplus(-real_logits)) + ad::mean(ad::softplus(fake_logits));
}

GeneratorTerms gan_generator(Tape& tape, const nn::Mlp& disc, const std::vector<Var>& disc_params, Var fake,
                             const Matrix& paired_real, const TrainConfig& cfg, const ImageShape& shape) {
  GeneratorTerms t;
  t.adversarial = ad::mean(ad::softplus(-disc.forward(tape, disc_params, fake, false)));
  if (cfg.variant == Variant::GanSsim) {
    const Var d2 = ad::patch_ssim_dist2(tape.constant(paired_real), fake, shape.height, shape.width, cfg.window,
                                        ssim_c(cfg.window), cfg.ssim_centered);
    t.ssim = cfg.lambda_ssim * ad::mean(d2);
  } else {
    t.ssim = tape.constant(0.0);
  }
  t.total = t.adversarial + t.ssim;
  return t;
}

namespace {

Var ls_term(Tape& tape, Var score, double target, const TrainConfig& cfg, const ImageShape& shape) {
  if (cfg.variant == Variant::LsganSsim) {
    const Var map = tape.constant(Matrix::Constant(score.rows(), score.cols(), target));
    return ad::mean(0.5 * ad::patch_ssim_dist2(score, map, shape.height, shape.width, cfg.window,
                                               ssim_c(cfg.window), cfg.ssim_centered));
  }
  return ad::mean(0.5 * ad::square(score - target));
}

}  // namespace

Var lsgan_discriminator(Tape& tape, const nn::Mlp& disc, const std::vector<Var>& disc_params, const Matrix& real,
                        Var fake, const TrainConfig& cfg, const ImageShape& shape) {
  const Var real_score = disc.forward(tape, disc_params, tape.constant(real));
  const Var fake_score = disc.forward(tape, disc_params, fake);
  return ls_term(tape, real_score, cfg.lsgan_b, cfg, shape) + ls_term(tape, fake_score, cfg.lsgan_a, cfg, shape);
}

Var lsgan_generator(Tape& tape, const nn::Mlp& disc, const std::vector<Var>& disc_params, Var fake,
                    const TrainConfig& cfg, const ImageShape& shape) {
  return ls_term(tape, disc.forward(tape, disc_params, fake), cfg.lsgan_c, cfg, shape);
}

}  // namespace losses

// --- trainer plumbing ------------------------------------------------------------

const nn::Mlp& Checkpoint::network(const std::string& name) const {
  auto it = networks.find(name);
  if (it == networks.end()) throw Error(ErrorCode::IncompatibleCheckpoint, "checkpoint has no '" + name + "' network");
  return it->second;
}

namespace {

// Independent PRNG streams per concern; the SSIM pairing stream is separate
// so gan-ssim with lambda 0 consumes exactly the draws plain gan does.
enum Stream : std::uint64_t { kInit = 1, kBatches = 2, kNoise = 3, kPairing = 4, kSplit = 5, kEvalNoise = 6 };

std::uint64_t init_seed(std::uint64_t seed, std::uint64_t net) { return make_rng(seed, 100 + net)(); }

struct Prepared {
  ImageShape shape;
  Matrix train;
  Matrix eval;
};

Prepared prepare(const Dataset& data, const TrainConfig& cfg) {
  validate(cfg);
  validate(data);
  if (data.size() < 2) throw Error(ErrorCode::ConfigError, "training needs at least 2 images");
  Prepared p;
  p.shape = {data[0].height(), data[0].width(), data[0].range_l};
  window_grid(p.shape.height, p.shape.width, cfg.window);
  const Matrix all = to_rows(data, 1.0 / p.shape.range_l);
  std::vector<Eigen::Index> order(data.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng = make_rng(cfg.seed, kSplit);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index n_eval = std::clamp<Eigen::Index>(std::llround(0.2 * static_cast<double>(n)), 1, n - 1);
  const std::vector<Eigen::Index> eval_idx(order.begin(), order.begin() + n_eval);
  const std::vector<Eigen::Index> train_idx(order.begin() + n_eval, order.end());
  p.eval = all(eval_idx, Eigen::all);
  p.train = all(train_idx, Eigen::all);
  return p;
}

std::vector<std::vector<Eigen::Index>> epoch_batches(Eigen::Index n, int batch_size, Rng& rng) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<Eigen::Index>> batches;
  const auto b = static_cast<Eigen::Index>(batch_size);
  if (n <= b) {
    batches.push_back(order);
    return batches;
  }
  for (Eigen::Index start = 0; start + b <= n; start += b)
    batches.emplace_back(order.begin() + start, order.begin() + start + b);
  return batches;
}

Matrix uniform_noise(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

Matrix normal_noise(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

std::vector<int> widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

nn::Mlp make_net(int in, const std::vector<int>& hidden, int out, nn::Activation act, nn::OutputActivation output,
                 std::uint64_t seed) {
  return nn::Mlp(nn::MlpSpec{widths(in, hidden, out), act, output}, seed);
}

Dataset as_images(const Matrix& rows, const ImageShape& shape, const std::string& name) {
  return from_rows(rows, shape.width, shape.height, shape.range_l, 1.0 / shape.range_l, name);
}

std::vector<Matrix> grads_of(const Tape& tape, const std::vector<Var>& params) {
  std::vector<Matrix> g;
  g.reserve(params.size());
  for (const auto& p : params) g.push_back(tape.grad(p));
  return g;
}

void finalize(HistoryRecord& rec) {
  rec.total = 0.0;
  for (const auto& [name, value] : rec.losses) rec.total += value;
}

/// Mean of per-step component values.
class LossMeter {
 public:
  void add(const std::string& name, double v) { sums_[name] += v; counts_[name] += 1; }
  std::map<std::string, double> means() const {
    std::map<std::string, double> out;
    for (const auto& [name, s] : sums_) out[name] = s / counts_.at(name);
    return out;
  }

 private:
  std::map<std::string, double> sums_;
  std::map<std::string, double> counts_;
};

double mean_recon_ssim(const Matrix& x, const Matrix& x_hat, const ImageShape& shape) {
  const Dataset a = as_images(x, shape, "x");
  const Dataset b = as_images(x_hat, shape, "x_hat");
  const WindowSpec spec = fit_window(a[0], WindowSpec{});
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += mean_ssim(a[i], b[i], spec);
  return total / static_cast<double>(a.size());
}

double pixel_mse(const Matrix& x, const Matrix& x_hat, const ImageShape& shape) {
  return (x - x_hat).squaredNorm() * shape.range_l * shape.range_l / static_cast<double>(x.size());
}

double nn_ssim_rows(const Matrix& samples, const Matrix& heldout, const ImageShape& shape) {
  const Dataset s = as_images(samples, shape, "samples");
  return evaluate_nn_ssim(s, as_images(heldout, shape, "heldout"), fit_window(s[0], WindowSpec{}));
}

/// Library-path MMD^2 (not differentiated), clamped for reporting.
double eval_mmd2(const Matrix& generated, const Matrix& real, const TrainConfig& cfg, const ImageShape& shape,
                 bool images) {
  KernelMatrix k;
  if (images && cfg.kernel == KernelKind::Ssim) {
    const Dataset pooled = pool(as_images(generated, shape, "generated"), as_images(real, shape, "real"));
    const auto centering = cfg.ssim_centered ? Centering::Auto : Centering::None;
    k = double_center(pairwise_distance_matrix(pooled, cfg.window, DistanceMode::Eq1, centering));
  } else {
    Matrix stacked(generated.rows() + real.rows(), generated.cols());
    stacked << generated, real;
    k = rbf_kernel(stacked, cfg.gamma);
  }
  return mmd2_biased(slice_blocks(k, generated.rows(), real.rows())).mmd2;
}

template <typename Body>
void run_epochs(const TrainConfig& cfg, Checkpoint& ckpt, const EpochCallback& on_epoch, Body body) {
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    HistoryRecord rec;
    rec.epoch = epoch;
    try {
      body(rec);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NonFinite)
        throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": " + e.what());
      throw;
    }
    finalize(rec);
    ckpt.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
}

void check_finite_initial(const HistoryRecord& rec) {
  for (const auto& [k, v] : rec.metrics)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteLoss, "epoch 0: metric " + k + " is not finite");
}

Checkpoint start_checkpoint(const TrainConfig& cfg, const ImageShape& shape) {
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.shape = shape;
  return ckpt;
}

std::string seed_state(const TrainConfig& cfg, long steps) {
  return "mt19937_64 seed=" + std::to_string(cfg.seed) + " steps=" + std::to_string(steps);
}

}  // namespace

// --- GMMN --------------------------------------------------------------------------

Checkpoint train_gmmn(const Dataset& data, const TrainConfig& cfg, const Checkpoint* autoencoder,
                      const EpochCallback& on_epoch) {
  if (cfg.variant != Variant::GmmnData && cfg.variant != Variant::GmmnCode)
    throw Error(ErrorCode::ConfigError, "train_gmmn needs variant gmmn-data or gmmn-code");
  Prepared p = prepare(data, cfg);
  Checkpoint ckpt = start_checkpoint(cfg, p.shape);

  const nn::Mlp* decoder = nullptr;
  int out_dim = static_cast<int>(p.shape.pixels());
  nn::OutputActivation out_act = cfg.image_output;
  if (cfg.variant == Variant::GmmnCode) {
    if (!autoencoder || autoencoder->config.variant != Variant::Autoencoder)
      throw Error(ErrorCode::ConfigError, "gmmn-code needs a pretrained autoencoder checkpoint");
    if (autoencoder->shape.height != p.shape.height || autoencoder->shape.width != p.shape.width)
      throw Error(ErrorCode::ConfigError, "autoencoder was trained on a different image size");
    ckpt.networks["encoder"] = autoencoder->network("encoder");
    ckpt.networks["decoder"] = autoencoder->network("decoder");
    decoder = &ckpt.networks.at("decoder");
    out_dim = autoencoder->config.latent_dim;
    out_act = nn::OutputActivation::Linear;
    // Targets live in code space from here on.
    p.train = ckpt.networks.at("encoder").apply(p.train);
    p.eval = ckpt.networks.at("encoder").apply(p.eval);
  }
  ckpt.networks["generator"] =
      make_net(cfg.latent_dim, cfg.hidden, out_dim, cfg.activation, out_act, init_seed(cfg.seed, 0));
  nn::Mlp& gen = ckpt.networks.at("generator");

  Rng batch_rng = make_rng(cfg.seed, kBatches);
  Rng noise_rng = make_rng(cfg.seed, kNoise);
  Rng eval_rng = make_rng(cfg.seed, kEvalNoise);
  const Matrix eval_noise = uniform_noise(p.eval.rows(), cfg.latent_dim, eval_rng);
  ad::AdamState adam;
  adam.lr = cfg.lr;
  long steps = 0;

  auto evaluate = [&](HistoryRecord& rec) {
    const Matrix out = gen.apply(eval_noise);
    rec.metrics["eval_mmd2"] = eval_mmd2(out, p.eval, cfg, p.shape, decoder == nullptr);
    const Matrix images = decoder ? decoder->apply(out) : out;
    const Matrix real_images = decoder ? decoder->apply(p.eval) : p.eval;
    rec.metrics["eval_nn_ssim"] = nn_ssim_rows(images, real_images, p.shape);
  };
  evaluate(ckpt.initial);
  check_finite_initial(ckpt.initial);

  run_epochs(cfg, ckpt, on_epoch, [&](HistoryRecord& rec) {
    LossMeter meter;
    for (const auto& batch : epoch_batches(p.train.rows(), cfg.batch_size, batch_rng)) {
      const Matrix real = p.train(batch, Eigen::all);
      const Matrix noise = uniform_noise(real.rows(), cfg.latent_dim, noise_rng);
      Tape tape;
      const auto params = gen.bind(tape, true);
      const Var loss = losses::gmmn_mmd2(tape, gen, params, noise, real, cfg, p.shape, decoder);
      tape.backward(loss);
      auto grads = grads_of(tape, params);
      ad::adam_step(gen.params(), grads, adam);
      meter.add("mmd2", loss.scalar());
      ++steps;
    }
    rec.losses = meter.means();
    evaluate(rec);
  });
  ckpt.seed_state = seed_state(cfg, steps);
  return ckpt;
}

// --- autoencoder ---------------------------------------------------------------------

Checkpoint train_autoencoder(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (cfg.variant != Variant::Autoencoder) throw Error(ErrorCode::ConfigError, "variant must be autoencoder");
  const Prepared p = prepare(data, cfg);
  if (cfg.latent_dim > p.shape.pixels()) throw Error(ErrorCode::ConfigError, "latent_dim exceeds pixel count");
  Checkpoint ckpt = start_checkpoint(cfg, p.shape);
  const int pixels = static_cast<int>(p.shape.pixels());
  std::vector<int> reversed(cfg.hidden.rbegin(), cfg.hidden.rend());
  ckpt.networks["encoder"] = make_net(pixels, cfg.hidden, cfg.latent_dim, cfg.activation,
                                      nn::OutputActivation::Linear, init_seed(cfg.seed, 1));
  ckpt.networks["decoder"] =
      make_net(cfg.latent_dim, reversed, pixels, cfg.activation, cfg.image_output, init_seed(cfg.seed, 2));
  nn::Mlp& enc = ckpt.networks.at("encoder");
  nn::Mlp& dec = ckpt.networks.at("decoder");

  Rng batch_rng = make_rng(cfg.seed, kBatches);
  ad::AdamState adam_enc, adam_dec;
  adam_enc.lr = adam_dec.lr = cfg.lr;
  long steps = 0;

  auto evaluate = [&](HistoryRecord& rec) {
    const Matrix x_hat = dec.apply(enc.apply(p.eval));
    rec.metrics["eval_mse"] = pixel_mse(p.eval, x_hat, p.shape);
    rec.metrics["eval_mean_ssim"] = mean_recon_ssim(p.eval, x_hat, p.shape);
  };
  evaluate(ckpt.initial);
  check_finite_initial(ckpt.initial);

  run_epochs(cfg, ckpt, on_epoch, [&](HistoryRecord& rec) {
    LossMeter meter;
    for (const auto& batch : epoch_batches(p.train.rows(), cfg.batch_size, batch_rng)) {
      const Matrix x = p.train(batch, Eigen::all);
      Tape tape;
      const auto pe = enc.bind(tape, true);
      const auto pd = dec.bind(tape, true);
      const Var x_hat = dec.forward(tape, pd, enc.forward(tape, pe, tape.constant(x)));
      const Var loss = ad::mean(ad::row_sums(ad::square(tape.constant(x) - x_hat)));
      tape.backward(loss);
      auto ge = grads_of(tape, pe);
      auto gd = grads_of(tape, pd);
      ad::adam_step(enc.params(), ge, adam_enc);
      ad::adam_step(dec.params(), gd, adam_dec);
      meter.add("recon", loss.scalar());
      ++steps;
    }
    rec.losses = meter.means();
    evaluate(rec);
  });
  ckpt.seed_state = seed_state(cfg, steps);
  return ckpt;
}

// --- VAE ---------------------------------------------------------------------------

Checkpoint train_vae(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (cfg.variant != Variant::Vae) throw Error(ErrorCode::ConfigError, "variant must be vae");
  const Prepared p = prepare(data, cfg);
  Checkpoint ckpt = start_checkpoint(cfg, p.shape);
  const int pixels = static_cast<int>(p.shape.pixels());
  std::vector<int> reversed(cfg.hidden.rbegin(), cfg.hidden.rend());
  ckpt.networks["encoder"] = make_net(pixels, cfg.hidden, 2 * cfg.latent_dim, cfg.activation,
                                      nn::OutputActivation::Linear, init_seed(cfg.seed, 1));
  ckpt.networks["decoder"] =
      make_net(cfg.latent_dim, reversed, pixels, cfg.activation, cfg.image_output, init_seed(cfg.seed, 2));
  nn::Mlp& enc = ckpt.networks.at("encoder");
  nn::Mlp& dec = ckpt.networks.at("decoder");

  Rng batch_rng = make_rng(cfg.seed, kBatches);
  Rng noise_rng = make_rng(cfg.seed, kNoise);
  Rng eval_rng = make_rng(cfg.seed, kEvalNoise);
  const Matrix eval_prior = normal_noise(p.eval.rows(), cfg.latent_dim, eval_rng);
  ad::AdamState adam_enc, adam_dec;
  adam_enc.lr = adam_dec.lr = cfg.lr;
  long steps = 0;

  auto evaluate = [&](HistoryRecord& rec) {
    const Matrix mu = enc.apply(p.eval).leftCols(cfg.latent_dim);
    const Matrix x_hat = dec.apply(mu);
    rec.metrics["eval_mean_ssim"] = mean_recon_ssim(p.eval, x_hat, p.shape);
    rec.metrics["eval_mse"] = pixel_mse(p.eval, x_hat, p.shape);
    rec.metrics["eval_nn_ssim"] = nn_ssim_rows(dec.apply(eval_prior), p.eval, p.shape);
  };
  evaluate(ckpt.initial);
  check_finite_initial(ckpt.initial);

  run_epochs(cfg, ckpt, on_epoch, [&](HistoryRecord& rec) {
    LossMeter meter;
    for (const auto& batch : epoch_batches(p.train.rows(), cfg.batch_size, batch_rng)) {
      const Matrix x = p.train(batch, Eigen::all);
      const Matrix eps = normal_noise(x.rows(), cfg.latent_dim, noise_rng);
      Tape tape;
      const auto pe = enc.bind(tape, true);
      const auto pd = dec.bind(tape, true);
      const auto terms = losses::vae(tape, enc, pe, dec, pd, x, eps, cfg, p.shape);
      tape.backward(terms.total);
      auto ge = grads_of(tape, pe);
      auto gd = grads_of(tape, pd);
      ad::adam_step(enc.params(), ge, adam_enc);
      ad::adam_step(dec.params(), gd, adam_dec);
      meter.add("kl", terms.kl.scalar());
      meter.add("recon", terms.recon.scalar());
      ++steps;
    }
    rec.losses = meter.means();
    evaluate(rec);
  });
  ckpt.seed_state = seed_state(cfg, steps);
  return ckpt;
}

// --- GAN ---------------------------------------------------------------------------

namespace {

struct AdversarialSetup {
  Prepared p;
  Checkpoint ckpt;
  Rng batch_rng;
  Rng noise_rng;
  Rng pairing_rng;
  Matrix eval_noise;
  ad::AdamState adam_g;
  ad::AdamState adam_d;
};

AdversarialSetup setup_adversarial(const Dataset& data, const TrainConfig& cfg, int disc_out) {
  AdversarialSetup s{prepare(data, cfg), {}, make_rng(cfg.seed, kBatches), make_rng(cfg.seed, kNoise),
                     make_rng(cfg.seed, kPairing), {}, {}, {}};
  s.ckpt = start_checkpoint(cfg, s.p.shape);
  const int pixels = static_cast<int>(s.p.shape.pixels());
  s.ckpt.networks["generator"] =
      make_net(cfg.latent_dim, cfg.hidden, pixels, cfg.activation, cfg.image_output, init_seed(cfg.seed, 0));
  s.ckpt.networks["discriminator"] = make_net(pixels, cfg.hidden, disc_out == 0 ? pixels : disc_out, cfg.activation,
                                              nn::OutputActivation::Linear, init_seed(cfg.seed, 3));
  Rng eval_rng = make_rng(cfg.seed, kEvalNoise);
  s.eval_noise = uniform_noise(s.p.eval.rows(), cfg.latent_dim, eval_rng);
  s.adam_g.lr = s.adam_d.lr = cfg.lr;
  return s;
}

}  // namespace

Checkpoint train_gan(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (cfg.variant != Variant::Gan && cfg.variant != Variant::GanSsim)
    throw Error(ErrorCode::ConfigError, "train_gan needs variant gan or gan-ssim");
  AdversarialSetup s = setup_adversarial(data, cfg, 1);
  nn::Mlp& gen = s.ckpt.networks.at("generator");
  nn::Mlp& disc = s.ckpt.networks.at("discriminator");
  long steps = 0;

  auto d_step = [&](const Matrix& real) {
    const Matrix fake = gen.apply(uniform_noise(real.rows(), cfg.latent_dim, s.noise_rng));
    Tape tape;
    const auto pd = disc.bind(tape, true);
    const Var loss = losses::gan_discriminator(tape, disc, pd, real, tape.constant(fake));
    tape.backward(loss);
    auto gd = grads_of(tape, pd);
    ad::adam_step(disc.params(), gd, s.adam_d);
    return loss.scalar();
  };

  auto evaluate = [&](HistoryRecord& rec) {
    const Matrix fake = gen.apply(s.eval_noise);
    const Matrix real_logits = disc.apply(s.p.eval, false);
    const Matrix fake_logits = disc.apply(fake, false);
    const double correct = static_cast<double>((real_logits.array() > 0.0).count() + (fake_logits.array() <= 0.0).count());
    rec.metrics["eval_d_acc"] = correct / static_cast<double>(real_logits.rows() + fake_logits.rows());
    Tape tape;
    rec.metrics["eval_g_loss"] =
        ad::mean(ad::softplus(-tape.constant(fake_logits))).scalar();
    rec.metrics["eval_nn_ssim"] = nn_ssim_rows(fake, s.p.eval, s.p.shape);
  };

  for (int k = 0; k < cfg.d_warmup; ++k) {
    Rng warm = make_rng(cfg.seed, 1000 + static_cast<std::uint64_t>(k));
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(s.p.train.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::shuffle(idx.begin(), idx.end(), warm);
    idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(cfg.batch_size)));
    d_step(s.p.train(idx, Eigen::all));
  }
  evaluate(s.ckpt.initial);
  check_finite_initial(s.ckpt.initial);

  run_epochs(cfg, s.ckpt, on_epoch, [&](HistoryRecord& rec) {
    LossMeter meter;
    for (const auto& batch : epoch_batches(s.p.train.rows(), cfg.batch_size, s.batch_rng)) {
      const Matrix real = s.p.train(batch, Eigen::all);
      meter.add("d_loss", d_step(real));

      const Matrix noise = uniform_noise(real.rows(), cfg.latent_dim, s.noise_rng);
      Matrix paired = real;
      if (cfg.variant == Variant::GanSsim) {
        std::vector<Eigen::Index> perm(static_cast<std::size_t>(real.rows()));
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        std::shuffle(perm.begin(), perm.end(), s.pairing_rng);
        paired = real(perm, Eigen::all);
      }
      Tape tape;
      const auto pg = gen.bind(tape, true);
      const auto pd = disc.bind(tape, false);
      const Var fake = gen.forward(tape, pg, tape.constant(noise));
      const auto terms = losses::gan_generator(tape, disc, pd, fake, paired, cfg, s.p.shape);
      tape.backward(terms.total);
      auto gg = grads_of(tape, pg);
      ad::adam_step(gen.params(), gg, s.adam_g);
      meter.add("g_adv", terms.adversarial.scalar());
      meter.add("g_ssim", terms.ssim.scalar());
      ++steps;
    }
    rec.losses = meter.means();
    evaluate(rec);
  });
  s.ckpt.seed_state = seed_state(cfg, steps);
  return s.ckpt;
}

// --- LSGAN -------------------------------------------------------------------------

Checkpoint train_lsgan(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (cfg.variant != Variant::Lsgan && cfg.variant != Variant::LsganSsim)
    throw Error(ErrorCode::ConfigError, "train_lsgan needs variant lsgan or lsgan-ssim");
  AdversarialSetup s = setup_adversarial(data, cfg, cfg.variant == Variant::LsganSsim ? 0 : 1);
  nn::Mlp& gen = s.ckpt.networks.at("generator");
  nn::Mlp& disc = s.ckpt.networks.at("discriminator");
  long steps = 0;

  auto d_step = [&](const Matrix& real) {
    const Matrix fake = gen.apply(uniform_noise(real.rows(), cfg.latent_dim, s.noise_rng));
    Tape tape;
    const auto pd = disc.bind(tape, true);
    const Var loss = losses::lsgan_discriminator(tape, disc, pd, real, tape.constant(fake), cfg, s.p.shape);
    tape.backward(loss);
    auto gd = grads_of(tape, pd);
    ad::adam_step(disc.params(), gd, s.adam_d);
    return loss.scalar();
  };

  auto evaluate = [&](HistoryRecord& rec) {
    const Matrix fake = gen.apply(s.eval_noise);
    Tape tape;
    const auto pd = disc.bind(tape, false);
    rec.metrics["eval_g_loss"] =
        losses::lsgan_generator(tape, disc, pd, tape.constant(fake), cfg, s.p.shape).scalar();
    rec.metrics["eval_d_loss"] =
        losses::lsgan_discriminator(tape, disc, pd, s.p.eval, tape.constant(fake), cfg, s.p.shape).scalar();
    rec.metrics["eval_nn_ssim"] = nn_ssim_rows(fake, s.p.eval, s.p.shape);
  };

  for (int k = 0; k < cfg.d_warmup; ++k) {
    Rng warm = make_rng(cfg.seed, 1000 + static_cast<std::uint64_t>(k));
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(s.p.train.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::shuffle(idx.begin(), idx.end(), warm);
    idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(cfg.batch_size)));
    d_step(s.p.train(idx, Eigen::all));
  }
  evaluate(s.ckpt.initial);
  check_finite_initial(s.ckpt.initial);

  run_epochs(cfg, s.ckpt, on_epoch, [&](HistoryRecord& rec) {
    LossMeter meter;
    for (const auto& batch : epoch_batches(s.p.train.rows(), cfg.batch_size, s.batch_rng)) {
      const Matrix real = s.p.train(batch, Eigen::all);
      meter.add("d_loss", d_step(real));
      const Matrix noise = uniform_noise(real.rows(), cfg.latent_dim, s.noise_rng);
      Tape tape;
      const auto pg = gen.bind(tape, true);
      const auto pd = disc.bind(tape, false);
      const Var fake = gen.forward(tape, pg, tape.constant(noise));
      const Var loss = losses::lsgan_generator(tape, disc, pd, fake, cfg, s.p.shape);
      tape.backward(loss);
      auto gg = grads_of(tape, pg);
      ad::adam_step(gen.params(), gg, s.adam_g);
      meter.add("g_loss", loss.scalar());
      ++steps;
    }
    rec.losses = meter.means();
    evaluate(rec);
  });
  s.ckpt.seed_state = seed_state(cfg, steps);
  return s.ckpt;
}

Checkpoint train(const Dataset& data, const TrainConfig& cfg, const Checkpoint* autoencoder,
                 const EpochCallback& on_epoch) {
  switch (cfg.variant) {
    case Variant::GmmnData:
    case Variant::GmmnCode: return train_gmmn(data, cfg, autoencoder, on_epoch);
    case Variant::Autoencoder: return train_autoencoder(data, cfg, on_epoch);
    case Variant::Vae: return train_vae(data, cfg, on_epoch);
    case Variant::Gan:
    case Variant::GanSsim: return train_gan(data, cfg, on_epoch);
    case Variant::Lsgan:
    case Variant::LsganSsim: return train_lsgan(data, cfg, on_epoch);
  }
  throw Error(ErrorCode::ConfigError, "unknown variant");
}

// --- sampling and evaluation -------------------------------------------------------------

Dataset sample(const Checkpoint& ckpt, int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidParam, "n must be >= 1");
  const Variant v = ckpt.config.variant;
  if (!is_generative(v)) throw Error(ErrorCode::IncompatibleCheckpoint, "checkpoint is not a generative model");
  Rng rng = make_rng(seed);
  Matrix rows;
  switch (v) {
    case Variant::Vae:
      rows = ckpt.network("decoder").apply(normal_noise(n, ckpt.config.latent_dim, rng));
      break;
    case Variant::GmmnCode:
      rows = ckpt.network("decoder").apply(ckpt.network("generator").apply(uniform_noise(n, ckpt.config.latent_dim, rng)));
      break;
    default:
      rows = ckpt.network("generator").apply(uniform_noise(n, ckpt.config.latent_dim, rng));
      break;
  }
  if (rows.cols() != ckpt.shape.pixels())
    throw Error(ErrorCode::IncompatibleCheckpoint, "network output does not match image shape");
  return as_images(rows, ckpt.shape, std::string(to_string(v)) + "-samples");
}

double evaluate_nn_ssim(const Dataset& samples, const Dataset& heldout, WindowSpec spec) {
  validate(samples);
  validate(heldout);
  if (!same_shape(samples[0], heldout[0]) || samples[0].range_l != heldout[0].range_l)
    throw Error(ErrorCode::DimensionMismatch, "samples and held-out images differ in shape");
  double total = 0.0;
  for (const auto& s : samples.images) {
    double best = -INFINITY;
    for (const auto& h : heldout.images) best = std::max(best, mean_ssim(s, h, spec));
    total += best;
  }
  return total / static_cast<double>(samples.size());
}

Image montage(const Dataset& images) {
  validate(images);
  const auto n = static_cast<Eigen::Index>(images.size());
  const auto cols = static_cast<Eigen::Index>(std::ceil(std::sqrt(static_cast<double>(n))));
  const Eigen::Index rows = (n + cols - 1) / cols;
  const Eigen::Index h = images[0].height(), w = images[0].width();
  Image out;
  out.range_l = images[0].range_l;
  out.pixels = PixelMatrix::Zero(rows * h + rows - 1, cols * w + cols - 1);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index r = k / cols, c = k % cols;
    out.pixels.block(r * (h + 1), c * (w + 1), h, w) = images[static_cast<std::size_t>(k)].pixels;
  }
  return out;
}

}  // namespace ssimgen
