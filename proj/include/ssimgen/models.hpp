#pragma once

#include "ssimgen/autodiff.hpp"
#include "ssimgen/image.hpp"
#include "ssimgen/nn.hpp"
#include "ssimgen/ssim.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ssimgen {

enum class Variant { GmmnData, GmmnCode, Autoencoder, Vae, Gan, GanSsim, Lsgan, LsganSsim };
enum class KernelKind { Ssim, Rbf };
enum class ReconKind { Ssim, L2, Bce };

Variant parse_variant(std::string_view name);
std::string_view to_string(Variant v);
bool is_generative(Variant v);

/// Hyperparameters of one training run. Networks work on intensities
/// divided by range_l, so SSIM constants inside losses use l = 1 and the
/// RBF gamma applies to [0, 1] pixels.
struct TrainConfig {
  Variant variant = Variant::GmmnData;
  int epochs = 20;
  int batch_size = 16;
  double lr = 1e-3;
  std::uint64_t seed = 42;
  KernelKind kernel = KernelKind::Ssim;
  double gamma = 1.0;
  ReconKind recon = ReconKind::Ssim;
  WindowSpec window{4, 4};
  double lambda_ssim = 1.0;
  int latent_dim = 4;
  std::vector<int> hidden{64};
  nn::Activation activation = nn::Activation::Relu;
  nn::OutputActivation image_output = nn::OutputActivation::Sigmoid;
  double lsgan_a = 0.0;  // fake target
  double lsgan_b = 1.0;  // real target
  double lsgan_c = 1.0;  // generator's target
  bool ssim_centered = true;
  int d_warmup = 0;  // discriminator-only steps before the first epoch
};

/// Throws ConfigError describing the first violated constraint.
void validate(const TrainConfig& cfg);

nlohmann::json to_json(const TrainConfig& cfg);
/// Rejects unknown keys with ConfigError naming the key.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct ImageShape {
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  double range_l = 255.0;

  Eigen::Index pixels() const { return height * width; }
};

struct HistoryRecord {
  int epoch = 0;
  std::map<std::string, double> losses;   // mean per-step loss components
  double total = 0.0;                     // sum of losses
  std::map<std::string, double> metrics;  // evaluation on the held-out split
};

/// Serialized model. `initial` holds epoch-0 metrics measured before the
/// first update; `history` has one record per completed epoch.
struct Checkpoint {
  std::string version = "1";
  TrainConfig config;
  ImageShape shape;
  std::map<std::string, nn::Mlp> networks;
  HistoryRecord initial;
  std::vector<HistoryRecord> history;
  std::string seed_state;

  const nn::Mlp& network(const std::string& name) const;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(std::string_view text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Epoch 0 (initial) plus one row per epoch; columns are the sorted union
/// of loss and metric names.
std::string history_csv(const Checkpoint& ckpt);

using EpochCallback = std::function<void(const HistoryRecord&)>;

Checkpoint train_gmmn(const Dataset& data, const TrainConfig& cfg, const Checkpoint* autoencoder = nullptr,
                      const EpochCallback& on_epoch = {});
Checkpoint train_autoencoder(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});
Checkpoint train_vae(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});
Checkpoint train_gan(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});
Checkpoint train_lsgan(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Dispatches on cfg.variant.
Checkpoint train(const Dataset& data, const TrainConfig& cfg, const Checkpoint* autoencoder = nullptr,
                 const EpochCallback& on_epoch = {});

/// n images from seeded noise: uniform [-1, 1] for GMMN and GAN generators,
/// standard normal through the decoder for VAEs.
Dataset sample(const Checkpoint& ckpt, int n, std::uint64_t seed);

/// Mean over samples of the best mean_ssim against any held-out image.
double evaluate_nn_ssim(const Dataset& samples, const Dataset& heldout, WindowSpec spec = {});

/// Row-major tiling on a ceil(sqrt(n)) wide grid with 1-pixel 0-valued
/// separators.
Image montage(const Dataset& images);

/// Differentiable objectives used by the trainers. Matrices hold one
/// flattened normalized image (or latent vector) per row.
namespace losses {

using ad::Matrix;
using ad::Tape;
using ad::Var;

/// (q-1) * (0.03)^2 for windows of the given spec at l = 1.
double ssim_c(const WindowSpec& spec);

/// Biased MMD^2 between generator output and `real`, pooled Gram with the
/// generated rows first. With `decoder`, the generator emits codes and
/// `real` holds codes; the SSIM kernel then compares decoded images.
Var gmmn_mmd2(Tape& tape, const nn::Mlp& gen, const std::vector<Var>& gen_params, const Matrix& noise,
              const Matrix& real, const TrainConfig& cfg, const ImageShape& shape, const nn::Mlp* decoder = nullptr);

struct VaeTerms {
  Var kl;     // batch mean of the closed-form diagonal Gaussian KL
  Var recon;  // batch mean of the reconstruction term
  Var total;
};

VaeTerms vae(Tape& tape, const nn::Mlp& enc, const std::vector<Var>& enc_params, const nn::Mlp& dec,
             const std::vector<Var>& dec_params, const Matrix& x, const Matrix& eps, const TrainConfig& cfg,
             const ImageShape& shape);

/// Batch-mean recon term between x (constant) and decoder output.
Var reconstruction(Tape& tape, const Matrix& x, Var x_hat, Var logits, const TrainConfig& cfg,
                   const ImageShape& shape);

/// -[log D(x) + log(1 - D(G(z)))], batch means, D emitting logits.
Var gan_discriminator(Tape& tape, const nn::Mlp& disc, const std::vector<Var>& disc_params, const Matrix& real,
                      Var fake);

struct GeneratorTerms {
  Var adversarial;
  Var ssim;  // already multiplied by lambda_ssim
  Var total;
};

/// Non-saturating -log D(G(z)) plus lambda * batch mean of the patch-summed
/// squared SSIM distance between `paired_real` and G(z), row by row.
GeneratorTerms gan_generator(Tape& tape, const nn::Mlp& disc, const std::vector<Var>& disc_params, Var fake,
                             const Matrix& paired_real, const TrainConfig& cfg, const ImageShape& shape);

/// lsgan: 1/2 (D(x) - b)^2 + 1/2 (D(G(z)) - a)^2. lsgan-ssim: each squared
/// error becomes the patch-summed squared SSIM distance between the score
/// map and a constant target map.
Var lsgan_discriminator(Tape& tape, const nn::Mlp& disc, const std::vector<Var>& disc_params, const Matrix& real,
                        Var fake, const TrainConfig& cfg, const ImageShape& shape);
Var lsgan_generator(Tape& tape, const nn::Mlp& disc, const std::vector<Var>& disc_params, Var fake,
                    const TrainConfig& cfg, const ImageShape& shape);

}  // namespace losses

}  // namespace ssimgen
