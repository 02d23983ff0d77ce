#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tryw/ingest.hpp"

namespace tryw {

struct LatentGeometry {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const { return static_cast<std::size_t>(channels) * height * width; }
  bool matches(const LatentTensor& t) const {
    return t.channels == channels && t.height == height && t.width == width;
  }
  friend bool operator==(const LatentGeometry&, const LatentGeometry&) = default;
};

inline LatentGeometry geometry_of(const LatentTensor& t) {
  return {t.channels, t.height, t.width};
}

// One sampling step as seen by a denoiser: the inference step index t (T..1),
// the training timestep it corresponds to, and the cumulative alpha there.
struct StepInfo {
  int t = 0;
  int train_t = 0;
  double alpha_bar = 1.0;
};

// c = [I_p'; M_p; prompt]. The garment image and its mask feed the garment
// stream of backends that install boundary-stitching attention.
struct Conditioning {
  ImagePlane infused;
  MaskPlane agnostic;
  std::string prompt;
  ImagePlane garment;
  MaskPlane garment_mask;
};

// Noise-prediction network. Output shape equals input shape and must be
// deterministic for a fixed (z, step, cond). Implementations that hold
// per-process state (e.g. a subprocess) serve one sampling run at a time.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual LatentGeometry geometry() const = 0;
  virtual LatentTensor predict_noise(const LatentTensor& z, const StepInfo& step,
                                     const Conditioning& cond) = 0;
};

// Inference schedule over steps 0..T. alpha_bar[0] == 1 and sigma[0] == 0.
struct NoiseSchedule {
  std::vector<double> alpha_bar;
  std::vector<double> sigma;
  std::vector<int> train_step;

  int steps() const { return static_cast<int>(alpha_bar.size()) - 1; }
  StepInfo info(int t) const { return {t, train_step[t], alpha_bar[t]}; }

  // Linear beta over `train_steps` training steps, strided to T inference
  // steps with trailing spacing (step t -> training index t*stride - 1), and
  // DDIM sigmas scaled by eta.
  static NoiseSchedule linear_ddim(int steps, double eta, int train_steps = 1000,
                                   double beta_start = 1e-4, double beta_end = 2e-2);
  // Caller-provided alpha_bar[0..T] and sigma[0..T].
  static NoiseSchedule custom(std::vector<double> alpha_bar, std::vector<double> sigma);

  // Throws SamplingError unless alpha_bar is in (0,1], non-increasing from
  // alpha_bar[0] == 1, and sigma_t^2 <= 1 - alpha_bar[t-1] for every step.
  void validate() const;
};

enum class GuidanceKind { Principal, FullLatent, LowFrequency, None };

// Which axis of the latent is treated as the feature space for PCA.
// ChannelFeatures: H*W spatial samples of C-dim channel vectors.
// SpatialFeatures: C channel samples of (H*W)-dim spatial maps.
enum class PcaOrientation { ChannelFeatures, SpatialFeatures };

struct GuidanceMode {
  GuidanceKind kind = GuidanceKind::Principal;
  int components = 3;
  double cutoff = 0.25;
  PcaOrientation orientation = PcaOrientation::ChannelFeatures;

  static GuidanceMode principal(int m, PcaOrientation o = PcaOrientation::ChannelFeatures) {
    return {GuidanceKind::Principal, m, 0.25, o};
  }
  static GuidanceMode full_latent() { return {GuidanceKind::FullLatent, 0, 0.25, {}}; }
  static GuidanceMode low_frequency(double cutoff) {
    return {GuidanceKind::LowFrequency, 0, cutoff, {}};
  }
  static GuidanceMode none() { return {GuidanceKind::None, 0, 0.25, {}}; }

  void validate(int channels) const;
};

std::string to_string(GuidanceKind k);
GuidanceKind guidance_kind_from_string(const std::string& name);

// Named sub-streams of the job seed.
enum class NoiseStream : std::uint64_t { Codebook = 1, InitNoise = 2, Ancestral = 3 };

// Standard-normal tensor from a counter-based key (seed, stream, t, k).
// Bit-reproducible across platforms: mt19937_64 plus an explicit Box-Muller.
LatentTensor gaussian_tensor(const LatentGeometry& g, std::uint64_t seed, NoiseStream stream,
                             std::uint64_t t, std::uint64_t k);

LatentTensor initial_noise(const LatentGeometry& g, std::uint64_t seed);

struct NoiseCodebook {
  int t = 0;
  std::vector<LatentTensor> entries;

  std::size_t size() const { return entries.size(); }
};

// K unnormalized standard-normal entries keyed on (seed, t, k).
NoiseCodebook make_codebook(int t, int k, std::uint64_t seed, const LatentGeometry& g);

struct Prediction {
  LatentTensor eps;  // predicted noise
  LatentTensor x0;   // intermediate clean-latent estimate
};

// x0 = (z_t - sqrt(1 - alpha_bar_t) * eps) / sqrt(alpha_bar_t)
Prediction predict(const LatentTensor& z_t, int t, Denoiser& den, const Conditioning& cond,
                   const NoiseSchedule& sched);
LatentTensor predict_x0(const LatentTensor& z_t, int t, Denoiser& den, const Conditioning& cond,
                        const NoiseSchedule& sched);

struct Projection {
  LatentTensor latent;
  int rank_used = 0;
  bool rank_deficient = false;
};

// Mean plus the top-m principal-component reconstruction. Eigenvectors are
// ordered by descending eigenvalue, each signed so its largest-magnitude
// coordinate is positive.
Projection principal_project(const LatentTensor& z, int m,
                             PcaOrientation orientation = PcaOrientation::ChannelFeatures);

// Per-channel 2-D DFT low-pass. Radial frequency is normalized so the
// Nyquist corner sits at 1; coefficients strictly above `cutoff` are zeroed.
LatentTensor low_frequency_project(const LatentTensor& z, double cutoff);

// The guided part of z_bar for a mode (identity for FullLatent).
LatentTensor guidance_projection(const LatentTensor& z_bar, const GuidanceMode& mode);

// argmax_k <C_t(k), z_proxy - P(z_bar)>, smallest index on ties.
std::size_t select_noise(const NoiseCodebook& cb, const LatentTensor& z_proxy,
                         const LatentTensor& z_bar, const GuidanceMode& mode);
// Same selection for an already-formed residual.
std::size_t select_noise_for_residual(const NoiseCodebook& cb, const LatentTensor& residual);

struct StepResult {
  LatentTensor z_prev;
  LatentTensor x0;
  long selected = -1;           // codebook index, -1 when unguided
  double sigma = 0.0;
  double variance_residual = 0.0;  // |abar_{t-1} + c_eps^2 + sigma^2 - 1|
  bool rank_deficient = false;
};

// z_{t-1} = sqrt(abar_{t-1}) x0 + sqrt(1 - abar_{t-1} - sigma_t^2) eps + sigma_t n_t
// where n_t = C_t(k_t) under guidance and a fresh draw of the ancestral stream
// otherwise. `cb` may be empty when mode is None or sigma_t == 0.
StepResult ppg_step(const LatentTensor& z_t, int t, Denoiser& den, const Conditioning& cond,
                    const NoiseSchedule& sched, const NoiseCodebook& cb,
                    const LatentTensor& z_proxy, const GuidanceMode& mode, std::uint64_t seed);

struct SamplerOptions {
  int codebook_size = 64;
  std::uint64_t seed = 0;
};

struct SampleResult {
  LatentTensor z0;
  std::vector<long> selected;  // per step, index 0 <-> t = T
  double max_variance_residual = 0.0;
  std::vector<std::string> warnings;
};

// Runs ppg_step from T down to 1.
SampleResult sample(const LatentTensor& z_T, Denoiser& den, const Conditioning& cond,
                    const NoiseSchedule& sched, const LatentTensor& z_proxy,
                    const GuidanceMode& mode, const SamplerOptions& opts);

// Exact eps-prediction for a Gaussian mixture sum_i w_i N(mu_i, v I).
class ToyDenoiser : public Denoiser {
 public:
  ToyDenoiser(std::vector<LatentTensor> modes, std::vector<double> weights, double variance);

  LatentGeometry geometry() const override { return geometry_; }
  LatentTensor predict_noise(const LatentTensor& z, const StepInfo& step,
                             const Conditioning& cond) override;

  std::vector<double> responsibilities(const LatentTensor& z, double alpha_bar) const;
  std::vector<double> posterior_mean(const LatentTensor& z, double alpha_bar) const;

  const std::vector<LatentTensor>& modes() const { return modes_; }

 private:
  std::vector<LatentTensor> modes_;
  std::vector<double> weights_;
  double variance_;
  LatentGeometry geometry_;
};

}  // namespace tryw
