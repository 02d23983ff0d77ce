#include "tryw/ppg.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>

#include "tryw/error.hpp"

namespace tryw {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void check_finite(const LatentTensor& t, const char* what) {
  for (float v : t.data) {
    if (!std::isfinite(v)) throw SamplingError(std::string(what) + " is not finite");
  }
}

void check_shape(const LatentTensor& a, const LatentTensor& b, const char* what) {
  if (!a.same_shape(b)) throw DimensionError(std::string(what) + ": tensor shapes differ");
}

double dot(const LatentTensor& a, const LatentTensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    s += static_cast<double>(a.data[i]) * static_cast<double>(b.data[i]);
  }
  return s;
}

// Columns of `vecs` sorted by descending eigenvalue and sign-normalized.
void order_eigenpairs(Eigen::VectorXd& vals, Eigen::MatrixXd& vecs) {
  const auto n = vals.size();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return vals(a) > vals(b);
  });
  Eigen::VectorXd v2(n);
  Eigen::MatrixXd e2(vecs.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v2(i) = vals(idx[static_cast<std::size_t>(i)]);
    e2.col(i) = vecs.col(idx[static_cast<std::size_t>(i)]);
    Eigen::Index arg = 0;
    e2.col(i).cwiseAbs().maxCoeff(&arg);
    if (e2(arg, i) < 0) e2.col(i) = -e2.col(i);
  }
  vals = std::move(v2);
  vecs = std::move(e2);
}

// Eigenvalues below 1e-10 of the top one, or below 1e-10 of the data's own
// energy (components with a spread under 1e-5 of the signal level, which
// float32 inputs cannot resolve), do not count.
int effective_rank(const Eigen::VectorXd& sorted_vals, double energy) {
  if (sorted_vals.size() == 0) return 0;
  const double top = sorted_vals(0);
  if (!(top > 0.0)) return 0;
  const double tol = std::max(top, energy) * 1e-10;
  int r = 0;
  for (Eigen::Index i = 0; i < sorted_vals.size(); ++i) {
    if (sorted_vals(i) > tol) ++r;
  }
  return r;
}

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

NoiseSchedule NoiseSchedule::linear_ddim(int steps, double eta, int train_steps,
                                         double beta_start, double beta_end) {
  if (steps < 1 || train_steps < steps) {
    throw SamplingError("linear_ddim: need 1 <= steps <= train_steps");
  }
  std::vector<double> train_abar(static_cast<std::size_t>(train_steps));
  double prod = 1.0;
  for (int i = 0; i < train_steps; ++i) {
    const double beta =
        train_steps == 1 ? beta_start
                         : beta_start + (beta_end - beta_start) * i / (train_steps - 1.0);
    prod *= 1.0 - beta;
    train_abar[static_cast<std::size_t>(i)] = prod;
  }
  NoiseSchedule s;
  s.alpha_bar.assign(static_cast<std::size_t>(steps) + 1, 1.0);
  s.sigma.assign(static_cast<std::size_t>(steps) + 1, 0.0);
  s.train_step.assign(static_cast<std::size_t>(steps) + 1, -1);
  const double stride = static_cast<double>(train_steps) / steps;
  for (int t = 1; t <= steps; ++t) {
    const int idx = static_cast<int>(std::llround(t * stride)) - 1;
    s.train_step[t] = idx;
    s.alpha_bar[t] = train_abar[static_cast<std::size_t>(idx)];
  }
  for (int t = 1; t <= steps; ++t) {
    const double a = s.alpha_bar[t], ap = s.alpha_bar[t - 1];
    s.sigma[t] = eta * std::sqrt((1.0 - ap) / (1.0 - a)) * std::sqrt(1.0 - a / ap);
  }
  s.validate();
  return s;
}

NoiseSchedule NoiseSchedule::custom(std::vector<double> alpha_bar, std::vector<double> sigma) {
  NoiseSchedule s;
  s.train_step.resize(alpha_bar.size());
  for (std::size_t t = 0; t < alpha_bar.size(); ++t) s.train_step[t] = static_cast<int>(t) - 1;
  s.alpha_bar = std::move(alpha_bar);
  s.sigma = std::move(sigma);
  s.validate();
  return s;
}

void NoiseSchedule::validate() const {
  if (alpha_bar.size() < 2 || sigma.size() != alpha_bar.size() ||
      train_step.size() != alpha_bar.size()) {
    throw SamplingError("schedule: need T >= 1 and matching alpha/sigma lengths");
  }
  if (alpha_bar[0] != 1.0) throw SamplingError("schedule: alpha_bar[0] must equal 1");
  for (std::size_t t = 1; t < alpha_bar.size(); ++t) {
    if (!(alpha_bar[t] > 0.0 && alpha_bar[t] <= alpha_bar[t - 1])) {
      throw SamplingError("schedule: alpha_bar must lie in (0,1] and be non-increasing (t=" +
                          std::to_string(t) + ")");
    }
    if (!(sigma[t] >= 0.0) || sigma[t] * sigma[t] > 1.0 - alpha_bar[t - 1] + 1e-15) {
      throw SamplingError("schedule: sigma_t^2 exceeds 1 - alpha_bar[t-1] at t=" +
                          std::to_string(t));
    }
  }
}

void GuidanceMode::validate(int channels) const {
  if (kind == GuidanceKind::Principal) {
    if (components < 1 || components > channels) {
      throw ValidationError("principal guidance needs 1 <= m <= " + std::to_string(channels));
    }
  }
  if (kind == GuidanceKind::LowFrequency && !(cutoff > 0.0 && cutoff <= 1.0)) {
    throw ValidationError("low-frequency cutoff must lie in (0,1]");
  }
}

std::string to_string(GuidanceKind k) {
  switch (k) {
    case GuidanceKind::Principal: return "principal";
    case GuidanceKind::FullLatent: return "full";
    case GuidanceKind::LowFrequency: return "lowfreq";
    case GuidanceKind::None: return "none";
  }
  return "unknown";
}

GuidanceKind guidance_kind_from_string(const std::string& name) {
  if (name == "principal") return GuidanceKind::Principal;
  if (name == "full" || name == "full_latent") return GuidanceKind::FullLatent;
  if (name == "lowfreq" || name == "low_frequency") return GuidanceKind::LowFrequency;
  if (name == "none") return GuidanceKind::None;
  throw ValidationError("unknown guidance mode: " + name);
}

LatentTensor gaussian_tensor(const LatentGeometry& g, std::uint64_t seed, NoiseStream stream,
                             std::uint64_t t, std::uint64_t k) {
  std::uint64_t key = splitmix64(seed);
  key = splitmix64(key ^ static_cast<std::uint64_t>(stream));
  key = splitmix64(key ^ t);
  key = splitmix64(key ^ k);
  std::mt19937_64 engine(key);
  constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53
  LatentTensor out(g.channels, g.height, g.width);
  const std::size_t n = out.data.size();
  for (std::size_t i = 0; i < n; i += 2) {
    const double u1 = 1.0 - static_cast<double>(engine() >> 11) * kInv53;  // (0,1]
    const double u2 = static_cast<double>(engine() >> 11) * kInv53;        // [0,1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    out.data[i] = static_cast<float>(r * std::cos(a));
    if (i + 1 < n) out.data[i + 1] = static_cast<float>(r * std::sin(a));
  }
  return out;
}

LatentTensor initial_noise(const LatentGeometry& g, std::uint64_t seed) {
  return gaussian_tensor(g, seed, NoiseStream::InitNoise, 0, 0);
}

NoiseCodebook make_codebook(int t, int k, std::uint64_t seed, const LatentGeometry& g) {
  if (k < 1) throw ValidationError("make_codebook: K must be >= 1");
  NoiseCodebook cb;
  cb.t = t;
  cb.entries.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    cb.entries.push_back(gaussian_tensor(g, seed, NoiseStream::Codebook,
                                         static_cast<std::uint64_t>(t),
                                         static_cast<std::uint64_t>(i)));
  }
  return cb;
}

Prediction predict(const LatentTensor& z_t, int t, Denoiser& den, const Conditioning& cond,
                   const NoiseSchedule& sched) {
  if (t < 1 || t > sched.steps()) throw SamplingError("predict: timestep out of range");
  const double abar = sched.alpha_bar[t];
  if (!(abar > 0.0)) throw SamplingError("predict: alpha_bar_t must be positive");
  Prediction p;
  p.eps = den.predict_noise(z_t, sched.info(t), cond);
  if (!p.eps.same_shape(z_t)) throw SamplingError("denoiser output shape differs from input");
  check_finite(p.eps, "denoiser output");
  const double a = std::sqrt(abar), b = std::sqrt(1.0 - abar);
  p.x0 = LatentTensor(z_t.channels, z_t.height, z_t.width);
  for (std::size_t i = 0; i < z_t.data.size(); ++i) {
    p.x0.data[i] = static_cast<float>((z_t.data[i] - b * p.eps.data[i]) / a);
  }
  check_finite(p.x0, "intermediate prediction");
  return p;
}

LatentTensor predict_x0(const LatentTensor& z_t, int t, Denoiser& den, const Conditioning& cond,
                        const NoiseSchedule& sched) {
  return predict(z_t, t, den, cond, sched).x0;
}

Projection principal_project(const LatentTensor& z, int m, PcaOrientation orientation) {
  if (m < 1 || m > z.channels) {
    throw DimensionError("principal_project: need 1 <= m <= channels");
  }
  const Eigen::Index c = z.channels;
  const Eigen::Index hw = static_cast<Eigen::Index>(z.height) * z.width;
  // Row ch holds channel ch's spatial map.
  Eigen::MatrixXd x(c, hw);
  for (Eigen::Index ch = 0; ch < c; ++ch) {
    for (Eigen::Index i = 0; i < hw; ++i) x(ch, i) = z.data[static_cast<std::size_t>(ch * hw + i)];
  }

  Projection out;
  Eigen::MatrixXd recon;
  if (orientation == PcaOrientation::ChannelFeatures) {
    // Samples are the hw columns, features the c rows.
    const Eigen::VectorXd mean = x.rowwise().mean();
    const Eigen::MatrixXd centered = x.colwise() - mean;
    const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(hw);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    Eigen::VectorXd vals = es.eigenvalues();
    Eigen::MatrixXd vecs = es.eigenvectors();
    order_eigenpairs(vals, vecs);
    const int rank = effective_rank(vals, x.squaredNorm() / static_cast<double>(c * hw));
    const int k = std::min(m, rank);
    out.rank_used = k;
    out.rank_deficient = rank < m;
    const Eigen::MatrixXd basis = vecs.leftCols(k);
    recon = (basis * (basis.transpose() * centered)).colwise() + mean;
  } else {
    // Samples are the c rows, features the hw columns; use the c x c Gram matrix.
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    const Eigen::MatrixXd gram = centered * centered.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    Eigen::VectorXd vals = es.eigenvalues();
    Eigen::MatrixXd vecs = es.eigenvectors();
    order_eigenpairs(vals, vecs);
    const int rank = effective_rank(vals, x.squaredNorm() / static_cast<double>(c));
    const int k = std::min(m, rank);
    out.rank_used = k;
    out.rank_deficient = rank < m;
    const Eigen::MatrixXd u = vecs.leftCols(k);
    recon = (u * (u.transpose() * centered)).rowwise() + mean;
  }
  out.latent = LatentTensor(z.channels, z.height, z.width);
  for (Eigen::Index ch = 0; ch < c; ++ch) {
    for (Eigen::Index i = 0; i < hw; ++i) {
      out.latent.data[static_cast<std::size_t>(ch * hw + i)] = static_cast<float>(recon(ch, i));
    }
  }
  return out;
}

LatentTensor low_frequency_project(const LatentTensor& z, double cutoff) {
  if (!(cutoff > 0.0 && cutoff <= 1.0)) {
    throw DimensionError("low_frequency_project: cutoff must lie in (0,1]");
  }
  const int h = z.height, w = z.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  LatentTensor out(z.channels, h, w);
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  fftw_plan fwd, inv;
  {
    std::lock_guard lock(fftw_planner_mutex());
    fwd = fftw_plan_dft_2d(h, w, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    inv = fftw_plan_dft_2d(h, w, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  const double nyquist = std::sqrt(0.5);
  auto signed_freq = [](int k, int len) {
    return (k <= len / 2 ? k : k - len) / static_cast<double>(len);
  };
  for (int c = 0; c < z.channels; ++c) {
    const std::size_t off = static_cast<std::size_t>(c) * n;
    for (std::size_t i = 0; i < n; ++i) {
      buf[i][0] = z.data[off + i];
      buf[i][1] = 0.0;
    }
    fftw_execute(fwd);
    for (int ky = 0; ky < h; ++ky) {
      const double fy = signed_freq(ky, h);
      for (int kx = 0; kx < w; ++kx) {
        const double fx = signed_freq(kx, w);
        if (std::sqrt(fx * fx + fy * fy) / nyquist > cutoff) {
          const std::size_t i = static_cast<std::size_t>(ky) * w + kx;
          buf[i][0] = 0.0;
          buf[i][1] = 0.0;
        }
      }
    }
    fftw_execute(inv);
    for (std::size_t i = 0; i < n; ++i) {
      out.data[off + i] = static_cast<float>(buf[i][0] / static_cast<double>(n));
    }
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }
  fftw_free(buf);
  return out;
}

LatentTensor guidance_projection(const LatentTensor& z_bar, const GuidanceMode& mode) {
  switch (mode.kind) {
    case GuidanceKind::Principal:
      return principal_project(z_bar, mode.components, mode.orientation).latent;
    case GuidanceKind::FullLatent: return z_bar;
    case GuidanceKind::LowFrequency: return low_frequency_project(z_bar, mode.cutoff);
    case GuidanceKind::None: break;
  }
  throw SamplingError("guidance projection requested with guidance mode none");
}

std::size_t select_noise_for_residual(const NoiseCodebook& cb, const LatentTensor& residual) {
  if (cb.entries.empty()) throw SamplingError("select_noise: empty codebook");
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cb.entries.size(); ++k) {
    check_shape(cb.entries[k], residual, "select_noise");
    const double s = dot(cb.entries[k], residual);
    if (s > best_score) {
      best_score = s;
      best = k;
    }
  }
  return best;
}

std::size_t select_noise(const NoiseCodebook& cb, const LatentTensor& z_proxy,
                         const LatentTensor& z_bar, const GuidanceMode& mode) {
  check_shape(z_proxy, z_bar, "select_noise");
  const LatentTensor projected = guidance_projection(z_bar, mode);
  LatentTensor residual(z_bar.channels, z_bar.height, z_bar.width);
  for (std::size_t i = 0; i < residual.data.size(); ++i) {
    residual.data[i] = z_proxy.data[i] - projected.data[i];
  }
  return select_noise_for_residual(cb, residual);
}

StepResult ppg_step(const LatentTensor& z_t, int t, Denoiser& den, const Conditioning& cond,
                    const NoiseSchedule& sched, const NoiseCodebook& cb,
                    const LatentTensor& z_proxy, const GuidanceMode& mode, std::uint64_t seed) {
  if (t < 1 || t > sched.steps()) throw SamplingError("ppg_step: timestep out of range");
  const double abar_prev = sched.alpha_bar[t - 1];
  const double sigma = sched.sigma[t];
  const double eps_var = 1.0 - abar_prev - sigma * sigma;
  if (eps_var < -1e-15) {
    throw SamplingError("ppg_step: sigma_t^2 > 1 - alpha_bar_{t-1} at t=" + std::to_string(t));
  }
  const double c_eps2 = std::max(0.0, eps_var);
  const double c_x0 = std::sqrt(abar_prev), c_eps = std::sqrt(c_eps2);

  Prediction pred = predict(z_t, t, den, cond, sched);

  StepResult res;
  res.sigma = sigma;
  res.variance_residual = std::abs(abar_prev + c_eps2 + sigma * sigma - 1.0);
  res.z_prev = LatentTensor(z_t.channels, z_t.height, z_t.width);

  const LatentTensor* noise = nullptr;
  LatentTensor fresh;
  if (sigma > 0.0) {
    if (mode.kind == GuidanceKind::None) {
      fresh = gaussian_tensor(geometry_of(z_t), seed, NoiseStream::Ancestral,
                              static_cast<std::uint64_t>(t), 0);
      noise = &fresh;
    } else {
      check_shape(z_proxy, z_t, "ppg_step proxy latent");
      LatentTensor residual = z_proxy;
      if (mode.kind == GuidanceKind::Principal) {
        const Projection proj = principal_project(pred.x0, mode.components, mode.orientation);
        res.rank_deficient = proj.rank_deficient;
        for (std::size_t i = 0; i < residual.data.size(); ++i) {
          residual.data[i] -= proj.latent.data[i];
        }
      } else {
        const LatentTensor projected = guidance_projection(pred.x0, mode);
        for (std::size_t i = 0; i < residual.data.size(); ++i) {
          residual.data[i] -= projected.data[i];
        }
      }
      const std::size_t k = select_noise_for_residual(cb, residual);
      res.selected = static_cast<long>(k);
      noise = &cb.entries[k];
      check_shape(*noise, z_t, "ppg_step codebook");
    }
  }
  for (std::size_t i = 0; i < z_t.data.size(); ++i) {
    double v = c_x0 * pred.x0.data[i] + c_eps * pred.eps.data[i];
    if (noise) v += sigma * noise->data[i];
    res.z_prev.data[i] = static_cast<float>(v);
  }
  check_finite(res.z_prev, "updated latent");
  res.x0 = std::move(pred.x0);
  return res;
}

SampleResult sample(const LatentTensor& z_T, Denoiser& den, const Conditioning& cond,
                    const NoiseSchedule& sched, const LatentTensor& z_proxy,
                    const GuidanceMode& mode, const SamplerOptions& opts) {
  sched.validate();
  mode.validate(z_T.channels);
  const bool guided = mode.kind != GuidanceKind::None;
  if (guided) check_shape(z_T, z_proxy, "sample proxy latent");
  if (!den.geometry().matches(z_T)) {
    throw DimensionError("sample: initial latent does not match the denoiser geometry");
  }
  SampleResult out;
  LatentTensor z = z_T;
  const LatentGeometry g = geometry_of(z_T);
  bool rank_warned = false;
  for (int t = sched.steps(); t >= 1; --t) {
    NoiseCodebook cb;
    if (guided && sched.sigma[t] > 0.0) cb = make_codebook(t, opts.codebook_size, opts.seed, g);
    StepResult step = ppg_step(z, t, den, cond, sched, cb, z_proxy, mode, opts.seed);
    if (step.rank_deficient && !rank_warned) {
      out.warnings.push_back("principal guidance: intermediate prediction has rank < m at t=" +
                             std::to_string(t) + "; reconstructed with the available rank");
      rank_warned = true;
    }
    out.selected.push_back(step.selected);
    out.max_variance_residual = std::max(out.max_variance_residual, step.variance_residual);
    z = std::move(step.z_prev);
  }
  out.z0 = std::move(z);
  return out;
}

ToyDenoiser::ToyDenoiser(std::vector<LatentTensor> modes, std::vector<double> weights,
                         double variance)
    : modes_(std::move(modes)), weights_(std::move(weights)), variance_(variance) {
  if (modes_.empty()) throw ValidationError("ToyDenoiser: need at least one mode");
  if (weights_.empty()) weights_.assign(modes_.size(), 1.0);
  if (weights_.size() != modes_.size()) {
    throw ValidationError("ToyDenoiser: one weight per mode required");
  }
  if (!(variance_ >= 0.0)) throw ValidationError("ToyDenoiser: variance must be >= 0");
  for (const auto& m : modes_) check_shape(m, modes_.front(), "ToyDenoiser modes");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0)) throw ValidationError("ToyDenoiser: weights must be positive");
    total += w;
  }
  for (double& w : weights_) w /= total;
  geometry_ = geometry_of(modes_.front());
}

std::vector<double> ToyDenoiser::responsibilities(const LatentTensor& z,
                                                  double alpha_bar) const {
  const double a = std::sqrt(alpha_bar);
  const double s2 = alpha_bar * variance_ + 1.0 - alpha_bar;
  std::vector<double> logits(modes_.size());
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < z.data.size(); ++j) {
      const double d = z.data[j] - a * modes_[i].data[j];
      d2 += d * d;
    }
    // With zero spread (alpha_bar == 1, v == 0) only the distance ordering matters.
    logits[i] = std::log(weights_[i]) - (s2 > 0.0 ? d2 / (2.0 * s2) : d2 * 1e300);
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& l : logits) {
    l = std::exp(l - mx);
    sum += l;
  }
  for (double& l : logits) l /= sum;
  return logits;
}

std::vector<double> ToyDenoiser::posterior_mean(const LatentTensor& z, double alpha_bar) const {
  check_shape(z, modes_.front(), "ToyDenoiser");
  const auto resp = responsibilities(z, alpha_bar);
  const double a = std::sqrt(alpha_bar);
  const double s2 = alpha_bar * variance_ + 1.0 - alpha_bar;
  const double gain = s2 > 0.0 ? a * variance_ / s2 : 0.0;
  std::vector<double> mean(z.data.size(), 0.0);
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    if (resp[i] == 0.0) continue;
    for (std::size_t j = 0; j < z.data.size(); ++j) {
      const double mu = modes_[i].data[j];
      mean[j] += resp[i] * (mu + gain * (z.data[j] - a * mu));
    }
  }
  return mean;
}

LatentTensor ToyDenoiser::predict_noise(const LatentTensor& z, const StepInfo& step,
                                        const Conditioning&) {
  check_shape(z, modes_.front(), "ToyDenoiser");
  LatentTensor eps(z.channels, z.height, z.width);
  const double abar = step.alpha_bar;
  if (abar >= 1.0) return eps;
  const auto x0 = posterior_mean(z, abar);
  const double a = std::sqrt(abar), b = std::sqrt(1.0 - abar);
  for (std::size_t j = 0; j < z.data.size(); ++j) {
    eps.data[j] = static_cast<float>((z.data[j] - a * x0[j]) / b);
  }
  return eps;
}

}  // namespace tryw
