#include "tryw/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>

#include "tryw/error.hpp"
#include "tryw/hash.hpp"
#include "tryw/image_ops.hpp"
#include "tryw/proxy.hpp"

namespace fs = std::filesystem;

namespace tryw {

std::string to_string(BackboneMode m) {
  switch (m) {
    case BackboneMode::Toy: return "toy";
    case BackboneMode::BridgeUnet: return "bridge-unet";
    case BackboneMode::BridgeDit: return "bridge-dit";
  }
  return "toy";
}

BackboneMode backbone_mode_from_string(const std::string& name) {
  if (name == "toy") return BackboneMode::Toy;
  if (name == "bridge-unet") return BackboneMode::BridgeUnet;
  if (name == "bridge-dit") return BackboneMode::BridgeDit;
  throw ValidationError("unknown backbone mode '" + name + "' (toy|bridge-unet|bridge-dit)");
}

namespace {

const std::vector<std::string> kKnownKeys = {
    "inputs.person_image",      "inputs.garment_image",      "inputs.garment_images",
    "inputs.person_keypoints",  "inputs.garment_keypoints",  "inputs.person_parsing",
    "inputs.garment_parsing",   "inputs.person_garment_mask", "inputs.garment_mask",
    "inputs.body_mask",         "inputs.agnostic_mask",      "inputs.person_iuv_part",
    "inputs.person_iuv_u",      "inputs.person_iuv_v",       "inputs.garment_iuv_part",
    "inputs.garment_iuv_u",     "inputs.garment_iuv_v",      "inputs.label_table",
    "run.category",             "run.mode",                  "run.guidance",
    "run.m",                    "run.lowfreq_cutoff",        "run.pca_orientation",
    "run.steps",                "run.codebook_size",         "run.seed",
    "run.eta",                  "run.prompt",                "run.output_dir",
    "run.toy_variance",         "run.bridge_command",        "run.inpaint_sweeps",
    "geometry.margin",          "geometry.tau_uv",           "geometry.mask_threshold",
};

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string path_str(const fs::path& p) { return p.generic_string(); }

PcaOrientation orientation_from_string(const std::string& s) {
  if (s == "channel") return PcaOrientation::ChannelFeatures;
  if (s == "spatial") return PcaOrientation::SpatialFeatures;
  throw ValidationError("unknown pca_orientation '" + s + "' (channel|spatial)");
}

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ValidationError("missing required input: " + what);
  if (!fs::is_regular_file(p)) {
    throw ValidationError(what + " not found: " + path_str(p));
  }
}

void optional_file(const fs::path& p, const std::string& what) {
  if (!p.empty() && !fs::is_regular_file(p)) {
    throw ValidationError(what + " not found: " + path_str(p));
  }
}

std::string bridge_command_for(const JobConfig& cfg) {
  if (!cfg.bridge_command.empty()) return cfg.bridge_command;
  const char* env = std::getenv(bridge::kBridgeCommandEnv);
  return env ? std::string(env) : std::string();
}

// Loads a file, turning any parse failure into a validation error naming it.
template <typename F>
auto load_input(const fs::path& p, F&& loader) -> decltype(loader(p)) {
  try {
    return loader(p);
  } catch (const Error& e) {
    throw ValidationError(path_str(p) + ": " + e.what());
  }
}

template <typename Plane>
void require_dims(const Plane& plane, int w, int h, const fs::path& p) {
  if (plane.width != w || plane.height != h) {
    throw ValidationError(path_str(p) + ": expected " + std::to_string(w) + "x" +
                          std::to_string(h) + ", got " + std::to_string(plane.width) + "x" +
                          std::to_string(plane.height));
  }
}

MaskPlane resize_mask(const MaskPlane& m, int w, int h) {
  if (m.same_dims(w, h)) return m;
  ImagePlane f(m.width, m.height, 1);
  for (std::size_t i = 0; i < m.data.size(); ++i) f.data[i] = m.data[i];
  const ImagePlane r = resize_bilinear(f, w, h);
  MaskPlane out(w, h);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = r.data[i] >= 0.5f ? 1 : 0;
  return out;
}

MaskPlane foreground(const IUVPlane& iuv) {
  MaskPlane m(iuv.width, iuv.height);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = iuv.part_index[i] > 0 ? 1 : 0;
  return m;
}

// Image <-> latent conversion for the active backend.
class Codec {
 public:
  virtual ~Codec() = default;
  virtual LatentGeometry geometry() const = 0;
  virtual LatentTensor encode(const ImagePlane& img) = 0;
  virtual ImagePlane decode(const LatentTensor& z) = 0;
};

// Toy latent: the image resized to the latent grid, channel-major. Decoding
// is the identity (clamped to [0,1] when written as an image).
class ToyCodec : public Codec {
 public:
  LatentGeometry geometry() const override { return kToyGeometry; }
  LatentTensor encode(const ImagePlane& img) override {
    const ImagePlane small = resize_bilinear(to_rgb(img), kToyGeometry.width, kToyGeometry.height);
    LatentTensor z(kToyGeometry.channels, kToyGeometry.height, kToyGeometry.width);
    z.data = bridge::image_to_chw(small);
    return z;
  }
  ImagePlane decode(const LatentTensor& z) override {
    return bridge::image_from_chw(z.data, z.channels, z.height, z.width);
  }
};

class BridgeCodec : public Codec {
 public:
  BridgeCodec(bridge::Client& client, LatentGeometry g) : client_(client), geometry_(g) {}
  LatentGeometry geometry() const override { return geometry_; }
  LatentTensor encode(const ImagePlane& img) override { return client_.encode(to_rgb(img)); }
  ImagePlane decode(const LatentTensor& z) override { return client_.decode(z); }

 private:
  bridge::Client& client_;
  LatentGeometry geometry_;
};

struct Inputs {
  ImagePlane person;
  ImagePlane garment;
  ImagePlane garment_composite;  // conditioning garment, person-sized
  KeypointSet person_kp;
  KeypointSet garment_kp;
  ParsingPlane person_parsing;
  ParsingPlane garment_parsing;
  MaskPlane source_garment;  // M_s
  MaskPlane garment_mask;    // M_o
  MaskPlane dense_body;      // M_d
  std::optional<MaskPlane> agnostic;
  std::optional<IUVPlane> person_iuv;
  std::optional<IUVPlane> garment_iuv;
  LabelTable labels;
};

class Runner {
 public:
  Runner(const JobConfig& cfg, const RunOptions& opts) : cfg_(cfg), opts_(opts) {
    nlohmann::json fp = cfg.to_json();
    fp.erase("output_dir");
    config_fingerprint_ = sha256_hex(fp.dump());
    if (opts.resume) {
      std::ifstream in(cfg.output_dir / "report.json");
      if (in) {
        try {
          previous_ = StageReport::from_json(nlohmann::json::parse(in));
        } catch (const std::exception&) {
          previous_.reset();
        }
      }
    }
  }

  ~Runner() {
    if (client_) {
      try {
        client_->shutdown();
        client_->wait();
      } catch (...) {
      }
    }
  }

  StageReport run() {
    stage("validate", [&] { validate(); }, nullptr);
    if (stop("validate")) return report_;
    stage("morph", [&] { morph(); }, [&] { load_morph(); });
    if (stop("morph")) return report_;
    stage("infuse", [&] { infuse(); }, [&] { load_infuse(); });
    if (stop("infuse")) return report_;
    stage("proxy", [&] { proxy(); }, [&] { load_proxy(); });
    if (stop("proxy")) return report_;
    stage("encode", [&] { encode(); }, [&] { load_encode(); });
    if (stop("encode")) return report_;
    stage("sample", [&] { sample(); }, [&] { load_sample(); });
    if (stop("sample")) return report_;
    stage("decode", [&] { decode(); }, nullptr);
    if (client_) {
      client_->shutdown();
      client_->wait();
      client_.reset();
    }
    return report_;
  }

 private:
  bool stop(const std::string& name) const { return opts_.stop_after == name; }

  template <typename Body, typename Load>
  void stage(const std::string& name, Body&& body, Load&& load) {
    StageRecord rec;
    rec.name = name;
    std::string upstream = config_fingerprint_ + "|" + name;
    for (const auto& s : report_.stages) {
      for (const auto& a : s.artifacts) upstream += "|" + a.name + "=" + a.sha256;
    }
    rec.fingerprint = sha256_hex(upstream);
    current_ = &rec;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      bool resumed = false;
      if constexpr (!std::is_same_v<std::decay_t<Load>, std::nullptr_t>) {
        if (const StageRecord* old = reusable(name, rec.fingerprint)) {
          rec.artifacts = old->artifacts;
          rec.warnings = old->warnings;
          rec.resumed = true;
          load();
          resumed = true;
        }
      }
      if (!resumed) body();
    } catch (const ValidationError&) {
      throw;
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    current_ = nullptr;
    report_.stages.push_back(std::move(rec));
    write_report();
  }

  // A previous record is reusable when its fingerprint matches and every
  // artifact on disk still hashes to the recorded value.
  const StageRecord* reusable(const std::string& name, const std::string& fingerprint) const {
    if (!previous_) return nullptr;
    const StageRecord* old = previous_->find(name);
    if (!old || old->fingerprint != fingerprint || old->artifacts.empty()) return nullptr;
    for (const auto& a : old->artifacts) {
      const fs::path p = cfg_.output_dir / a.path;
      if (!fs::is_regular_file(p) || sha256_file(p) != a.sha256) return nullptr;
    }
    return old;
  }

  fs::path out(const std::string& file) const { return cfg_.output_dir / file; }

  void record(const std::string& name, const std::string& file) {
    current_->artifacts.push_back({name, file, sha256_file(out(file))});
  }

  void warn(const std::string& w) { current_->warnings.push_back(w); }

  void write_report() const {
    std::ofstream o(out("report.json"));
    o << report_.to_json().dump(2) << "\n";
  }

  // -- validate ---------------------------------------------------------------

  void validate() {
    cfg_.validate();
    fs::create_directories(cfg_.output_dir);
    in_.labels = cfg_.label_table.empty()
                     ? LabelTable::defaults()
                     : load_input(cfg_.label_table, [](const fs::path& p) {
                         return LabelTable::load(p);
                       });
    const int vocab = in_.labels.vocabulary_size;
    const double thr = cfg_.mask_threshold;
    auto image = [](const fs::path& p) { return to_rgb(load_image(p)); };
    auto mask = [thr](const fs::path& p) { return load_mask(p, thr); };
    auto parsing = [vocab](const fs::path& p) { return load_parsing(p, vocab); };
    auto keypoints = [](const fs::path& p) { return load_keypoints(p); };
    auto iuv = [](const IuvPaths& ip) {
      try {
        return load_iuv(ip.part, ip.u, ip.v);
      } catch (const Error& e) {
        throw ValidationError(path_str(ip.part) + ": " + e.what());
      }
    };

    in_.person = load_input(cfg_.person_image, image);
    in_.garment = load_input(cfg_.garment_image, image);
    in_.person_kp = load_input(cfg_.person_keypoints, keypoints);
    in_.garment_kp = load_input(cfg_.garment_keypoints, keypoints);
    const int pw = in_.person.width, ph = in_.person.height;
    const int gw = in_.garment.width, gh = in_.garment.height;

    in_.person_parsing = load_input(cfg_.person_parsing, parsing);
    require_dims(in_.person_parsing, pw, ph, cfg_.person_parsing);
    in_.garment_parsing = load_input(cfg_.garment_parsing, parsing);
    require_dims(in_.garment_parsing, gw, gh, cfg_.garment_parsing);
    in_.source_garment = load_input(cfg_.person_garment_mask, mask);
    require_dims(in_.source_garment, pw, ph, cfg_.person_garment_mask);
    in_.garment_mask = load_input(cfg_.garment_mask, mask);
    require_dims(in_.garment_mask, gw, gh, cfg_.garment_mask);
    if (!cfg_.agnostic_mask.empty()) {
      in_.agnostic = load_input(cfg_.agnostic_mask, mask);
      require_dims(*in_.agnostic, pw, ph, cfg_.agnostic_mask);
    }
    if (cfg_.person_iuv.given()) {
      in_.person_iuv = iuv(cfg_.person_iuv);
      require_dims(*in_.person_iuv, pw, ph, cfg_.person_iuv.part);
    }
    if (cfg_.garment_iuv.given()) {
      in_.garment_iuv = iuv(cfg_.garment_iuv);
      require_dims(*in_.garment_iuv, gw, gh, cfg_.garment_iuv.part);
    }
    if (!cfg_.body_mask.empty()) {
      in_.dense_body = load_input(cfg_.body_mask, mask);
      require_dims(in_.dense_body, pw, ph, cfg_.body_mask);
    } else {
      in_.dense_body = foreground(*in_.person_iuv);
    }

    std::vector<ImagePlane> garments{in_.garment};
    for (const auto& p : cfg_.garment_images) garments.push_back(load_input(p, image));
    in_.garment_composite = garments.size() == 1 ? resize_bilinear(in_.garment, pw, ph)
                                                 : concat_garments(garments, pw, ph);
    in_.garment_composite = quantize8(in_.garment_composite);
  }

  // -- morph ------------------------------------------------------------------

  void morph() {
    const GarmentCategory cat = GarmentCategory::of(cfg_.category);
    const PartBoxes src = group_keypoints_to_parts(in_.garment_kp, cat, cfg_.margin);
    const PartBoxes dst = group_keypoints_to_parts(in_.person_kp, cat, cfg_.margin);
    std::vector<PartWarp> parts;
    for (Part p : cat.parts) {
      const PartBox* a = src.find(p);
      const PartBox* b = dst.find(p);
      if (!a || !a->present || !b || !b->present) {
        warn("part " + to_string(p) + " has missing joints; skipped");
        continue;
      }
      HomographyFit fit;
      try {
        fit = estimate_homography(a->corners, b->corners);
      } catch (const DegenerateError& e) {
        warn("part " + to_string(p) + ": " + e.what() + "; skipped");
        continue;
      }
      if (!fit.converged) warn("part " + to_string(p) + ": homography fit did not converge");
      parts.push_back({p,
                       part_support_mask(in_.garment_parsing, in_.garment_mask, a->corners, p,
                                         in_.labels),
                       fit.h});
    }
    MorphResult m = warp_piecewise(in_.garment, parts, in_.person.width, in_.person.height);
    MorphResult gated = occlusion_gate(m, in_.person_parsing, in_.labels);
    for (const auto& w : m.warnings) warn(w);
    save_image(gated.warped, out("warped.png"));
    save_mask(gated.warped_mask, out("warped_mask.png"));
    record("warped", "warped.png");
    record("warped_mask", "warped_mask.png");
    morph_.warped = quantize8(gated.warped);
    morph_.warped_mask = gated.warped_mask;
  }

  void load_morph() {
    morph_.warped = to_rgb(load_image(out("warped.png")));
    morph_.warped_mask = load_mask(out("warped_mask.png"));
  }

  // -- infuse -----------------------------------------------------------------

  void infuse() {
    infused_ = quantize8(infuse_garment(in_.person, morph_));
    save_image(infused_, out("infused.png"));
    record("infused", "infused.png");
  }

  void load_infuse() { infused_ = to_rgb(load_image(out("infused.png"))); }

  // -- proxy ------------------------------------------------------------------

  void proxy() {
    const int pw = in_.person.width, ph = in_.person.height;
    ProxyRecipe r;
    r.source_garment = in_.source_garment;
    r.dense_body = in_.dense_body;
    r.warped_garment = morph_.warped_mask;
    if (in_.agnostic) {
      r.agnostic = *in_.agnostic;
    } else {
      const GarmentCategory cat = GarmentCategory::of(cfg_.category);
      r.agnostic = derive_agnostic_mask(in_.source_garment,
                                        group_keypoints_to_parts(in_.person_kp, cat, cfg_.margin));
      warn("no agnostic mask given; derived from the source garment and part boxes");
    }
    if (in_.person_iuv && in_.garment_iuv) {
      r.projected_garment =
          transfer_mask_via_iuv(*in_.garment_iuv, in_.garment_mask, *in_.person_iuv, cfg_.tau_uv);
    } else {
      r.projected_garment = MaskPlane(pw, ph);
      warn("IUV maps missing; projected garment mask is empty");
    }
    const ColorEstimate skin =
        estimate_skin_color(in_.person, in_.person_parsing, in_.source_garment, in_.labels);
    if (skin.fallback) warn("no exposed skin found; using the fallback skin color");
    const ColorEstimate cloth = estimate_garment_color(in_.garment, in_.garment_mask);
    if (cloth.fallback) warn("empty garment mask; using the fallback garment color");
    r.skin_color = skin.color;
    r.garment_color = cloth.color;

    const ProxyImage p = build_proxy(in_.person, r, cfg_.inpaint_sweeps);
    for (const auto& w : p.warnings) warn(w);
    save_image(p.image, out("proxy.png"));
    save_image(provenance_image(p), out("provenance.png"));
    save_mask(r.agnostic, out("agnostic_mask.png"));
    save_mask(r.projected_garment, out("projected_garment_mask.png"));
    record("proxy", "proxy.png");
    record("provenance", "provenance.png");
    record("agnostic_mask", "agnostic_mask.png");
    record("projected_garment_mask", "projected_garment_mask.png");
    proxy_ = quantize8(p.image);
    agnostic_ = r.agnostic;
  }

  void load_proxy() {
    proxy_ = to_rgb(load_image(out("proxy.png")));
    agnostic_ = load_mask(out("agnostic_mask.png"));
  }

  // -- encode -----------------------------------------------------------------

  Codec& codec() {
    if (codec_) return *codec_;
    if (cfg_.mode == BackboneMode::Toy) {
      codec_ = std::make_unique<ToyCodec>();
      return *codec_;
    }
    const std::string cmd = bridge_command_for(cfg_);
    client_ = std::make_unique<bridge::Client>(cmd);
    const bool dit = cfg_.mode == BackboneMode::BridgeDit;
    const bridge::HelloAck ack =
        client_->hello(dit ? bridge::Backbone::Dit : bridge::Backbone::Unet,
                       dit ? bridge::Fusion::CbsDit : bridge::Fusion::Cbs, in_.person.height,
                       in_.person.width);
    codec_ = std::make_unique<BridgeCodec>(*client_, ack.geometry);
    return *codec_;
  }

  void encode() {
    Codec& c = codec();
    z_proxy_ = c.encode(proxy_);
    if (!c.geometry().matches(z_proxy_)) {
      throw DimensionError("encoded proxy does not match the backend latent geometry");
    }
    save_tensor(z_proxy_, out("z_proxy.tryw"));
    record("z_proxy", "z_proxy.tryw");
    if (cfg_.mode == BackboneMode::Toy) {
      toy_target_ = c.encode(infused_);
      save_tensor(toy_target_, out("toy_target.tryw"));
      record("toy_target", "toy_target.tryw");
    }
  }

  void load_encode() {
    z_proxy_ = load_tensor(out("z_proxy.tryw"));
    if (cfg_.mode == BackboneMode::Toy) toy_target_ = load_tensor(out("toy_target.tryw"));
  }

  // -- sample -----------------------------------------------------------------

  void sample() {
    Codec& c = codec();
    const LatentGeometry g = c.geometry();
    std::unique_ptr<Denoiser> den;
    if (cfg_.mode == BackboneMode::Toy) {
      den = std::make_unique<ToyDenoiser>(std::vector<LatentTensor>{toy_target_},
                                          std::vector<double>{1.0}, cfg_.toy_variance);
    } else {
      den = std::make_unique<bridge::BridgeDenoiser>(*client_, g);
    }
    Conditioning cond;
    cond.infused = infused_;
    cond.agnostic = agnostic_;
    cond.prompt = cfg_.prompt;
    cond.garment = in_.garment_composite;
    cond.garment_mask = resize_mask(in_.garment_mask, in_.person.width, in_.person.height);

    const NoiseSchedule sched = NoiseSchedule::linear_ddim(cfg_.steps, cfg_.eta);
    const LatentTensor z_T = initial_noise(g, cfg_.seed);
    SamplerOptions so;
    so.codebook_size = cfg_.codebook_size;
    so.seed = cfg_.seed;
    const SampleResult res = tryw::sample(z_T, *den, cond, sched, z_proxy_, cfg_.guidance, so);
    for (const auto& w : res.warnings) warn(w);
    z0_ = res.z0;
    save_tensor(z0_, out("z0.tryw"));
    record("z0", "z0.tryw");
  }

  void load_sample() { z0_ = load_tensor(out("z0.tryw")); }

  // -- decode -----------------------------------------------------------------

  void decode() {
    const ImagePlane img = codec().decode(z0_);
    save_image(img, out("result.png"));
    record("result", "result.png");
  }

  const JobConfig& cfg_;
  RunOptions opts_;
  std::string config_fingerprint_;
  std::optional<StageReport> previous_;
  StageReport report_;
  StageRecord* current_ = nullptr;

  Inputs in_;
  MorphResult morph_;
  ImagePlane infused_;
  ImagePlane proxy_;
  MaskPlane agnostic_;
  LatentTensor z_proxy_;
  LatentTensor toy_target_;
  LatentTensor z0_;

  std::unique_ptr<bridge::Client> client_;
  std::unique_ptr<Codec> codec_;
};

}  // namespace

JobConfig JobConfig::from_document(const ConfigDocument& doc, const fs::path& base_dir) {
  for (const auto& [key, value] : doc.values()) {
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }
  JobConfig c;
  auto path = [&](const std::string& key, fs::path& dst) {
    if (auto v = doc.get_string(key)) dst = resolve(base_dir, *v);
  };
  path("inputs.person_image", c.person_image);
  path("inputs.garment_image", c.garment_image);
  if (auto list = doc.get_string_list("inputs.garment_images")) {
    for (const auto& p : *list) c.garment_images.push_back(resolve(base_dir, p));
  }
  path("inputs.person_keypoints", c.person_keypoints);
  path("inputs.garment_keypoints", c.garment_keypoints);
  path("inputs.person_parsing", c.person_parsing);
  path("inputs.garment_parsing", c.garment_parsing);
  path("inputs.person_garment_mask", c.person_garment_mask);
  path("inputs.garment_mask", c.garment_mask);
  path("inputs.body_mask", c.body_mask);
  path("inputs.agnostic_mask", c.agnostic_mask);
  path("inputs.person_iuv_part", c.person_iuv.part);
  path("inputs.person_iuv_u", c.person_iuv.u);
  path("inputs.person_iuv_v", c.person_iuv.v);
  path("inputs.garment_iuv_part", c.garment_iuv.part);
  path("inputs.garment_iuv_u", c.garment_iuv.u);
  path("inputs.garment_iuv_v", c.garment_iuv.v);
  path("inputs.label_table", c.label_table);
  path("run.output_dir", c.output_dir);
  if (c.output_dir == "out") c.output_dir = base_dir / "out";

  if (auto v = doc.get_string("run.category")) c.category = garment_kind_from_string(*v);
  if (auto v = doc.get_string("run.mode")) c.mode = backbone_mode_from_string(*v);
  if (auto v = doc.get_string("run.guidance")) c.guidance.kind = guidance_kind_from_string(*v);
  if (auto v = doc.get_int("run.m")) c.guidance.components = static_cast<int>(*v);
  if (auto v = doc.get_double("run.lowfreq_cutoff")) c.guidance.cutoff = *v;
  if (auto v = doc.get_string("run.pca_orientation")) {
    c.guidance.orientation = orientation_from_string(*v);
  }
  if (auto v = doc.get_int("run.steps")) c.steps = static_cast<int>(*v);
  if (auto v = doc.get_int("run.codebook_size")) c.codebook_size = static_cast<int>(*v);
  if (auto v = doc.get_int("run.seed")) {
    if (*v < 0) throw ValidationError("seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(*v);
  }
  if (auto v = doc.get_double("run.eta")) c.eta = *v;
  if (auto v = doc.get_string("run.prompt")) c.prompt = *v;
  if (auto v = doc.get_double("run.toy_variance")) c.toy_variance = *v;
  if (auto v = doc.get_string("run.bridge_command")) c.bridge_command = *v;
  if (auto v = doc.get_int("run.inpaint_sweeps")) c.inpaint_sweeps = static_cast<int>(*v);
  if (auto v = doc.get_double("geometry.margin")) c.margin = *v;
  if (auto v = doc.get_double("geometry.tau_uv")) c.tau_uv = *v;
  if (auto v = doc.get_double("geometry.mask_threshold")) c.mask_threshold = *v;
  return c;
}

JobConfig JobConfig::load(const fs::path& path) {
  const ConfigDocument doc = ConfigDocument::load(path);
  return from_document(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void JobConfig::validate() const {
  require_file(person_image, "person image");
  require_file(garment_image, "garment image");
  for (const auto& p : garment_images) require_file(p, "garment image");
  require_file(person_keypoints, "person keypoints");
  require_file(garment_keypoints, "garment keypoints");
  require_file(person_parsing, "person parsing");
  require_file(garment_parsing, "garment parsing");
  require_file(person_garment_mask, "person garment mask");
  require_file(garment_mask, "garment mask");
  optional_file(body_mask, "body mask");
  optional_file(agnostic_mask, "agnostic mask");
  optional_file(label_table, "label table");
  for (const auto* iuv : {&person_iuv, &garment_iuv}) {
    if (iuv->given() || !iuv->u.empty() || !iuv->v.empty()) {
      require_file(iuv->part, "IUV part map");
      require_file(iuv->u, "IUV u map");
      require_file(iuv->v, "IUV v map");
    }
  }
  if (body_mask.empty() && !person_iuv.given()) {
    throw ValidationError("either a body mask or a person IUV map is required");
  }
  if (steps < 1) throw ValidationError("steps must be >= 1");
  if (codebook_size < 1) throw ValidationError("codebook_size must be >= 1");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("eta must lie in [0,1]");
  if (!(margin >= 0.0)) throw ValidationError("margin must be >= 0");
  if (!(tau_uv > 0.0)) throw ValidationError("tau_uv must be > 0");
  if (!(mask_threshold >= 0.0 && mask_threshold <= 1.0)) {
    throw ValidationError("mask_threshold must lie in [0,1]");
  }
  if (inpaint_sweeps < 0) throw ValidationError("inpaint_sweeps must be >= 0");
  if (!(toy_variance >= 0.0)) throw ValidationError("toy_variance must be >= 0");
  try {
    // Bridge latent channels are only known after the handshake; the sampler
    // re-checks m against them.
    guidance.validate(mode == BackboneMode::Toy ? kToyGeometry.channels
                                                : std::numeric_limits<int>::max());
  } catch (const Error& e) {
    throw ValidationError(e.what());
  }
  if (mode != BackboneMode::Toy && bridge_command_for(*this).empty()) {
    throw ValidationError(std::string("bridge modes need run.bridge_command or $") +
                          bridge::kBridgeCommandEnv);
  }
}

nlohmann::json JobConfig::to_json() const {
  auto paths = [](const std::vector<fs::path>& ps) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& p : ps) a.push_back(path_str(p));
    return a;
  };
  const char* orient =
      guidance.orientation == PcaOrientation::ChannelFeatures ? "channel" : "spatial";
  return {
      {"person_image", path_str(person_image)},
      {"garment_image", path_str(garment_image)},
      {"garment_images", paths(garment_images)},
      {"person_keypoints", path_str(person_keypoints)},
      {"garment_keypoints", path_str(garment_keypoints)},
      {"person_parsing", path_str(person_parsing)},
      {"garment_parsing", path_str(garment_parsing)},
      {"person_garment_mask", path_str(person_garment_mask)},
      {"garment_mask", path_str(garment_mask)},
      {"body_mask", path_str(body_mask)},
      {"agnostic_mask", path_str(agnostic_mask)},
      {"person_iuv", {path_str(person_iuv.part), path_str(person_iuv.u), path_str(person_iuv.v)}},
      {"garment_iuv",
       {path_str(garment_iuv.part), path_str(garment_iuv.u), path_str(garment_iuv.v)}},
      {"label_table", path_str(label_table)},
      {"output_dir", path_str(output_dir)},
      {"category", to_string(category)},
      {"mode", to_string(mode)},
      {"guidance", to_string(guidance.kind)},
      {"m", guidance.components},
      {"lowfreq_cutoff", guidance.cutoff},
      {"pca_orientation", orient},
      {"steps", steps},
      {"codebook_size", codebook_size},
      {"seed", seed},
      {"eta", eta},
      {"margin", margin},
      {"tau_uv", tau_uv},
      {"mask_threshold", mask_threshold},
      {"inpaint_sweeps", inpaint_sweeps},
      {"toy_variance", toy_variance},
      {"prompt", prompt},
      {"bridge_command", bridge_command},
  };
}

ImagePlane infuse_garment(const ImagePlane& person, const MorphResult& morph) {
  const ImagePlane p = to_rgb(person);
  if (!morph.warped_mask.same_dims(p.width, p.height)) {
    throw DimensionError("infuse_garment: warped mask does not match the person image");
  }
  if (morph.warped_mask.count() == 0) return p;
  const ImagePlane w = to_rgb(morph.warped);
  if (!w.same_dims(p.width, p.height)) {
    throw DimensionError("infuse_garment: warped garment does not match the person image");
  }
  ImagePlane out = p;
  for (std::size_t i = 0; i < p.pixel_count(); ++i) {
    if (!morph.warped_mask.data[i]) continue;
    for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = w.data[i * 3 + c];
  }
  return out;
}

ImagePlane concat_garments(const std::vector<ImagePlane>& garments, int width, int height) {
  if (garments.empty()) throw DimensionError("concat_garments: no garments");
  if (width <= 0 || height <= 0) throw DimensionError("concat_garments: empty target");
  int common_h = 0;
  for (const auto& g : garments) {
    if (g.width <= 0 || g.height <= 0) throw DimensionError("concat_garments: empty garment");
    common_h = std::max(common_h, g.height);
  }
  std::vector<ImagePlane> parts;
  int total_w = 0;
  for (const auto& g : garments) {
    const ImagePlane rgb = to_rgb(g);
    if (rgb.height == common_h) {
      parts.push_back(rgb);
    } else {
      const int w = std::max(
          1, static_cast<int>(std::lround(static_cast<double>(rgb.width) * common_h / rgb.height)));
      parts.push_back(resize_bilinear(rgb, w, common_h));
    }
    total_w += parts.back().width;
  }
  ImagePlane strip(total_w, common_h, 3);
  int x0 = 0;
  for (const auto& p : parts) {
    for (int y = 0; y < common_h; ++y) {
      for (int x = 0; x < p.width; ++x) {
        for (int c = 0; c < 3; ++c) strip.at(x0 + x, y, c) = p.at(x, y, c);
      }
    }
    x0 += p.width;
  }
  return resize_bilinear(strip, width, height);
}

const StageRecord* StageReport::find(const std::string& stage) const {
  for (const auto& s : stages) {
    if (s.name == stage) return &s;
  }
  return nullptr;
}

std::string StageReport::artifact_hash(const std::string& name) const {
  for (const auto& s : stages) {
    for (const auto& a : s.artifacts) {
      if (a.name == name) return a.sha256;
    }
  }
  return {};
}

std::vector<std::string> StageReport::warnings() const {
  std::vector<std::string> out;
  for (const auto& s : stages) {
    for (const auto& w : s.warnings) out.push_back(s.name + ": " + w);
  }
  return out;
}

nlohmann::json StageReport::to_json() const {
  nlohmann::json j = {{"stages", nlohmann::json::array()}};
  for (const auto& s : stages) {
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& a : s.artifacts) {
      arts.push_back({{"name", a.name}, {"path", path_str(a.path)}, {"sha256", a.sha256}});
    }
    j["stages"].push_back({{"name", s.name},
                           {"seconds", s.seconds},
                           {"resumed", s.resumed},
                           {"fingerprint", s.fingerprint},
                           {"warnings", s.warnings},
                           {"artifacts", arts}});
  }
  return j;
}

StageReport StageReport::from_json(const nlohmann::json& j) {
  StageReport r;
  for (const auto& s : j.at("stages")) {
    StageRecord rec;
    rec.name = s.at("name").get<std::string>();
    rec.seconds = s.value("seconds", 0.0);
    rec.resumed = s.value("resumed", false);
    rec.fingerprint = s.value("fingerprint", std::string());
    rec.warnings = s.value("warnings", std::vector<std::string>{});
    for (const auto& a : s.at("artifacts")) {
      rec.artifacts.push_back({a.at("name").get<std::string>(), a.at("path").get<std::string>(),
                               a.at("sha256").get<std::string>()});
    }
    r.stages.push_back(std::move(rec));
  }
  return r;
}

StageReport run_tryon(const JobConfig& cfg, const RunOptions& opts) {
  if (!opts.stop_after.empty() &&
      std::find(kStages.begin(), kStages.end(), opts.stop_after) == kStages.end()) {
    throw ValidationError("unknown stage '" + opts.stop_after + "'");
  }
  Runner runner(cfg, opts);
  return runner.run();
}

}  // namespace tryw
