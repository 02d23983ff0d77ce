#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "tryw/bridge.hpp"
#include "tryw/config.hpp"
#include "tryw/geometry.hpp"
#include "tryw/ingest.hpp"
#include "tryw/labels.hpp"
#include "tryw/ppg.hpp"

namespace tryw {

enum class BackboneMode { Toy, BridgeUnet, BridgeDit };

std::string to_string(BackboneMode m);
BackboneMode backbone_mode_from_string(const std::string& name);

// Latent geometry of the toy backend.
inline constexpr LatentGeometry kToyGeometry{3, 64, 48};

struct IuvPaths {
  std::filesystem::path part, u, v;

  bool given() const { return !part.empty(); }
};

// One try-on job. Relative paths in a config file resolve against the file's
// directory. Optional inputs are empty paths.
struct JobConfig {
  std::filesystem::path person_image;
  std::filesystem::path garment_image;                // the garment-wearing image I_o
  std::vector<std::filesystem::path> garment_images;  // extra garments, concatenated
  std::filesystem::path person_keypoints;
  std::filesystem::path garment_keypoints;
  std::filesystem::path person_parsing;
  std::filesystem::path garment_parsing;
  std::filesystem::path person_garment_mask;  // M_s
  std::filesystem::path garment_mask;         // M_o
  std::filesystem::path body_mask;            // M_d; defaults to the person IUV foreground
  std::filesystem::path agnostic_mask;        // M_p; derived when absent
  IuvPaths person_iuv;
  IuvPaths garment_iuv;
  std::filesystem::path label_table;
  std::filesystem::path output_dir = "out";

  GarmentKind category = GarmentKind::Upper;
  BackboneMode mode = BackboneMode::Toy;
  GuidanceMode guidance = GuidanceMode::principal(3);
  int steps = 50;
  int codebook_size = 64;
  std::uint64_t seed = 0;
  double eta = 1.0;
  double margin = 0.3;
  double tau_uv = 0.02;
  double mask_threshold = 0.5;
  int inpaint_sweeps = 500;
  double toy_variance = 0.0;
  std::string prompt;
  std::string bridge_command;  // falls back to $TRYW_BRIDGE_CMD

  static JobConfig from_document(const ConfigDocument& doc,
                                 const std::filesystem::path& base_dir);
  static JobConfig load(const std::filesystem::path& path);

  // Throws ValidationError naming the first problem (missing file, T < 1, ...).
  void validate() const;

  // Canonical JSON of every field; used to fingerprint stages.
  nlohmann::json to_json() const;
};

// Person pixels replaced by the morphed garment where warped_mask is set.
ImagePlane infuse_garment(const ImagePlane& person, const MorphResult& morph);

// Height-normalizes every garment to the tallest one, concatenates them left
// to right and resizes the strip to the target size (all bilinear).
ImagePlane concat_garments(const std::vector<ImagePlane>& garments, int width, int height);

struct Artifact {
  std::string name;
  std::filesystem::path path;
  std::string sha256;
};

struct StageRecord {
  std::string name;
  double seconds = 0.0;
  bool resumed = false;
  std::string fingerprint;  // hash of the config and upstream artifacts
  std::vector<std::string> warnings;
  std::vector<Artifact> artifacts;
};

struct StageReport {
  std::vector<StageRecord> stages;

  const StageRecord* find(const std::string& stage) const;
  // Hash of an artifact by name across all stages, or empty.
  std::string artifact_hash(const std::string& name) const;
  std::vector<std::string> warnings() const;

  nlohmann::json to_json() const;
  static StageReport from_json(const nlohmann::json& j);
};

// Stages in execution order.
inline const std::vector<std::string> kStages = {"validate", "morph",  "infuse", "proxy",
                                                 "encode",   "sample", "decode"};

struct RunOptions {
  bool resume = false;
  std::string stop_after;  // empty runs every stage
};

// Runs the stages in order, writing artifacts and report.json to the output
// directory. Stage failures are rethrown as StageError with the stage tag;
// configuration problems surface as ValidationError.
StageReport run_tryon(const JobConfig& cfg, const RunOptions& opts = {});

}  // namespace tryw
