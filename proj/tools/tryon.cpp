#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tryw/error.hpp"
#include "tryw/image_ops.hpp"
#include "tryw/ingest.hpp"
#include "tryw/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

struct JobFlags {
  std::string config;
  std::optional<long long> seed;
  std::optional<std::string> mode;
  std::optional<std::string> guidance;
  std::optional<int> m;
  std::optional<int> steps;
  std::optional<std::string> out;
  bool resume = false;
  std::string stage;
};

void add_job_flags(CLI::App* cmd, JobFlags& f) {
  cmd->add_option("--config", f.config, "Job config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Override run.seed");
  cmd->add_option("--mode", f.mode, "Override run.mode")
      ->check(CLI::IsMember({"toy", "bridge-unet", "bridge-dit"}));
  cmd->add_option("--guidance", f.guidance, "Override run.guidance")
      ->check(CLI::IsMember({"principal", "full", "lowfreq", "none"}));
  cmd->add_option("--m", f.m, "Override the number of principal components");
  cmd->add_option("--steps", f.steps, "Override run.steps");
  cmd->add_option("--out", f.out, "Override run.output_dir");
  cmd->add_flag("--resume", f.resume, "Skip stages whose artifacts still hash-match");
  cmd->add_option("--stage", f.stage, "'resume' is an alias for --resume")
      ->check(CLI::IsMember({"resume", "fresh"}));
}

tryw::JobConfig build_config(const JobFlags& f) {
  tryw::JobConfig cfg = tryw::JobConfig::load(f.config);
  if (f.seed) {
    if (*f.seed < 0) throw tryw::ValidationError("--seed must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(*f.seed);
  }
  if (f.mode) cfg.mode = tryw::backbone_mode_from_string(*f.mode);
  if (f.guidance) cfg.guidance.kind = tryw::guidance_kind_from_string(*f.guidance);
  if (f.m) cfg.guidance.components = *f.m;
  if (f.steps) cfg.steps = *f.steps;
  if (f.out) cfg.output_dir = *f.out;
  return cfg;
}

void print_report(const tryw::StageReport& report) {
  for (const auto& s : report.stages) {
    std::printf("%-9s %8.3fs%s\n", s.name.c_str(), s.seconds, s.resumed ? "  (resumed)" : "");
    for (const auto& a : s.artifacts) {
      std::printf("          %-24s %s\n", a.path.string().c_str(), a.sha256.substr(0, 16).c_str());
    }
  }
  for (const auto& w : report.warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int run_job(const JobFlags& f, const std::string& stop_after) {
  const tryw::JobConfig cfg = build_config(f);
  tryw::RunOptions opts;
  opts.resume = f.resume || f.stage == "resume";
  opts.stop_after = stop_after;
  print_report(tryw::run_tryon(cfg, opts));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-free virtual try-on"};
  app.require_subcommand(1);

  JobFlags run_flags, morph_flags, proxy_flags;
  auto* run = app.add_subcommand("run", "Run every stage");
  add_job_flags(run, run_flags);
  auto* morph = app.add_subcommand("morph", "Run up to garment morphing");
  add_job_flags(morph, morph_flags);
  auto* proxy = app.add_subcommand("proxy", "Run up to the proxy image");
  add_job_flags(proxy, proxy_flags);

  std::vector<std::string> garments;
  std::string concat_out;
  int concat_w = 0, concat_h = 0;
  auto* concat = app.add_subcommand("concat", "Concatenate garment images side by side");
  concat->add_option("garments", garments, "Garment PNGs, left to right")
      ->required()
      ->check(CLI::ExistingFile);
  concat->add_option("--out", concat_out, "Output PNG")->required();
  concat->add_option("--width", concat_w, "Output width")->required()->check(CLI::PositiveNumber);
  concat->add_option("--height", concat_h, "Output height")->required()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (run->parsed()) return run_job(run_flags, "");
    if (morph->parsed()) return run_job(morph_flags, "morph");
    if (proxy->parsed()) return run_job(proxy_flags, "proxy");
    if (concat->parsed()) {
      std::vector<tryw::ImagePlane> imgs;
      for (const auto& g : garments) imgs.push_back(tryw::load_image(g));
      tryw::save_image(tryw::concat_garments(imgs, concat_w, concat_h), concat_out);
      return kExitOk;
    }
  } catch (const tryw::ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const tryw::FormatError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "stage failure: %s\n", e.what());
    return kExitStage;
  }
  return kExitOk;
}
