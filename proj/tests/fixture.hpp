#pragma once

// Synthetic try-on job: a stick-figure person in a blue shirt and a second
// figure wearing a striped red shirt, with matching parsing maps, masks, IUV
// planes and keypoints, written to disk alongside a config file.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "tryw/ingest.hpp"

namespace fixture {

namespace fs = std::filesystem;
using tryw::Joint;

constexpr int kWidth = 96;
constexpr int kHeight = 128;

struct Seg {
  Joint a, b;
  std::uint8_t label;
  double radius;
};

inline tryw::KeypointSet person_skeleton(double sx = 1.0, double dx = 0.0, double dy = 0.0,
                                         double arm_spread = 0.0) {
  tryw::KeypointSet kp;
  auto set = [&](Joint j, double x, double y) {
    kp[j] = {48.0 + (x - 48.0) * sx + dx, 10.0 + (y - 10.0) * sx + dy, 0.9};
  };
  set(Joint::Nose, 48, 14);
  set(Joint::Neck, 48, 28);
  set(Joint::RShoulder, 36, 30);
  set(Joint::RElbow, 30 - arm_spread, 52);
  set(Joint::RWrist, 27 - 2 * arm_spread, 72);
  set(Joint::LShoulder, 60, 30);
  set(Joint::LElbow, 66 + arm_spread, 52);
  set(Joint::LWrist, 69 + 2 * arm_spread, 72);
  set(Joint::RHip, 41, 70);
  set(Joint::RKnee, 40, 96);
  set(Joint::RAnkle, 40, 119);
  set(Joint::LHip, 55, 70);
  set(Joint::LKnee, 56, 96);
  set(Joint::LAnkle, 56, 119);
  set(Joint::REye, 45, 11);
  set(Joint::LEye, 51, 11);
  set(Joint::REar, 42, 13);
  set(Joint::LEar, 54, 13);
  return kp;
}

inline double seg_dist(double px, double py, double ax, double ay, double bx, double by,
                       double* t_out = nullptr) {
  const double vx = bx - ax, vy = by - ay;
  double t = ((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy);
  t = std::clamp(t, 0.0, 1.0);
  if (t_out) *t_out = t;
  return std::hypot(px - ax - t * vx, py - ay - t * vy);
}

struct Body {
  tryw::ParsingPlane parsing{kWidth, kHeight};
  tryw::IUVPlane iuv{kWidth, kHeight};
};

// Rasterizes the label map and a body-relative (u,v) parameterization.
inline Body rasterize(const tryw::KeypointSet& kp) {
  Body b;
  const Seg segs[] = {
      {Joint::RHip, Joint::RKnee, 13, 5.5},      {Joint::LHip, Joint::LKnee, 12, 5.5},
      {Joint::RKnee, Joint::RAnkle, 15, 4.5},    {Joint::LKnee, Joint::LAnkle, 14, 4.5},
      {Joint::RShoulder, Joint::RElbow, 6, 4.5}, {Joint::LShoulder, Joint::LElbow, 5, 4.5},
      {Joint::RElbow, Joint::RWrist, 8, 3.5},    {Joint::LElbow, Joint::LWrist, 7, 3.5},
      {Joint::Neck, Joint::Nose, 3, 3.0},
  };
  const auto p = [&](Joint j) { return std::array<double, 2>{kp[j].x, kp[j].y}; };
  const auto rs = p(Joint::RShoulder), ls = p(Joint::LShoulder);
  const auto rh = p(Joint::RHip), lh = p(Joint::LHip);
  for (int y = 0; y < kHeight; ++y) {
    for (int x = 0; x < kWidth; ++x) {
      std::uint8_t label = 0;
      double u = 0, v = 0;
      // Torso: between the shoulder line and the hip line, inside the side edges.
      const double ty = (y - rs[1]) / (rh[1] - rs[1]);
      if (ty >= 0 && ty <= 1) {
        const double left = rs[0] + ty * (rh[0] - rs[0]) - 2.0;
        const double right = ls[0] + ty * (lh[0] - ls[0]) + 2.0;
        if (x >= left && x <= right) {
          label = 4;
          u = (x - left) / (right - left);
          v = ty;
        }
      }
      // Pelvis band just below the hips.
      if (y > rh[1] && y <= rh[1] + 6 && x >= rh[0] - 5 && x <= lh[0] + 5) {
        label = 11;
        u = (x - rh[0] + 5) / (lh[0] - rh[0] + 10);
        v = (y - rh[1]) / 6.0;
      }
      for (const auto& s : segs) {
        double t = 0;
        const double d = seg_dist(x, y, kp[s.a].x, kp[s.a].y, kp[s.b].x, kp[s.b].y, &t);
        if (d <= s.radius) {
          label = s.label;
          u = t;
          v = 0.5 + 0.5 * d / s.radius;
        }
      }
      const double hd = std::hypot(x - kp[Joint::Nose].x, y - kp[Joint::Nose].y);
      if (hd <= 8.0) {
        label = 1;
        u = 0.5 + (x - kp[Joint::Nose].x) / 16.0;
        v = 0.5 + (y - kp[Joint::Nose].y) / 16.0;
      }
      const std::size_t i = static_cast<std::size_t>(y) * kWidth + x;
      b.parsing.labels[i] = label;
      b.iuv.part_index[i] = label;
      b.iuv.u[i] = label ? static_cast<float>(std::clamp(u, 0.0, 1.0)) : 0.0f;
      b.iuv.v[i] = label ? static_cast<float>(std::clamp(v, 0.0, 1.0)) : 0.0f;
    }
  }
  return b;
}

inline bool is_shirt(std::uint8_t label) { return label == 4 || label == 5 || label == 6; }

inline tryw::ImagePlane paint(const Body& body, bool striped_red) {
  tryw::ImagePlane img(kWidth, kHeight, 3);
  for (int y = 0; y < kHeight; ++y) {
    for (int x = 0; x < kWidth; ++x) {
      const std::uint8_t l = body.parsing.at(x, y);
      float c[3] = {0.85f - 0.002f * y, 0.88f - 0.001f * x, 0.80f};
      if (l != 0) {
        c[0] = 0.80f;
        c[1] = 0.62f;
        c[2] = 0.52f;
      }
      if (l >= 11) {
        c[0] = c[1] = c[2] = 0.35f;
      }
      if (is_shirt(l)) {
        if (striped_red) {
          const bool stripe = (y / 4) % 2 == 0;
          c[0] = stripe ? 0.85f : 0.95f;
          c[1] = stripe ? 0.10f : 0.85f;
          c[2] = stripe ? 0.12f : 0.85f;
        } else {
          c[0] = 0.10f;
          c[1] = 0.22f;
          c[2] = 0.70f;
        }
      }
      for (int k = 0; k < 3; ++k) img.at(x, y, k) = c[k];
    }
  }
  return img;
}

inline tryw::MaskPlane shirt_mask(const Body& body) {
  tryw::MaskPlane m(kWidth, kHeight);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = is_shirt(body.parsing.labels[i]);
  return m;
}

struct Job {
  fs::path dir;
  fs::path config;
};

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream o(p);
  o << s;
}

// Writes every input plus `job.toml`; `extra` is appended to the [run] section.
inline Job write_job(const fs::path& dir, const std::string& extra = "") {
  fs::create_directories(dir);
  const auto person_kp = person_skeleton();
  const auto garment_kp = person_skeleton(0.92, 3.0, 5.0, 3.0);
  const Body person = rasterize(person_kp);
  const Body garment = rasterize(garment_kp);

  tryw::save_image(paint(person, false), dir / "person.png");
  tryw::save_image(paint(garment, true), dir / "garment.png");
  tryw::save_keypoints(person_kp, dir / "person_keypoints.json");
  tryw::save_keypoints(garment_kp, dir / "garment_keypoints.json");
  tryw::save_parsing(person.parsing, dir / "person_parsing.png");
  tryw::save_parsing(garment.parsing, dir / "garment_parsing.png");
  tryw::save_mask(shirt_mask(person), dir / "person_garment_mask.png");
  tryw::save_mask(shirt_mask(garment), dir / "garment_mask.png");
  tryw::save_iuv(person.iuv, dir / "person_iuv_i.png", dir / "person_iuv_u.png",
                 dir / "person_iuv_v.png");
  tryw::save_iuv(garment.iuv, dir / "garment_iuv_i.png", dir / "garment_iuv_u.png",
                 dir / "garment_iuv_v.png");

  std::string cfg =
      "# synthetic job\n"
      "[inputs]\n"
      "person_image = \"person.png\"\n"
      "garment_image = \"garment.png\"\n"
      "person_keypoints = \"person_keypoints.json\"\n"
      "garment_keypoints = \"garment_keypoints.json\"\n"
      "person_parsing = \"person_parsing.png\"\n"
      "garment_parsing = \"garment_parsing.png\"\n"
      "person_garment_mask = \"person_garment_mask.png\"\n"
      "garment_mask = \"garment_mask.png\"\n"
      "person_iuv_part = \"person_iuv_i.png\"\n"
      "person_iuv_u = \"person_iuv_u.png\"\n"
      "person_iuv_v = \"person_iuv_v.png\"\n"
      "garment_iuv_part = \"garment_iuv_i.png\"\n"
      "garment_iuv_u = \"garment_iuv_u.png\"\n"
      "garment_iuv_v = \"garment_iuv_v.png\"\n"
      "\n[run]\n"
      "category = \"upper\"\n"
      "mode = \"toy\"\n"
      "steps = 10\n"
      "seed = 7\n"
      "toy_variance = 0.05\n"
      "inpaint_sweeps = 200\n"
      "prompt = \"a person wearing a striped red shirt\"\n" +
      extra;
  write_text(dir / "job.toml", cfg);
  return {dir, dir / "job.toml"};
}

}  // namespace fixture
