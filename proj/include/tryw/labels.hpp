#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tryw {

enum class Part {
  Torso,
  LeftUpperArm,
  RightUpperArm,
  LeftLowerArm,
  RightLowerArm,
  HipAbove,
  LeftUpperLeg,
  RightUpperLeg,
  LeftLowerLeg,
  RightLowerLeg,
  DressUpper,
  DressLower,
};

std::string to_string(Part p);
Part part_from_string(const std::string& name);

enum class GarmentKind { Upper, Lower, Dress };

std::string to_string(GarmentKind k);
GarmentKind garment_kind_from_string(const std::string& name);

// Garment kind plus the ordered part decomposition used for morphing.
// The order is also the compositing order (later parts overwrite).
struct GarmentCategory {
  GarmentKind kind = GarmentKind::Upper;
  std::vector<Part> parts;

  static GarmentCategory of(GarmentKind kind);
};

// Maps parser label ids to parts. Parsers differ, so this is data, not code.
//
// Default vocabulary (18 labels):
//   0 background  1 head  2 hair  3 neck  4 torso
//   5 left upper arm  6 right upper arm  7 left lower arm  8 right lower arm
//   9 left hand  10 right hand  11 pelvis
//   12 left upper leg  13 right upper leg  14 left lower leg  15 right lower leg
//   16 left foot  17 right foot
struct LabelTable {
  int vocabulary_size = 0;
  std::map<Part, std::vector<std::uint8_t>> part_labels;
  std::vector<std::uint8_t> skin_labels;

  static LabelTable defaults();

  // {"vocabulary_size": N, "parts": {"torso": [4], ...}, "skin": [1, 3, ...]}
  static LabelTable from_json(const std::string& text);
  static LabelTable load(const std::filesystem::path& path);

  bool part_has(Part part, std::uint8_t label) const;
  bool is_skin(std::uint8_t label) const;
};

}  // namespace tryw
