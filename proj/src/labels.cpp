#include "tryw/labels.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <utility>

#include "tryw/error.hpp"

namespace tryw {

namespace {

constexpr std::array<std::pair<Part, const char*>, 12> kPartNames = {{
    {Part::Torso, "torso"},
    {Part::LeftUpperArm, "left_upper_arm"},
    {Part::RightUpperArm, "right_upper_arm"},
    {Part::LeftLowerArm, "left_lower_arm"},
    {Part::RightLowerArm, "right_lower_arm"},
    {Part::HipAbove, "hip_above"},
    {Part::LeftUpperLeg, "left_upper_leg"},
    {Part::RightUpperLeg, "right_upper_leg"},
    {Part::LeftLowerLeg, "left_lower_leg"},
    {Part::RightLowerLeg, "right_lower_leg"},
    {Part::DressUpper, "dress_upper"},
    {Part::DressLower, "dress_lower"},
}};

bool contains(const std::vector<std::uint8_t>& v, std::uint8_t x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

std::string to_string(Part p) {
  for (const auto& [part, name] : kPartNames) {
    if (part == p) return name;
  }
  return "unknown";
}

Part part_from_string(const std::string& name) {
  for (const auto& [part, n] : kPartNames) {
    if (name == n) return part;
  }
  throw FormatError("unknown part name: " + name);
}

std::string to_string(GarmentKind k) {
  switch (k) {
    case GarmentKind::Upper: return "upper";
    case GarmentKind::Lower: return "lower";
    case GarmentKind::Dress: return "dress";
  }
  return "unknown";
}

GarmentKind garment_kind_from_string(const std::string& name) {
  if (name == "upper") return GarmentKind::Upper;
  if (name == "lower") return GarmentKind::Lower;
  if (name == "dress") return GarmentKind::Dress;
  throw FormatError("unknown garment category: " + name);
}

GarmentCategory GarmentCategory::of(GarmentKind kind) {
  switch (kind) {
    case GarmentKind::Upper:
      return {kind,
              {Part::Torso, Part::LeftUpperArm, Part::RightUpperArm, Part::LeftLowerArm,
               Part::RightLowerArm}};
    case GarmentKind::Lower:
      return {kind,
              {Part::HipAbove, Part::LeftUpperLeg, Part::RightUpperLeg, Part::LeftLowerLeg,
               Part::RightLowerLeg}};
    case GarmentKind::Dress:
      return {kind, {Part::DressUpper, Part::DressLower}};
  }
  return {};
}

LabelTable LabelTable::defaults() {
  LabelTable t;
  t.vocabulary_size = 18;
  t.part_labels = {
      {Part::Torso, {4}},
      {Part::LeftUpperArm, {5}},
      {Part::RightUpperArm, {6}},
      {Part::LeftLowerArm, {7}},
      {Part::RightLowerArm, {8}},
      {Part::HipAbove, {11}},
      {Part::LeftUpperLeg, {12}},
      {Part::RightUpperLeg, {13}},
      {Part::LeftLowerLeg, {14}},
      {Part::RightLowerLeg, {15}},
      {Part::DressUpper, {4}},
      {Part::DressLower, {11, 12, 13, 14, 15}},
  };
  t.skin_labels = {1, 3, 5, 6, 7, 8, 9, 10, 12, 13, 14, 15};
  return t;
}

LabelTable LabelTable::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed label table: ") + e.what());
  }
  LabelTable t;
  try {
    t.vocabulary_size = doc.at("vocabulary_size").get<int>();
    for (const auto& [name, labels] : doc.at("parts").items()) {
      t.part_labels[part_from_string(name)] = labels.get<std::vector<std::uint8_t>>();
    }
    t.skin_labels = doc.at("skin").get<std::vector<std::uint8_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("label table: ") + e.what());
  }
  auto in_vocab = [&](std::uint8_t l) { return l < t.vocabulary_size; };
  for (const auto& [part, labels] : t.part_labels) {
    if (!std::all_of(labels.begin(), labels.end(), in_vocab)) {
      throw FormatError("label table: label outside vocabulary for part " + to_string(part));
    }
  }
  if (!std::all_of(t.skin_labels.begin(), t.skin_labels.end(), in_vocab)) {
    throw FormatError("label table: skin label outside vocabulary");
  }
  return t;
}

LabelTable LabelTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open label table: " + path.string());
  return from_json(std::string(std::istreambuf_iterator<char>(in), {}));
}

bool LabelTable::part_has(Part part, std::uint8_t label) const {
  const auto it = part_labels.find(part);
  return it != part_labels.end() && contains(it->second, label);
}

bool LabelTable::is_skin(std::uint8_t label) const { return contains(skin_labels, label); }

}  // namespace tryw
