#include "fruitloc/detection.hpp"

#include <cmath>

#include "fruitloc/error.hpp"

namespace fruitloc::detect {

FruitLabel FruitLabel::from_name(std::string_view name) {
  if (name == "apple") return apple();
  if (name == "orange") return orange();
  return other(std::string(name));
}

Detection::Detection(FruitLabel label, double confidence, geometry::BoundingBox box)
    : label_(std::move(label)),
      confidence_(confidence),
      box_(box),
      picking_point_(geometry::bbox_midpoint(box)) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "confidence must lie in [0, 1], got " + std::to_string(confidence));
  }
}

ClassMap::ClassMap() : entries_{{"apple", FruitKind::kApple}, {"orange", FruitKind::kOrange}} {}

ClassMap::ClassMap(std::map<std::string, FruitKind> entries)
    : entries_(entries.begin(), entries.end()) {}

FruitLabel ClassMap::map(std::string_view backend_name) const {
  const auto it = entries_.find(backend_name);
  if (it == entries_.end()) return FruitLabel::other(std::string(backend_name));
  switch (it->second) {
    case FruitKind::kApple:
      return FruitLabel::apple();
    case FruitKind::kOrange:
      return FruitLabel::orange();
    case FruitKind::kOther:
      break;
  }
  return FruitLabel::other(std::string(backend_name));
}

ClassMap ClassMap::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "class map must be a JSON object");
  }
  std::map<std::string, FruitKind> entries;
  for (const auto& [name, value] : doc.items()) {
    if (!value.is_string()) {
      throw Error(ErrorCode::kInvalidArgument, "class map values must be strings");
    }
    const auto target = value.get<std::string>();
    if (target == "apple") {
      entries[name] = FruitKind::kApple;
    } else if (target == "orange") {
      entries[name] = FruitKind::kOrange;
    } else if (target == "other") {
      entries[name] = FruitKind::kOther;
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown class map target '" + target + "'");
    }
  }
  return ClassMap(std::move(entries));
}

}  // namespace fruitloc::detect
