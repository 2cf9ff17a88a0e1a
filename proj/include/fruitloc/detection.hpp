#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>

#include "fruitloc/geometry.hpp"

namespace fruitloc::detect {

enum class FruitKind { kApple, kOrange, kOther };

// Class of a detection. Apples and oranges are the fruit classes scored by the
// evaluation; anything else keeps the backend's raw name and is ignored there.
class FruitLabel {
 public:
  static FruitLabel apple() { return FruitLabel(FruitKind::kApple, "apple"); }
  static FruitLabel orange() { return FruitLabel(FruitKind::kOrange, "orange"); }
  static FruitLabel other(std::string name) {
    return FruitLabel(FruitKind::kOther, std::move(name));
  }
  // "apple" and "orange" map to the fruit classes, everything else to other.
  static FruitLabel from_name(std::string_view name);

  FruitKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  bool is_fruit() const { return kind_ != FruitKind::kOther; }

  friend bool operator==(const FruitLabel&, const FruitLabel&) = default;
  friend auto operator<=>(const FruitLabel&, const FruitLabel&) = default;

 private:
  FruitLabel(FruitKind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  FruitKind kind_;
  std::string name_;
};

// A labelled box. The picking point is always the box midpoint.
class Detection {
 public:
  // Throws kInvalidArgument if confidence is outside [0, 1].
  Detection(FruitLabel label, double confidence, geometry::BoundingBox box);

  const FruitLabel& label() const { return label_; }
  double confidence() const { return confidence_; }
  const geometry::BoundingBox& box() const { return box_; }
  const geometry::PixelPoint& picking_point() const { return picking_point_; }

  friend bool operator==(const Detection&, const Detection&) = default;

 private:
  FruitLabel label_;
  double confidence_;
  geometry::BoundingBox box_;
  geometry::PixelPoint picking_point_;
};

// Backend class name -> fruit label. Names without an entry become
// other(name), so the mapping is total.
class ClassMap {
 public:
  // apple -> apple, orange -> orange.
  ClassMap();
  explicit ClassMap(std::map<std::string, FruitKind> entries);

  FruitLabel map(std::string_view backend_name) const;

  // {"<backend name>": "apple" | "orange" | "other", ...}
  static ClassMap from_json(const nlohmann::json& doc);

 private:
  std::map<std::string, FruitKind, std::less<>> entries_;
};

}  // namespace fruitloc::detect
