#include "fruitloc/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <string>

#include "fruitloc/error.hpp"
#include "fruitloc/io.hpp"

namespace fruitloc::geometry {
namespace {

// Relative singular-value gap below which the DLT system is rank deficient.
constexpr double kDegeneracyTolerance = 1e-10;
constexpr double kAtInfinityTolerance = 1e-12;

bool finite(double a) { return std::isfinite(a); }

}  // namespace

BoundingBox::BoundingBox(double x1, double y1, double x2, double y2)
    : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  if (!finite(x1) || !finite(y1) || !finite(x2) || !finite(y2)) {
    throw Error(ErrorCode::kInvalidArgument, "bounding box has non-finite corner");
  }
  if (x1 > x2 || y1 > y2) {
    throw Error(ErrorCode::kInvalidArgument, "bounding box corners out of order: (" +
                                                 std::to_string(x1) + ", " + std::to_string(y1) +
                                                 ", " + std::to_string(x2) + ", " +
                                                 std::to_string(y2) + ")");
  }
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !finite(cx) || !finite(cy)) {
    throw Error(ErrorCode::kInvalidArgument,
                "intrinsics need positive focal lengths and a finite principal point");
  }
}

void ExtrinsicPose::validate() const {
  constexpr double kTol = 1e-9;
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > kTol) {
    throw Error(ErrorCode::kInvalidArgument, "rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > kTol) {
    throw Error(ErrorCode::kInvalidArgument, "rotation has determinant != +1");
  }
  if (!translation.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "translation is not finite");
  }
}

Eigen::Matrix3d canonicalize(const Eigen::Matrix3d& m) {
  const double norm = m.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "homography must be finite and nonzero");
  }
  // Rescaling a unit-norm matrix would only perturb its last bits.
  Eigen::Matrix3d out =
      std::abs(norm - 1.0) <= 8.0 * std::numeric_limits<double>::epsilon() ? m : m / norm;
  double sign_ref = out(2, 2);
  if (sign_ref == 0.0) {
    for (int i = 0; i < 9 && sign_ref == 0.0; ++i) sign_ref = out(i / 3, i % 3);
  }
  if (sign_ref < 0.0) out = -out;
  return out;
}

Homography::Homography(const Eigen::Matrix3d& m) : h_(canonicalize(m)) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h_);
  const Eigen::Vector3d s = svd.singularValues();
  if (!(s(2) > 1e-12 * s(0))) {
    throw Error(ErrorCode::kDegenerateConfiguration, "homography is singular");
  }
}

Homography Homography::inverse() const { return Homography(h_.inverse()); }

PixelPoint bbox_midpoint(const BoundingBox& box) {
  return {(box.x1() + box.x2()) / 2.0, (box.y1() + box.y2()) / 2.0};
}

CameraMatrix compose_camera_matrix(const CameraIntrinsics& k, const ExtrinsicPose& pose) {
  k.validate();
  pose.validate();
  CameraMatrix rt;
  rt.leftCols<3>() = pose.rotation;
  rt.col(3) = pose.translation;
  return k.matrix() * rt;
}

Eigen::Matrix3d plane_to_image(const CameraMatrix& c) {
  Eigen::Matrix3d m;
  m.col(0) = c.col(0);
  m.col(1) = c.col(1);
  m.col(2) = c.col(3);
  return m;
}

Eigen::Matrix3d hartley_normalization(std::span<const Eigen::Vector2d> points) {
  if (points.empty()) throw Error(ErrorCode::kEmptyInput, "no points to normalize");
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  double mean_dist = 0.0;
  for (const auto& p : points) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(points.size());
  if (!(mean_dist > 0.0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "all points coincide");
  }

  const double scale = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << scale, 0.0, -scale * centroid.x(), 0.0, scale, -scale * centroid.y(), 0.0, 0.0, 1.0;
  return t;
}

namespace {

struct NormalizedSystem {
  Eigen::MatrixXd a;
  Eigen::Matrix3d pixel_t = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d world_t = Eigen::Matrix3d::Identity();
};

NormalizedSystem build_system(std::span<const Correspondence> corrs, bool normalize) {
  NormalizedSystem sys;
  std::vector<Eigen::Vector2d> pixels;
  std::vector<Eigen::Vector2d> worlds;
  pixels.reserve(corrs.size());
  worlds.reserve(corrs.size());
  for (const auto& c : corrs) {
    pixels.emplace_back(c.pixel.u, c.pixel.v);
    worlds.emplace_back(c.world.x, c.world.y);
  }
  if (normalize) {
    sys.pixel_t = hartley_normalization(pixels);
    sys.world_t = hartley_normalization(worlds);
  }

  const auto n = static_cast<Eigen::Index>(corrs.size());
  sys.a = Eigen::MatrixXd::Zero(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d p = sys.pixel_t * pixels[i].homogeneous();
    const Eigen::Vector3d w = sys.world_t * worlds[i].homogeneous();
    const double x = w.x() / w.z();
    const double y = w.y() / w.z();
    sys.a.block<1, 3>(2 * i, 0) = p.transpose();
    sys.a.block<1, 3>(2 * i, 6) = -x * p.transpose();
    sys.a.block<1, 3>(2 * i + 1, 3) = p.transpose();
    sys.a.block<1, 3>(2 * i + 1, 6) = -y * p.transpose();
  }
  return sys;
}

}  // namespace

Eigen::MatrixXd dlt_design_matrix(std::span<const Correspondence> corrs, bool normalize) {
  return build_system(corrs, normalize).a;
}

Homography estimate_homography(std::span<const Correspondence> corrs) {
  if (corrs.size() < 4) {
    throw Error(ErrorCode::kInsufficientCorrespondences,
                "need at least 4 correspondences, got " + std::to_string(corrs.size()));
  }
  for (const auto& c : corrs) {
    if (!finite(c.pixel.u) || !finite(c.pixel.v) || !finite(c.world.x) || !finite(c.world.y)) {
      throw Error(ErrorCode::kInvalidArgument, "correspondence is not finite");
    }
  }

  const NormalizedSystem sys = build_system(corrs, true);

  // Pad to a square system so the null direction of a minimal (8 x 9) problem
  // shows up as an explicit zero singular value.
  Eigen::MatrixXd a = sys.a;
  if (a.rows() < 9) {
    a.conservativeResize(9, Eigen::NoChange);
    a.bottomRows(9 - sys.a.rows()).setZero();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  if (!(s(7) >= kDegeneracyTolerance * s(0))) {
    throw Error(ErrorCode::kDegenerateConfiguration, "correspondences are collinear or coincident");
  }

  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d normalized;
  normalized << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return Homography(sys.world_t.inverse() * normalized * sys.pixel_t);
}

HomogeneousPixel apply_homogeneous(const Eigen::Matrix3d& m, const PixelPoint& p) {
  const Eigen::Vector3d r = m * Eigen::Vector3d(p.u, p.v, 1.0);
  return {r.x(), r.y(), r.z()};
}

WorldPoint apply_homography(const Homography& h, const PixelPoint& p) {
  const HomogeneousPixel r = apply_homogeneous(h.matrix(), p);
  if (std::abs(r.w) < kAtInfinityTolerance) {
    throw Error(ErrorCode::kPointAtInfinity, "pixel (" + std::to_string(p.u) + ", " +
                                                 std::to_string(p.v) + ") maps to infinity");
  }
  return {r.u / r.w, r.v / r.w};
}

PixelPoint project_to_image(const Homography& h, const WorldPoint& w) {
  const WorldPoint p = apply_homography(h.inverse(), PixelPoint{w.x, w.y});
  return {p.x, p.y};
}

double reprojection_error(const Homography& h, std::span<const Correspondence> corrs) {
  if (corrs.empty()) {
    throw Error(ErrorCode::kEmptyInput, "reprojection error needs correspondences");
  }
  double sum_sq = 0.0;
  for (const auto& c : corrs) {
    const WorldPoint w = apply_homography(h, c.pixel);
    const double dx = w.x - c.world.x;
    const double dy = w.y - c.world.y;
    sum_sq += dx * dx + dy * dy;
  }
  return std::sqrt(sum_sq / static_cast<double>(corrs.size()));
}

void write_calibration(const std::filesystem::path& path, const Calibration& calibration) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  const Eigen::Matrix3d& m = calibration.homography.matrix();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  doc["homography"] = rows;
  doc["direction"] = "pixel_to_world";
  doc["units"] = "cm";
  doc["rms_reprojection_error_cm"] = calibration.rms_reprojection_error_cm;
  io::write_text_file(path, doc.dump(2) + "\n");
}

Calibration read_calibration(const std::filesystem::path& path) {
  const nlohmann::json doc = io::read_json_file(path);
  try {
    if (doc.at("direction").get<std::string>() != "pixel_to_world") {
      throw Error(ErrorCode::kInvalidArgument,
                  path.string() + ": unsupported homography direction");
    }
    if (doc.at("units").get<std::string>() != "cm") {
      throw Error(ErrorCode::kInvalidArgument, path.string() + ": units must be cm");
    }
    const auto& rows = doc.at("homography");
    if (rows.size() != 3) {
      throw Error(ErrorCode::kInvalidArgument, path.string() + ": homography must be 3x3");
    }
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r) {
      if (rows[r].size() != 3) {
        throw Error(ErrorCode::kInvalidArgument, path.string() + ": homography must be 3x3");
      }
      for (int c = 0; c < 3; ++c) m(r, c) = rows[r][c].get<double>();
    }
    Calibration out{Homography(m), doc.value("rms_reprojection_error_cm", 0.0)};
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                path.string() + ": invalid calibration file (" + e.what() + ")");
  }
}

}  // namespace fruitloc::geometry
