#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <span>
#include <vector>

namespace fruitloc::geometry {

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;

  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

struct HomogeneousPixel {
  double u = 0.0;
  double v = 0.0;
  double w = 1.0;
};

// A point on the world plane Z = 0, in centimetres.
struct WorldPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const WorldPoint&, const WorldPoint&) = default;
};

// Axis-aligned box in pixels; (x1, y1) is the top-left corner.
class BoundingBox {
 public:
  BoundingBox() = default;
  // Throws kInvalidArgument unless x1 <= x2 and y1 <= y2 and all are finite.
  BoundingBox(double x1, double y1, double x2, double y2);

  double x1() const { return x1_; }
  double y1() const { return y1_; }
  double x2() const { return x2_; }
  double y2() const { return y2_; }
  double width() const { return x2_ - x1_; }
  double height() const { return y2_ - y1_; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

 private:
  double x1_ = 0.0, y1_ = 0.0, x2_ = 0.0, y2_ = 0.0;
};

struct CameraIntrinsics {
  double fx = 600.0;
  double fy = 600.0;
  double cx = 320.0;
  double cy = 240.0;

  Eigen::Matrix3d matrix() const;
  void validate() const;
};

struct ExtrinsicPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // cm

  // Checks R^T R = I and det(R) = +1 within 1e-9.
  void validate() const;
};

using CameraMatrix = Eigen::Matrix<double, 3, 4>;

// Planar projective map from image pixels to the world plane, stored in
// canonical form: Frobenius norm 1 and h33 >= 0 (or, when h33 == 0, the first
// nonzero entry in row-major order positive). Two matrices that differ only by
// a nonzero scale therefore compare equal after construction.
class Homography {
 public:
  Homography() : Homography(Eigen::Matrix3d::Identity()) {}
  // Throws kDegenerateConfiguration if the matrix is not invertible.
  explicit Homography(const Eigen::Matrix3d& m);

  const Eigen::Matrix3d& matrix() const { return h_; }
  double operator()(int row, int col) const { return h_(row, col); }

  // Canonical form of the inverse map.
  Homography inverse() const;

 private:
  Eigen::Matrix3d h_;
};

struct Correspondence {
  PixelPoint pixel;
  WorldPoint world;
};

// Scales m to unit Frobenius norm with the sign convention used by Homography.
// Unlike the Homography constructor this does not require invertibility.
Eigen::Matrix3d canonicalize(const Eigen::Matrix3d& m);

// Picking point of a box: ((x1 + x2) / 2, (y1 + y2) / 2), with no rounding.
PixelPoint bbox_midpoint(const BoundingBox& box);

CameraMatrix compose_camera_matrix(const CameraIntrinsics& k, const ExtrinsicPose& pose);

// The plane Z = 0 seen through a camera: world (X, Y, 1) -> pixel, i.e.
// columns 0, 1 and 3 of the camera matrix.
Eigen::Matrix3d plane_to_image(const CameraMatrix& c);

// Similarity transform that moves the centroid of `points` to the origin and
// scales their mean distance from it to sqrt(2).
Eigen::Matrix3d hartley_normalization(std::span<const Eigen::Vector2d> points);

// Stacked two-rows-per-correspondence DLT system A with A * vec(H) = 0 for the
// pixel -> world map, where vec(H) is H in row-major order. When `normalize`
// is set, both point sets are conditioned with hartley_normalization first.
Eigen::MatrixXd dlt_design_matrix(std::span<const Correspondence> corrs, bool normalize);

// Normalized DLT: least-squares homography (pixel -> world) minimizing the
// algebraic residual |A h| with |h| = 1. Needs at least four correspondences
// that do not all lie on one line.
Homography estimate_homography(std::span<const Correspondence> corrs);

HomogeneousPixel apply_homogeneous(const Eigen::Matrix3d& m, const PixelPoint& p);

// Perspective division of H * (u, v, 1). Throws kPointAtInfinity when the
// homogeneous scale is below 1e-12 in magnitude.
WorldPoint apply_homography(const Homography& h, const PixelPoint& p);

// Maps a world point back into the image with the inverse homography.
PixelPoint project_to_image(const Homography& h, const WorldPoint& w);

// RMS Euclidean distance (cm) between mapped pixels and their world points.
double reprojection_error(const Homography& h, std::span<const Correspondence> corrs);

// Calibration file (JSON): homography rows, direction, units and RMS error.
struct Calibration {
  Homography homography;
  double rms_reprojection_error_cm = 0.0;
};

void write_calibration(const std::filesystem::path& path, const Calibration& calibration);
Calibration read_calibration(const std::filesystem::path& path);

}  // namespace fruitloc::geometry
