#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mmreg {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Names a coordinate frame. Cameras use their rig index; calibration boards
// use the reserved board() tag.
struct FrameId
{
    std::int32_t value = -1;

    static constexpr FrameId camera(std::int32_t index) { return FrameId{index}; }
    static constexpr FrameId board() { return FrameId{-2}; }
    static constexpr FrameId none() { return FrameId{-1}; }

    auto operator<=>(const FrameId&) const = default;
};

struct PixelCoord
{
    double u = 0.0;
    double v = 0.0;
};

// Integer pixel (col, row) covers [col, col+1) x [row, row+1); rays go through its center.
inline PixelCoord pixelCenter(int col, int row)
{
    return {col + 0.5, row + 0.5};
}

struct Point3
{
    Vec3 xyz = Vec3::Zero();
    FrameId frame;

    double x() const { return xyz.x(); }
    double y() const { return xyz.y(); }
    double z() const { return xyz.z(); }
};

struct Intrinsics
{
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;

    // Throws UsageError when focal lengths or principal point are out of range.
    void validate() const;
    Mat3 matrix() const;
    bool contains(const PixelCoord& px) const
    {
        return px.u >= 0.0 && px.v >= 0.0 && px.u < width && px.v < height;
    }
};

/// Brown-Conrady lens distortion on normalized image coordinates.
struct Distortion
{
    double k1 = 0.0;
    double k2 = 0.0;
    double k3 = 0.0;
    double p1 = 0.0;
    double p2 = 0.0;

    static constexpr int kMaxUndistortIterations = 20;
    static constexpr double kUndistortTolerance = 1e-8;

    bool isZero() const { return k1 == 0.0 && k2 == 0.0 && k3 == 0.0 && p1 == 0.0 && p2 == 0.0; }

    /// Checks that distort() can be inverted to within 1e-6 on the unit disk.
    /// Throws UsageError naming the failing radius otherwise.
    void validate() const;
};

Vec2 distort(const Distortion& d, const Vec2& xn);

/// Inverts distort(). Throws NumericError when the iteration does not reach
/// kUndistortTolerance within kMaxUndistortIterations.
Vec2 undistort(const Distortion& d, const Vec2& xd);

/// 2x2 Jacobian of distort() with respect to the normalized input.
Eigen::Matrix2d distortJacobian(const Distortion& d, const Vec2& xn);

/// Proper rigid motion p -> R p + t mapping frame `from` into frame `to`.
class RigidTransform
{
public:
    RigidTransform() = default;

    /// Rotations drifting from orthonormality by more than 1e-9 are re-projected
    /// onto SO(3); matrices that are far from a rotation are rejected.
    RigidTransform(const Mat3& rotation, const Vec3& translation, FrameId from, FrameId to);

    static RigidTransform identity(FrameId frame) { return RigidTransform(Mat3::Identity(), Vec3::Zero(), frame, frame); }

    const Mat3& rotation() const { return R_; }
    const Vec3& translation() const { return t_; }
    FrameId from() const { return from_; }
    FrameId to() const { return to_; }

    Vec3 apply(const Vec3& p) const { return R_ * p + t_; }
    Vec3 applyRotation(const Vec3& d) const { return R_ * d; }

    RigidTransform inverse() const;

    /// Origin of the `to` frame expressed in `from` coordinates.
    Vec3 inverseOrigin() const { return -(R_.transpose() * t_); }

    /// (*this) after `inner`: maps inner.from() into this->to().
    RigidTransform compose(const RigidTransform& inner) const;

    RigidTransform retagged(FrameId from, FrameId to) const;

private:
    Mat3 R_ = Mat3::Identity();
    Vec3 t_ = Vec3::Zero();
    FrameId from_;
    FrameId to_;
};

/// Closest rotation matrix in Frobenius norm (polar decomposition via SVD).
Mat3 nearestRotation(const Mat3& m);

/// Pinhole projection. Throws DomainError("point behind camera") for Z <= 0.
PixelCoord project(const Intrinsics& intr, const Point3& p);
PixelCoord project(const Intrinsics& intr, const Vec3& p);

/// Viewing direction (x, y, 1) of a pixel, tagged with the camera's frame.
Point3 backproject(const Intrinsics& intr, const PixelCoord& px, FrameId frame);
Vec3 backprojectDirection(const Intrinsics& intr, const PixelCoord& px);

/// R p + t. Throws UsageError when p is not expressed in T.from().
Point3 transform(const RigidTransform& T, const Point3& p);

struct CameraModel
{
    std::string id;
    std::string modality;
    Intrinsics intrinsics;
    Distortion distortion;
    // Maps depth-camera coordinates into this camera's frame.
    RigidTransform fromDepth;

    /// Raw detector coordinate of a camera-frame point (distort then apply K).
    /// Empty when the point is not in front of the camera.
    std::optional<PixelCoord> projectToPixel(const Vec3& pCamera) const;

    /// Unit viewing direction in the camera frame for a raw detector coordinate.
    Vec3 rayDirection(const PixelCoord& px) const;

    /// Camera centre in depth-camera coordinates.
    Vec3 centerInDepthFrame() const { return fromDepth.inverseOrigin(); }
};

} // namespace mmreg
