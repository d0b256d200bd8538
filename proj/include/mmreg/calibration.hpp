#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mmreg/geometry.hpp"

namespace mmreg {

/// Checkerboard inner-corner grid.
struct BoardSpec
{
    int rows = 6;
    int cols = 9;
    double squareSize = 0.025; // meters

    Vec2 cornerPosition(int row, int col) const { return {col * squareSize, row * squareSize}; }
    void validate() const;
};

struct CornerObservation
{
    int row = 0;
    int col = 0;
    Vec2 boardPoint = Vec2::Zero(); // board plane, Z = 0
    PixelCoord imagePoint;          // distorted, as detected
};

struct CalibrationView
{
    std::string cameraId;
    std::string viewId;
    std::vector<CornerObservation> corners;
};

struct CameraCalibration
{
    std::string cameraId;
    FrameId frame = FrameId::camera(0);
    Intrinsics intrinsics;
    Distortion distortion;
    std::map<std::string, RigidTransform> boardPoses; // board -> camera, keyed by viewId
    double meanReprojectionError = 0.0;
    int iterations = 0;
    std::vector<double> costHistory; // sum of squared residuals after each accepted step
};

struct CalibrationResult
{
    std::map<std::string, CameraCalibration> cameras;
    // (a, b) -> transform from camera a's frame into camera b's frame.
    std::map<std::pair<std::string, std::string>, RigidTransform> pairs;
    std::vector<std::string> warnings;
};

struct RefineOptions
{
    int maxIterations = 100;
    double relativeTolerance = 1e-12;
    bool refineDistortion = true;
    // k3 stays at its initial value (0). Boards rarely reach the image corners,
    // and a free sixth-order term then folds the model near the unit radius.
    bool fixK3 = true;
};

/// Normalized DLT. Requires at least 4 pairs not all collinear; the result has
/// unit Frobenius norm.
Mat3 estimateHomography(const std::vector<Vec2>& boardPts, const std::vector<Vec2>& imagePts);

/// Closed-form zero-skew intrinsics from >= 3 board homographies.
Intrinsics initIntrinsics(const std::vector<Mat3>& homographies, int width, int height);

/// Board pose (board -> camera) from a homography and known intrinsics.
RigidTransform initExtrinsics(const Mat3& H, const Intrinsics& K, FrameId cameraFrame = FrameId::camera(0));

/// Reprojects a board corner through pose, distortion and K.
PixelCoord projectBoardPoint(const Intrinsics& K, const Distortion& d, const RigidTransform& pose, const Vec2& board);

/// Joint LM refinement of intrinsics, distortion and every board pose.
/// Throws OptimizationError when no progress can be made from a non-stationary start.
CameraCalibration refine(const std::vector<CalibrationView>& views, const CameraCalibration& initial,
                         const RefineOptions& options = {});

/// Homographies, closed-form initialization and refinement for one camera.
CameraCalibration calibrateCamera(const std::vector<CalibrationView>& views, int width, int height,
                                  FrameId frame = FrameId::camera(0), const RefineOptions& options = {});

/// Board pose for fixed intrinsics and distortion (homography start, pose-only LM).
RigidTransform estimateBoardPose(const Intrinsics& K, const Distortion& d, const CalibrationView& view,
                                 FrameId cameraFrame = FrameId::camera(0));

struct StereoOptions
{
    bool refine = true;
    int maxIterations = 100;
};

/// Transform from camera a's frame into camera b's frame. Averaged over the
/// shared views, then refined on the shared corners of both cameras with a cost
/// that is symmetric under swapping a and b. Throws UsageError without shared views.
RigidTransform stereoExtrinsics(const CameraCalibration& a, const CameraCalibration& b,
                                const std::vector<CalibrationView>& viewsA, const std::vector<CalibrationView>& viewsB,
                                const StereoOptions& options = {}, std::vector<std::string>* warnings = nullptr);

/// Per-camera calibration of every camera in `views` plus all ordered pairs.
/// `sizes` gives the image size of each camera id.
CalibrationResult calibrateRig(const std::vector<CalibrationView>& views,
                               const std::map<std::string, std::pair<int, int>>& sizes,
                               const RefineOptions& options = {});

/// Rotation matrix <-> rotation vector (axis times angle).
Mat3 rotationFromVector(const Vec3& w);
Vec3 rotationToVector(const Mat3& R);

/// Chordal L2 mean of rotations via the dominant eigenvector of summed quaternion outer products.
Mat3 chordalMeanRotation(const std::vector<Mat3>& rotations);

} // namespace mmreg
