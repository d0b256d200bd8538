#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mmreg/calibration.hpp"
#include "mmreg/geometry.hpp"
#include "mmreg/image.hpp"
#include "mmreg/mesh.hpp"
#include "mmreg/registration.hpp"

namespace mmreg::synth {

/// View-independent procedural texture over a primitive's surface coordinates (meters).
struct Texture
{
    enum class Kind
    {
        Constant,
        Checker,
        Gradient,
    };
    Kind kind = Kind::Constant;
    double a = 0.5;      // constant value, first checker value
    double b = 1.0;      // second checker value
    double pitch = 0.01; // checker period
    Vec2 gradient = Vec2::Zero();
    double offset = 0.0;

    double evaluate(const Vec2& st) const;
};

enum class PrimitiveKind
{
    Plane,
    Rectangle,
    Disk,
    Sphere,
};

/// Analytic surface in depth-camera coordinates. Planar primitives lie in the
/// local XY plane of `rotation` (local -> depth frame) centred at `center`.
struct Primitive
{
    PrimitiveKind kind = PrimitiveKind::Rectangle;
    std::string name;
    Vec3 center = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();
    double halfWidth = 0.05;
    double halfHeight = 0.05;
    double radius = 0.05;
    Texture texture;
};

struct SceneSpec
{
    std::vector<Primitive> primitives;
    bool ground = true;
    double groundZ = 1.2;
    Texture groundTexture;
    Roi roi;

    /// Throws UsageError when a bounded primitive leaves the ROI or has bad sizes.
    void validate() const;
    /// Primitives followed by the ground plane when enabled.
    std::vector<Primitive> surfaces() const;
};

struct SurfaceHit
{
    double t = 0.0;
    int primitive = -1; // index into SceneSpec::surfaces()
    Vec3 point = Vec3::Zero();
    Vec2 st = Vec2::Zero();
};

std::optional<SurfaceHit> intersectPrimitive(const Primitive& p, const Vec3& origin, const Vec3& dir, double tMin,
                                             double tMax);

/// Nearest hit over all surfaces with t in (tMin, tMax). `dir` need not be unit length.
std::optional<SurfaceHit> intersectScene(const std::vector<Primitive>& surfaces, const Vec3& origin, const Vec3& dir,
                                         double tMin = 0.0,
                                         double tMax = std::numeric_limits<double>::infinity());

struct DepthRenderOptions
{
    double noiseSigma = 0.0; // meters
    double bias = 0.0;       // meters, added to every valid pixel
    bool flyingPixels = false;
    std::uint64_t seed = 0;
};

/// Z depth of the nearest surface per pixel of `camera`.
DepthMap renderDepth(const SceneSpec& scene, const CameraModel& camera, const DepthRenderOptions& options = {});

struct RenderedImage
{
    Image image;                      // one F32 channel, 0 on background
    std::vector<std::uint8_t> valid; // 1 where a surface was hit
};

RenderedImage renderModality(const SceneSpec& scene, const CameraModel& camera);

struct GroundTruthOptions
{
    double sampleStep = 0.0005;
    bool occludedVolume = true;
    bool outgoingVolume = true; // sources too; ignored without occludedVolume
};

struct GroundTruthSource
{
    std::string cameraId;
    std::vector<PixelCoord> pixel;            // raw detector coordinate of the true point
    std::vector<std::uint8_t> inBounds;       // in front of and inside the source image
    std::vector<std::uint8_t> visible;        // unobstructed line of sight
    std::vector<std::uint8_t> outgoingOccluded; // outgoing ray crosses the depth camera's shadow
};

struct GroundTruth
{
    std::string targetId;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> hit; // any surface (ground included)
    std::vector<std::uint8_t> objectHit; // a non-ground surface
    std::vector<Vec3> point;       // depth-camera frame
    std::vector<int> primitive;
    std::vector<std::uint8_t> incomingOccluded;
    std::vector<GroundTruthSource> sources;

    std::size_t index(int col, int row) const { return static_cast<std::size_t>(row) * width + col; }
};

/// Analytic correspondence, visibility and shadow-volume membership for every
/// target pixel. Every other camera of the rig is a source.
GroundTruth groundTruth(const SceneSpec& scene, const CameraRig& rig, const std::string& targetId,
                        const GroundTruthOptions& options = {});

/// True when the segment from the depth camera (origin) to `p` is blocked by one of `occluders`.
bool inDepthShadow(const std::vector<Primitive>& occluders, const Vec3& p);

/// Ground plane with two tilted leaves, a disk and a sphere; procedural textures.
SceneSpec deskScene();

/// Desk rig: 640x576 depth camera at the origin plus two cameras toed in
/// towards (0, 0, 0.8) at 10 cm ("narrow") and 40 cm ("wide") baselines.
CameraRig defaultRig(bool withDistortion = true);

/// Pose of a camera at `position` looking at `target`, as depth -> camera.
RigidTransform lookAt(const Vec3& position, const Vec3& target, FrameId to);

/// Seeded board poses (board -> depth frame) spread over tilts up to ~35 degrees.
std::vector<RigidTransform> boardPoses(const BoardSpec& board, int count, std::uint64_t seed, double minZ = 0.55,
                                       double maxZ = 0.9);

/// Draws seeded poses until `count` of them show every corner in every camera.
std::vector<RigidTransform> visibleBoardPoses(const CameraRig& rig, const BoardSpec& board, int count,
                                              std::uint64_t seed, double minZ = 0.55, double maxZ = 0.9);

/// Exact corner projections in every rig camera plus Gaussian noise. Poses with
/// any corner behind or outside some camera are rejected; no valid pose is a UsageError.
std::vector<CalibrationView> makeCheckerboardViews(const CameraRig& rig, const BoardSpec& board,
                                                   const std::vector<RigidTransform>& poses, double noiseSigma,
                                                   std::uint64_t seed, std::vector<std::string>* warnings = nullptr,
                                                   std::vector<std::string>* acceptedViewIds = nullptr);

/// View id of pose i, zero padded.
std::string viewName(std::size_t i);

/// Rectangle primitive covering the board in pose `boardToDepth`.
Primitive boardPrimitive(const BoardSpec& board, const RigidTransform& boardToDepth, double margin);

} // namespace mmreg::synth
