#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmreg/geometry.hpp"
#include "mmreg/image.hpp"
#include "mmreg/mesh.hpp"
#include "mmreg/raycast.hpp"

namespace mmreg {

/// Projection cases. The numeric values of P1..P3_2, P5 and P6 are the case-mask
/// codes written to disk; P4 never appears in a per-source mask.
enum class ProjectionCase : std::uint8_t
{
    Unmapped = 0,
    P1_CertainMatch = 1,
    P2_Occlusion = 2,
    P3_1_UncertainIncoming = 3,
    P3_2_UncertainOutgoing = 4,
    P5_UncertainObject = 5,
    P6_CertainBackground = 6,
    P4_CertainObject = 7,
};

const char* caseName(ProjectionCase c);

struct CameraRig
{
    std::vector<CameraModel> cameras;
    std::string depthCameraId;

    /// Index of the camera with `id`; throws UsageError for unknown ids.
    std::size_t indexOf(const std::string& id) const;
    const CameraModel& camera(const std::string& id) const { return cameras[indexOf(id)]; }
    const CameraModel& depthCamera() const { return camera(depthCameraId); }
    bool has(const std::string& id) const;

    /// Depth camera present with identity transform, unique ids, valid intrinsics,
    /// distortion and transforms tagged depth-frame -> camera-frame.
    void validate() const;
};

/// Builds a rig whose transforms carry the frame tags validate() expects.
CameraRig makeRig(std::vector<CameraModel> cameras, const std::string& depthCameraId);

struct RegistrationSettings
{
    Roi roi;
    double groundZ = 0.0; // <= 0 means roi.zMax
    double maxAngleDeg = kDefaultMaxVerticalAngleDeg;
    double epsilon = kSelfHitEpsilon;
    Interpolation interpolation = Interpolation::Bilinear;

    double effectiveGroundZ() const { return groundZ > 0.0 ? groundZ : roi.zMax; }
};

struct TargetPixelRays
{
    std::optional<Hit> objectHit;
    std::optional<Hit> uncertaintyHit;
    ProjectionCase area = ProjectionCase::P6_CertainBackground;
};

/// Incoming rays of every target pixel, intersected once with both meshes.
struct TargetRayField
{
    std::string targetId;
    int width = 0;
    int height = 0;
    Vec3 origin = Vec3::Zero(); // target centre, depth-camera frame
    std::vector<TargetPixelRays> pixels;

    const TargetPixelRays& at(int col, int row) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
};

struct Correspondence
{
    PixelCoord source;
    Vec3 point = Vec3::Zero(); // depth-camera frame
    ProjectionCase pcase = ProjectionCase::P6_CertainBackground;
    bool mapped = false;
};

struct CorrespondenceMap
{
    std::string targetId;
    std::string sourceId;
    int width = 0;
    int height = 0;
    int sourceWidth = 0;
    int sourceHeight = 0;
    std::vector<Correspondence> pixels;

    const Correspondence& at(int col, int row) const { return pixels[static_cast<std::size_t>(row) * width + col]; }

    /// Per-pixel mask codes: 0 when unmapped, otherwise the case code.
    std::vector<std::uint8_t> caseMask() const;
};

struct RegisteredImage
{
    Image image;
    std::vector<std::uint8_t> validMask; // 1 where a source value was sampled
};

struct ModalitySamples
{
    std::string cameraId;
    std::string modality;
    int channels = 0;
    std::vector<float> values;       // points x channels, 0 where unmapped
    std::vector<std::uint8_t> cases; // per point mask code
};

struct MultimodalPointCloud
{
    std::vector<Vec3> points; // depth-camera frame
    std::vector<SourcePixel> targetPixel;
    std::vector<ModalitySamples> modalities;
};

struct SourceRegistration
{
    CorrespondenceMap correspondence;
    std::vector<std::uint8_t> caseMask;
    std::optional<RegisteredImage> registered;
};

struct RegistrationResult
{
    TriangleMesh objectMesh;
    UncertaintyMesh uncertainty;
    TargetRayField field;
    std::vector<std::uint8_t> areaMask; // 4 P4, 5 P5, 6 P6
    std::map<std::string, SourceRegistration> sources;
    MultimodalPointCloud cloud;
};

/// Shoots one ray per target pixel centre (undistorted, transformed into the
/// depth-camera frame) and records the first hits on both meshes.
TargetRayField castTargetRays(const CameraRig& rig, const std::string& targetId, const Bvh& objectMesh,
                              const Bvh& uncertaintyMesh, double epsilon = kSelfHitEpsilon);

/// Transports every pixel with an object hit into the source camera and assigns
/// its projection case with precedence P2 > P3_1 > P3_2 > P1.
CorrespondenceMap correspond(const TargetRayField& field, const CameraRig& rig, const std::string& sourceId,
                             const Bvh& objectMesh, const Bvh& uncertaintyMesh, double epsilon = kSelfHitEpsilon);

/// Pulls source values into the target grid. Throws UsageError when the image
/// size differs from the source camera.
RegisteredImage resample(const Image& source, const CorrespondenceMap& cmap, Interpolation interp);

/// Full N-camera registration into `targetId`. Every camera with an entry in
/// `images` (other than the target) is treated as a source.
RegistrationResult registerAll(const CameraRig& rig, const std::string& targetId, const DepthMap& depth,
                               const RegistrationSettings& settings, const std::map<std::string, Image>& images);

} // namespace mmreg
