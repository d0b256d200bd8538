#include "mmreg/registration.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mmreg/errors.hpp"
#include "mmreg/parallel.hpp"

namespace mmreg {

const char* caseName(ProjectionCase c)
{
    switch (c)
    {
    case ProjectionCase::Unmapped: return "unmapped";
    case ProjectionCase::P1_CertainMatch: return "P1";
    case ProjectionCase::P2_Occlusion: return "P2";
    case ProjectionCase::P3_1_UncertainIncoming: return "P3.1";
    case ProjectionCase::P3_2_UncertainOutgoing: return "P3.2";
    case ProjectionCase::P4_CertainObject: return "P4";
    case ProjectionCase::P5_UncertainObject: return "P5";
    case ProjectionCase::P6_CertainBackground: return "P6";
    }
    return "?";
}

std::size_t CameraRig::indexOf(const std::string& id) const
{
    for (std::size_t i = 0; i < cameras.size(); ++i)
        if (cameras[i].id == id)
            return i;
    throw UsageError("unknown camera id '" + id + "'");
}

bool CameraRig::has(const std::string& id) const
{
    return std::any_of(cameras.begin(), cameras.end(), [&](const CameraModel& c) { return c.id == id; });
}

CameraRig makeRig(std::vector<CameraModel> cameras, const std::string& depthCameraId)
{
    CameraRig rig;
    rig.cameras = std::move(cameras);
    rig.depthCameraId = depthCameraId;
    const auto depthFrame = FrameId::camera(static_cast<std::int32_t>(rig.indexOf(depthCameraId)));
    for (std::size_t i = 0; i < rig.cameras.size(); ++i)
        rig.cameras[i].fromDepth =
            rig.cameras[i].fromDepth.retagged(depthFrame, FrameId::camera(static_cast<std::int32_t>(i)));
    return rig;
}

void CameraRig::validate() const
{
    if (cameras.empty())
        throw UsageError("rig: no cameras");
    std::set<std::string> ids;
    for (const auto& c : cameras)
        if (!ids.insert(c.id).second)
            throw UsageError("rig: duplicate camera id '" + c.id + "'");
    const auto depthIdx = indexOf(depthCameraId);
    const auto depthFrame = FrameId::camera(static_cast<std::int32_t>(depthIdx));
    for (std::size_t i = 0; i < cameras.size(); ++i)
    {
        const auto& c = cameras[i];
        c.intrinsics.validate();
        c.distortion.validate();
        if (c.fromDepth.from() != depthFrame || c.fromDepth.to() != FrameId::camera(static_cast<std::int32_t>(i)))
            throw UsageError("rig: camera '" + c.id + "' transform is not tagged depth -> camera");
    }
    const auto& T = cameras[depthIdx].fromDepth;
    if ((T.rotation() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 || T.translation().norm() > 1e-9)
        throw UsageError("rig: depth camera transform must be the identity");
}

std::vector<std::uint8_t> CorrespondenceMap::caseMask() const
{
    std::vector<std::uint8_t> mask(pixels.size(), 0);
    for (std::size_t i = 0; i < pixels.size(); ++i)
    {
        const auto& c = pixels[i];
        switch (c.pcase)
        {
        case ProjectionCase::P5_UncertainObject:
        case ProjectionCase::P6_CertainBackground:
            mask[i] = static_cast<std::uint8_t>(c.pcase);
            break;
        default:
            mask[i] = c.mapped ? static_cast<std::uint8_t>(c.pcase) : 0;
        }
    }
    return mask;
}

namespace {

bool distortionInDomain(const Distortion& d, const Vec2& xn)
{
    if (d.isZero())
        return true;
    const double r2 = xn.squaredNorm();
    const double radial = 1.0 + r2 * (d.k1 + r2 * (d.k2 + r2 * d.k3));
    return radial > 0.0 && distortJacobian(d, xn).determinant() > 0.0 &&
           distortJacobian(d, 0.5 * xn).determinant() > 0.0;
}

std::optional<PixelCoord> projectIntoSource(const CameraModel& cam, const Vec3& pDepth)
{
    const Vec3 p = cam.fromDepth.apply(pDepth);
    if (!(p.z() > 0.0))
        return std::nullopt;
    if (!distortionInDomain(cam.distortion, Vec2(p.x() / p.z(), p.y() / p.z())))
        return std::nullopt;
    return cam.projectToPixel(p);
}

std::uint8_t areaCode(ProjectionCase c)
{
    switch (c)
    {
    case ProjectionCase::P4_CertainObject: return 4;
    case ProjectionCase::P5_UncertainObject: return 5;
    default: return 6;
    }
}

} // namespace

TargetRayField castTargetRays(const CameraRig& rig, const std::string& targetId, const Bvh& objectMesh,
                              const Bvh& uncertaintyMesh, double epsilon)
{
    const auto& target = rig.camera(targetId);
    TargetRayField field;
    field.targetId = targetId;
    field.width = target.intrinsics.width;
    field.height = target.intrinsics.height;
    field.origin = target.centerInDepthFrame();
    field.pixels.resize(static_cast<std::size_t>(field.width) * field.height);
    const Mat3 toDepth = target.fromDepth.rotation().transpose();

    parallelRows(field.height, [&](int row) {
        for (int col = 0; col < field.width; ++col)
        {
            auto& px = field.pixels[static_cast<std::size_t>(row) * field.width + col];
            Vec3 dir;
            try
            {
                dir = toDepth * target.rayDirection(pixelCenter(col, row));
            }
            catch (const NumericError&)
            {
                continue; // no viewing ray: background
            }
            const Ray ray{field.origin, dir.normalized(), 0.0, std::numeric_limits<double>::infinity()};
            px.objectHit = objectMesh.intersectFirst(ray);
            px.uncertaintyHit = uncertaintyMesh.intersectFirst(ray);
            if (px.objectHit && (!px.uncertaintyHit || px.objectHit->t <= px.uncertaintyHit->t + epsilon))
                px.area = ProjectionCase::P4_CertainObject;
            else if (px.uncertaintyHit)
                px.area = ProjectionCase::P5_UncertainObject;
            else
                px.area = ProjectionCase::P6_CertainBackground;
        }
    });
    return field;
}

CorrespondenceMap correspond(const TargetRayField& field, const CameraRig& rig, const std::string& sourceId,
                             const Bvh& objectMesh, const Bvh& uncertaintyMesh, double epsilon)
{
    const auto& source = rig.camera(sourceId);
    CorrespondenceMap cmap;
    cmap.targetId = field.targetId;
    cmap.sourceId = sourceId;
    cmap.width = field.width;
    cmap.height = field.height;
    cmap.sourceWidth = source.intrinsics.width;
    cmap.sourceHeight = source.intrinsics.height;
    cmap.pixels.resize(field.pixels.size());
    const Vec3 sourceOrigin = source.centerInDepthFrame();

    parallelRows(field.height, [&](int row) {
        for (int col = 0; col < field.width; ++col)
        {
            const auto i = static_cast<std::size_t>(row) * field.width + col;
            const auto& px = field.pixels[i];
            auto& out = cmap.pixels[i];
            if (!px.objectHit)
            {
                out.pcase = px.area;
                continue;
            }
            const Vec3& P = px.objectHit->point;
            out.point = P;

            // Incoming ray passed through occluded space before reaching M_o.
            const bool incomingUncertain = px.area == ProjectionCase::P5_UncertainObject;

            const Vec3 toPoint = P - sourceOrigin;
            const double dist = toPoint.norm();
            bool occluded = false;
            bool outgoingUncertain = false;
            if (dist > epsilon)
            {
                const Ray ray{sourceOrigin, toPoint / dist, 0.0, std::numeric_limits<double>::infinity()};
                occluded = objectMesh.intersectBefore(ray, dist, epsilon);
                if (!occluded)
                    outgoingUncertain = uncertaintyMesh.intersectBefore(ray, dist, epsilon);
            }
            if (occluded)
                out.pcase = ProjectionCase::P2_Occlusion;
            else if (incomingUncertain)
                out.pcase = ProjectionCase::P3_1_UncertainIncoming;
            else if (outgoingUncertain)
                out.pcase = ProjectionCase::P3_2_UncertainOutgoing;
            else
                out.pcase = ProjectionCase::P1_CertainMatch;

            if (const auto uv = projectIntoSource(source, P);
                uv && uv->u >= 0.0 && uv->v >= 0.0 && uv->u < cmap.sourceWidth && uv->v < cmap.sourceHeight)
            {
                out.source = *uv;
                out.mapped = true;
            }
        }
    });
    return cmap;
}

RegisteredImage resample(const Image& source, const CorrespondenceMap& cmap, Interpolation interp)
{
    if (source.width != cmap.sourceWidth || source.height != cmap.sourceHeight)
        throw UsageError("resample: image of '" + cmap.sourceId + "' is " + std::to_string(source.width) + "x" +
                         std::to_string(source.height) + ", camera expects " + std::to_string(cmap.sourceWidth) +
                         "x" + std::to_string(cmap.sourceHeight));
    RegisteredImage out;
    out.image = Image(cmap.width, cmap.height, source.channels, source.type);
    out.image.wavelengths = source.wavelengths;
    out.validMask.assign(static_cast<std::size_t>(cmap.width) * cmap.height, 0);
    const double maxValue = source.type == SampleType::U8 ? 255.0 : 65535.0;

    parallelRows(cmap.height, [&](int row) {
        for (int col = 0; col < cmap.width; ++col)
        {
            const auto i = static_cast<std::size_t>(row) * cmap.width + col;
            const auto& c = cmap.pixels[i];
            if (!c.mapped)
                continue;
            float* dst = out.image.data.data() + out.image.offset(col, row);
            if (!sampleImage(source, c.source.u, c.source.v, interp, dst))
                continue;
            if (source.type != SampleType::F32)
                for (int ch = 0; ch < source.channels; ++ch)
                    dst[ch] = static_cast<float>(std::clamp(std::round(static_cast<double>(dst[ch])), 0.0, maxValue));
            out.validMask[i] = 1;
        }
    });
    return out;
}

RegistrationResult registerAll(const CameraRig& rig, const std::string& targetId, const DepthMap& depth,
                               const RegistrationSettings& settings, const std::map<std::string, Image>& images)
{
    rig.validate();
    settings.roi.validate();
    const auto& depthCam = rig.depthCamera();
    const auto& target = rig.camera(targetId);
    if (depth.width != depthCam.intrinsics.width || depth.height != depthCam.intrinsics.height)
        throw UsageError("depth map is " + std::to_string(depth.width) + "x" + std::to_string(depth.height) +
                         ", depth camera '" + depthCam.id + "' expects " + std::to_string(depthCam.intrinsics.width) +
                         "x" + std::to_string(depthCam.intrinsics.height));
    for (const auto& [id, img] : images)
    {
        const auto& cam = rig.camera(id);
        if (img.width != cam.intrinsics.width || img.height != cam.intrinsics.height)
            throw UsageError("image for camera '" + id + "' is " + std::to_string(img.width) + "x" +
                             std::to_string(img.height) + ", expected " + std::to_string(cam.intrinsics.width) + "x" +
                             std::to_string(cam.intrinsics.height));
    }

    DepthMap dm = depth;
    dm.intrinsics = depthCam.intrinsics;
    dm.distortion = depthCam.distortion;

    RegistrationResult result;
    result.objectMesh = buildObjectMesh(depthToVertices(dm, settings.roi), settings.maxAngleDeg);
    result.uncertainty = buildUncertaintyMesh(result.objectMesh, Vec3::Zero(), settings.effectiveGroundZ());
    const Bvh mo(result.objectMesh);
    const Bvh mu(result.uncertainty.mesh);

    result.field = castTargetRays(rig, targetId, mo, mu, settings.epsilon);
    const auto& field = result.field;
    result.areaMask.resize(field.pixels.size());
    for (std::size_t i = 0; i < field.pixels.size(); ++i)
        result.areaMask[i] = areaCode(field.pixels[i].area);

    for (const auto& [id, img] : images)
    {
        if (id == targetId)
            continue;
        SourceRegistration src;
        src.correspondence = correspond(field, rig, id, mo, mu, settings.epsilon);
        src.caseMask = src.correspondence.caseMask();
        src.registered = resample(img, src.correspondence, settings.interpolation);
        result.sources.emplace(id, std::move(src));
    }

    // Point cloud over the certain object area.
    auto& cloud = result.cloud;
    for (int row = 0; row < field.height; ++row)
        for (int col = 0; col < field.width; ++col)
        {
            const auto& px = field.at(col, row);
            if (px.area == ProjectionCase::P4_CertainObject && px.objectHit)
            {
                cloud.points.push_back(px.objectHit->point);
                cloud.targetPixel.push_back({col, row});
            }
        }
    const std::size_t n = cloud.points.size();
    if (auto it = images.find(targetId); it != images.end())
    {
        ModalitySamples m{targetId, target.modality, it->second.channels, {}, {}};
        m.values.resize(n * m.channels);
        m.cases.assign(n, static_cast<std::uint8_t>(ProjectionCase::P1_CertainMatch));
        for (std::size_t k = 0; k < n; ++k)
        {
            const auto& tp = cloud.targetPixel[k];
            for (int ch = 0; ch < m.channels; ++ch)
                m.values[k * m.channels + ch] = it->second.at(tp.col, tp.row, ch);
        }
        cloud.modalities.push_back(std::move(m));
    }
    for (const auto& [id, src] : result.sources)
    {
        const Image& img = images.at(id);
        ModalitySamples m{id, rig.camera(id).modality, img.channels, {}, {}};
        m.values.assign(n * m.channels, 0.0f);
        m.cases.assign(n, 0);
        for (std::size_t k = 0; k < n; ++k)
        {
            const auto& tp = cloud.targetPixel[k];
            const auto& c = src.correspondence.at(tp.col, tp.row);
            m.cases[k] = c.mapped ? static_cast<std::uint8_t>(c.pcase) : 0;
            const RegisteredImage& reg = *src.registered;
            if (reg.validMask[static_cast<std::size_t>(tp.row) * field.width + tp.col])
                for (int ch = 0; ch < m.channels; ++ch)
                    m.values[k * m.channels + ch] = reg.image.at(tp.col, tp.row, ch);
        }
        cloud.modalities.push_back(std::move(m));
    }
    return result;
}

} // namespace mmreg
