#include "mmreg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "mmreg/errors.hpp"
#include "mmreg/parallel.hpp"

namespace mmreg::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kShadowEpsilon = 1e-9;

// Lowest Z reached by a bounded primitive; -inf when unbounded in Z.
double topZ(const Primitive& p)
{
    const Vec3 n = p.rotation.col(2);
    switch (p.kind)
    {
    case PrimitiveKind::Plane:
        return (std::abs(n.x()) < 1e-15 && std::abs(n.y()) < 1e-15) ? p.center.z()
                                                                      : -std::numeric_limits<double>::infinity();
    case PrimitiveKind::Rectangle:
        return p.center.z() - std::abs(p.rotation(2, 0)) * p.halfWidth - std::abs(p.rotation(2, 1)) * p.halfHeight;
    case PrimitiveKind::Disk:
        return p.center.z() - p.radius * std::sqrt(std::max(0.0, 1.0 - n.z() * n.z()));
    case PrimitiveKind::Sphere:
        return p.center.z() - p.radius;
    }
    return -std::numeric_limits<double>::infinity();
}

std::vector<Vec3> boundingCorners(const Primitive& p)
{
    std::vector<Vec3> out;
    const Vec3 ex = p.rotation.col(0), ey = p.rotation.col(1);
    switch (p.kind)
    {
    case PrimitiveKind::Plane:
        break;
    case PrimitiveKind::Rectangle:
        for (int sx : {-1, 1})
            for (int sy : {-1, 1})
                out.push_back(p.center + sx * p.halfWidth * ex + sy * p.halfHeight * ey);
        break;
    case PrimitiveKind::Disk:
        for (int k = 0; k < 64; ++k)
        {
            const double a = 2.0 * kPi * k / 64.0;
            out.push_back(p.center + p.radius * (std::cos(a) * ex + std::sin(a) * ey));
        }
        break;
    case PrimitiveKind::Sphere:
        for (int axis = 0; axis < 3; ++axis)
            for (int s : {-1, 1})
                out.push_back(p.center + s * p.radius * Vec3::Unit(axis));
        break;
    }
    return out;
}

Vec3 rayInDepthFrame(const CameraModel& cam, int col, int row)
{
    return cam.fromDepth.rotation().transpose() * cam.rayDirection(pixelCenter(col, row));
}

} // namespace

double Texture::evaluate(const Vec2& st) const
{
    switch (kind)
    {
    case Kind::Constant:
        return a;
    case Kind::Checker: {
        const auto i = static_cast<long long>(std::floor(st.x() / pitch));
        const auto j = static_cast<long long>(std::floor(st.y() / pitch));
        return ((i + j) & 1) ? b : a;
    }
    case Kind::Gradient:
        return offset + gradient.dot(st);
    }
    return a;
}

void SceneSpec::validate() const
{
    roi.validate();
    if (ground && !(groundZ > 0.0))
        throw UsageError("ground plane must lie in front of the depth camera");
    for (const auto& p : primitives)
    {
        const bool sized = p.kind == PrimitiveKind::Rectangle ? (p.halfWidth > 0.0 && p.halfHeight > 0.0)
                                                              : (p.kind == PrimitiveKind::Plane || p.radius > 0.0);
        if (!sized)
            throw UsageError("primitive '" + p.name + "' has a non-positive size");
        if ((p.rotation.transpose() * p.rotation - Mat3::Identity()).norm() > 1e-6)
            throw UsageError("primitive '" + p.name + "' has an invalid rotation");
        if (p.texture.kind == Texture::Kind::Checker && !(p.texture.pitch > 0.0))
            throw UsageError("primitive '" + p.name + "' has a non-positive checker pitch");
        for (const Vec3& c : boundingCorners(p))
            if (!roi.contains(c))
                throw UsageError("primitive '" + p.name + "' extends outside the ROI");
    }
}

std::vector<Primitive> SceneSpec::surfaces() const
{
    std::vector<Primitive> out = primitives;
    if (ground)
    {
        Primitive g;
        g.kind = PrimitiveKind::Plane;
        g.name = "ground";
        g.center = Vec3(0.0, 0.0, groundZ);
        g.texture = groundTexture;
        out.push_back(g);
    }
    return out;
}

std::optional<SurfaceHit> intersectPrimitive(const Primitive& p, const Vec3& origin, const Vec3& dir, double tMin,
                                             double tMax)
{
    SurfaceHit hit;
    if (p.kind == PrimitiveKind::Sphere)
    {
        const Vec3 oc = origin - p.center;
        const double a = dir.squaredNorm();
        const double b = oc.dot(dir);
        const double c = oc.squaredNorm() - p.radius * p.radius;
        const double disc = b * b - a * c;
        if (disc < 0.0)
            return std::nullopt;
        const double sq = std::sqrt(disc);
        double t = (-b - sq) / a;
        if (!(t > tMin && t < tMax))
            t = (-b + sq) / a;
        if (!(t > tMin && t < tMax))
            return std::nullopt;
        hit.t = t;
        hit.point = origin + t * dir;
        const Vec3 local = p.rotation.transpose() * (hit.point - p.center) / p.radius;
        hit.st = Vec2(p.radius * std::atan2(local.y(), local.x()), p.radius * std::acos(std::clamp(local.z(), -1.0, 1.0)));
        return hit;
    }

    const Vec3 n = p.rotation.col(2);
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-15)
        return std::nullopt;
    const double t = n.dot(p.center - origin) / denom;
    if (!(t > tMin && t < tMax))
        return std::nullopt;
    hit.t = t;
    hit.point = origin + t * dir;
    const Vec3 local = p.rotation.transpose() * (hit.point - p.center);
    hit.st = local.head<2>();
    if (p.kind == PrimitiveKind::Rectangle && (std::abs(hit.st.x()) > p.halfWidth || std::abs(hit.st.y()) > p.halfHeight))
        return std::nullopt;
    if (p.kind == PrimitiveKind::Disk && hit.st.squaredNorm() > p.radius * p.radius)
        return std::nullopt;
    return hit;
}

std::optional<SurfaceHit> intersectScene(const std::vector<Primitive>& surfaces, const Vec3& origin, const Vec3& dir,
                                         double tMin, double tMax)
{
    std::optional<SurfaceHit> best;
    for (std::size_t i = 0; i < surfaces.size(); ++i)
    {
        auto h = intersectPrimitive(surfaces[i], origin, dir, tMin, best ? best->t : tMax);
        if (h)
        {
            h->primitive = static_cast<int>(i);
            best = h;
        }
    }
    return best;
}

DepthMap renderDepth(const SceneSpec& scene, const CameraModel& camera, const DepthRenderOptions& options)
{
    const auto surfaces = scene.surfaces();
    const Intrinsics& K = camera.intrinsics;
    DepthMap dm(K.width, K.height, K);
    dm.distortion = camera.distortion;
    const Vec3 origin = camera.centerInDepthFrame();

    parallelRows(K.height, [&](int row) {
        for (int col = 0; col < K.width; ++col)
        {
            Vec3 dir;
            try
            {
                dir = rayInDepthFrame(camera, col, row);
            }
            catch (const NumericError&)
            {
                continue;
            }
            if (const auto hit = intersectScene(surfaces, origin, dir))
            {
                const double z = camera.fromDepth.apply(hit->point).z();
                if (z > 0.0)
                    dm.set(col, row, z);
            }
        }
    });

    if (!options.flyingPixels && options.noiseSigma == 0.0 && options.bias == 0.0)
        return dm;

    std::mt19937_64 rng(options.seed);
    if (options.flyingPixels)
    {
        // Blend silhouette pixels towards the far side of the depth step.
        constexpr double kStep = 0.03;
        const DepthMap exact = dm;
        std::uniform_real_distribution<double> mix(0.25, 0.75);
        for (int row = 0; row < dm.height; ++row)
            for (int col = 0; col < dm.width; ++col)
            {
                if (!exact.isValid(col, row))
                    continue;
                const double z = exact.at(col, row);
                double farthest = z;
                const int dc[4] = {1, -1, 0, 0};
                const int dr[4] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k)
                {
                    const int c = col + dc[k], r = row + dr[k];
                    if (c < 0 || r < 0 || c >= dm.width || r >= dm.height || !exact.isValid(c, r))
                        continue;
                    if (std::abs(exact.at(c, r) - z) > kStep && std::abs(exact.at(c, r) - z) > std::abs(farthest - z))
                        farthest = exact.at(c, r);
                }
                if (farthest != z)
                    dm.set(col, row, z + mix(rng) * (farthest - z));
            }
    }
    if (options.noiseSigma > 0.0 || options.bias != 0.0)
    {
        std::normal_distribution<double> noise(0.0, 1.0);
        for (int row = 0; row < dm.height; ++row)
            for (int col = 0; col < dm.width; ++col)
            {
                if (!dm.isValid(col, row))
                    continue;
                double z = dm.at(col, row) + options.bias;
                if (options.noiseSigma > 0.0)
                    z += options.noiseSigma * noise(rng);
                if (z > 0.0)
                    dm.set(col, row, z);
                else
                    dm.invalidate(col, row);
            }
    }
    return dm;
}

RenderedImage renderModality(const SceneSpec& scene, const CameraModel& camera)
{
    const auto surfaces = scene.surfaces();
    const Intrinsics& K = camera.intrinsics;
    RenderedImage out;
    out.image = Image(K.width, K.height, 1, SampleType::F32);
    out.valid.assign(static_cast<std::size_t>(K.width) * K.height, 0);
    const Vec3 origin = camera.centerInDepthFrame();

    parallelRows(K.height, [&](int row) {
        for (int col = 0; col < K.width; ++col)
        {
            Vec3 dir;
            try
            {
                dir = rayInDepthFrame(camera, col, row);
            }
            catch (const NumericError&)
            {
                continue;
            }
            if (const auto hit = intersectScene(surfaces, origin, dir))
            {
                out.image.at(col, row) = static_cast<float>(surfaces[hit->primitive].texture.evaluate(hit->st));
                out.valid[static_cast<std::size_t>(row) * K.width + col] = 1;
            }
        }
    });
    return out;
}

bool inDepthShadow(const std::vector<Primitive>& occluders, const Vec3& p)
{
    const double len = p.norm();
    if (!(len > kShadowEpsilon))
        return false;
    const Vec3 dir = p / len;
    for (const auto& prim : occluders)
        if (intersectPrimitive(prim, Vec3::Zero(), dir, 0.0, len - kShadowEpsilon))
            return true;
    return false;
}

GroundTruth groundTruth(const SceneSpec& scene, const CameraRig& rig, const std::string& targetId,
                        const GroundTruthOptions& options)
{
    const auto surfaces = scene.surfaces();
    const auto& occluders = scene.primitives;
    const int groundIndex = scene.ground ? static_cast<int>(scene.primitives.size()) : -1;
    double zTop = std::numeric_limits<double>::infinity();
    for (const auto& p : occluders)
        zTop = std::min(zTop, topZ(p));

    const CameraModel& target = rig.camera(targetId);
    GroundTruth gt;
    gt.targetId = targetId;
    gt.width = target.intrinsics.width;
    gt.height = target.intrinsics.height;
    const std::size_t n = static_cast<std::size_t>(gt.width) * gt.height;
    gt.hit.assign(n, 0);
    gt.objectHit.assign(n, 0);
    gt.point.assign(n, Vec3::Zero());
    gt.primitive.assign(n, -1);
    gt.incomingOccluded.assign(n, 0);
    for (const auto& cam : rig.cameras)
    {
        if (cam.id == targetId)
            continue;
        GroundTruthSource s;
        s.cameraId = cam.id;
        s.pixel.assign(n, PixelCoord{-1.0, -1.0});
        s.inBounds.assign(n, 0);
        s.visible.assign(n, 0);
        s.outgoingOccluded.assign(n, 0);
        gt.sources.push_back(std::move(s));
    }

    const Vec3 origin = target.centerInDepthFrame();
    const double step = options.sampleStep;
    const bool sampleVolume = options.occludedVolume && !occluders.empty();

    parallelRows(gt.height, [&](int row) {
        for (int col = 0; col < gt.width; ++col)
        {
            const std::size_t i = gt.index(col, row);
            Vec3 dir;
            try
            {
                dir = rayInDepthFrame(target, col, row);
            }
            catch (const NumericError&)
            {
                continue;
            }
            const auto hit = intersectScene(surfaces, origin, dir);
            if (hit)
            {
                gt.hit[i] = 1;
                gt.objectHit[i] = hit->primitive != groundIndex;
                gt.point[i] = hit->point;
                gt.primitive[i] = hit->primitive;
            }

            if (sampleVolume)
            {
                double tEnd = hit ? hit->t : 3.0;
                if (dir.z() > 0.0)
                    tEnd = std::min(tEnd, (scene.groundZ - origin.z()) / dir.z());
                double t0 = 0.0;
                if (dir.z() > 0.0 && std::isfinite(zTop))
                    t0 = std::max(0.0, (zTop - origin.z()) / dir.z());
                for (long k = static_cast<long>(std::ceil(t0 / step)); k * step < tEnd; ++k)
                {
                    const Vec3 s = origin + (k * step) * dir;
                    if (inDepthShadow(occluders, s))
                    {
                        gt.incomingOccluded[i] = 1;
                        break;
                    }
                }
            }

            if (!hit)
                continue;
            for (auto& src : gt.sources)
            {
                const CameraModel& cam = rig.camera(src.cameraId);
                const Vec3 pc = cam.fromDepth.apply(hit->point);
                if (pc.z() > 0.0)
                {
                    const auto px = cam.projectToPixel(pc);
                    src.pixel[i] = *px;
                    src.inBounds[i] = cam.intrinsics.contains(*px);
                }
                const Vec3 toCam = cam.centerInDepthFrame() - hit->point;
                const double len = toCam.norm();
                const Vec3 d = toCam / len;
                src.visible[i] = !intersectScene(surfaces, hit->point, d, kShadowEpsilon, len - kShadowEpsilon);

                if (sampleVolume && options.outgoingVolume)
                {
                    for (long k = 1; k * step < len; ++k)
                    {
                        const Vec3 s = hit->point + (k * step) * d;
                        if (s.z() < zTop)
                            break;
                        if (s.z() < scene.groundZ && inDepthShadow(occluders, s))
                        {
                            src.outgoingOccluded[i] = 1;
                            break;
                        }
                    }
                }
            }
        }
    });
    return gt;
}

RigidTransform lookAt(const Vec3& position, const Vec3& target, FrameId to)
{
    const Vec3 z = (target - position).normalized();
    const Vec3 x = Vec3::UnitY().cross(z).normalized();
    const Vec3 y = z.cross(x);
    Mat3 R;
    R.row(0) = x.transpose();
    R.row(1) = y.transpose();
    R.row(2) = z.transpose();
    return RigidTransform(R, -(R * position), FrameId::camera(0), to);
}

SceneSpec deskScene()
{
    SceneSpec s;
    s.ground = true;
    s.groundZ = 1.2;
    s.groundTexture.kind = Texture::Kind::Checker;
    s.groundTexture.pitch = 0.04;
    s.groundTexture.a = 0.1;
    s.groundTexture.b = 0.3;
    s.roi = Roi{-0.6, 0.6, -0.6, 0.6, 0.3, 1.15};

    auto leaf = [](const char* name, Vec3 c, Vec3 rotDeg, double hw, double hh, Texture t) {
        Primitive p;
        p.kind = PrimitiveKind::Rectangle;
        p.name = name;
        p.center = c;
        p.rotation = rotationFromVector(rotDeg * (3.14159265358979323846 / 180.0));
        p.halfWidth = hw;
        p.halfHeight = hh;
        p.texture = t;
        return p;
    };
    Texture grad;
    grad.kind = Texture::Kind::Gradient;
    grad.gradient = Vec2(2.0, 1.0);
    grad.offset = 0.5;
    Texture check;
    check.kind = Texture::Kind::Checker;
    check.pitch = 0.01;
    check.a = 0.2;
    check.b = 0.9;
    s.primitives.push_back(leaf("leaf_top", Vec3(-0.05, -0.03, 0.72), Vec3(6, -4, 20), 0.08, 0.05, check));
    s.primitives.push_back(leaf("leaf_mid", Vec3(0.08, 0.06, 0.86), Vec3(-8, 3, -15), 0.10, 0.06, grad));
    Primitive disk;
    disk.kind = PrimitiveKind::Disk;
    disk.name = "disk";
    disk.center = Vec3(-0.15, 0.12, 0.95);
    disk.rotation = rotationFromVector(Vec3(0.1, 0.05, 0.0));
    disk.radius = 0.07;
    disk.texture = check;
    s.primitives.push_back(disk);
    Primitive ball;
    ball.kind = PrimitiveKind::Sphere;
    ball.name = "fruit";
    ball.center = Vec3(0.18, -0.14, 1.0);
    ball.radius = 0.05;
    ball.texture = grad;
    s.primitives.push_back(ball);

    return s;
}

CameraRig defaultRig(bool withDistortion)
{
    CameraModel depth;
    depth.id = "depth";
    depth.modality = "depth";
    depth.intrinsics = Intrinsics{500.0, 500.0, 320.0, 288.0, 640, 576};

    CameraModel narrow;
    narrow.id = "narrow";
    narrow.modality = "thermal";
    narrow.intrinsics = Intrinsics{480.0, 480.0, 322.0, 238.5, 640, 480};
    narrow.fromDepth = lookAt(Vec3(0.10, 0.0, 0.0), Vec3(0.0, 0.0, 0.8), FrameId::camera(1));

    CameraModel wide;
    wide.id = "wide";
    wide.modality = "multispectral";
    wide.intrinsics = Intrinsics{450.0, 452.0, 318.5, 241.0, 640, 480};
    wide.fromDepth = lookAt(Vec3(-0.40, 0.0, 0.0), Vec3(0.0, 0.0, 0.8), FrameId::camera(2));

    if (withDistortion)
    {
        narrow.distortion = Distortion{-0.08, 0.02, 0.0, 0.0005, -0.0003};
        wide.distortion = Distortion{0.05, -0.01, 0.0, -0.0004, 0.0002};
    }
    return makeRig({depth, narrow, wide}, "depth");
}

std::vector<RigidTransform> boardPoses(const BoardSpec& board, int count, std::uint64_t seed, double minZ, double maxZ)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const Vec3 gridCenter(0.5 * (board.cols - 1) * board.squareSize, 0.5 * (board.rows - 1) * board.squareSize, 0.0);
    std::vector<RigidTransform> poses;
    for (int i = 0; i < count; ++i)
    {
        const double axisAngle = 2.0 * kPi * uni(rng);
        const double tilt = (5.0 + 30.0 * uni(rng)) * kPi / 180.0;
        const double spin = (-20.0 + 40.0 * uni(rng)) * kPi / 180.0;
        const Mat3 R = (Eigen::AngleAxisd(tilt, Vec3(std::cos(axisAngle), std::sin(axisAngle), 0.0)) *
                        Eigen::AngleAxisd(spin, Vec3::UnitZ()))
                           .toRotationMatrix();
        const Vec3 center(-0.08 + 0.16 * uni(rng), -0.06 + 0.12 * uni(rng), minZ + (maxZ - minZ) * uni(rng));
        poses.emplace_back(R, center - R * gridCenter, FrameId::board(), FrameId::camera(0));
    }
    return poses;
}

namespace {

bool poseVisible(const CameraRig& rig, const BoardSpec& board, const RigidTransform& pose)
{
    for (const auto& cam : rig.cameras)
        for (int r = 0; r < board.rows; ++r)
            for (int c = 0; c < board.cols; ++c)
            {
                const Vec2 b = board.cornerPosition(r, c);
                const Vec3 pc = cam.fromDepth.apply(pose.apply(Vec3(b.x(), b.y(), 0.0)));
                const auto px = cam.projectToPixel(pc);
                if (!px || !cam.intrinsics.contains(*px))
                    return false;
            }
    return true;
}

} // namespace

std::vector<RigidTransform> visibleBoardPoses(const CameraRig& rig, const BoardSpec& board, int count,
                                              std::uint64_t seed, double minZ, double maxZ)
{
    std::vector<RigidTransform> out;
    for (std::uint64_t attempt = 0; static_cast<int>(out.size()) < count; ++attempt)
    {
        if (attempt > 1000)
            throw UsageError("could not place enough board poses visible to every camera");
        for (const auto& p : boardPoses(board, 1, seed * 7919 + attempt, minZ, maxZ))
            if (poseVisible(rig, board, p))
                out.push_back(p);
    }
    return out;
}

std::string viewName(std::size_t i)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "v%03zu", i);
    return buf;
}

std::vector<CalibrationView> makeCheckerboardViews(const CameraRig& rig, const BoardSpec& board,
                                                   const std::vector<RigidTransform>& poses, double noiseSigma,
                                                   std::uint64_t seed, std::vector<std::string>* warnings,
                                                   std::vector<std::string>* acceptedViewIds)
{
    board.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<CalibrationView> views;
    for (std::size_t i = 0; i < poses.size(); ++i)
    {
        if (!poseVisible(rig, board, poses[i]))
        {
            if (warnings)
                warnings->push_back("pose " + viewName(i) + " rejected: board not fully visible in every camera");
            continue;
        }
        if (acceptedViewIds)
            acceptedViewIds->push_back(viewName(i));
        for (const auto& cam : rig.cameras)
        {
            CalibrationView view;
            view.cameraId = cam.id;
            view.viewId = viewName(i);
            for (int r = 0; r < board.rows; ++r)
                for (int c = 0; c < board.cols; ++c)
                {
                    CornerObservation obs;
                    obs.row = r;
                    obs.col = c;
                    obs.boardPoint = board.cornerPosition(r, c);
                    const Vec3 pc = cam.fromDepth.apply(poses[i].apply(Vec3(obs.boardPoint.x(), obs.boardPoint.y(), 0.0)));
                    obs.imagePoint = *cam.projectToPixel(pc);
                    if (noiseSigma > 0.0)
                    {
                        obs.imagePoint.u += noiseSigma * noise(rng);
                        obs.imagePoint.v += noiseSigma * noise(rng);
                    }
                    view.corners.push_back(obs);
                }
            views.push_back(std::move(view));
        }
    }
    if (views.empty())
        throw UsageError("no valid board pose");
    return views;
}

Primitive boardPrimitive(const BoardSpec& board, const RigidTransform& boardToDepth, double margin)
{
    Primitive p;
    p.kind = PrimitiveKind::Rectangle;
    p.name = "board";
    const Vec3 gridCenter(0.5 * (board.cols - 1) * board.squareSize, 0.5 * (board.rows - 1) * board.squareSize, 0.0);
    p.center = boardToDepth.apply(gridCenter);
    p.rotation = boardToDepth.rotation();
    p.halfWidth = 0.5 * (board.cols - 1) * board.squareSize + margin;
    p.halfHeight = 0.5 * (board.rows - 1) * board.squareSize + margin;
    p.texture.kind = Texture::Kind::Checker;
    p.texture.pitch = board.squareSize;
    p.texture.a = 0.0;
    p.texture.b = 1.0;
    return p;
}

} // namespace mmreg::synth
