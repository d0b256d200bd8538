#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mmreg/registration.hpp"
#include "mmreg/synthetic.hpp"

namespace fixtures {

using namespace mmreg;

// Edges sit 1e-6 px outside the centres of the bounding depth pixels, so the
// mesh built from the rendered depth covers exactly the same pixel rays as the
// analytic rectangle.
inline synth::Primitive alignedRect(const Intrinsics& K, const std::string& name, double z, int c0, int c1, int r0,
                                    int r1, double value)
{
    constexpr double kDelta = 1e-6;
    const double x0 = (c0 + 0.5 - K.cx - kDelta) * z / K.fx;
    const double x1 = (c1 + 0.5 - K.cx + kDelta) * z / K.fx;
    const double y0 = (r0 + 0.5 - K.cy - kDelta) * z / K.fy;
    const double y1 = (r1 + 0.5 - K.cy + kDelta) * z / K.fy;
    synth::Primitive p;
    p.kind = synth::PrimitiveKind::Rectangle;
    p.name = name;
    p.center = Vec3(0.5 * (x0 + x1), 0.5 * (y0 + y1), z);
    p.halfWidth = 0.5 * (x1 - x0);
    p.halfHeight = 0.5 * (y1 - y0);
    p.texture.kind = synth::Texture::Kind::Constant;
    p.texture.a = value;
    return p;
}

inline synth::SceneSpec flatGround(double groundZ)
{
    synth::SceneSpec s;
    s.ground = true;
    s.groundZ = groundZ;
    s.groundTexture.kind = synth::Texture::Kind::Checker;
    s.groundTexture.pitch = 0.03;
    s.groundTexture.a = 0.2;
    s.groundTexture.b = 0.6;
    // The ground stays inside the ROI so it is meshed and can be occluded.
    s.roi = Roi{-2.0, 2.0, -2.0, 2.0, 0.1, groundZ + 1e-6};
    return s;
}

inline synth::SceneSpec twoPlaneScene(const Intrinsics& K)
{
    synth::SceneSpec s = flatGround(1.0);
    s.primitives.push_back(alignedRect(K, "upper", 0.6, 40, 330, 60, 520, 0.9));
    return s;
}

inline synth::SceneSpec twoLeafScene(const Intrinsics& K)
{
    synth::SceneSpec s = flatGround(1.0);
    s.primitives.push_back(alignedRect(K, "leaf_high", 0.55, 200, 330, 170, 300, 0.9));
    s.primitives.push_back(alignedRect(K, "leaf_low", 0.72, 290, 430, 200, 280, 0.7));
    return s;
}

// A leaf thin enough that outgoing rays can pass under it and out of its shadow
// before reaching the ground.
inline synth::SceneSpec thinLeafScene(const Intrinsics& K)
{
    synth::SceneSpec s = flatGround(1.0);
    s.primitives.push_back(alignedRect(K, "stem", 0.6, 300, 320, 150, 420, 0.9));
    return s;
}

inline synth::SceneSpec mixedScene(const Intrinsics& K)
{
    synth::SceneSpec s = twoLeafScene(K);
    s.primitives.push_back(alignedRect(K, "stem", 0.65, 110, 126, 80, 460, 0.5));
    return s;
}

inline RegistrationSettings settingsFor(const synth::SceneSpec& s)
{
    RegistrationSettings r;
    r.roi = s.roi;
    r.groundZ = s.roi.zMax;
    return r;
}

inline std::map<std::string, Image> renderImages(const synth::SceneSpec& s, const CameraRig& rig)
{
    std::map<std::string, Image> images;
    for (const auto& cam : rig.cameras)
        images.emplace(cam.id, synth::renderModality(s, cam).image);
    return images;
}

inline RegistrationResult registerScene(const synth::SceneSpec& s, const CameraRig& rig, const std::string& target,
                                        const synth::DepthRenderOptions& depthOptions = {})
{
    const DepthMap depth = synth::renderDepth(s, rig.depthCamera(), depthOptions);
    return registerAll(rig, target, depth, settingsFor(s), renderImages(s, rig));
}

struct MappingError
{
    double mean = 0.0;
    std::size_t count = 0;
};

// Distance between mapped and true source pixels over P1 pixels that the
// analytic scene also sees from the source.
inline MappingError mappingError(const RegistrationResult& r, const synth::GroundTruth& gt, const std::string& sourceId)
{
    const auto& cmap = r.sources.at(sourceId).correspondence;
    const synth::GroundTruthSource* src = nullptr;
    for (const auto& s : gt.sources)
        if (s.cameraId == sourceId)
            src = &s;
    MappingError e;
    if (!src)
        return e;
    double sum = 0.0;
    for (std::size_t i = 0; i < cmap.pixels.size(); ++i)
    {
        const auto& c = cmap.pixels[i];
        if (!c.mapped || c.pcase != ProjectionCase::P1_CertainMatch || !gt.hit[i] || !src->inBounds[i] ||
            !src->visible[i])
            continue;
        sum += std::hypot(c.source.u - src->pixel[i].u, c.source.v - src->pixel[i].v);
        ++e.count;
    }
    e.mean = e.count ? sum / e.count : 0.0;
    return e;
}

struct BoardSuite
{
    std::vector<CalibrationView> views;
    std::map<std::string, DepthMap> depth;
};

// Checkerboard poses seen by every camera, noisy corners and a depth map of the
// board alone per view.
inline BoardSuite boardSuite(const CameraRig& rig, int poses, std::uint64_t seed, double cornerNoise,
                             const synth::DepthRenderOptions& depthOptions = {})
{
    const BoardSpec board;
    const auto p = synth::visibleBoardPoses(rig, board, poses, seed);
    BoardSuite suite;
    std::vector<std::string> ids;
    suite.views = synth::makeCheckerboardViews(rig, board, p, cornerNoise, seed + 1, nullptr, &ids);
    for (std::size_t i = 0; i < p.size(); ++i)
    {
        synth::SceneSpec scene;
        scene.ground = false;
        scene.primitives.push_back(synth::boardPrimitive(board, p[i], board.squareSize));
        synth::DepthRenderOptions o = depthOptions;
        o.seed = depthOptions.seed + 1000 + i;
        suite.depth.emplace(synth::viewName(i), synth::renderDepth(scene, rig.depthCamera(), o));
    }
    return suite;
}

inline std::vector<CalibrationView> viewsOf(const std::vector<CalibrationView>& all, const std::string& cameraId)
{
    std::vector<CalibrationView> out;
    for (const auto& v : all)
        if (v.cameraId == cameraId)
            out.push_back(v);
    return out;
}

// Segment from `from` to `to` blocked by some analytic surface before `to`.
inline bool segmentBlocked(const std::vector<synth::Primitive>& surfaces, const Vec3& from, const Vec3& to,
                           double epsilon)
{
    const Vec3 d = to - from;
    const double len = d.norm();
    return bool(synth::intersectScene(surfaces, from, d / len, epsilon, len - epsilon));
}

} // namespace fixtures
