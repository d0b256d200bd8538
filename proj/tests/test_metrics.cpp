#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mmreg/errors.hpp"
#include "mmreg/metrics.hpp"

using namespace mmreg;
using namespace fixtures;

namespace {

std::map<std::string, double> byCorner(const PairError& e)
{
    std::map<std::string, double> out;
    for (const auto& r : e.residuals)
        out[r.viewId + ":" + std::to_string(r.row) + ":" + std::to_string(r.col)] = r.error;
    return out;
}

CalibrationView oneCorner(const std::string& cam, const std::string& view, double u, double v)
{
    CalibrationView cv;
    cv.cameraId = cam;
    cv.viewId = view;
    cv.corners.push_back({0, 0, Vec2::Zero(), {u, v}});
    return cv;
}

} // namespace

TEST(Normalize, Examples)
{
    EXPECT_DOUBLE_EQ(normalizeError(1.0, 1000, 1000), 1.0);
    EXPECT_NEAR(normalizeError(0.55, 3840, 2160), 0.19, 0.005);
    EXPECT_NEAR(normalizeError(0.93, 640, 480), 1.68, 0.005);
    for (double a : {0.5, 2.0, 7.25})
        EXPECT_DOUBLE_EQ(normalizeError(a * 0.37, 512, 424), a * normalizeError(0.37, 512, 424));
}

TEST(IntrinsicError, NoiselessAndNoisy)
{
    const CameraRig rig = synth::defaultRig(true);
    for (double sigma : {0.0, 0.1})
    {
        const BoardSuite suite = boardSuite(rig, 23, 5, sigma);
        std::map<std::string, std::pair<int, int>> sizes;
        for (const auto& c : rig.cameras)
            sizes[c.id] = {c.intrinsics.width, c.intrinsics.height};
        const CalibrationResult cal = calibrateRig(suite.views, sizes);
        for (const auto& [id, c] : cal.cameras)
        {
            std::vector<CornerResidual> res;
            const double e = intrinsicError(c, viewsOf(suite.views, id), &res);
            if (sigma == 0.0)
                EXPECT_LT(e, 1e-8) << id;
            else
            {
                EXPECT_GE(e, 0.05) << id;
                EXPECT_LE(e, 0.15) << id;
            }
            double sum = 0.0;
            for (const auto& r : res)
                sum += r.error;
            EXPECT_NEAR(e, sum / res.size(), 1e-12);
            EXPECT_NEAR(e, c.meanReprojectionError, 1e-12);
        }
    }
}

TEST(ExtrinsicError, PerfectPairIsZero)
{
    const CameraRig rig = synth::defaultRig(true);
    const BoardSuite suite = boardSuite(rig, 5, 7, 0.0);
    for (const auto& [a, b] : {std::pair{"depth", "narrow"}, {"narrow", "wide"}, {"wide", "depth"}})
    {
        const PairError e = extrinsicError(rig.camera(a), rig.camera(b), viewsOf(suite.views, a), viewsOf(suite.views, b), 0.3, 1.2);
        EXPECT_LT(e.mean, 1e-8);
        EXPECT_EQ(e.used, 5u * 54u);
    }
}

TEST(ExtrinsicError, EpipoleDegeneracyUsesPointDistance)
{
    CameraModel a, b;
    a.id = "a";
    b.id = "b";
    a.intrinsics = b.intrinsics = Intrinsics{400, 400, 320, 240, 640, 480};
    a.fromDepth = RigidTransform::identity(FrameId::camera(0));
    b.fromDepth = RigidTransform(Mat3::Identity(), Vec3(0, 0, -0.2), FrameId::camera(0), FrameId::camera(1));
    const CameraRig rig = makeRig({a, b}, "a");
    // The corner on the optical axis maps to the epipole at every depth.
    const auto va = std::vector<CalibrationView>{oneCorner("a", "v", 320, 240)};
    const auto vb = std::vector<CalibrationView>{oneCorner("b", "v", 323, 244)};
    const PairError e = extrinsicError(rig.camera("a"), rig.camera("b"), va, vb, 0.3, 1.2);
    ASSERT_EQ(e.used, 1u);
    EXPECT_NEAR(e.mean, 5.0, 1e-9);
}

TEST(ExtrinsicError, BehindCameraIsSkipped)
{
    CameraModel a, b;
    a.id = "a";
    b.id = "b";
    a.intrinsics = b.intrinsics = Intrinsics{400, 400, 320, 240, 640, 480};
    a.fromDepth = RigidTransform::identity(FrameId::camera(0));
    // b sits 0.5 m in front of a and looks back at it.
    const Mat3 flip = Eigen::AngleAxisd(3.14159265358979323846, Vec3::UnitY()).toRotationMatrix();
    b.fromDepth = RigidTransform(flip, flip * Vec3(0, 0, -0.5), FrameId::camera(0), FrameId::camera(1));
    const CameraRig rig = makeRig({a, b}, "a");
    const auto va = std::vector<CalibrationView>{oneCorner("a", "v", 330, 250)};
    const auto vb = std::vector<CalibrationView>{oneCorner("b", "v", 300, 200)};
    const PairError e = extrinsicError(rig.camera("a"), rig.camera("b"), va, vb, 0.3, 1.2);
    EXPECT_EQ(e.used, 0u);
    EXPECT_EQ(e.skipped, 1u);
    EXPECT_FALSE(e.warnings.empty());
    EXPECT_TRUE(std::isnan(e.mean));
}

TEST(DepthError, ExactDepthAndEpipolarBound)
{
    const CameraRig rig = synth::defaultRig(false);
    const BoardSuite exact = boardSuite(rig, 6, 9, 0.0);
    const BoardSuite noisy = boardSuite(rig, 6, 9, 0.2);
    for (const auto& [a, b] : {std::pair{"depth", "narrow"}, {"narrow", "wide"}, {"wide", "depth"}, {"depth", "wide"}})
    {
        const PairError d = depthError(rig, a, b, viewsOf(exact.views, a), viewsOf(exact.views, b), exact.depth, Roi{});
        EXPECT_LT(d.mean, 1e-6) << a << "->" << b;
        EXPECT_EQ(d.skipped, 0u);

        const PairError dn = depthError(rig, a, b, viewsOf(noisy.views, a), viewsOf(noisy.views, b), noisy.depth, Roi{});
        const PairError en = extrinsicError(rig.camera(a), rig.camera(b), viewsOf(noisy.views, a), viewsOf(noisy.views, b), 0.3, 1.2);
        const auto dm = byCorner(dn);
        const auto em = byCorner(en);
        ASSERT_EQ(dm.size(), em.size());
        for (const auto& [key, err] : dm)
            EXPECT_LE(em.at(key), err + 1e-9) << key;
    }
}

TEST(DepthError, BiasHurtsWideBaselineMore)
{
    const CameraRig rig = synth::defaultRig(true);
    synth::DepthRenderOptions biased;
    biased.bias = 0.005;
    const BoardSuite suite = boardSuite(rig, 10, 11, 0.0, biased);
    const auto dv = viewsOf(suite.views, "depth");
    const PairError narrow = depthError(rig, "depth", "narrow", dv, viewsOf(suite.views, "narrow"), suite.depth, Roi{});
    const PairError wide = depthError(rig, "depth", "wide", dv, viewsOf(suite.views, "wide"), suite.depth, Roi{});
    EXPECT_GT(wide.mean, narrow.mean);
    EXPECT_GT(narrow.mean, 0.0);
}

TEST(DepthError, MissingDepthMapAndInvalidViews)
{
    const CameraRig rig = synth::defaultRig(true);
    BoardSuite suite = boardSuite(rig, 3, 13, 0.0);
    const auto dv = viewsOf(suite.views, "depth");
    const auto nv = viewsOf(suite.views, "narrow");

    auto missing = suite.depth;
    missing.erase(dv[0].viewId);
    EXPECT_THROW(depthError(rig, "depth", "narrow", dv, nv, missing, Roi{}), UsageError);

    // Blank out most of the first view's depth map.
    DepthMap& dm = suite.depth.at(dv[0].viewId);
    for (int r = 0; r < dm.height; ++r)
        for (int c = 0; c < dm.width * 3 / 4; ++c)
            dm.invalidate(c, r);
    const PairError e = depthError(rig, "depth", "narrow", dv, nv, suite.depth, Roi{});
    ASSERT_EQ(e.invalidViews.size(), 1u);
    EXPECT_EQ(e.invalidViews[0], dv[0].viewId);
    EXPECT_EQ(e.used, 2u * 54u);
    EXPECT_LT(e.mean, 1e-6);
}

TEST(Report, TablesAndNormalization)
{
    const CameraRig rig = synth::defaultRig(true);
    const BoardSuite suite = boardSuite(rig, 8, 15, 0.1);
    EvaluationSettings s;
    const ErrorReport rep = evaluateRig(rig, suite.views, suite.depth, s);
    EXPECT_EQ(rep.cameraIds.size(), 3u);
    EXPECT_EQ(rep.extrinsic.size(), 6u);
    EXPECT_EQ(rep.depth.size(), 6u);
    for (const auto& [pair, e] : rep.extrinsic)
    {
        EXPECT_GT(e.mean, 0.0);
        EXPECT_LT(e.mean, 1.0);
        const auto [w, h] = rep.sizes.at(pair.second);
        EXPECT_DOUBLE_EQ(rep.normalized(e.mean, pair.second), e.mean * 1000.0 / std::sqrt(double(w) * h));
    }
    std::ostringstream os;
    writeReport(os, rep);
    const std::string text = os.str();
    EXPECT_NE(text.find("extrinsic"), std::string::npos);
    EXPECT_NE(text.find("depth error"), std::string::npos);
    char cell[64];
    const auto& e = rep.extrinsic.at({"narrow", "wide"});
    std::snprintf(cell, sizeof cell, "%.4f (%.4f)", e.mean, rep.normalized(e.mean, "wide"));
    EXPECT_NE(text.find(cell), std::string::npos);

    std::ostringstream res;
    writeResiduals(res, rep);
    std::size_t lines = 0;
    for (char ch : res.str())
        lines += ch == '\n';
    EXPECT_GE(lines, 3u * 8u * 54u);
}
