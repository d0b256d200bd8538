#include "mmreg/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "mmreg/errors.hpp"
#include "mmreg/raycast.hpp"

namespace mmreg {

namespace {

using CornerKey = std::pair<int, int>;

std::map<std::string, const CalibrationView*> indexViews(const std::vector<CalibrationView>& views)
{
    std::map<std::string, const CalibrationView*> out;
    for (const auto& v : views)
        out[v.viewId] = &v;
    return out;
}

std::map<CornerKey, const CornerObservation*> indexCorners(const CalibrationView& v)
{
    std::map<CornerKey, const CornerObservation*> out;
    for (const auto& c : v.corners)
        out[{c.row, c.col}] = &c;
    return out;
}

// Undistorted pixel coordinate: K * undistort(K^-1 px).
Vec2 undistortedPixel(const CameraModel& cam, const PixelCoord& px)
{
    const Intrinsics& K = cam.intrinsics;
    Vec2 xn((px.u - K.cx) / K.fx, (px.v - K.cy) / K.fy);
    if (!cam.distortion.isZero())
        xn = undistort(cam.distortion, xn);
    return Vec2(K.fx * xn.x() + K.cx, K.fy * xn.y() + K.cy);
}

Vec2 pinholePixel(const Intrinsics& K, const Vec3& p)
{
    return Vec2(K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy);
}

double pointLineDistance(const Vec2& a, const Vec2& b, const Vec2& q)
{
    const Vec2 d = b - a;
    const double len = d.norm();
    if (len < 1e-12)
        return (q - a).norm();
    const Vec2 w = q - a;
    return std::abs(d.x() * w.y() - d.y() * w.x()) / len;
}

void finish(PairError& e)
{
    double sum = 0.0;
    for (const auto& r : e.residuals)
        sum += r.error;
    e.used = e.residuals.size();
    e.mean = e.used ? sum / static_cast<double>(e.used) : std::nan("");
}

std::string formatCell(double raw, double normalized)
{
    if (std::isnan(raw))
        return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f (%.4f)", raw, normalized);
    return buf;
}

} // namespace

double normalizeError(double err, int width, int height)
{
    if (width <= 0 || height <= 0)
        throw UsageError("normalize: image size must be positive");
    return err * 1000.0 / std::sqrt(static_cast<double>(width) * static_cast<double>(height));
}

double ErrorReport::normalized(double err, const std::string& cameraId) const
{
    const auto& s = sizes.at(cameraId);
    return normalizeError(err, s.first, s.second);
}

double intrinsicError(const CameraCalibration& calib, const std::vector<CalibrationView>& views,
                      std::vector<CornerResidual>* residuals)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& view : views)
    {
        auto pose = calib.boardPoses.find(view.viewId);
        if (pose == calib.boardPoses.end())
            continue;
        for (const auto& c : view.corners)
        {
            const PixelCoord p = projectBoardPoint(calib.intrinsics, calib.distortion, pose->second, c.boardPoint);
            const double e = std::hypot(p.u - c.imagePoint.u, p.v - c.imagePoint.v);
            sum += e;
            ++n;
            if (residuals)
                residuals->push_back({view.viewId, c.row, c.col, e});
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

PairError extrinsicError(const CameraModel& origin, const CameraModel& target,
                         const std::vector<CalibrationView>& originViews,
                         const std::vector<CalibrationView>& targetViews, double zNear, double zFar)
{
    if (!(zNear > 0.0 && zNear < zFar))
        throw UsageError("extrinsic error needs 0 < zNear < zFar");
    PairError e;
    e.originId = origin.id;
    e.targetId = target.id;
    const RigidTransform M = target.fromDepth.compose(origin.fromDepth.inverse());
    const auto targetById = indexViews(targetViews);

    for (const auto& ov : originViews)
    {
        auto tv = targetById.find(ov.viewId);
        if (tv == targetById.end())
            continue;
        const auto targetCorners = indexCorners(*tv->second);
        for (const auto& c : ov.corners)
        {
            auto tc = targetCorners.find({c.row, c.col});
            if (tc == targetCorners.end())
                continue;
            const Vec2 xo = undistortedPixel(origin, c.imagePoint);
            const Vec3 dir = backprojectDirection(origin.intrinsics, PixelCoord{xo.x(), xo.y()});
            const Vec3 pNear = M.apply(zNear * dir);
            const Vec3 pFar = M.apply(zFar * dir);
            if (!(pNear.z() > 0.0 && pFar.z() > 0.0))
            {
                ++e.skipped;
                e.warnings.push_back("view " + ov.viewId + " corner (" + std::to_string(c.row) + "," +
                                     std::to_string(c.col) + "): epipolar point behind " + target.id);
                continue;
            }
            const Vec2 q = undistortedPixel(target, tc->second->imagePoint);
            const double d =
                pointLineDistance(pinholePixel(target.intrinsics, pNear), pinholePixel(target.intrinsics, pFar), q);
            e.residuals.push_back({ov.viewId, c.row, c.col, d});
        }
    }
    finish(e);
    return e;
}

PairError depthError(const CameraRig& rig, const std::string& originId, const std::string& targetId,
                     const std::vector<CalibrationView>& originViews, const std::vector<CalibrationView>& targetViews,
                     const std::map<std::string, DepthMap>& depthByView, const Roi& roi)
{
    const CameraModel& origin = rig.camera(originId);
    const CameraModel& target = rig.camera(targetId);
    const CameraModel& depthCam = rig.depthCamera();
    PairError e;
    e.originId = originId;
    e.targetId = targetId;
    const auto targetById = indexViews(targetViews);
    const Vec3 rayOrigin = origin.centerInDepthFrame();
    const Mat3 toDepth = origin.fromDepth.rotation().transpose();

    for (const auto& ov : originViews)
    {
        auto tv = targetById.find(ov.viewId);
        if (tv == targetById.end())
            continue;
        auto dmIt = depthByView.find(ov.viewId);
        if (dmIt == depthByView.end())
            throw UsageError("missing depth map for view " + ov.viewId);
        DepthMap dm = dmIt->second;
        dm.intrinsics = depthCam.intrinsics;
        dm.distortion = depthCam.distortion;
        const TriangleMesh mesh = buildObjectMesh(depthToVertices(dm, roi), 90.0);
        const Bvh bvh(mesh);

        const auto targetCorners = indexCorners(*tv->second);
        std::vector<CornerResidual> viewResiduals;
        std::size_t misses = 0, total = 0;
        for (const auto& c : ov.corners)
        {
            auto tc = targetCorners.find({c.row, c.col});
            if (tc == targetCorners.end())
                continue;
            ++total;
            std::optional<Hit> hit;
            try
            {
                hit = bvh.intersectFirst(Ray::make(rayOrigin, toDepth * origin.rayDirection(c.imagePoint)));
            }
            catch (const NumericError&)
            {
            }
            const auto px = hit ? target.projectToPixel(target.fromDepth.apply(hit->point)) : std::nullopt;
            if (!px)
            {
                ++misses;
                continue;
            }
            const PixelCoord& obs = tc->second->imagePoint;
            viewResiduals.push_back({ov.viewId, c.row, c.col, std::hypot(px->u - obs.u, px->v - obs.v)});
        }
        e.skipped += misses;
        if (total > 0 && 2 * misses > total)
        {
            e.invalidViews.push_back(ov.viewId);
            e.warnings.push_back("view " + ov.viewId + ": " + std::to_string(misses) + " of " + std::to_string(total) +
                                 " corner rays missed the mesh, view excluded");
            continue;
        }
        e.residuals.insert(e.residuals.end(), viewResiduals.begin(), viewResiduals.end());
    }
    finish(e);
    return e;
}

ErrorReport evaluateRig(const CameraRig& rig, const std::vector<CalibrationView>& views,
                        const std::map<std::string, DepthMap>& depthByView, const EvaluationSettings& settings,
                        const CalibrationResult* calibration)
{
    rig.validate();
    ErrorReport report;
    std::map<std::string, std::vector<CalibrationView>> byCamera;
    for (const auto& v : views)
    {
        rig.indexOf(v.cameraId);
        byCamera[v.cameraId].push_back(v);
    }

    for (const auto& cam : rig.cameras)
    {
        report.cameraIds.push_back(cam.id);
        report.sizes[cam.id] = {cam.intrinsics.width, cam.intrinsics.height};
        const auto& camViews = byCamera[cam.id];
        if (camViews.empty())
            continue;
        CameraCalibration calib;
        if (calibration && calibration->cameras.count(cam.id))
            calib = calibration->cameras.at(cam.id);
        else
        {
            calib.cameraId = cam.id;
            calib.intrinsics = cam.intrinsics;
            calib.distortion = cam.distortion;
            for (const auto& v : camViews)
            {
                if (v.corners.size() < 4)
                    continue;
                calib.boardPoses[v.viewId] = estimateBoardPose(cam.intrinsics, cam.distortion, v);
            }
        }
        report.intrinsic[cam.id] = intrinsicError(calib, camViews, &report.intrinsicResiduals[cam.id]);
    }

    for (const auto& a : rig.cameras)
        for (const auto& b : rig.cameras)
        {
            if (a.id == b.id || byCamera[a.id].empty() || byCamera[b.id].empty())
                continue;
            auto ext = extrinsicError(a, b, byCamera[a.id], byCamera[b.id], settings.zNear, settings.zFar);
            for (const auto& w : ext.warnings)
                report.warnings.push_back("extrinsic " + a.id + "->" + b.id + ": " + w);
            report.extrinsic[{a.id, b.id}] = std::move(ext);
            if (settings.depth)
            {
                auto dep = depthError(rig, a.id, b.id, byCamera[a.id], byCamera[b.id], depthByView, settings.roi);
                for (const auto& w : dep.warnings)
                    report.warnings.push_back("depth " + a.id + "->" + b.id + ": " + w);
                report.depth[{a.id, b.id}] = std::move(dep);
            }
        }
    return report;
}

void writeReport(std::ostream& os, const ErrorReport& report)
{
    char line[256];
    os << "# intrinsic reprojection error, pixels (normalized)\n";
    for (const auto& id : report.cameraIds)
    {
        auto it = report.intrinsic.find(id);
        const double raw = it == report.intrinsic.end() ? std::nan("") : it->second;
        std::snprintf(line, sizeof line, "%-16s %s\n", id.c_str(),
                      formatCell(raw, std::isnan(raw) ? raw : report.normalized(raw, id)).c_str());
        os << line;
    }

    auto table = [&](const char* title, const std::map<std::pair<std::string, std::string>, PairError>& cells) {
        os << "\n# " << title << ", pixels (normalized); rows: originating camera, columns: measured in\n";
        std::snprintf(line, sizeof line, "%-16s", "");
        os << line;
        for (const auto& col : report.cameraIds)
        {
            std::snprintf(line, sizeof line, " %-22s", col.c_str());
            os << line;
        }
        os << '\n';
        for (const auto& row : report.cameraIds)
        {
            std::snprintf(line, sizeof line, "%-16s", row.c_str());
            os << line;
            for (const auto& col : report.cameraIds)
            {
                std::string cell = "-";
                auto it = cells.find({row, col});
                if (it != cells.end())
                    cell = formatCell(it->second.mean,
                                      std::isnan(it->second.mean) ? it->second.mean
                                                                  : report.normalized(it->second.mean, col));
                std::snprintf(line, sizeof line, " %-22s", cell.c_str());
                os << line;
            }
            os << '\n';
        }
    };
    table("extrinsic error", report.extrinsic);
    if (!report.depth.empty())
        table("depth error", report.depth);

    if (!report.warnings.empty())
    {
        os << "\n# warnings\n";
        for (const auto& w : report.warnings)
            os << w << '\n';
    }
}

void writeResiduals(std::ostream& os, const ErrorReport& report)
{
    char line[256];
    os << "# metric origin target view row col error\n";
    for (const auto& [id, list] : report.intrinsicResiduals)
        for (const auto& r : list)
        {
            std::snprintf(line, sizeof line, "intrinsic %s %s %s %d %d %.17g\n", id.c_str(), id.c_str(),
                          r.viewId.c_str(), r.row, r.col, r.error);
            os << line;
        }
    auto dump = [&](const char* name, const std::map<std::pair<std::string, std::string>, PairError>& cells) {
        for (const auto& [key, e] : cells)
            for (const auto& r : e.residuals)
            {
                std::snprintf(line, sizeof line, "%s %s %s %s %d %d %.17g\n", name, key.first.c_str(),
                              key.second.c_str(), r.viewId.c_str(), r.row, r.col, r.error);
                os << line;
            }
    };
    dump("extrinsic", report.extrinsic);
    dump("depth", report.depth);
}

} // namespace mmreg
