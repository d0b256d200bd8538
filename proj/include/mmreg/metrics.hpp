#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mmreg/calibration.hpp"
#include "mmreg/mesh.hpp"
#include "mmreg/registration.hpp"

namespace mmreg {

struct CornerResidual
{
    std::string viewId;
    int row = 0;
    int col = 0;
    double error = 0.0;
};

/// Mean distance between reprojected board corners (per-view poses of `calib`)
/// and the detected corners over every corner of every view.
double intrinsicError(const CameraCalibration& calib, const std::vector<CalibrationView>& views,
                      std::vector<CornerResidual>* residuals = nullptr);

struct PairError
{
    std::string originId; // camera whose corners are transported
    std::string targetId; // camera in which the distance is measured
    double mean = 0.0;
    std::size_t used = 0;
    std::size_t skipped = 0;
    std::vector<CornerResidual> residuals;
    std::vector<std::string> invalidViews;
    std::vector<std::string> warnings;
};

/// Distance of each corner detected in `target` to the epipolar line of the
/// matching corner of `origin`, sampled at depths zNear and zFar along the
/// origin ray. Undistorted pixel coordinates throughout.
PairError extrinsicError(const CameraModel& origin, const CameraModel& target,
                         const std::vector<CalibrationView>& originViews,
                         const std::vector<CalibrationView>& targetViews, double zNear, double zFar);

/// Ray-cast mapping error. Each view's depth map is meshed (angle filter off),
/// origin corner rays are intersected with it and the hit is projected into
/// `target`. Misses are skipped; a view with more than half missing is marked
/// invalid and left out. Throws UsageError when a shared view has no depth map.
PairError depthError(const CameraRig& rig, const std::string& originId, const std::string& targetId,
                     const std::vector<CalibrationView>& originViews, const std::vector<CalibrationView>& targetViews,
                     const std::map<std::string, DepthMap>& depthByView, const Roi& roi);

/// err * 1000 / sqrt(width * height)
double normalizeError(double err, int width, int height);

struct ErrorReport
{
    std::vector<std::string> cameraIds;
    std::map<std::string, std::pair<int, int>> sizes; // width, height
    std::map<std::string, double> intrinsic;
    std::map<std::string, std::vector<CornerResidual>> intrinsicResiduals;
    std::map<std::pair<std::string, std::string>, PairError> extrinsic;
    std::map<std::pair<std::string, std::string>, PairError> depth;
    std::vector<std::string> warnings;

    double normalized(double err, const std::string& cameraId) const;
};

struct EvaluationSettings
{
    Roi roi;
    double zNear = 0.3;
    double zFar = 1.2;
    bool depth = true;
};

/// Evaluates every camera and every ordered camera pair of `rig`. Board poses
/// come from `calibration` when given, otherwise they are estimated per view
/// with the rig's intrinsics.
ErrorReport evaluateRig(const CameraRig& rig, const std::vector<CalibrationView>& views,
                        const std::map<std::string, DepthMap>& depthByView, const EvaluationSettings& settings,
                        const CalibrationResult* calibration = nullptr);

/// Plain-text tables, raw with normalized values in brackets. Rows are the
/// originating camera, columns the camera in which the error is measured.
void writeReport(std::ostream& os, const ErrorReport& report);

/// One line per corner: metric origin target view row col error.
void writeResiduals(std::ostream& os, const ErrorReport& report);

} // namespace mmreg
