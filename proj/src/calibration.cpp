#include "mmreg/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "lm.hpp"
#include "mmreg/errors.hpp"

namespace mmreg {

namespace {

constexpr int kFullIntrinsicParams = 9; // fx fy cx cy k1 k2 p1 p2 k3
constexpr int kPoseParams = 6;
constexpr double kBehindPenalty = 1e6;

// Similarity taking the points to zero mean and mean distance sqrt(2).
Mat3 hartleyNormalizer(const std::vector<Vec2>& pts)
{
    Vec2 mean = Vec2::Zero();
    for (const auto& p : pts)
        mean += p;
    mean /= static_cast<double>(pts.size());
    double dist = 0.0;
    for (const auto& p : pts)
        dist += (p - mean).norm();
    dist /= static_cast<double>(pts.size());
    if (!(dist > 0.0))
        throw EstimationError("degenerate configuration: coincident points");
    const double s = std::sqrt(2.0) / dist;
    Mat3 T;
    T << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
    return T;
}

bool nearlyCollinear(const std::vector<Vec2>& pts)
{
    Vec2 mean = Vec2::Zero();
    for (const auto& p : pts)
        mean += p;
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix2d C = Eigen::Matrix2d::Zero();
    for (const auto& p : pts)
        C += (p - mean) * (p - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(C);
    const double hi = es.eigenvalues()[1];
    return !(hi > 0.0) || es.eigenvalues()[0] <= 1e-12 * hi;
}

Vec2 applyH(const Mat3& H, const Vec2& p)
{
    const Vec3 q = H * Vec3(p.x(), p.y(), 1.0);
    return q.head<2>() / q.z();
}

Eigen::Matrix<double, 6, 1> poseVector(const RigidTransform& T)
{
    Eigen::Matrix<double, 6, 1> v;
    v.head<3>() = rotationToVector(T.rotation());
    v.tail<3>() = T.translation();
    return v;
}

RigidTransform poseFromVector(const double* v, FrameId from, FrameId to)
{
    return RigidTransform(rotationFromVector(Vec3(v[0], v[1], v[2])), Vec3(v[3], v[4], v[5]), from, to);
}

// Residual of one board corner; a point behind the camera gets a large constant.
Vec2 cornerResidual(const Intrinsics& K, const Distortion& d, const Mat3& R, const Vec3& t, const Vec3& X,
                    const PixelCoord& observed)
{
    const Vec3 pc = R * X + t;
    if (!(pc.z() > 0.0))
        return Vec2(kBehindPenalty, kBehindPenalty);
    const Vec2 xd = distort(d, pc.head<2>() / pc.z());
    return Vec2(K.fx * xd.x() + K.cx - observed.u, K.fy * xd.y() + K.cy - observed.v);
}

void unpackIntrinsics(const Eigen::VectorXd& x, int count, Intrinsics& K, Distortion& d)
{
    K.fx = x[0];
    K.fy = x[1];
    K.cx = x[2];
    K.cy = x[3];
    if (count >= kFullIntrinsicParams - 1)
    {
        d.k1 = x[4];
        d.k2 = x[5];
        d.p1 = x[6];
        d.p2 = x[7];
    }
    if (count == kFullIntrinsicParams)
        d.k3 = x[8];
}

double meanError(const std::vector<CalibrationView>& views, const CameraCalibration& c)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& view : views)
    {
        const RigidTransform& pose = c.boardPoses.at(view.viewId);
        for (const auto& corner : view.corners)
        {
            const PixelCoord p = projectBoardPoint(c.intrinsics, c.distortion, pose, corner.boardPoint);
            sum += std::hypot(p.u - corner.imagePoint.u, p.v - corner.imagePoint.v);
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

std::vector<const CalibrationView*> usableViews(const std::vector<CalibrationView>& views)
{
    std::vector<const CalibrationView*> out;
    for (const auto& v : views)
        if (v.corners.size() >= 4)
            out.push_back(&v);
    return out;
}

} // namespace

void BoardSpec::validate() const
{
    if (rows < 2 || cols < 2)
        throw UsageError("board needs at least 2x2 inner corners");
    if (!(squareSize > 0.0) || !std::isfinite(squareSize))
        throw UsageError("board square size must be positive");
}

Mat3 rotationFromVector(const Vec3& w)
{
    const double theta = w.norm();
    if (theta < 1e-12)
    {
        Mat3 S;
        S << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
        return Mat3::Identity() + S;
    }
    return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

Vec3 rotationToVector(const Mat3& R)
{
    const Eigen::AngleAxisd aa(R);
    return aa.angle() * aa.axis();
}

Mat3 chordalMeanRotation(const std::vector<Mat3>& rotations)
{
    if (rotations.empty())
        throw UsageError("no rotations to average");
    Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
    for (const auto& R : rotations)
    {
        const Eigen::Quaterniond q(R);
        const Eigen::Vector4d v = q.coeffs();
        A += v * v.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(A);
    Eigen::Vector4d v = es.eigenvectors().col(3);
    if (v[3] < 0.0)
        v = -v;
    Eigen::Quaterniond q;
    q.coeffs() = v;
    return q.normalized().toRotationMatrix();
}

Mat3 estimateHomography(const std::vector<Vec2>& boardPts, const std::vector<Vec2>& imagePts)
{
    if (boardPts.size() != imagePts.size())
        throw UsageError("homography point lists differ in length");
    if (boardPts.size() < 4)
        throw EstimationError("insufficient points");
    if (nearlyCollinear(boardPts) || nearlyCollinear(imagePts))
        throw EstimationError("degenerate configuration: collinear points");

    const Mat3 Tb = hartleyNormalizer(boardPts);
    const Mat3 Ti = hartleyNormalizer(imagePts);
    const auto n = static_cast<Eigen::Index>(boardPts.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, 9);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const Vec2 X = applyH(Tb, boardPts[i]);
        const Vec2 u = applyH(Ti, imagePts[i]);
        A.row(2 * i) << -X.x(), -X.y(), -1, 0, 0, 0, u.x() * X.x(), u.x() * X.y(), u.x();
        A.row(2 * i + 1) << 0, 0, 0, -X.x(), -X.y(), -1, u.y() * X.x(), u.y() * X.y(), u.y();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // Rank below 8 leaves a multi-dimensional solution space.
    if (sv.size() >= 8 && sv[7] <= 1e-12 * sv[0])
        throw EstimationError("degenerate configuration: rank-deficient system");
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Mat3 Hn;
    Hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
    Mat3 H = Ti.inverse() * Hn * Tb;
    H /= H.norm();
    if (H(2, 2) < 0.0)
        H = -H;
    return H;
}

Intrinsics initIntrinsics(const std::vector<Mat3>& homographies, int width, int height)
{
    if (homographies.size() < 3)
        throw EstimationError("insufficient views");
    if (width <= 0 || height <= 0)
        throw UsageError("image size must be positive");

    // Work in image coordinates scaled to the unit range so that all constraint
    // rows have comparable magnitude.
    const double s = 1.0 / std::max(width, height);
    Mat3 N;
    N << s, 0, -0.5 * s * width, 0, s, -0.5 * s * height, 0, 0, 1;

    // Unknowns (B11, B22, B13, B23, B33); B12 = 0 enforces zero skew.
    auto v = [](const Mat3& H, int i, int j) {
        Eigen::Matrix<double, 1, 5> r;
        r << H(0, i) * H(0, j), H(1, i) * H(1, j), H(2, i) * H(0, j) + H(0, i) * H(2, j),
            H(2, i) * H(1, j) + H(1, i) * H(2, j), H(2, i) * H(2, j);
        return r;
    };
    Eigen::MatrixXd V(2 * homographies.size(), 5);
    for (std::size_t k = 0; k < homographies.size(); ++k)
    {
        Mat3 H = N * homographies[k];
        H /= H.norm();
        V.row(2 * k) = v(H, 0, 1);
        V.row(2 * k + 1) = v(H, 0, 0) - v(H, 1, 1);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(V, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (!(sv[3] > 1e-6 * sv[0]))
        throw EstimationError("ill-conditioned constraint matrix (board orientations too similar)");
    Eigen::VectorXd b = svd.matrixV().col(4);
    if (b[0] < 0.0)
        b = -b;
    const double B11 = b[0], B22 = b[1], B13 = b[2], B23 = b[3], B33 = b[4];
    if (!(B11 > 0.0 && B22 > 0.0))
        throw EstimationError("ill-conditioned constraint matrix (no positive-definite solution)");
    const double lambda = B33 - B13 * B13 / B11 - B23 * B23 / B22;
    if (!(lambda > 0.0))
        throw EstimationError("ill-conditioned constraint matrix (no positive-definite solution)");

    Intrinsics K;
    K.width = width;
    K.height = height;
    K.fx = std::sqrt(lambda / B11) / s;
    K.fy = std::sqrt(lambda / B22) / s;
    K.cx = -B13 / B11 / s + 0.5 * width;
    K.cy = -B23 / B22 / s + 0.5 * height;
    if (!(std::isfinite(K.fx) && std::isfinite(K.fy) && std::isfinite(K.cx) && std::isfinite(K.cy)))
        throw EstimationError("ill-conditioned constraint matrix");
    return K;
}

RigidTransform initExtrinsics(const Mat3& H, const Intrinsics& K, FrameId cameraFrame)
{
    const Mat3 Kinv = K.matrix().inverse();
    const Vec3 a1 = Kinv * H.col(0);
    const Vec3 a2 = Kinv * H.col(1);
    const Vec3 a3 = Kinv * H.col(2);
    const double norm = 0.5 * (a1.norm() + a2.norm());
    if (!(norm > 0.0))
        throw EstimationError("degenerate homography");
    double lambda = 1.0 / norm;
    if (lambda * a3.z() < 0.0)
        lambda = -lambda;
    const Vec3 r1 = lambda * a1;
    const Vec3 r2 = lambda * a2;
    Mat3 R;
    R.col(0) = r1;
    R.col(1) = r2;
    R.col(2) = r1.cross(r2);
    return RigidTransform(nearestRotation(R), lambda * a3, FrameId::board(), cameraFrame);
}

PixelCoord projectBoardPoint(const Intrinsics& K, const Distortion& d, const RigidTransform& pose, const Vec2& board)
{
    const Vec3 pc = pose.apply(Vec3(board.x(), board.y(), 0.0));
    if (!(pc.z() > 0.0))
        throw DomainError("point behind camera");
    const Vec2 xd = distort(d, pc.head<2>() / pc.z());
    return {K.fx * xd.x() + K.cx, K.fy * xd.y() + K.cy};
}

CameraCalibration refine(const std::vector<CalibrationView>& views, const CameraCalibration& initial,
                         const RefineOptions& options)
{
    const int ni = !options.refineDistortion ? 4 : options.fixK3 ? kFullIntrinsicParams - 1 : kFullIntrinsicParams;
    const auto nv = static_cast<int>(views.size());
    std::vector<int> offset(nv + 1, 0);
    for (int v = 0; v < nv; ++v)
    {
        if (!initial.boardPoses.count(views[v].viewId))
            throw UsageError("no initial board pose for view " + views[v].viewId);
        offset[v + 1] = offset[v] + 2 * static_cast<int>(views[v].corners.size());
    }

    Eigen::VectorXd x0(ni + kPoseParams * nv);
    x0[0] = initial.intrinsics.fx;
    x0[1] = initial.intrinsics.fy;
    x0[2] = initial.intrinsics.cx;
    x0[3] = initial.intrinsics.cy;
    const Distortion& d0 = initial.distortion;
    if (ni >= kFullIntrinsicParams - 1)
        x0.segment<4>(4) << d0.k1, d0.k2, d0.p1, d0.p2;
    if (ni == kFullIntrinsicParams)
        x0[8] = d0.k3;
    for (int v = 0; v < nv; ++v)
        x0.segment<kPoseParams>(ni + kPoseParams * v) = poseVector(initial.boardPoses.at(views[v].viewId));

    auto viewResiduals = [&](const Eigen::VectorXd& x, int v, double* out) {
        Intrinsics K = initial.intrinsics;
        Distortion d = initial.distortion;
        unpackIntrinsics(x, ni, K, d);
        const double* pv = x.data() + ni + kPoseParams * v;
        const Mat3 R = rotationFromVector(Vec3(pv[0], pv[1], pv[2]));
        const Vec3 t(pv[3], pv[4], pv[5]);
        for (const auto& c : views[v].corners)
        {
            const Vec2 r = cornerResidual(K, d, R, t, Vec3(c.boardPoint.x(), c.boardPoint.y(), 0.0), c.imagePoint);
            *out++ = r.x();
            *out++ = r.y();
        }
    };

    detail::LmProblem problem;
    problem.residualCount = offset[nv];
    problem.residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
        for (int v = 0; v < nv; ++v)
            viewResiduals(x, v, r.data() + offset[v]);
    };
    // Each pose only touches its own view's residuals.
    problem.jacobian = [&](const Eigen::VectorXd& x, const Eigen::VectorXd&, Eigen::MatrixXd& J) {
        J.setZero();
        Eigen::VectorXd xp = x;
        Eigen::VectorXd rp(problem.residualCount), rm(problem.residualCount);
        for (int i = 0; i < ni; ++i)
        {
            const double h = detail::finiteDifferenceStep(x[i]);
            xp[i] = x[i] + h;
            problem.residuals(xp, rp);
            xp[i] = x[i] - h;
            problem.residuals(xp, rm);
            xp[i] = x[i];
            J.col(i) = (rp - rm) / (2.0 * h);
        }
        for (int v = 0; v < nv; ++v)
        {
            const int rows = offset[v + 1] - offset[v];
            for (int k = 0; k < kPoseParams; ++k)
            {
                const int i = ni + kPoseParams * v + k;
                const double h = detail::finiteDifferenceStep(x[i]);
                xp[i] = x[i] + h;
                viewResiduals(xp, v, rp.data());
                xp[i] = x[i] - h;
                viewResiduals(xp, v, rm.data());
                xp[i] = x[i];
                J.block(offset[v], i, rows, 1) = (rp.head(rows) - rm.head(rows)) / (2.0 * h);
            }
        }
    };

    detail::LmOptions lmOptions;
    lmOptions.maxIterations = options.maxIterations;
    lmOptions.relativeTolerance = options.relativeTolerance;
    const detail::LmResult lm = detail::levenbergMarquardt(problem, x0, lmOptions);

    CameraCalibration out = initial;
    unpackIntrinsics(lm.x, ni, out.intrinsics, out.distortion);
    for (int v = 0; v < nv; ++v)
        out.boardPoses[views[v].viewId] = poseFromVector(lm.x.data() + ni + kPoseParams * v, FrameId::board(), out.frame);
    out.iterations = lm.iterations;
    out.costHistory = lm.costHistory;
    out.meanReprojectionError = meanError(views, out);
    return out;
}

CameraCalibration calibrateCamera(const std::vector<CalibrationView>& views, int width, int height, FrameId frame,
                                  const RefineOptions& options)
{
    std::vector<CalibrationView> used;
    std::vector<Mat3> Hs;
    for (const CalibrationView* v : usableViews(views))
    {
        std::vector<Vec2> board, image;
        for (const auto& c : v->corners)
        {
            board.push_back(c.boardPoint);
            image.emplace_back(c.imagePoint.u, c.imagePoint.v);
        }
        Hs.push_back(estimateHomography(board, image));
        used.push_back(*v);
    }

    CameraCalibration init;
    init.cameraId = views.empty() ? std::string() : views.front().cameraId;
    init.frame = frame;
    init.intrinsics = initIntrinsics(Hs, width, height);
    for (std::size_t i = 0; i < used.size(); ++i)
        init.boardPoses[used[i].viewId] = initExtrinsics(Hs[i], init.intrinsics, frame);
    return refine(used, init, options);
}

RigidTransform estimateBoardPose(const Intrinsics& K, const Distortion& d, const CalibrationView& view,
                                 FrameId cameraFrame)
{
    std::vector<Vec2> board, normalized;
    for (const auto& c : view.corners)
    {
        board.push_back(c.boardPoint);
        const Vec2 xd((c.imagePoint.u - K.cx) / K.fx, (c.imagePoint.v - K.cy) / K.fy);
        normalized.push_back(undistort(d, xd));
    }
    const Mat3 H = estimateHomography(board, normalized);
    Intrinsics unit;
    unit.fx = unit.fy = 1.0;
    unit.cx = unit.cy = 0.0;
    const RigidTransform start = initExtrinsics(H, unit, cameraFrame);

    detail::LmProblem problem;
    problem.residualCount = 2 * static_cast<int>(view.corners.size());
    problem.residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
        const Mat3 R = rotationFromVector(x.head<3>());
        const Vec3 t = x.tail<3>();
        for (std::size_t i = 0; i < view.corners.size(); ++i)
        {
            const auto& c = view.corners[i];
            r.segment<2>(2 * i) = cornerResidual(K, d, R, t, Vec3(c.boardPoint.x(), c.boardPoint.y(), 0.0), c.imagePoint);
        }
    };
    const Eigen::VectorXd x0 = poseVector(start);
    const detail::LmResult lm = detail::levenbergMarquardt(problem, x0, {});
    return poseFromVector(lm.x.data(), FrameId::board(), cameraFrame);
}

RigidTransform stereoExtrinsics(const CameraCalibration& a, const CameraCalibration& b,
                                const std::vector<CalibrationView>& viewsA, const std::vector<CalibrationView>& viewsB,
                                const StereoOptions& options, std::vector<std::string>* warnings)
{
    std::map<std::string, const CalibrationView*> byIdB;
    for (const auto& v : viewsB)
        byIdB[v.viewId] = &v;

    struct Shared
    {
        const CalibrationView* va;
        const CalibrationView* vb;
    };
    std::vector<Shared> shared;
    for (const auto& va : viewsA)
    {
        auto it = byIdB.find(va.viewId);
        if (it != byIdB.end() && a.boardPoses.count(va.viewId) && b.boardPoses.count(va.viewId))
            shared.push_back({&va, it->second});
    }
    if (shared.empty())
        throw UsageError("no shared views between " + a.cameraId + " and " + b.cameraId);

    std::vector<Mat3> rotations;
    Vec3 tSum = Vec3::Zero();
    for (const auto& s : shared)
    {
        const RigidTransform M = b.boardPoses.at(s.va->viewId).compose(a.boardPoses.at(s.va->viewId).inverse());
        rotations.push_back(M.rotation());
        tSum += M.translation();
    }
    const RigidTransform averaged(chordalMeanRotation(rotations), tSum / static_cast<double>(shared.size()), a.frame,
                                  b.frame);
    if (!options.refine)
        return averaged;

    // Corners seen by both cameras in a shared view.
    struct Pair
    {
        Vec3 inA; // board corner in A's frame (A's pose)
        Vec3 inB;
        PixelCoord obsA;
        PixelCoord obsB;
    };
    std::vector<Pair> pairs;
    for (const auto& s : shared)
    {
        std::map<std::pair<int, int>, const CornerObservation*> cornersB;
        for (const auto& c : s.vb->corners)
            cornersB[{c.row, c.col}] = &c;
        const RigidTransform& poseA = a.boardPoses.at(s.va->viewId);
        const RigidTransform& poseB = b.boardPoses.at(s.va->viewId);
        for (const auto& c : s.va->corners)
        {
            auto it = cornersB.find({c.row, c.col});
            if (it == cornersB.end())
                continue;
            const Vec3 X(c.boardPoint.x(), c.boardPoint.y(), 0.0);
            pairs.push_back({poseA.apply(X), poseB.apply(X), c.imagePoint, it->second->imagePoint});
        }
    }
    if (pairs.empty())
        return averaged;

    const auto np = static_cast<Eigen::Index>(pairs.size());
    detail::LmProblem problem;
    problem.residualCount = static_cast<int>(4 * np);
    problem.residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
        const Mat3 R = rotationFromVector(x.head<3>());
        const Vec3 t = x.tail<3>();
        const Mat3 Rt = R.transpose();
        const Vec3 tInv = -(Rt * t);
        for (Eigen::Index i = 0; i < np; ++i)
        {
            const Pair& p = pairs[i];
            r.segment<2>(2 * i) = cornerResidual(b.intrinsics, b.distortion, R, t, p.inA, p.obsB);
            r.segment<2>(2 * (np + i)) = cornerResidual(a.intrinsics, a.distortion, Rt, tInv, p.inB, p.obsA);
        }
    };
    detail::LmOptions lmOptions;
    lmOptions.maxIterations = options.maxIterations;
    try
    {
        const detail::LmResult lm = detail::levenbergMarquardt(problem, poseVector(averaged), lmOptions);
        return poseFromVector(lm.x.data(), a.frame, b.frame);
    }
    catch (const OptimizationError& e)
    {
        if (warnings)
            warnings->push_back("pair " + a.cameraId + "/" + b.cameraId + ": refinement failed (" + e.what() +
                                "), using averaged estimate");
        return averaged;
    }
}

CalibrationResult calibrateRig(const std::vector<CalibrationView>& views,
                               const std::map<std::string, std::pair<int, int>>& sizes, const RefineOptions& options)
{
    std::map<std::string, std::vector<CalibrationView>> byCamera;
    for (const auto& v : views)
        byCamera[v.cameraId].push_back(v);

    CalibrationResult result;
    std::int32_t index = 0;
    for (const auto& [id, camViews] : byCamera)
    {
        auto size = sizes.find(id);
        if (size == sizes.end())
            throw UsageError("no image size for camera " + id);
        const FrameId frame = FrameId::camera(index++);
        try
        {
            result.cameras[id] = calibrateCamera(camViews, size->second.first, size->second.second, frame, options);
        }
        catch (const EstimationError& e)
        {
            throw EstimationError("camera " + id + ": " + e.what());
        }
        catch (const OptimizationError& e)
        {
            throw OptimizationError("camera " + id + ": " + e.what(), e.lastIterate());
        }
        result.cameras[id].cameraId = id;
    }

    for (auto ia = byCamera.begin(); ia != byCamera.end(); ++ia)
        for (auto ib = std::next(ia); ib != byCamera.end(); ++ib)
        {
            const RigidTransform M = stereoExtrinsics(result.cameras.at(ia->first), result.cameras.at(ib->first),
                                                      ia->second, ib->second, {}, &result.warnings);
            result.pairs[{ia->first, ib->first}] = M;
            result.pairs[{ib->first, ia->first}] = M.inverse();
        }
    return result;
}

} // namespace mmreg
