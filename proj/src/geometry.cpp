#include "mmreg/geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/SVD>
#include <Eigen/LU>

#include "mmreg/errors.hpp"

namespace mmreg {

void Intrinsics::validate() const
{
    if (width <= 0 || height <= 0)
        throw UsageError("intrinsics: image size must be positive");
    if (!(fx > 0.0) || !(fy > 0.0))
        throw UsageError("intrinsics: focal lengths must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
        throw UsageError("intrinsics: principal point outside the image");
}

Mat3 Intrinsics::matrix() const
{
    Mat3 K;
    K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return K;
}

Vec2 distort(const Distortion& d, const Vec2& xn)
{
    const double x = xn.x();
    const double y = xn.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (d.k1 + r2 * (d.k2 + r2 * d.k3));
    return {x * radial + 2.0 * d.p1 * x * y + d.p2 * (r2 + 2.0 * x * x),
            y * radial + d.p1 * (r2 + 2.0 * y * y) + 2.0 * d.p2 * x * y};
}

Eigen::Matrix2d distortJacobian(const Distortion& d, const Vec2& xn)
{
    const double x = xn.x();
    const double y = xn.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (d.k1 + r2 * (d.k2 + r2 * d.k3));
    const double g = d.k1 + 2.0 * d.k2 * r2 + 3.0 * d.k3 * r2 * r2;
    Eigen::Matrix2d J;
    J(0, 0) = radial + 2.0 * x * x * g + 2.0 * d.p1 * y + 6.0 * d.p2 * x;
    J(0, 1) = 2.0 * x * y * g + 2.0 * d.p1 * x + 2.0 * d.p2 * y;
    J(1, 0) = 2.0 * x * y * g + 2.0 * d.p1 * x + 2.0 * d.p2 * y;
    J(1, 1) = radial + 2.0 * y * y * g + 6.0 * d.p1 * y + 2.0 * d.p2 * x;
    return J;
}

Vec2 undistort(const Distortion& d, const Vec2& xd)
{
    if (d.isZero())
        return xd;

    // Newton iteration on distort(x) = xd, started from the distorted point.
    Vec2 x = xd;
    for (int it = 0; it < Distortion::kMaxUndistortIterations; ++it)
    {
        const Vec2 residual = distort(d, x) - xd;
        const Eigen::Matrix2d J = distortJacobian(d, x);
        const double det = J.determinant();
        if (!std::isfinite(det) || std::abs(det) < 1e-12)
            throw NumericError("undistort: singular distortion Jacobian");
        const Vec2 step = J.inverse() * residual;
        x -= step;
        if (step.norm() < Distortion::kUndistortTolerance)
            return x;
    }
    throw NumericError("undistort: no convergence after 20 iterations");
}

void Distortion::validate() const
{
    if (isZero())
        return;
    constexpr int kRadii = 64;
    constexpr int kAngles = 16;
    for (int i = 0; i <= kRadii; ++i)
    {
        const double r = static_cast<double>(i) / kRadii;
        for (int a = 0; a < kAngles; ++a)
        {
            const double phi = 2.0 * std::numbers::pi * a / kAngles;
            const Vec2 x(r * std::cos(phi), r * std::sin(phi));
            bool ok = true;
            try
            {
                ok = (undistort(*this, distort(*this, x)) - x).norm() <= 1e-6;
            }
            catch (const NumericError&)
            {
                ok = false;
            }
            if (!ok)
            {
                std::ostringstream msg;
                msg << "distortion is not invertible at normalized radius " << r;
                throw UsageError(msg.str());
            }
        }
    }
}

Mat3 nearestRotation(const Mat3& m)
{
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 D = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0)
        D(2, 2) = -1.0;
    return svd.matrixU() * D * svd.matrixV().transpose();
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation, FrameId from, FrameId to)
    : R_(rotation)
    , t_(translation)
    , from_(from)
    , to_(to)
{
    if (!R_.allFinite() || !t_.allFinite())
        throw UsageError("rigid transform: non-finite entries");
    const double drift = (R_.transpose() * R_ - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (drift > 1e-3 || R_.determinant() < 0.0)
        throw UsageError("rigid transform: matrix is not a proper rotation");
    if (drift > 1e-9 || std::abs(R_.determinant() - 1.0) > 1e-9)
        R_ = nearestRotation(R_);
}

RigidTransform RigidTransform::inverse() const
{
    RigidTransform inv;
    inv.R_ = R_.transpose();
    inv.t_ = -(inv.R_ * t_);
    inv.from_ = to_;
    inv.to_ = from_;
    return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& inner) const
{
    if (inner.to_ != from_)
        throw UsageError("rigid transform: composing transforms with mismatched frames");
    RigidTransform out;
    out.R_ = R_ * inner.R_;
    out.t_ = R_ * inner.t_ + t_;
    out.from_ = inner.from_;
    out.to_ = to_;
    const double drift = (out.R_.transpose() * out.R_ - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (drift > 1e-9)
        out.R_ = nearestRotation(out.R_);
    return out;
}

RigidTransform RigidTransform::retagged(FrameId from, FrameId to) const
{
    RigidTransform out = *this;
    out.from_ = from;
    out.to_ = to;
    return out;
}

PixelCoord project(const Intrinsics& intr, const Vec3& p)
{
    if (!(p.z() > 0.0))
        throw DomainError("point behind camera");
    return {intr.fx * p.x() / p.z() + intr.cx, intr.fy * p.y() / p.z() + intr.cy};
}

PixelCoord project(const Intrinsics& intr, const Point3& p)
{
    return project(intr, p.xyz);
}

Vec3 backprojectDirection(const Intrinsics& intr, const PixelCoord& px)
{
    return {(px.u - intr.cx) / intr.fx, (px.v - intr.cy) / intr.fy, 1.0};
}

Point3 backproject(const Intrinsics& intr, const PixelCoord& px, FrameId frame)
{
    return {backprojectDirection(intr, px), frame};
}

Point3 transform(const RigidTransform& T, const Point3& p)
{
    if (p.frame != T.from())
        throw UsageError("transform: point frame does not match the transform's source frame");
    return {T.apply(p.xyz), T.to()};
}

std::optional<PixelCoord> CameraModel::projectToPixel(const Vec3& pCamera) const
{
    if (!(pCamera.z() > 0.0))
        return std::nullopt;
    const Vec2 xn(pCamera.x() / pCamera.z(), pCamera.y() / pCamera.z());
    const Vec2 xd = distortion.isZero() ? xn : distort(distortion, xn);
    return PixelCoord{intrinsics.fx * xd.x() + intrinsics.cx, intrinsics.fy * xd.y() + intrinsics.cy};
}

Vec3 CameraModel::rayDirection(const PixelCoord& px) const
{
    Vec2 xn((px.u - intrinsics.cx) / intrinsics.fx, (px.v - intrinsics.cy) / intrinsics.fy);
    if (!distortion.isZero())
        xn = undistort(distortion, xn);
    return Vec3(xn.x(), xn.y(), 1.0).normalized();
}

} // namespace mmreg
