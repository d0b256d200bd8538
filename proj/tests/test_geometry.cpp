#include <random>

#include <gtest/gtest.h>

#include "mmreg/errors.hpp"
#include "mmreg/geometry.hpp"

using namespace mmreg;

namespace {

Intrinsics cam100()
{
    Intrinsics K;
    K.fx = K.fy = 100.0;
    K.cx = 320.0;
    K.cy = 240.0;
    K.width = 640;
    K.height = 480;
    return K;
}

RigidTransform randomTransform(std::mt19937_64& rng, FrameId from, FrameId to)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Vec3 axis = Vec3(u(rng), u(rng), u(rng)).normalized();
    const Mat3 R = Eigen::AngleAxisd(3.0 * u(rng), axis).toRotationMatrix();
    return RigidTransform(R, Vec3(u(rng), u(rng), u(rng)), from, to);
}

} // namespace

TEST(Project, PrincipalAxisHitsPrincipalPoint)
{
    Intrinsics K;
    K.width = K.height = 2;
    const PixelCoord px = project(K, Vec3(0, 0, 1));
    EXPECT_EQ(px.u, 0.0);
    EXPECT_EQ(px.v, 0.0);
}

TEST(Project, HandEvaluated)
{
    const PixelCoord px = project(cam100(), Vec3(1, 2, 2));
    EXPECT_DOUBLE_EQ(px.u, 370.0);
    EXPECT_DOUBLE_EQ(px.v, 340.0);
}

TEST(Project, BehindCameraThrows)
{
    EXPECT_THROW(project(cam100(), Vec3(0, 0, 0)), DomainError);
    EXPECT_THROW(project(cam100(), Vec3(1, 1, -1)), DomainError);
}

TEST(Project, ScaleInvariance)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> z(0.1, 5.0);
    std::uniform_real_distribution<double> lambda(0.01, 100.0);
    for (int i = 0; i < 1000; ++i)
    {
        const Vec3 p(u(rng), u(rng), z(rng));
        const double l = lambda(rng);
        const PixelCoord a = project(cam100(), p);
        const PixelCoord b = project(cam100(), Vec3(l * p));
        EXPECT_NEAR(a.u, b.u, 1e-9);
        EXPECT_NEAR(a.v, b.v, 1e-9);
    }
}

TEST(Backproject, PrincipalPointAndInverse)
{
    const Intrinsics K = cam100();
    const Vec3 d0 = backprojectDirection(K, {K.cx, K.cy});
    EXPECT_EQ(d0, Vec3(0, 0, 1));
    const Point3 d = backproject(K, {370, 340}, FrameId::camera(1));
    EXPECT_DOUBLE_EQ(d.x(), 0.5);
    EXPECT_DOUBLE_EQ(d.y(), 1.0);
    EXPECT_DOUBLE_EQ(d.z(), 1.0);
    EXPECT_EQ(d.frame, FrameId::camera(1));
}

TEST(Backproject, RoundTripAtAnyDepth)
{
    const Intrinsics K = cam100();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-100.0, 700.0);
    for (int i = 0; i < 500; ++i)
    {
        const PixelCoord px{u(rng), u(rng)};
        for (double s : {0.3, 1.2, 7.5})
        {
            const PixelCoord back = project(K, Vec3(s * backprojectDirection(K, px)));
            EXPECT_NEAR(back.u, px.u, 1e-9);
            EXPECT_NEAR(back.v, px.v, 1e-9);
        }
    }
}

TEST(Transform, IdentityAndQuarterTurn)
{
    const FrameId a = FrameId::camera(0);
    const FrameId b = FrameId::camera(1);
    const Point3 p{Vec3(1, 2, 3), a};
    EXPECT_EQ(transform(RigidTransform::identity(a), p).xyz, p.xyz);

    Mat3 Rz;
    Rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    const Point3 q = transform(RigidTransform(Rz, Vec3::Zero(), a, b), Point3{Vec3(1, 0, 0), a});
    EXPECT_NEAR((q.xyz - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
    EXPECT_EQ(q.frame, b);
}

TEST(Transform, FrameMismatchIsUsageError)
{
    const RigidTransform T = RigidTransform::identity(FrameId::camera(0)).retagged(FrameId::camera(0), FrameId::camera(1));
    EXPECT_THROW(transform(T, Point3{Vec3(1, 2, 3), FrameId::camera(2)}), UsageError);
}

TEST(Transform, InverseAndAssociativity)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    const FrameId f0 = FrameId::camera(0), f1 = FrameId::camera(1), f2 = FrameId::camera(2), f3 = FrameId::camera(3);
    for (int i = 0; i < 200; ++i)
    {
        const RigidTransform A = randomTransform(rng, f0, f1);
        const RigidTransform B = randomTransform(rng, f1, f2);
        const RigidTransform C = randomTransform(rng, f2, f3);
        const Point3 p{Vec3(u(rng), u(rng), u(rng)), f0};

        const Point3 back = transform(A.inverse(), transform(A, p));
        EXPECT_LT((back.xyz - p.xyz).norm(), 1e-12);
        EXPECT_EQ(back.frame, f0);
        const Point3 q{p.xyz, f1};
        EXPECT_LT((transform(A, transform(A.inverse(), q)).xyz - q.xyz).norm(), 1e-12);

        const Point3 left = transform(C.compose(B).compose(A), p);
        const Point3 right = transform(C.compose(B.compose(A)), p);
        const Point3 chained = transform(C, transform(B, transform(A, p)));
        EXPECT_LT((left.xyz - right.xyz).norm(), 1e-12);
        EXPECT_LT((left.xyz - chained.xyz).norm(), 1e-12);
        EXPECT_EQ(left.frame, f3);
    }
}

TEST(Transform, ComposeRejectsMismatchedFrames)
{
    const RigidTransform A = RigidTransform::identity(FrameId::camera(0)).retagged(FrameId::camera(0), FrameId::camera(1));
    const RigidTransform B = RigidTransform::identity(FrameId::camera(0)).retagged(FrameId::camera(2), FrameId::camera(3));
    EXPECT_THROW(B.compose(A), UsageError);
}

TEST(Transform, ReprojectsSlightlyDriftedRotation)
{
    Mat3 R = Eigen::AngleAxisd(0.3, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    R(0, 1) += 1e-6;
    const RigidTransform T(R, Vec3::Zero(), FrameId::camera(0), FrameId::camera(1));
    EXPECT_LT((T.rotation().transpose() * T.rotation() - Mat3::Identity()).norm(), 1e-12);
    EXPECT_NEAR(T.rotation().determinant(), 1.0, 1e-12);
}

TEST(Transform, RejectsReflectionAndGarbage)
{
    Mat3 M = Mat3::Identity();
    M(2, 2) = -1.0;
    EXPECT_THROW(RigidTransform(M, Vec3::Zero(), FrameId::camera(0), FrameId::camera(1)), UsageError);
    EXPECT_THROW(RigidTransform(2.0 * Mat3::Identity(), Vec3::Zero(), FrameId::camera(0), FrameId::camera(1)),
                 UsageError);
}

TEST(Distortion, ZeroIsIdentityAndCentreIsFixed)
{
    const Distortion zero;
    const Vec2 x(0.3, -0.4);
    EXPECT_EQ(distort(zero, x), x);
    EXPECT_EQ(undistort(zero, x), x);

    Distortion d;
    d.k1 = 0.3;
    d.k2 = -0.1;
    d.k3 = 0.05;
    d.p1 = 0.01;
    d.p2 = -0.02;
    EXPECT_EQ(distort(d, Vec2::Zero()), Vec2::Zero());
    EXPECT_LT(undistort(d, Vec2::Zero()).norm(), 1e-15);
}

TEST(Distortion, ForwardModelByHand)
{
    Distortion d;
    d.k1 = 0.1;
    d.k2 = 0.01;
    d.k3 = 0.001;
    d.p1 = 0.002;
    d.p2 = 0.003;
    const double x = 0.4, y = -0.2, r2 = x * x + y * y;
    const double radial = 1 + 0.1 * r2 + 0.01 * r2 * r2 + 0.001 * r2 * r2 * r2;
    const double xd = x * radial + 2 * 0.002 * x * y + 0.003 * (r2 + 2 * x * x);
    const double yd = y * radial + 0.002 * (r2 + 2 * y * y) + 2 * 0.003 * x * y;
    const Vec2 out = distort(d, Vec2(x, y));
    EXPECT_NEAR(out.x(), xd, 1e-15);
    EXPECT_NEAR(out.y(), yd, 1e-15);
}

TEST(Distortion, RoundTripOnHalfDisk)
{
    Distortion d;
    d.k1 = -0.1;
    d.k2 = 0.01;
    d.p1 = d.p2 = 0.001;
    for (int i = 0; i <= 50; ++i)
        for (int a = 0; a < 36; ++a)
        {
            const double r = 0.5 * i / 50.0;
            const double phi = a * 10.0 * 3.14159265358979 / 180.0;
            const Vec2 x(r * std::cos(phi), r * std::sin(phi));
            EXPECT_LT((undistort(d, distort(d, x)) - x).norm(), 1e-8);
        }
}

TEST(Distortion, JacobianMatchesFiniteDifferences)
{
    Distortion d;
    d.k1 = -0.2;
    d.k2 = 0.05;
    d.k3 = 0.01;
    d.p1 = 0.003;
    d.p2 = -0.002;
    const Vec2 x(0.31, -0.47);
    const Eigen::Matrix2d J = distortJacobian(d, x);
    const double h = 1e-6;
    for (int k = 0; k < 2; ++k)
    {
        Vec2 dx = Vec2::Zero();
        dx[k] = h;
        const Vec2 col = (distort(d, x + dx) - distort(d, x - dx)) / (2 * h);
        EXPECT_NEAR(J(0, k), col.x(), 1e-8);
        EXPECT_NEAR(J(1, k), col.y(), 1e-8);
    }
}

TEST(Distortion, NonConvergenceIsNumericError)
{
    Distortion d;
    // r - 0.5 r^3 never exceeds 0.544, so xd = (0.6, 0) has no preimage.
    d.k1 = -0.5;
    EXPECT_THROW(undistort(d, Vec2(0.6, 0.0)), NumericError);
}

TEST(Distortion, ValidateRejectsFoldingModels)
{
    Distortion ok;
    ok.k1 = -0.1;
    ok.k2 = 0.01;
    EXPECT_NO_THROW(ok.validate());
    Distortion bad;
    bad.k1 = -1.0;
    EXPECT_THROW(bad.validate(), UsageError);
}

TEST(Intrinsics, ValidateRejectsBadValues)
{
    Intrinsics K = cam100();
    EXPECT_NO_THROW(K.validate());
    K.fx = 0.0;
    EXPECT_THROW(K.validate(), UsageError);
    K = cam100();
    K.cx = 700.0;
    EXPECT_THROW(K.validate(), UsageError);
}

TEST(CameraModel, RayAndProjectionAgreeUnderDistortion)
{
    CameraModel cam;
    cam.intrinsics = cam100();
    cam.distortion.k1 = -0.1;
    cam.distortion.k2 = 0.01;
    cam.distortion.p1 = 0.001;
    cam.fromDepth = RigidTransform::identity(FrameId::camera(0));
    for (double u : {10.5, 100.25, 320.0, 611.75})
        for (double v : {3.5, 240.0, 477.0})
        {
            const Vec3 dir = cam.rayDirection({u, v});
            EXPECT_NEAR(dir.norm(), 1.0, 1e-12);
            const auto px = cam.projectToPixel(0.8 * dir / dir.z());
            ASSERT_TRUE(px);
            EXPECT_NEAR(px->u, u, 1e-6);
            EXPECT_NEAR(px->v, v, 1e-6);
        }
    EXPECT_FALSE(cam.projectToPixel(Vec3(0, 0, -1)));
}
