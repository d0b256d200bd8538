#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "mmreg/errors.hpp"
#include "mmreg/mesh.hpp"
#include "mmreg/raycast.hpp"

using namespace mmreg;

namespace {

Intrinsics smallCam(int w, int h, double f = 500.0)
{
    Intrinsics K;
    K.fx = K.fy = f;
    K.cx = 0.5 * w;
    K.cy = 0.5 * h;
    K.width = w;
    K.height = h;
    return K;
}

DepthMap flatDepth(int w, int h, double z)
{
    DepthMap dm(w, h, smallCam(w, h));
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            dm.set(c, r, z);
    return dm;
}

// Brute-force triangle incidence per undirected edge.
std::map<std::pair<std::uint32_t, std::uint32_t>, int> incidence(const TriangleMesh& m)
{
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> count;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k)
        {
            const auto a = t[k], b = t[(k + 1) % 3];
            ++count[{std::min(a, b), std::max(a, b)}];
        }
    return count;
}

std::size_t componentCount(const TriangleMesh& m)
{
    std::vector<std::uint32_t> parent(m.vertices.size());
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& t : m.triangles)
    {
        parent[find(t[1])] = find(t[0]);
        parent[find(t[2])] = find(t[0]);
    }
    std::set<std::uint32_t> roots;
    for (const auto& t : m.triangles)
        roots.insert(find(t[0]));
    return roots.size();
}

} // namespace

TEST(DepthToVertices, HandEvaluated)
{
    DepthMap dm(640, 640, smallCam(640, 640));
    dm.set(419, 319, 2.0); // centre (419.5, 319.5)
    dm.set(319, 319, 1.0);
    const VertexGrid g = depthToVertices(dm, Roi{});
    EXPECT_EQ(g.validCount(), 2u);
    const Vec3 p = g.points[g.index(419, 319)];
    EXPECT_NEAR(p.x(), 2.0 * (419.5 - 320.0) / 500.0, 1e-15);
    EXPECT_NEAR(p.z(), 2.0, 1e-15);

    // Principal point and the worked example, evaluated at exact pixel coordinates.
    const Vec3 q = depthToPoint(smallCam(640, 640), {420.0, 320.0}, 2.0);
    EXPECT_NEAR((q - Vec3(0.4, 0.0, 2.0)).norm(), 0.0, 1e-15);
    EXPECT_EQ(depthToPoint(smallCam(640, 640), {320.0, 320.0}, 1.0), Vec3(0, 0, 1));
}

TEST(DepthToVertices, RoiFiltersEverything)
{
    const DepthMap dm = flatDepth(8, 8, 0.2);
    Roi roi;
    roi.zMin = 0.3;
    roi.zMax = 2.0;
    EXPECT_EQ(depthToVertices(dm, roi).validCount(), 0u);
    EXPECT_TRUE(buildObjectMesh(depthToVertices(dm, roi)).empty());
}

TEST(DepthMap, ValidateRejectsNonPositiveDepth)
{
    DepthMap dm = flatDepth(2, 2, 1.0);
    EXPECT_NO_THROW(dm.validate());
    dm.depth[0] = -1.0;
    EXPECT_THROW(dm.validate(), UsageError);
}

TEST(Roi, ValidateRejectsEmptyRanges)
{
    Roi r;
    r.xMin = 1.0;
    r.xMax = 0.0;
    EXPECT_THROW(r.validate(), UsageError);
}

TEST(EdgeAngle, Examples)
{
    EXPECT_EQ(edgeVerticalAngle(Vec3(0, 0, 1), Vec3(1, 2, 1)), 0.0);
    EXPECT_NEAR(edgeVerticalAngle(Vec3(0, 0, 0), Vec3(1, 0, 1)), 45.0, 1e-12);
    EXPECT_EQ(edgeVerticalAngle(Vec3(0, 0, 0), Vec3(0, 0, 0.01)), 90.0);
    EXPECT_THROW(edgeVerticalAngle(Vec3(1, 2, 3), Vec3(1, 2, 3)), DomainError);
}

TEST(ObjectMesh, FlatTwoByTwo)
{
    const TriangleMesh m = buildObjectMesh(depthToVertices(flatDepth(2, 2, 1.0), Roi{}));
    EXPECT_EQ(m.triangles.size(), 2u);
    const auto inc = incidence(m);
    EXPECT_EQ(inc.size(), 5u);
    EXPECT_EQ(findBoundaryEdges(m).size(), 4u);
}

TEST(ObjectMesh, FlatThreeByThree)
{
    const TriangleMesh m = buildObjectMesh(depthToVertices(flatDepth(3, 3, 1.0), Roi{}));
    EXPECT_EQ(m.triangles.size(), 8u);
    EXPECT_NO_THROW(m.validate());

    std::size_t oracle = 0;
    for (const auto& [e, n] : incidence(m))
        oracle += n == 1;
    const auto edges = findBoundaryEdges(m);
    EXPECT_EQ(edges.size(), oracle);
    EXPECT_EQ(edges.size(), 8u); // 2 edges on each side of the 2x2 cell block
    const auto inc = incidence(m);
    for (const auto& e : edges)
        EXPECT_EQ(inc.at({std::min(e.a, e.b), std::max(e.a, e.b)}), 1);
}

TEST(ObjectMesh, SteepSeamSplitsComponents)
{
    // Left three columns at 1.0 m, right three at 1.2 m: the seam is far steeper than 15 degrees.
    DepthMap dm(6, 3, smallCam(6, 3));
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 6; ++c)
            dm.set(c, r, c < 3 ? 1.0 : 1.2);
    const TriangleMesh m = buildObjectMesh(depthToVertices(dm, Roi{}));
    EXPECT_EQ(m.triangles.size(), 16u);
    EXPECT_EQ(componentCount(m), 2u);

    const TriangleMesh joined = buildObjectMesh(depthToVertices(dm, Roi{}), 90.0);
    EXPECT_EQ(componentCount(joined), 1u);
    EXPECT_EQ(joined.triangles.size(), 20u);
}

TEST(ObjectMesh, InvalidPixelsLeaveHoles)
{
    DepthMap dm = flatDepth(3, 3, 1.0);
    dm.invalidate(1, 1);
    // Only the two off-diagonal cells keep the triangle that avoids the centre.
    EXPECT_EQ(buildObjectMesh(depthToVertices(dm, Roi{})).triangles.size(), 2u);
    dm = flatDepth(3, 3, 1.0);
    dm.invalidate(0, 0);
    EXPECT_EQ(buildObjectMesh(depthToVertices(dm, Roi{})).triangles.size(), 6u);
}

TEST(ObjectMesh, PropertiesOnRandomSurface)
{
    const int w = 64, h = 48;
    DepthMap dm(w, h, smallCam(w, h, 60.0));
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> jitter(-0.004, 0.004);
    std::bernoulli_distribution hole(0.05);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
        {
            if (hole(rng))
                continue;
            const double step = (c > 30 && r > 20) ? 0.2 : 0.0;
            dm.set(c, r, 1.0 + 0.1 * std::sin(0.2 * c) + step + jitter(rng));
        }
    const TriangleMesh m = buildObjectMesh(depthToVertices(dm, Roi{}));
    ASSERT_FALSE(m.empty());
    EXPECT_NO_THROW(m.validate());
    ASSERT_EQ(m.vertexSourcePixel.size(), m.vertices.size());
    const Intrinsics& K = dm.intrinsics;
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
    {
        const PixelCoord px = project(K, m.vertices[i]);
        EXPECT_NEAR(px.u, m.vertexSourcePixel[i].col + 0.5, 1e-6);
        EXPECT_NEAR(px.v, m.vertexSourcePixel[i].row + 0.5, 1e-6);
    }
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k)
            EXPECT_LE(edgeVerticalAngle(m.vertices[t[k]], m.vertices[t[(k + 1) % 3]]), 15.0);

    const UncertaintyMesh u = buildUncertaintyMesh(m, Vec3::Zero(), 2.0);
    const auto edges = findBoundaryEdges(m);
    EXPECT_EQ(u.projectedEdges, edges.size());
    EXPECT_EQ(u.skippedEdges, 0u);
    EXPECT_EQ(u.mesh.triangles.size(), 2 * u.projectedEdges);
    EXPECT_TRUE(u.mesh.vertexSourcePixel.empty());
}

TEST(UncertaintyMesh, ProjectionBySimilarTriangles)
{
    TriangleMesh m;
    m.vertices = {Vec3(0.1, 0, 0.5), Vec3(0.2, 0, 0.5), Vec3(0.1, 0.1, 0.5)};
    m.triangles = {{0, 1, 2}};
    m.vertexSourcePixel.resize(3);
    const UncertaintyMesh u = buildUncertaintyMesh(m, Vec3::Zero(), 1.0);
    EXPECT_EQ(u.projectedEdges, 3u);
    EXPECT_EQ(u.mesh.triangles.size(), 6u);
    bool found = false;
    for (const auto& v : u.mesh.vertices)
        found |= (v - Vec3(0.2, 0, 1.0)).norm() < 1e-15;
    EXPECT_TRUE(found);
}

TEST(UncertaintyMesh, CurtainTrianglesIncludeTheirEdge)
{
    const TriangleMesh m = buildObjectMesh(depthToVertices(flatDepth(4, 3, 0.6), Roi{}));
    const Vec3 origin(0.01, -0.02, 0.0);
    const double groundZ = 1.2;
    const UncertaintyMesh u = buildUncertaintyMesh(m, origin, groundZ);
    const auto edges = findBoundaryEdges(m);
    ASSERT_EQ(u.mesh.triangles.size(), 2 * edges.size());
    auto idx = [&](const Vec3& p) {
        for (std::uint32_t i = 0; i < u.mesh.vertices.size(); ++i)
            if (u.mesh.vertices[i] == p)
                return i;
        return std::uint32_t(-1);
    };
    auto projected = [&](const Vec3& p) { return Vec3(origin + (groundZ - origin.z()) / (p.z() - origin.z()) * (p - origin)); };
    for (std::size_t e = 0; e < edges.size(); ++e)
    {
        const Vec3 a = m.vertices[edges[e].a], b = m.vertices[edges[e].b];
        const auto& t1 = u.mesh.triangles[2 * e];
        const auto& t2 = u.mesh.triangles[2 * e + 1];
        EXPECT_EQ(t1[0], idx(a));
        EXPECT_EQ(t1[1], idx(b));
        EXPECT_LT((u.mesh.vertices[t1[2]] - projected(a)).norm(), 1e-12);
        EXPECT_EQ(t2[0], idx(b));
        EXPECT_LT((u.mesh.vertices[t2[1]] - projected(b)).norm(), 1e-12);
        EXPECT_EQ(t2[2], t1[2]);
    }
}

TEST(UncertaintyMesh, EdgesAtGroundAreSkippedWithWarning)
{
    TriangleMesh m;
    m.vertices = {Vec3(0.1, 0, 0.5), Vec3(0.2, 0, 0.5), Vec3(0.1, 0.1, 1.0)};
    m.triangles = {{0, 1, 2}};
    m.vertexSourcePixel.resize(3);
    const UncertaintyMesh u = buildUncertaintyMesh(m, Vec3::Zero(), 1.0);
    EXPECT_EQ(u.projectedEdges, 1u);
    EXPECT_EQ(u.skippedEdges, 2u);
    EXPECT_EQ(u.mesh.triangles.size(), 2u);
    EXPECT_FALSE(u.warnings.empty());
}

TEST(UncertaintyMesh, EmptyAndWatertightInputs)
{
    EXPECT_TRUE(buildUncertaintyMesh(TriangleMesh{}, Vec3::Zero(), 1.0).mesh.empty());
    TriangleMesh tet;
    tet.vertices = {Vec3(0, 0, 0.5), Vec3(0.1, 0, 0.5), Vec3(0, 0.1, 0.5), Vec3(0, 0, 0.6)};
    tet.triangles = {{0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {2, 0, 3}};
    EXPECT_TRUE(findBoundaryEdges(tet).empty());
    TriangleMesh one;
    one.vertices = {Vec3(0, 0, 0.5), Vec3(0.1, 0, 0.5), Vec3(0, 0.1, 0.5)};
    one.triangles = {{0, 1, 2}};
    EXPECT_EQ(findBoundaryEdges(one).size(), 3u);
}

TEST(UncertaintyMesh, FlatPlaneNeverShadowsItself)
{
    const int w = 40, h = 30;
    const DepthMap dm = flatDepth(w, h, 0.7);
    const TriangleMesh m = buildObjectMesh(depthToVertices(dm, Roi{}));
    const UncertaintyMesh u = buildUncertaintyMesh(m, Vec3::Zero(), 1.2);
    const Bvh bo(m), bu(u.mesh);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
        {
            const Ray ray = Ray::make(Vec3::Zero(), backprojectDirection(dm.intrinsics, pixelCenter(c, r)));
            const auto ho = bo.intersectFirst(ray);
            const auto hu = bu.intersectFirst(ray);
            if (hu)
            {
                ASSERT_TRUE(ho);
                EXPECT_LE(ho->t, hu->t + 1e-9);
            }
        }
}
