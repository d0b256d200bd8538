#include "mmreg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "mmreg/errors.hpp"

namespace mmreg {

DepthMap::DepthMap(int w, int h, const Intrinsics& intr)
    : width(w)
    , height(h)
    , depth(static_cast<std::size_t>(w) * h, 0.0)
    , valid(static_cast<std::size_t>(w) * h, 0)
    , intrinsics(intr)
{
}

void DepthMap::set(int col, int row, double z)
{
    const auto i = index(col, row);
    depth[i] = z;
    valid[i] = (std::isfinite(z) && z > 0.0) ? 1 : 0;
}

void DepthMap::invalidate(int col, int row)
{
    const auto i = index(col, row);
    depth[i] = 0.0;
    valid[i] = 0;
}

void DepthMap::validate() const
{
    const auto n = static_cast<std::size_t>(width) * height;
    if (width <= 0 || height <= 0 || depth.size() != n || valid.size() != n)
        throw UsageError("depth map: buffer size does not match dimensions");
    if (intrinsics.width != width || intrinsics.height != height)
        throw UsageError("depth map: dimensions do not match the depth camera");
    for (std::size_t i = 0; i < n; ++i)
        if (valid[i] && !(std::isfinite(depth[i]) && depth[i] > 0.0))
            throw UsageError("depth map: valid pixel with non-positive depth");
}

void Roi::validate() const
{
    if (!(xMin < xMax) || !(yMin < yMax) || !(zMin < zMax))
        throw UsageError("roi: min must be below max on every axis");
}

std::size_t VertexGrid::validCount() const
{
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

double TriangleMesh::triangleArea(std::size_t i) const
{
    const auto& t = triangles[i];
    return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

void TriangleMesh::validate() const
{
    if (!vertexSourcePixel.empty() && vertexSourcePixel.size() != vertices.size())
        throw UsageError("mesh: provenance list size differs from vertex count");
    for (std::size_t i = 0; i < triangles.size(); ++i)
    {
        for (auto idx : triangles[i])
            if (idx >= vertices.size())
                throw UsageError("mesh: triangle index out of range");
        if (!(triangleArea(i) > 1e-12))
            throw UsageError("mesh: degenerate triangle " + std::to_string(i));
    }
}

Vec3 depthToPoint(const Intrinsics& intr, const PixelCoord& px, double depth)
{
    return depth * backprojectDirection(intr, px);
}

VertexGrid depthToVertices(const DepthMap& dm, const Roi& roi)
{
    dm.validate();
    VertexGrid grid;
    grid.width = dm.width;
    grid.height = dm.height;
    grid.points.assign(dm.depth.size(), Vec3::Zero());
    grid.valid.assign(dm.depth.size(), 0);
    const bool distorted = !dm.distortion.isZero();
    const auto& K = dm.intrinsics;
    for (int row = 0; row < dm.height; ++row)
    {
        for (int col = 0; col < dm.width; ++col)
        {
            if (!dm.isValid(col, row))
                continue;
            const auto i = dm.index(col, row);
            const PixelCoord c = pixelCenter(col, row);
            Vec3 p;
            if (distorted)
            {
                const Vec2 xn = undistort(dm.distortion, Vec2((c.u - K.cx) / K.fx, (c.v - K.cy) / K.fy));
                p = dm.depth[i] * Vec3(xn.x(), xn.y(), 1.0);
            }
            else
            {
                p = depthToPoint(K, c, dm.depth[i]);
            }
            if (!roi.contains(p))
                continue;
            grid.points[i] = p;
            grid.valid[i] = 1;
        }
    }
    return grid;
}

double edgeVerticalAngle(const Vec3& v1, const Vec3& v2)
{
    const Vec3 d = v2 - v1;
    if (d.x() == 0.0 && d.y() == 0.0)
    {
        if (d.z() == 0.0)
            throw DomainError("vertical angle: identical vertices");
        return 90.0;
    }
    return std::atan2(std::abs(d.z()), std::hypot(d.x(), d.y())) * 180.0 / std::numbers::pi;
}

namespace {

bool edgeAccepted(const Vec3& a, const Vec3& b, double maxAngleDeg)
{
    if (a == b)
        return false;
    return edgeVerticalAngle(a, b) <= maxAngleDeg;
}

} // namespace

TriangleMesh buildObjectMesh(const VertexGrid& grid, double maxAngleDeg)
{
    TriangleMesh mesh;
    std::vector<std::int64_t> remap(grid.points.size(), -1);

    auto vertexFor = [&](std::size_t gi) -> std::uint32_t {
        if (remap[gi] < 0)
        {
            remap[gi] = static_cast<std::int64_t>(mesh.vertices.size());
            mesh.vertices.push_back(grid.points[gi]);
            mesh.vertexSourcePixel.push_back({static_cast<std::int32_t>(gi % grid.width),
                                              static_cast<std::int32_t>(gi / grid.width)});
        }
        return static_cast<std::uint32_t>(remap[gi]);
    };

    auto tryEmit = [&](std::size_t i0, std::size_t i1, std::size_t i2) {
        if (!grid.valid[i0] || !grid.valid[i1] || !grid.valid[i2])
            return;
        const Vec3& a = grid.points[i0];
        const Vec3& b = grid.points[i1];
        const Vec3& c = grid.points[i2];
        if (!edgeAccepted(a, b, maxAngleDeg) || !edgeAccepted(b, c, maxAngleDeg) || !edgeAccepted(c, a, maxAngleDeg))
            return;
        if (!(0.5 * (b - a).cross(c - a).norm() > 1e-12))
            return;
        mesh.triangles.push_back({vertexFor(i0), vertexFor(i1), vertexFor(i2)});
    };

    for (int row = 0; row + 1 < grid.height; ++row)
    {
        for (int col = 0; col + 1 < grid.width; ++col)
        {
            const auto tl = grid.index(col, row);
            const auto tr = grid.index(col + 1, row);
            const auto bl = grid.index(col, row + 1);
            const auto br = grid.index(col + 1, row + 1);
            tryEmit(tl, tr, br);
            tryEmit(tl, br, bl);
        }
    }
    return mesh;
}

std::vector<BoundaryEdge> findBoundaryEdges(const TriangleMesh& mesh)
{
    struct Incidence
    {
        std::uint32_t count = 0;
        BoundaryEdge directed;
    };
    std::unordered_map<std::uint64_t, Incidence> edges;
    edges.reserve(mesh.triangles.size() * 2);
    for (const auto& tri : mesh.triangles)
    {
        for (int k = 0; k < 3; ++k)
        {
            const std::uint32_t a = tri[k];
            const std::uint32_t b = tri[(k + 1) % 3];
            const std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
            auto& inc = edges[key];
            ++inc.count;
            inc.directed = {a, b};
        }
    }
    std::vector<std::pair<std::uint64_t, BoundaryEdge>> boundary;
    for (const auto& [key, inc] : edges)
        if (inc.count == 1)
            boundary.emplace_back(key, inc.directed);
    std::sort(boundary.begin(), boundary.end(), [](const auto& l, const auto& r) { return l.first < r.first; });

    std::vector<BoundaryEdge> out;
    out.reserve(boundary.size());
    for (const auto& [key, e] : boundary)
        out.push_back(e);
    return out;
}

UncertaintyMesh buildUncertaintyMesh(const TriangleMesh& objectMesh, const Vec3& cameraOrigin, double groundZ)
{
    UncertaintyMesh out;
    const auto edges = findBoundaryEdges(objectMesh);

    // Per object-mesh vertex: index of its copy and of its ground projection in M_u.
    std::map<std::uint32_t, std::pair<std::uint32_t, std::uint32_t>> lifted;
    auto projectable = [&](std::uint32_t v) {
        const double z = objectMesh.vertices[v].z();
        return z > cameraOrigin.z() && z < groundZ;
    };
    auto liftedPair = [&](std::uint32_t v) {
        auto it = lifted.find(v);
        if (it != lifted.end())
            return it->second;
        const Vec3& p = objectMesh.vertices[v];
        const double scale = (groundZ - cameraOrigin.z()) / (p.z() - cameraOrigin.z());
        Vec3 ground = cameraOrigin + scale * (p - cameraOrigin);
        ground.z() = groundZ;
        const auto top = static_cast<std::uint32_t>(out.mesh.vertices.size());
        out.mesh.vertices.push_back(p);
        out.mesh.vertices.push_back(ground);
        return lifted.emplace(v, std::make_pair(top, top + 1)).first->second;
    };

    for (const auto& e : edges)
    {
        if (!projectable(e.a) || !projectable(e.b))
        {
            ++out.skippedEdges;
            std::ostringstream msg;
            msg << "uncertainty mesh: boundary edge (" << e.a << ", " << e.b << ") not between camera and ground, skipped";
            out.warnings.push_back(msg.str());
            continue;
        }
        const auto [a, aGround] = liftedPair(e.a);
        const auto [b, bGround] = liftedPair(e.b);
        out.mesh.triangles.push_back({a, b, aGround});
        out.mesh.triangles.push_back({b, bGround, aGround});
        ++out.projectedEdges;
    }
    return out;
}

} // namespace mmreg
