#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mmreg/geometry.hpp"

namespace mmreg {

/// Metric depth image of the depth camera. Depth is the Z coordinate along the
/// optical axis; pixels flagged invalid carry no measurement.
struct DepthMap
{
    int width = 0;
    int height = 0;
    std::vector<double> depth;
    std::vector<std::uint8_t> valid;
    Intrinsics intrinsics;
    Distortion distortion;

    DepthMap() = default;
    DepthMap(int w, int h, const Intrinsics& intr);

    std::size_t index(int col, int row) const { return static_cast<std::size_t>(row) * width + col; }
    bool isValid(int col, int row) const { return valid[index(col, row)] != 0; }
    double at(int col, int row) const { return depth[index(col, row)]; }
    void set(int col, int row, double z);
    void invalidate(int col, int row);

    /// Throws UsageError on size mismatch or a valid pixel with non-positive depth.
    void validate() const;
};

/// Axis-aligned region of interest in depth-camera coordinates (meters).
struct Roi
{
    double xMin = -1e9, xMax = 1e9;
    double yMin = -1e9, yMax = 1e9;
    double zMin = 0.0, zMax = 1e9;

    bool contains(const Vec3& p) const
    {
        return p.x() >= xMin && p.x() <= xMax && p.y() >= yMin && p.y() <= yMax && p.z() >= zMin && p.z() <= zMax;
    }
    void validate() const;
};

struct SourcePixel
{
    std::int32_t col = -1;
    std::int32_t row = -1;
};

/// One vertex candidate per depth pixel.
struct VertexGrid
{
    int width = 0;
    int height = 0;
    std::vector<Vec3> points;
    std::vector<std::uint8_t> valid;

    std::size_t index(int col, int row) const { return static_cast<std::size_t>(row) * width + col; }
    std::size_t validCount() const;
};

using Triangle = std::array<std::uint32_t, 3>;

struct TriangleMesh
{
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;
    // Empty for meshes that do not originate from depth pixels.
    std::vector<SourcePixel> vertexSourcePixel;

    bool empty() const { return triangles.empty(); }
    double triangleArea(std::size_t i) const;

    /// Index range, degeneracy (area <= 1e-12 m^2) and provenance-size checks.
    void validate() const;
};

struct BoundaryEdge
{
    std::uint32_t a = 0;
    std::uint32_t b = 0;
};

struct UncertaintyMesh
{
    TriangleMesh mesh;
    std::size_t projectedEdges = 0;
    std::size_t skippedEdges = 0;
    std::vector<std::string> warnings;
};

inline constexpr double kDefaultMaxVerticalAngleDeg = 15.0;

/// depth * backproject(pixel) for an undistorted depth camera.
Vec3 depthToPoint(const Intrinsics& intr, const PixelCoord& px, double depth);

/// Backprojects every valid pixel centre; points outside the ROI are invalidated.
VertexGrid depthToVertices(const DepthMap& dm, const Roi& roi);

/// Angle in degrees between the edge v1-v2 and the depth camera's XY plane.
/// Throws DomainError for identical vertices.
double edgeVerticalAngle(const Vec3& v1, const Vec3& v2);

/// Two triangles per 2x2 cell of valid vertices, split along the top-left to
/// bottom-right diagonal. A triangle is kept only when all three edges stay
/// within maxAngleDeg. Unreferenced vertices are dropped.
TriangleMesh buildObjectMesh(const VertexGrid& grid, double maxAngleDeg = kDefaultMaxVerticalAngleDeg);

/// Edges used by exactly one triangle, oriented as in that triangle, sorted.
std::vector<BoundaryEdge> findBoundaryEdges(const TriangleMesh& mesh);

/// Curtain mesh hanging from every boundary edge of the object mesh down to the
/// plane Z = groundZ along rays from cameraOrigin.
UncertaintyMesh buildUncertaintyMesh(const TriangleMesh& objectMesh, const Vec3& cameraOrigin, double groundZ);

} // namespace mmreg
