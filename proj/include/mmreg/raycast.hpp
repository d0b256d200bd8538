#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "mmreg/geometry.hpp"
#include "mmreg/mesh.hpp"

namespace mmreg {

inline constexpr double kDeterminantEpsilon = 1e-12;
inline constexpr double kBarycentricTolerance = 1e-9;
inline constexpr double kTieEpsilon = 1e-12;
inline constexpr double kSelfHitEpsilon = 1e-4;

struct Ray
{
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ(); // unit length
    double tMin = 0.0;
    double tMax = std::numeric_limits<double>::infinity();

    /// Normalizes `direction`; throws UsageError for a zero direction or bad range.
    static Ray make(const Vec3& origin, const Vec3& direction, double tMin = 0.0,
                    double tMax = std::numeric_limits<double>::infinity());
};

struct Hit
{
    double t = 0.0;
    std::uint32_t triangleId = 0;
    Vec3 barycentric = Vec3::Zero();
    Vec3 point = Vec3::Zero();
};

// Möller-Trumbore. Edges are accepted with kBarycentricTolerance so rays through
// shared vertices and edges of a closed fan never slip between triangles.
std::optional<Hit> intersectTriangle(const Ray& ray, const Vec3& p0, const Vec3& p1, const Vec3& p2,
                                     std::uint32_t triangleId);

/// True when `candidate` should replace `best` as the closest hit.
inline bool closerHit(const Hit& candidate, const Hit& best)
{
    if (candidate.t < best.t - kTieEpsilon)
        return true;
    if (candidate.t <= best.t + kTieEpsilon)
        return candidate.triangleId < best.triangleId;
    return false;
}

struct TraversalStats
{
    std::uint64_t nodesVisited = 0;
    std::uint64_t trianglesTested = 0;
};

struct Aabb
{
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void grow(const Vec3& p)
    {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void grow(const Aabb& b)
    {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
    bool valid() const { return (lo.array() <= hi.array()).all(); }
    bool contains(const Aabb& b) const
    {
        return (lo.array() <= b.lo.array()).all() && (hi.array() >= b.hi.array()).all();
    }
    double halfArea() const
    {
        if (!valid())
            return 0.0;
        const Vec3 e = hi - lo;
        return e.x() * e.y() + e.y() * e.z() + e.z() * e.x();
    }
};

/// Bounding volume hierarchy over a triangle mesh, built with a binned surface
/// area heuristic. Immutable after construction; queries are thread-safe.
class Bvh
{
public:
    static constexpr int kBins = 16;
    static constexpr int kMaxLeafSize = 4;

    struct Node
    {
        Aabb bounds;
        // Interior: index of the left child (right child follows at left + 1).
        // Leaf: offset into the triangle order.
        std::uint32_t first = 0;
        std::uint32_t count = 0; // 0 for interior nodes
        bool isLeaf() const { return count > 0; }
    };

    Bvh() = default;
    explicit Bvh(const TriangleMesh& mesh);

    std::optional<Hit> intersectFirst(const Ray& ray, TraversalStats* stats = nullptr) const;

    /// True iff some triangle is hit with t in [ray.tMin + epsilon, tLimit - epsilon].
    bool intersectBefore(const Ray& ray, double tLimit, double epsilon) const;

    std::size_t triangleCount() const { return order_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<std::uint32_t>& triangleOrder() const { return order_; }

private:
    struct Prepared
    {
        Vec3 p0, p1, p2;
    };

    void buildRecursive(std::uint32_t nodeIndex, std::vector<Vec3>& centroids, std::vector<Aabb>& boxes);
    template <typename Visitor>
    void traverse(const Ray& ray, double& tFar, Visitor&& visitLeaf, TraversalStats* stats) const;

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> order_;
    std::vector<Prepared> tris_; // in original triangle order
};

} // namespace mmreg
