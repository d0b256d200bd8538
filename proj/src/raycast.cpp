#include "mmreg/raycast.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mmreg/errors.hpp"

namespace mmreg {

Ray Ray::make(const Vec3& origin, const Vec3& direction, double tMin, double tMax)
{
    const double n = direction.norm();
    if (!(n > 0.0) || !std::isfinite(n))
        throw UsageError("ray: direction must be non-zero and finite");
    if (!(tMin >= 0.0) || !(tMin < tMax))
        throw UsageError("ray: require 0 <= tMin < tMax");
    return Ray{origin, direction / n, tMin, tMax};
}

std::optional<Hit> intersectTriangle(const Ray& ray, const Vec3& p0, const Vec3& p1, const Vec3& p2,
                                     std::uint32_t triangleId)
{
    const Vec3 e1 = p1 - p0;
    const Vec3 e2 = p2 - p0;
    const Vec3 pvec = ray.direction.cross(e2);
    const double det = e1.dot(pvec);
    if (std::abs(det) < kDeterminantEpsilon)
        return std::nullopt;
    const double inv = 1.0 / det;

    const Vec3 tvec = ray.origin - p0;
    const double b1 = tvec.dot(pvec) * inv;
    if (b1 < -kBarycentricTolerance || b1 > 1.0 + kBarycentricTolerance)
        return std::nullopt;
    const Vec3 qvec = tvec.cross(e1);
    const double b2 = ray.direction.dot(qvec) * inv;
    if (b2 < -kBarycentricTolerance || b1 + b2 > 1.0 + kBarycentricTolerance)
        return std::nullopt;
    const double t = e2.dot(qvec) * inv;
    if (!(t >= ray.tMin && t <= ray.tMax))
        return std::nullopt;

    Hit hit;
    hit.t = t;
    hit.triangleId = triangleId;
    hit.barycentric = Vec3(1.0 - b1 - b2, b1, b2);
    hit.point = ray.origin + t * ray.direction;
    return hit;
}

namespace {

// Entry distance of the ray into `box` restricted to [tNear, tFar], or NaN on a miss.
double slabEntry(const Aabb& box, const Vec3& origin, const Vec3& invDir, const Vec3& dir, double tNear, double tFar)
{
    for (int a = 0; a < 3; ++a)
    {
        if (dir[a] == 0.0)
        {
            if (origin[a] < box.lo[a] || origin[a] > box.hi[a])
                return std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        double t0 = (box.lo[a] - origin[a]) * invDir[a];
        double t1 = (box.hi[a] - origin[a]) * invDir[a];
        if (t0 > t1)
            std::swap(t0, t1);
        tNear = std::max(tNear, t0);
        tFar = std::min(tFar, t1);
        if (tNear > tFar)
            return std::numeric_limits<double>::quiet_NaN();
    }
    return tNear;
}

// Traversal stack with inline storage; spills to the heap for very deep trees.
class NodeStack
{
public:
    void push(std::uint32_t v)
    {
        if (size_ < inline_.size())
            inline_[size_] = v;
        else
            spill_.push_back(v);
        ++size_;
    }
    std::uint32_t pop()
    {
        --size_;
        if (size_ >= inline_.size())
        {
            const auto v = spill_.back();
            spill_.pop_back();
            return v;
        }
        return inline_[size_];
    }
    bool empty() const { return size_ == 0; }

private:
    std::array<std::uint32_t, 96> inline_{};
    std::vector<std::uint32_t> spill_;
    std::size_t size_ = 0;
};

} // namespace

Bvh::Bvh(const TriangleMesh& mesh)
{
    const auto n = mesh.triangles.size();
    tris_.reserve(n);
    std::vector<Vec3> centroids(n);
    std::vector<Aabb> boxes(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        const auto& t = mesh.triangles[i];
        Prepared p{mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]};
        tris_.push_back(p);
        boxes[i].grow(p.p0);
        boxes[i].grow(p.p1);
        boxes[i].grow(p.p2);
        // Pad so that edge-tolerant triangle hits are never culled by the box test.
        const double pad = 1e-9 * (1.0 + (boxes[i].hi - boxes[i].lo).maxCoeff() +
                                   std::max(boxes[i].lo.cwiseAbs().maxCoeff(), boxes[i].hi.cwiseAbs().maxCoeff()));
        boxes[i].lo.array() -= pad;
        boxes[i].hi.array() += pad;
        centroids[i] = (p.p0 + p.p1 + p.p2) / 3.0;
    }
    if (n == 0)
        return;
    order_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        order_[i] = static_cast<std::uint32_t>(i);
    nodes_.reserve(2 * n / kMaxLeafSize + 2);
    nodes_.push_back(Node{Aabb{}, 0, static_cast<std::uint32_t>(n)});
    buildRecursive(0, centroids, boxes);
}

void Bvh::buildRecursive(std::uint32_t nodeIndex, std::vector<Vec3>& centroids, std::vector<Aabb>& boxes)
{
    const std::uint32_t first = nodes_[nodeIndex].first;
    const std::uint32_t count = nodes_[nodeIndex].count;

    Aabb bounds;
    Aabb centroidBounds;
    for (std::uint32_t i = first; i < first + count; ++i)
    {
        bounds.grow(boxes[order_[i]]);
        centroidBounds.grow(centroids[order_[i]]);
    }
    nodes_[nodeIndex].bounds = bounds;
    if (count <= static_cast<std::uint32_t>(kMaxLeafSize))
        return;

    // Binned SAH over all three axes.
    int bestAxis = -1;
    int bestSplit = -1;
    double bestCost = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 3; ++axis)
    {
        const double lo = centroidBounds.lo[axis];
        const double extent = centroidBounds.hi[axis] - lo;
        if (!(extent > 0.0))
            continue;
        const double scale = kBins / extent;
        std::array<Aabb, kBins> binBox{};
        std::array<std::uint32_t, kBins> binCount{};
        for (std::uint32_t i = first; i < first + count; ++i)
        {
            const auto tri = order_[i];
            const int b = std::min(kBins - 1, static_cast<int>((centroids[tri][axis] - lo) * scale));
            ++binCount[b];
            binBox[b].grow(boxes[tri]);
        }
        std::array<double, kBins - 1> leftCost{};
        Aabb acc;
        std::uint32_t accCount = 0;
        for (int b = 0; b < kBins - 1; ++b)
        {
            acc.grow(binBox[b]);
            accCount += binCount[b];
            leftCost[b] = accCount * acc.halfArea();
        }
        acc = Aabb{};
        accCount = 0;
        for (int b = kBins - 1; b > 0; --b)
        {
            acc.grow(binBox[b]);
            accCount += binCount[b];
            const double cost = leftCost[b - 1] + accCount * acc.halfArea();
            if (accCount > 0 && accCount < count && cost < bestCost)
            {
                bestCost = cost;
                bestAxis = axis;
                bestSplit = b;
            }
        }
    }

    std::uint32_t mid = first;
    if (bestAxis >= 0)
    {
        const double lo = centroidBounds.lo[bestAxis];
        const double scale = kBins / (centroidBounds.hi[bestAxis] - lo);
        auto* begin = order_.data() + first;
        auto* split = std::partition(begin, begin + count, [&](std::uint32_t tri) {
            const int b = std::min(kBins - 1, static_cast<int>((centroids[tri][bestAxis] - lo) * scale));
            return b < bestSplit;
        });
        mid = static_cast<std::uint32_t>(split - order_.data());
    }
    if (mid == first || mid == first + count)
    {
        // Coincident centroids: split the index range in half.
        mid = first + count / 2;
    }

    const auto left = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{Aabb{}, first, mid - first});
    nodes_.push_back(Node{Aabb{}, mid, first + count - mid});
    nodes_[nodeIndex].first = left;
    nodes_[nodeIndex].count = 0;
    buildRecursive(left, centroids, boxes);
    buildRecursive(left + 1, centroids, boxes);
}

template <typename Visitor>
void Bvh::traverse(const Ray& ray, double& tFar, Visitor&& visitLeaf, TraversalStats* stats) const
{
    if (nodes_.empty())
        return;
    const Vec3 invDir = ray.direction.cwiseInverse();
    const double tNear = ray.tMin;

    if (std::isnan(slabEntry(nodes_[0].bounds, ray.origin, invDir, ray.direction, tNear, tFar)))
        return;
    NodeStack stack;
    stack.push(0);
    while (!stack.empty())
    {
        const Node& node = nodes_[stack.pop()];
        if (stats)
            ++stats->nodesVisited;
        if (node.isLeaf())
        {
            if (!visitLeaf(node))
                return;
            continue;
        }
        const std::uint32_t l = node.first;
        const std::uint32_t r = node.first + 1;
        const double tl = slabEntry(nodes_[l].bounds, ray.origin, invDir, ray.direction, tNear, tFar);
        const double tr = slabEntry(nodes_[r].bounds, ray.origin, invDir, ray.direction, tNear, tFar);
        const bool hitL = !std::isnan(tl);
        const bool hitR = !std::isnan(tr);
        if (hitL && hitR)
        {
            // Near child on top of the stack.
            if (tl <= tr)
            {
                stack.push(r);
                stack.push(l);
            }
            else
            {
                stack.push(l);
                stack.push(r);
            }
        }
        else if (hitL)
        {
            stack.push(l);
        }
        else if (hitR)
        {
            stack.push(r);
        }
    }
}

std::optional<Hit> Bvh::intersectFirst(const Ray& ray, TraversalStats* stats) const
{
    std::optional<Hit> best;
    double tFar = ray.tMax;
    traverse(
        ray, tFar,
        [&](const Node& leaf) {
            for (std::uint32_t i = leaf.first; i < leaf.first + leaf.count; ++i)
            {
                const auto id = order_[i];
                const auto& p = tris_[id];
                if (stats)
                    ++stats->trianglesTested;
                auto hit = intersectTriangle(ray, p.p0, p.p1, p.p2, id);
                if (hit && (!best || closerHit(*hit, *best)))
                {
                    best = hit;
                    tFar = std::min(ray.tMax, best->t + kTieEpsilon);
                }
            }
            return true;
        },
        stats);
    return best;
}

bool Bvh::intersectBefore(const Ray& ray, double tLimit, double epsilon) const
{
    Ray bounded = ray;
    bounded.tMin = ray.tMin + epsilon;
    bounded.tMax = std::min(ray.tMax, tLimit - epsilon);
    if (!(bounded.tMin <= bounded.tMax))
        return false;
    bool found = false;
    double tFar = bounded.tMax;
    traverse(
        bounded, tFar,
        [&](const Node& leaf) {
            for (std::uint32_t i = leaf.first; i < leaf.first + leaf.count; ++i)
            {
                const auto id = order_[i];
                const auto& p = tris_[id];
                if (intersectTriangle(bounded, p.p0, p.p1, p.p2, id))
                {
                    found = true;
                    return false;
                }
            }
            return true;
        },
        nullptr);
    return found;
}

} // namespace mmreg
