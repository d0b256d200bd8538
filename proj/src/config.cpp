#include "mmreg/config.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "mmreg/errors.hpp"
#include "mmreg/io.hpp"

namespace mmreg::config {

using nlohmann::json;

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

void checkKeys(const json& obj, const std::set<std::string>& allowed, const std::string& where)
{
    if (!obj.is_object())
        throw FormatError(where + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw FormatError(where + ": unknown key '" + it.key() + "'");
}

double num(const json& obj, const char* key, const std::string& where, std::optional<double> fallback = {})
{
    auto it = obj.find(key);
    if (it == obj.end())
    {
        if (fallback)
            return *fallback;
        throw FormatError(where + ": missing '" + key + "'");
    }
    if (!it->is_number())
        throw FormatError(where + ": '" + key + "' must be a number");
    const double v = it->get<double>();
    if (!std::isfinite(v))
        throw FormatError(where + ": '" + key + "' must be finite");
    return v;
}

int integer(const json& obj, const char* key, const std::string& where, std::optional<int> fallback = {})
{
    auto it = obj.find(key);
    if (it == obj.end())
    {
        if (fallback)
            return *fallback;
        throw FormatError(where + ": missing '" + key + "'");
    }
    if (!it->is_number_integer())
        throw FormatError(where + ": '" + key + "' must be an integer");
    return it->get<int>();
}

std::string str(const json& obj, const char* key, const std::string& where, std::optional<std::string> fallback = {})
{
    auto it = obj.find(key);
    if (it == obj.end())
    {
        if (fallback)
            return *fallback;
        throw FormatError(where + ": missing '" + key + "'");
    }
    if (!it->is_string())
        throw FormatError(where + ": '" + key + "' must be a string");
    return it->get<std::string>();
}

bool boolean(const json& obj, const char* key, const std::string& where, bool fallback)
{
    auto it = obj.find(key);
    if (it == obj.end())
        return fallback;
    if (!it->is_boolean())
        throw FormatError(where + ": '" + key + "' must be true or false");
    return it->get<bool>();
}

std::vector<double> numbers(const json& obj, const char* key, std::size_t n, const std::string& where)
{
    const json& arr = obj.at(key);
    if (!arr.is_array() || arr.size() != n)
        throw FormatError(where + ": '" + key + "' must be an array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (const auto& v : arr)
    {
        if (!v.is_number())
            throw FormatError(where + ": '" + key + "' must contain numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

Roi parseRoi(const json& j)
{
    checkKeys(j, {"xMin", "xMax", "yMin", "yMax", "zMin", "zMax"}, "roi");
    Roi roi;
    roi.xMin = num(j, "xMin", "roi", roi.xMin);
    roi.xMax = num(j, "xMax", "roi", roi.xMax);
    roi.yMin = num(j, "yMin", "roi", roi.yMin);
    roi.yMax = num(j, "yMax", "roi", roi.yMax);
    roi.zMin = num(j, "zMin", "roi", roi.zMin);
    roi.zMax = num(j, "zMax", "roi", roi.zMax);
    return roi;
}

json roiJson(const Roi& r)
{
    return json{{"xMin", r.xMin}, {"xMax", r.xMax}, {"yMin", r.yMin},
                {"yMax", r.yMax}, {"zMin", r.zMin}, {"zMax", r.zMax}};
}

synth::Texture parseTexture(const json& j, const std::string& where)
{
    synth::Texture t;
    const std::string type = str(j, "type", where);
    if (type == "constant")
    {
        checkKeys(j, {"type", "value"}, where);
        t.kind = synth::Texture::Kind::Constant;
        t.a = num(j, "value", where);
    }
    else if (type == "checker")
    {
        checkKeys(j, {"type", "pitch", "a", "b"}, where);
        t.kind = synth::Texture::Kind::Checker;
        t.pitch = num(j, "pitch", where);
        t.a = num(j, "a", where, 0.0);
        t.b = num(j, "b", where, 1.0);
    }
    else if (type == "gradient")
    {
        checkKeys(j, {"type", "gradient", "offset"}, where);
        t.kind = synth::Texture::Kind::Gradient;
        const auto g = numbers(j, "gradient", 2, where);
        t.gradient = Vec2(g[0], g[1]);
        t.offset = num(j, "offset", where, 0.0);
    }
    else
        throw FormatError(where + ": unknown texture type '" + type + "'");
    return t;
}

json textureJson(const synth::Texture& t)
{
    switch (t.kind)
    {
    case synth::Texture::Kind::Constant:
        return json{{"type", "constant"}, {"value", t.a}};
    case synth::Texture::Kind::Checker:
        return json{{"type", "checker"}, {"pitch", t.pitch}, {"a", t.a}, {"b", t.b}};
    case synth::Texture::Kind::Gradient:
        return json{{"type", "gradient"}, {"gradient", {t.gradient.x(), t.gradient.y()}}, {"offset", t.offset}};
    }
    return json{};
}

json parseDocument(const std::string& text, const char* what)
{
    try
    {
        return json::parse(text);
    }
    catch (const json::parse_error& e)
    {
        throw FormatError(std::string(what) + ": " + e.what());
    }
}

} // namespace

RigConfig parseRig(const std::string& text)
{
    const json doc = parseDocument(text, "rig");
    checkKeys(doc, {"depthCameraId", "cameras", "roi", "groundZ", "maxAngleDeg"}, "rig");
    RigConfig cfg;
    try
    {
        const auto& cams = doc.at("cameras");
        if (!cams.is_array() || cams.empty())
            throw FormatError("rig: 'cameras' must be a non-empty array");
        std::vector<CameraModel> models;
        for (std::size_t i = 0; i < cams.size(); ++i)
        {
            const json& c = cams[i];
            const std::string where = "rig camera " + std::to_string(i);
            checkKeys(c,
                      {"id", "modality", "width", "height", "fx", "fy", "cx", "cy", "k1", "k2", "k3", "p1", "p2",
                       "rotation", "translation"},
                      where);
            CameraModel m;
            m.id = str(c, "id", where);
            m.modality = str(c, "modality", where, std::string());
            m.intrinsics.width = integer(c, "width", where);
            m.intrinsics.height = integer(c, "height", where);
            m.intrinsics.fx = num(c, "fx", where);
            m.intrinsics.fy = num(c, "fy", where);
            m.intrinsics.cx = num(c, "cx", where);
            m.intrinsics.cy = num(c, "cy", where);
            m.distortion.k1 = num(c, "k1", where, 0.0);
            m.distortion.k2 = num(c, "k2", where, 0.0);
            m.distortion.k3 = num(c, "k3", where, 0.0);
            m.distortion.p1 = num(c, "p1", where, 0.0);
            m.distortion.p2 = num(c, "p2", where, 0.0);
            Mat3 R = Mat3::Identity();
            Vec3 t = Vec3::Zero();
            if (c.contains("rotation"))
            {
                const auto r = numbers(c, "rotation", 9, where);
                R << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
            }
            if (c.contains("translation"))
            {
                const auto v = numbers(c, "translation", 3, where);
                t = Vec3(v[0], v[1], v[2]);
            }
            try
            {
                m.fromDepth = RigidTransform(R, t, FrameId::none(), FrameId::none());
            }
            catch (const UsageError& e)
            {
                throw FormatError(where + ": " + e.what());
            }
            models.push_back(std::move(m));
        }
        const std::string depthId = str(doc, "depthCameraId", "rig");
        cfg.rig = makeRig(std::move(models), depthId);
        if (doc.contains("roi"))
            cfg.settings.roi = parseRoi(doc.at("roi"));
        cfg.settings.groundZ = num(doc, "groundZ", "rig", 0.0);
        cfg.settings.maxAngleDeg = num(doc, "maxAngleDeg", "rig", kDefaultMaxVerticalAngleDeg);
    }
    catch (const json::exception& e)
    {
        throw FormatError(std::string("rig: ") + e.what());
    }
    try
    {
        cfg.rig.validate();
        cfg.settings.roi.validate();
    }
    catch (const UsageError& e)
    {
        throw FormatError(e.what());
    }
    if (!(cfg.settings.maxAngleDeg > 0.0 && cfg.settings.maxAngleDeg <= 90.0))
        throw FormatError("rig: maxAngleDeg must lie in (0, 90]");
    return cfg;
}

RigConfig readRig(const std::filesystem::path& path)
{
    try
    {
        return parseRig(io::readFile(path));
    }
    catch (const FormatError& e)
    {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string formatRig(const RigConfig& cfg)
{
    json doc;
    doc["depthCameraId"] = cfg.rig.depthCameraId;
    json cams = json::array();
    for (const auto& c : cfg.rig.cameras)
    {
        const Mat3& R = c.fromDepth.rotation();
        const Vec3& t = c.fromDepth.translation();
        cams.push_back(json{
            {"id", c.id},
            {"modality", c.modality},
            {"width", c.intrinsics.width},
            {"height", c.intrinsics.height},
            {"fx", c.intrinsics.fx},
            {"fy", c.intrinsics.fy},
            {"cx", c.intrinsics.cx},
            {"cy", c.intrinsics.cy},
            {"k1", c.distortion.k1},
            {"k2", c.distortion.k2},
            {"k3", c.distortion.k3},
            {"p1", c.distortion.p1},
            {"p2", c.distortion.p2},
            {"rotation", {R(0, 0), R(0, 1), R(0, 2), R(1, 0), R(1, 1), R(1, 2), R(2, 0), R(2, 1), R(2, 2)}},
            {"translation", {t.x(), t.y(), t.z()}},
        });
    }
    doc["cameras"] = cams;
    doc["roi"] = roiJson(cfg.settings.roi);
    doc["groundZ"] = cfg.settings.groundZ;
    doc["maxAngleDeg"] = cfg.settings.maxAngleDeg;
    return doc.dump(2) + "\n";
}

SceneConfig parseScene(const std::string& text)
{
    const json doc = parseDocument(text, "scene");
    checkKeys(doc, {"ground", "groundZ", "groundTexture", "roi", "primitives", "depth", "board"}, "scene");
    SceneConfig cfg;
    auto& scene = cfg.scene;
    try
    {
        scene.ground = boolean(doc, "ground", "scene", true);
        scene.groundZ = num(doc, "groundZ", "scene", scene.groundZ);
        if (doc.contains("groundTexture"))
            scene.groundTexture = parseTexture(doc.at("groundTexture"), "groundTexture");
        if (doc.contains("roi"))
            scene.roi = parseRoi(doc.at("roi"));
        if (doc.contains("primitives"))
        {
            const auto& prims = doc.at("primitives");
            if (!prims.is_array())
                throw FormatError("scene: 'primitives' must be an array");
            for (std::size_t i = 0; i < prims.size(); ++i)
            {
                const json& p = prims[i];
                const std::string where = "primitive " + std::to_string(i);
                checkKeys(p, {"type", "name", "center", "rotationDeg", "halfSize", "radius", "texture"}, where);
                synth::Primitive prim;
                const std::string type = str(p, "type", where);
                if (type == "plane")
                    prim.kind = synth::PrimitiveKind::Plane;
                else if (type == "rectangle" || type == "leaf")
                    prim.kind = synth::PrimitiveKind::Rectangle;
                else if (type == "disk")
                    prim.kind = synth::PrimitiveKind::Disk;
                else if (type == "sphere")
                    prim.kind = synth::PrimitiveKind::Sphere;
                else
                    throw FormatError(where + ": unknown type '" + type + "'");
                prim.name = str(p, "name", where, "p" + std::to_string(i));
                const auto c = numbers(p, "center", 3, where);
                prim.center = Vec3(c[0], c[1], c[2]);
                if (p.contains("rotationDeg"))
                {
                    const auto r = numbers(p, "rotationDeg", 3, where);
                    prim.rotation = rotationFromVector(kDegToRad * Vec3(r[0], r[1], r[2]));
                }
                if (p.contains("halfSize"))
                {
                    const auto h = numbers(p, "halfSize", 2, where);
                    prim.halfWidth = h[0];
                    prim.halfHeight = h[1];
                }
                prim.radius = num(p, "radius", where, prim.radius);
                if (p.contains("texture"))
                    prim.texture = parseTexture(p.at("texture"), where + " texture");
                scene.primitives.push_back(prim);
            }
        }
        if (doc.contains("depth"))
        {
            const json& d = doc.at("depth");
            checkKeys(d, {"noise", "bias", "flyingPixels"}, "depth");
            cfg.depth.noiseSigma = num(d, "noise", "depth", 0.0);
            cfg.depth.bias = num(d, "bias", "depth", 0.0);
            cfg.depth.flyingPixels = boolean(d, "flyingPixels", "depth", false);
            if (cfg.depth.noiseSigma < 0.0)
                throw FormatError("depth: noise must be non-negative");
        }
        if (doc.contains("board"))
        {
            const json& b = doc.at("board");
            checkKeys(b, {"rows", "cols", "square", "poses", "noise", "minZ", "maxZ"}, "board");
            BoardSection s;
            s.board.rows = integer(b, "rows", "board", s.board.rows);
            s.board.cols = integer(b, "cols", "board", s.board.cols);
            s.board.squareSize = num(b, "square", "board", s.board.squareSize);
            s.poses = integer(b, "poses", "board", s.poses);
            s.noise = num(b, "noise", "board", 0.0);
            s.minZ = num(b, "minZ", "board", s.minZ);
            s.maxZ = num(b, "maxZ", "board", s.maxZ);
            if (s.poses <= 0 || s.noise < 0.0 || !(s.minZ > 0.0 && s.minZ < s.maxZ))
                throw FormatError("board: need poses > 0, noise >= 0 and 0 < minZ < maxZ");
            s.board.validate();
            cfg.board = s;
        }
    }
    catch (const json::exception& e)
    {
        throw FormatError(std::string("scene: ") + e.what());
    }
    catch (const UsageError& e)
    {
        throw FormatError(std::string("scene: ") + e.what());
    }
    try
    {
        scene.validate();
    }
    catch (const UsageError& e)
    {
        throw FormatError(std::string("scene: ") + e.what());
    }
    return cfg;
}

SceneConfig readScene(const std::filesystem::path& path)
{
    try
    {
        return parseScene(io::readFile(path));
    }
    catch (const FormatError& e)
    {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string formatScene(const SceneConfig& cfg)
{
    const auto& s = cfg.scene;
    json doc;
    doc["ground"] = s.ground;
    doc["groundZ"] = s.groundZ;
    doc["groundTexture"] = textureJson(s.groundTexture);
    doc["roi"] = roiJson(s.roi);
    json prims = json::array();
    for (const auto& p : s.primitives)
    {
        static const char* names[] = {"plane", "rectangle", "disk", "sphere"};
        const Vec3 r = rotationToVector(p.rotation) / kDegToRad;
        json j{{"type", names[static_cast<int>(p.kind)]},
               {"name", p.name},
               {"center", {p.center.x(), p.center.y(), p.center.z()}},
               {"rotationDeg", {r.x(), r.y(), r.z()}},
               {"texture", textureJson(p.texture)}};
        if (p.kind == synth::PrimitiveKind::Rectangle)
            j["halfSize"] = {p.halfWidth, p.halfHeight};
        if (p.kind == synth::PrimitiveKind::Disk || p.kind == synth::PrimitiveKind::Sphere)
            j["radius"] = p.radius;
        prims.push_back(j);
    }
    doc["primitives"] = prims;
    doc["depth"] = json{{"noise", cfg.depth.noiseSigma}, {"bias", cfg.depth.bias}, {"flyingPixels", cfg.depth.flyingPixels}};
    if (cfg.board)
    {
        const auto& b = *cfg.board;
        doc["board"] = json{{"rows", b.board.rows}, {"cols", b.board.cols}, {"square", b.board.squareSize},
                            {"poses", b.poses},     {"noise", b.noise},     {"minZ", b.minZ},
                            {"maxZ", b.maxZ}};
    }
    return doc.dump(2) + "\n";
}

} // namespace mmreg::config
