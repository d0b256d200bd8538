#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "mmreg/config.hpp"
#include "mmreg/errors.hpp"
#include "mmreg/io.hpp"

using namespace mmreg;
namespace fs = std::filesystem;

namespace {

struct TempDir
{
    fs::path path;
    TempDir()
    {
        path = fs::temp_directory_path() / ("mmreg_io_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Image randomImage(int w, int h, int c, SampleType t, unsigned seed)
{
    std::mt19937 rng(seed);
    Image img(w, h, c, t);
    const int top = t == SampleType::U8 ? 255 : 65535;
    std::uniform_int_distribution<int> ints(0, top);
    std::uniform_real_distribution<float> reals(-3.0f, 3.0f);
    for (float& v : img.data)
        v = t == SampleType::F32 ? reals(rng) : static_cast<float>(ints(rng));
    return img;
}

void expectSame(const Image& a, const Image& b)
{
    EXPECT_EQ(a.width, b.width);
    EXPECT_EQ(a.height, b.height);
    EXPECT_EQ(a.channels, b.channels);
    EXPECT_EQ(a.type, b.type);
    EXPECT_EQ(a.data, b.data);
}

} // namespace

TEST(Pnm, RoundTrips)
{
    for (SampleType t : {SampleType::U8, SampleType::U16})
        for (int c : {1, 3})
        {
            const Image img = randomImage(7, 5, c, t, 10 + c);
            const std::string bytes = io::encodePnm(img);
            EXPECT_EQ(bytes.substr(0, 2), c == 1 ? "P5" : "P6");
            expectSame(io::decodePnm(bytes), img);
        }
}

TEST(Pnm, SixteenBitIsBigEndian)
{
    Image img(1, 1, 1, SampleType::U16);
    img.at(0, 0) = 0x1234;
    const std::string bytes = io::encodePnm(img);
    EXPECT_EQ(static_cast<unsigned char>(bytes[bytes.size() - 2]), 0x12);
    EXPECT_EQ(static_cast<unsigned char>(bytes.back()), 0x34);
}

TEST(Pnm, TruncatedIsFormatError)
{
    std::string bytes = io::encodePnm(randomImage(4, 4, 1, SampleType::U8, 1));
    bytes.pop_back();
    EXPECT_THROW(io::decodePnm(bytes), FormatError);
    EXPECT_THROW(io::decodePnm("P2\n1 1\n255\n0"), FormatError);
}

TEST(Pfm, RoundTripsAndStoresBottomRowFirst)
{
    for (int c : {1, 3})
    {
        const Image img = randomImage(6, 4, c, SampleType::F32, 20 + c);
        expectSame(io::decodePfm(io::encodePfm(img)), img);
    }
    Image img(1, 2, 1);
    img.at(0, 0) = 1.0f;
    img.at(0, 1) = 2.0f;
    const std::string bytes = io::encodePfm(img);
    float first = 0.0f;
    std::memcpy(&first, bytes.data() + bytes.size() - 8, 4);
    EXPECT_EQ(first, 2.0f);
}

TEST(Multiband, RoundTripKeepsWavelengths)
{
    TempDir dir;
    Image img = randomImage(5, 3, 4, SampleType::F32, 3);
    img.wavelengths = {450.0, 550.5, 650.0, 750.25};
    const fs::path written = io::writeImage(dir.path / "cube", img);
    EXPECT_EQ(written.extension(), ".hdr");
    EXPECT_TRUE(fs::exists(dir.path / "cube.raw"));
    const Image back = io::readImage(written);
    expectSame(back, img);
    EXPECT_EQ(back.wavelengths, img.wavelengths);
}

TEST(Multiband, WavelengthCountMismatch)
{
    TempDir dir;
    Image img = randomImage(2, 2, 2, SampleType::F32, 4);
    img.wavelengths = {1.0, 2.0};
    io::writeMultiband(dir.path / "m.hdr", img);
    std::string hdr = io::readFile(dir.path / "m.hdr");
    hdr.replace(hdr.find("wavelengths"), std::string::npos, "wavelengths 1 2 3\n");
    io::writeFileAtomic(dir.path / "m.hdr", hdr);
    EXPECT_THROW(io::readMultiband(dir.path / "m.hdr"), FormatError);
}

TEST(Depth, PgmIsMillimetresAndPfmIsMetres)
{
    TempDir dir;
    const Intrinsics intr{100, 100, 2, 1.5, 4, 3};
    DepthMap dm(4, 3, intr);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c)
            dm.set(c, r, 0.5 + 0.001 * (r * 4 + c));
    dm.invalidate(1, 1);
    io::writeFileAtomic(dir.path / "d.pgm", io::encodeDepthPgm(dm));
    io::writeFileAtomic(dir.path / "d.pfm", io::encodeDepthPfm(dm));
    for (const char* name : {"d.pgm", "d.pfm"})
    {
        const DepthMap back = io::readDepth(dir.path / name, intr);
        EXPECT_EQ(back.valid, dm.valid) << name;
        for (std::size_t i = 0; i < dm.depth.size(); ++i)
            if (dm.valid[i])
                EXPECT_NEAR(back.depth[i], dm.depth[i], 1e-6) << name;
    }
    EXPECT_THROW(io::readDepth(dir.path / "d.pgm", Intrinsics{100, 100, 2, 2, 5, 3}), UsageError);
}

TEST(Corners, RoundTripIsExact)
{
    io::CornerFile f;
    f.hasBoard = true;
    f.board = BoardSpec{3, 4, 0.03};
    f.cameras = {{"depth", 640, 576, "depth"}, {"rgb", 1280, 720, "rgb"}};
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 600.0);
    for (const char* cam : {"depth", "rgb"})
        for (const char* view : {"v0", "v1"})
        {
            CalibrationView v{cam, view, {}};
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 4; ++c)
                    v.corners.push_back({r, c, f.board.cornerPosition(r, c), PixelCoord{u(rng), u(rng)}});
            f.views.push_back(v);
        }
    const io::CornerFile back = io::parseCorners(io::formatCorners(f));
    ASSERT_EQ(back.views.size(), f.views.size());
    ASSERT_EQ(back.cameras.size(), 2u);
    EXPECT_EQ(back.cameras[1].width, 1280);
    EXPECT_EQ(back.board.rows, 3);
    for (std::size_t i = 0; i < f.views.size(); ++i)
    {
        EXPECT_EQ(back.views[i].cameraId, f.views[i].cameraId);
        EXPECT_EQ(back.views[i].viewId, f.views[i].viewId);
        for (std::size_t k = 0; k < f.views[i].corners.size(); ++k)
        {
            EXPECT_EQ(back.views[i].corners[k].imagePoint.u, f.views[i].corners[k].imagePoint.u);
            EXPECT_EQ(back.views[i].corners[k].imagePoint.v, f.views[i].corners[k].imagePoint.v);
            EXPECT_EQ(back.views[i].corners[k].boardPoint, f.views[i].corners[k].boardPoint);
        }
    }
}

TEST(Corners, MalformedLineCarriesLineNumber)
{
    const std::string text = "# header\nboard 3 4 0.03\ncamera a 10 10\nv0 a 0 0 1.0\n";
    try
    {
        io::parseCorners(text);
        FAIL();
    }
    catch (const FormatError& e)
    {
        EXPECT_EQ(e.line(), 4u);
    }
    EXPECT_THROW(io::parseCorners("board 3 4 0.03\ncamera a 10 10\nv0 a 0 9 1 1\n"), FormatError);
    EXPECT_THROW(io::parseCorners("board 3 x 0.03\n"), FormatError);
}

TEST(Corners, BoardArgument)
{
    const BoardSpec b = io::parseBoardArg("7x10:0.02");
    EXPECT_EQ(b.rows, 7);
    EXPECT_EQ(b.cols, 10);
    EXPECT_DOUBLE_EQ(b.squareSize, 0.02);
    for (const char* bad : {"7x10", "7:0.02", "ax10:0.02", "7x10:-1", "0x10:0.02"})
        EXPECT_ANY_THROW(io::parseBoardArg(bad)) << bad;
}

TEST(Corners, MergeRejectsConflictingBoards)
{
    io::CornerFile a, b;
    a.hasBoard = b.hasBoard = true;
    b.board.squareSize = 0.05;
    EXPECT_THROW(io::mergeCorners({a, b}), FormatError);
}

TEST(Ply, PointCloudRoundTrip)
{
    MultimodalPointCloud cloud;
    cloud.points = {Vec3(0.1, -0.2, 0.9), Vec3(0.5, 0.25, 1.1)};
    ModalitySamples rgb{"rgb cam", "rgb", 3, {0.1f, 0.2f, 0.3f, 0.0f, 0.0f, 0.0f}, {1, 2}};
    ModalitySamples th{"thermal", "thermal", 1, {31.5f, 0.0f}, {3, 6}};
    cloud.modalities = {rgb, th};
    for (io::PlyFormat f : {io::PlyFormat::Ascii, io::PlyFormat::BinaryLittleEndian})
    {
        const io::PlyTable t = io::decodePly(io::encodePointCloud(cloud, f));
        EXPECT_EQ(t.format, f);
        ASSERT_EQ(t.properties.size(), 3u + 4u + 2u);
        EXPECT_EQ(t.properties[0].name, "x");
        EXPECT_EQ(t.properties[6].name.rfind("case_", 0), 0u);
        EXPECT_EQ(t.properties[6].type, "uchar");
        ASSERT_EQ(t.rows.size(), 2u);
        EXPECT_NEAR(t.rows[1][2], 1.1, 1e-6);
        EXPECT_NEAR(t.rows[0][4], 0.2, 1e-7);
        EXPECT_EQ(t.rows[1][6], 2.0);
        EXPECT_NEAR(t.rows[0][7], 31.5, 0.0);
        EXPECT_EQ(t.rows[1][8], 6.0);
    }
}

TEST(Ply, MeshHeader)
{
    TriangleMesh m;
    m.vertices = {Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(0, 1, 1)};
    m.triangles = {{0, 1, 2}};
    const std::string s = io::encodeMeshPly(m);
    EXPECT_NE(s.find("element vertex 3"), std::string::npos);
    EXPECT_NE(s.find("element face 1"), std::string::npos);
    const io::PlyTable t = io::decodePly(s);
    EXPECT_EQ(t.rows.size(), 3u);
}

TEST(Config, RigRoundTrip)
{
    config::RigConfig cfg;
    cfg.rig = synth::defaultRig(true);
    cfg.settings.roi = Roi{-1, 1, -0.5, 0.5, 0.3, 1.2};
    cfg.settings.groundZ = 1.1;
    cfg.settings.maxAngleDeg = 70;
    const config::RigConfig back = config::parseRig(config::formatRig(cfg));
    ASSERT_EQ(back.rig.cameras.size(), cfg.rig.cameras.size());
    EXPECT_EQ(back.rig.depthCameraId, cfg.rig.depthCameraId);
    for (std::size_t i = 0; i < cfg.rig.cameras.size(); ++i)
    {
        const CameraModel& a = cfg.rig.cameras[i];
        const CameraModel& b = back.rig.cameras[i];
        EXPECT_EQ(a.id, b.id);
        EXPECT_EQ(a.intrinsics.fx, b.intrinsics.fx);
        EXPECT_EQ(a.distortion.k1, b.distortion.k1);
        EXPECT_EQ(a.fromDepth.rotation(), b.fromDepth.rotation());
        EXPECT_EQ(a.fromDepth.translation(), b.fromDepth.translation());
    }
    EXPECT_EQ(back.settings.roi.zMax, 1.2);
    EXPECT_EQ(back.settings.groundZ, 1.1);
    EXPECT_EQ(back.settings.maxAngleDeg, 70);
}

TEST(Config, UnknownKeysRejected)
{
    config::RigConfig cfg;
    cfg.rig = synth::defaultRig(false);
    nlohmann::json doc = nlohmann::json::parse(config::formatRig(cfg));
    doc["extra"] = 1;
    EXPECT_THROW(config::parseRig(doc.dump()), FormatError);
    doc.erase("extra");
    doc["cameras"][0]["focal"] = 1;
    EXPECT_THROW(config::parseRig(doc.dump()), FormatError);
    EXPECT_THROW(config::parseRig("{not json"), FormatError);
}

TEST(Config, RigMissingDepthCamera)
{
    config::RigConfig cfg;
    cfg.rig = synth::defaultRig(false);
    nlohmann::json doc = nlohmann::json::parse(config::formatRig(cfg));
    doc["depthCameraId"] = "nope";
    EXPECT_ANY_THROW(config::parseRig(doc.dump()));
}

TEST(Config, SceneRoundTrip)
{
    config::SceneConfig cfg;
    cfg.scene = synth::deskScene();
    cfg.depth.noiseSigma = 0.002;
    cfg.depth.flyingPixels = true;
    cfg.depth.seed = 12;
    cfg.board = config::BoardSection{};
    cfg.board->noise = 0.1;
    const config::SceneConfig back = config::parseScene(config::formatScene(cfg));
    ASSERT_EQ(back.scene.primitives.size(), cfg.scene.primitives.size());
    for (std::size_t i = 0; i < cfg.scene.primitives.size(); ++i)
    {
        const auto& a = cfg.scene.primitives[i];
        const auto& b = back.scene.primitives[i];
        EXPECT_EQ(a.name, b.name);
        EXPECT_EQ(a.kind, b.kind);
        EXPECT_LT((a.center - b.center).norm(), 1e-15);
        EXPECT_LT((a.rotation - b.rotation).norm(), 1e-15);
        EXPECT_EQ(a.texture.kind, b.texture.kind);
    }
    EXPECT_EQ(back.depth.noiseSigma, 0.002);
    EXPECT_TRUE(back.depth.flyingPixels);
    ASSERT_TRUE(back.board);
    EXPECT_EQ(back.board->noise, 0.1);
    EXPECT_EQ(back.scene.groundZ, cfg.scene.groundZ);
}
