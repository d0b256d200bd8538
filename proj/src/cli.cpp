#include "mmreg/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "mmreg/calibration.hpp"
#include "mmreg/config.hpp"
#include "mmreg/errors.hpp"
#include "mmreg/io.hpp"
#include "mmreg/metrics.hpp"
#include "mmreg/registration.hpp"
#include "mmreg/synthetic.hpp"

namespace mmreg::cli {

namespace fs = std::filesystem;

namespace {

struct CalibrateArgs
{
    std::vector<std::string> corners;
    std::string board;
    std::string out;
    std::string report;
    std::string depthCamera;
    std::vector<double> roi;
    double groundZ = 0.0;
    double maxAngle = kDefaultMaxVerticalAngleDeg;
};

struct RegisterArgs
{
    std::string rig;
    std::string depth;
    std::vector<std::string> images;
    std::string target;
    std::string out;
    std::string interp = "bilinear";
    bool pointcloud = false;
    bool ascii = false;
    bool meshes = false;
};

struct EvaluateArgs
{
    std::string rig;
    std::vector<std::string> corners;
    std::string board;
    std::string depthDir;
    std::string out;
    std::string residuals;
    std::vector<double> zRange;
    bool noDepth = false;
};

struct SynthArgs
{
    std::string scene;
    std::string rig;
    std::uint64_t seed = 0;
    std::string out;
    std::string target;
    std::string depthFormat = "pfm";
    bool occlusion = false;
};

struct TemplateArgs
{
    std::string rig;
    std::string scene;
    bool noDistortion = false;
};

std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Roi roiFromArg(const std::vector<double>& v)
{
    Roi roi;
    if (v.empty())
    {
        roi.xMin = -1.0;
        roi.xMax = 1.0;
        roi.yMin = -1.0;
        roi.yMax = 1.0;
        roi.zMin = 0.3;
        roi.zMax = 1.2;
        return roi;
    }
    if (v.size() != 6)
        throw UsageError("--roi needs six values: xmin,xmax,ymin,ymax,zmin,zmax");
    roi.xMin = v[0];
    roi.xMax = v[1];
    roi.yMin = v[2];
    roi.yMax = v[3];
    roi.zMin = v[4];
    roi.zMax = v[5];
    roi.validate();
    return roi;
}

io::CornerFile loadCorners(const std::vector<std::string>& paths, const std::string& boardArg)
{
    std::optional<BoardSpec> board;
    if (!boardArg.empty())
        board = io::parseBoardArg(boardArg);
    std::vector<io::CornerFile> files;
    for (const auto& p : paths)
        files.push_back(io::readCorners(p, board ? &*board : nullptr));
    return io::mergeCorners(files);
}

int calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err)
{
    const io::CornerFile corners = loadCorners(a.corners, a.board);
    if (corners.cameras.empty())
        throw UsageError("corner files declare no cameras (camera <id> <width> <height> [modality])");
    std::map<std::string, std::pair<int, int>> sizes;
    for (const auto& c : corners.cameras)
        sizes[c.id] = {c.width, c.height};
    for (const auto& v : corners.views)
        if (!sizes.count(v.cameraId))
            throw UsageError("corners for undeclared camera '" + v.cameraId + "'");
    const std::string depthId = a.depthCamera.empty() ? corners.cameras.front().id : a.depthCamera;
    if (!sizes.count(depthId))
        throw UsageError("unknown depth camera '" + depthId + "'");

    const CalibrationResult result = calibrateRig(corners.views, sizes);
    for (const auto& w : result.warnings)
        err << "warning: " << w << '\n';

    config::RigConfig cfg;
    std::vector<CameraModel> cams;
    for (const auto& decl : corners.cameras)
    {
        const auto it = result.cameras.find(decl.id);
        if (it == result.cameras.end())
            throw UsageError("camera '" + decl.id + "' has no corner observations");
        CameraModel m;
        m.id = decl.id;
        m.modality = decl.modality;
        m.intrinsics = it->second.intrinsics;
        m.distortion = it->second.distortion;
        if (decl.id != depthId)
            m.fromDepth = result.pairs.at({depthId, decl.id});
        cams.push_back(m);
    }
    cfg.rig = makeRig(std::move(cams), depthId);
    cfg.settings.roi = roiFromArg(a.roi);
    cfg.settings.groundZ = a.groundZ;
    cfg.settings.maxAngleDeg = a.maxAngle;
    cfg.rig.validate();
    io::writeFileAtomic(a.out, config::formatRig(cfg));

    EvaluationSettings es;
    es.roi = cfg.settings.roi;
    es.zNear = cfg.settings.roi.zMin > 0.0 ? cfg.settings.roi.zMin : 0.3;
    es.zFar = cfg.settings.roi.zMax;
    es.depth = false;
    const ErrorReport report = evaluateRig(cfg.rig, corners.views, {}, es, &result);
    std::ostringstream text;
    writeReport(text, report);
    fs::path reportPath = a.report;
    if (reportPath.empty())
    {
        reportPath = a.out;
        reportPath.replace_extension(".report.txt");
    }
    io::writeFileAtomic(reportPath, text.str());
    out << "wrote " << a.out << " and " << reportPath.string() << '\n';
    return kExitOk;
}

std::pair<std::string, std::string> splitAssignment(const std::string& s)
{
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
        throw UsageError("expected CAM=FILE, got '" + s + "'");
    return {s.substr(0, eq), s.substr(eq + 1)};
}

int registerCmd(const RegisterArgs& a, std::ostream& out, std::ostream& err)
{
    const config::RigConfig cfg = config::readRig(a.rig);
    const CameraRig& rig = cfg.rig;
    if (!rig.has(a.target))
        throw UsageError("unknown target camera '" + a.target + "'");
    const DepthMap depth = io::readDepth(a.depth, rig.depthCamera().intrinsics);

    std::map<std::string, Image> images;
    for (const auto& spec : a.images)
    {
        const auto [id, file] = splitAssignment(spec);
        if (!rig.has(id))
            throw UsageError("unknown camera '" + id + "' in --image " + spec);
        if (images.count(id))
            throw UsageError("camera '" + id + "' given twice");
        Image img = io::readImage(file);
        const auto& K = rig.camera(id).intrinsics;
        if (img.width != K.width || img.height != K.height)
            throw UsageError(file + ": image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                             ", camera '" + id + "' expects " + std::to_string(K.width) + "x" +
                             std::to_string(K.height));
        images.emplace(id, std::move(img));
    }

    RegistrationSettings settings = cfg.settings;
    settings.interpolation = a.interp == "nearest" ? Interpolation::Nearest : Interpolation::Bilinear;
    const RegistrationResult result = registerAll(rig, a.target, depth, settings, images);
    for (const auto& w : result.uncertainty.warnings)
        err << "warning: " << w << '\n';

    const fs::path dir = a.out;
    fs::create_directories(dir);
    io::writeFileAtomic(dir / "area_mask.pgm", io::encodeMask(result.field.width, result.field.height, result.areaMask));
    for (const auto& [id, src] : result.sources)
    {
        io::writeFileAtomic(dir / ("mask_" + id + ".pgm"),
                            io::encodeMask(result.field.width, result.field.height, src.caseMask));
        if (src.registered)
            io::writeImage(dir / ("registered_" + id), src.registered->image);
    }
    if (a.pointcloud)
        io::writeFileAtomic(dir / "pointcloud.ply",
                            io::encodePointCloud(result.cloud, a.ascii ? io::PlyFormat::Ascii
                                                                       : io::PlyFormat::BinaryLittleEndian));
    if (a.meshes)
    {
        io::writeFileAtomic(dir / "object_mesh.ply", io::encodeMeshPly(result.objectMesh));
        io::writeFileAtomic(dir / "uncertainty_mesh.ply", io::encodeMeshPly(result.uncertainty.mesh));
    }
    out << "registered " << result.sources.size() << " source(s) into " << a.target << ", " << result.cloud.points.size()
        << " object points\n";
    return kExitOk;
}

fs::path depthFileForView(const fs::path& dir, const std::string& viewId)
{
    for (const char* ext : {".pfm", ".pgm"})
    {
        const fs::path p = dir / (viewId + ext);
        if (fs::exists(p))
            return p;
    }
    return {};
}

int evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream&)
{
    const config::RigConfig cfg = config::readRig(a.rig);
    const io::CornerFile corners = loadCorners(a.corners, a.board);
    for (const auto& v : corners.views)
        if (!cfg.rig.has(v.cameraId))
            throw UsageError("corners reference camera '" + v.cameraId + "' which is not in the rig");

    EvaluationSettings es;
    es.roi = cfg.settings.roi;
    es.depth = !a.noDepth;
    if (!a.zRange.empty())
    {
        if (a.zRange.size() != 2)
            throw UsageError("--z-range needs NEAR,FAR");
        es.zNear = a.zRange[0];
        es.zFar = a.zRange[1];
    }
    else
    {
        es.zNear = cfg.settings.roi.zMin > 0.0 ? cfg.settings.roi.zMin : 0.3;
        es.zFar = cfg.settings.roi.zMax < 1e6 ? cfg.settings.roi.zMax : 1.2;
    }

    std::map<std::string, DepthMap> depth;
    if (es.depth)
    {
        if (a.depthDir.empty())
            throw UsageError("--depth-dir is required unless --no-depth is given");
        for (const auto& v : corners.views)
        {
            if (depth.count(v.viewId))
                continue;
            const fs::path p = depthFileForView(a.depthDir, v.viewId);
            if (p.empty())
                throw UsageError("missing depth map for view " + v.viewId + " in " + a.depthDir);
            depth.emplace(v.viewId, io::readDepth(p, cfg.rig.depthCamera().intrinsics));
        }
    }

    const ErrorReport report = evaluateRig(cfg.rig, corners.views, depth, es);
    std::ostringstream text;
    writeReport(text, report);
    io::writeFileAtomic(a.out, text.str());
    if (!a.residuals.empty())
    {
        std::ostringstream res;
        writeResiduals(res, report);
        io::writeFileAtomic(a.residuals, res.str());
    }
    out << "wrote " << a.out << '\n';
    return kExitOk;
}

std::string groundTruthTable(const synth::GroundTruth& gt, bool occlusion)
{
    std::ostringstream os;
    os << "# col row x y z primitive";
    if (occlusion)
        os << " incoming_occluded";
    for (const auto& s : gt.sources)
    {
        os << ' ' << s.cameraId << "_u " << s.cameraId << "_v " << s.cameraId << "_inbounds " << s.cameraId
           << "_visible";
        if (occlusion)
            os << ' ' << s.cameraId << "_outgoing_occluded";
    }
    os << '\n';
    for (int row = 0; row < gt.height; ++row)
        for (int col = 0; col < gt.width; ++col)
        {
            const std::size_t i = gt.index(col, row);
            if (!gt.hit[i])
                continue;
            os << col << ' ' << row << ' ' << fmt17(gt.point[i].x()) << ' ' << fmt17(gt.point[i].y()) << ' '
               << fmt17(gt.point[i].z()) << ' ' << gt.primitive[i];
            if (occlusion)
                os << ' ' << int(gt.incomingOccluded[i]);
            for (const auto& s : gt.sources)
            {
                os << ' ' << fmt17(s.pixel[i].u) << ' ' << fmt17(s.pixel[i].v) << ' ' << int(s.inBounds[i]) << ' '
                   << int(s.visible[i]);
                if (occlusion)
                    os << ' ' << int(s.outgoingOccluded[i]);
            }
            os << '\n';
        }
    return os.str();
}

int synthCmd(const SynthArgs& a, std::ostream& out, std::ostream& err)
{
    const config::SceneConfig sc = config::readScene(a.scene);
    const config::RigConfig rc = config::readRig(a.rig);
    const CameraRig& rig = rc.rig;
    const std::string target = a.target.empty() ? rig.depthCameraId : a.target;
    if (!rig.has(target))
        throw UsageError("unknown target camera '" + target + "'");
    const fs::path dir = a.out;
    fs::create_directories(dir);

    synth::DepthRenderOptions dopt = sc.depth;
    dopt.seed = a.seed;
    const DepthMap depth = synth::renderDepth(sc.scene, rig.depthCamera(), dopt);
    io::writeFileAtomic(dir / ("depth." + a.depthFormat),
                        a.depthFormat == "pgm" ? io::encodeDepthPgm(depth) : io::encodeDepthPfm(depth));

    for (const auto& cam : rig.cameras)
    {
        const synth::RenderedImage img = synth::renderModality(sc.scene, cam);
        io::writeFileAtomic(dir / ("image_" + cam.id + ".pfm"), io::encodePfm(img.image));
    }

    synth::GroundTruthOptions gopt;
    gopt.occludedVolume = a.occlusion;
    const synth::GroundTruth gt = synth::groundTruth(sc.scene, rig, target, gopt);
    io::writeFileAtomic(dir / "groundtruth.txt", groundTruthTable(gt, a.occlusion));

    if (sc.board)
    {
        const auto& b = *sc.board;
        const auto poses = synth::visibleBoardPoses(rig, b.board, b.poses, a.seed, b.minZ, b.maxZ);
        std::vector<std::string> warnings;
        io::CornerFile cf;
        cf.hasBoard = true;
        cf.board = b.board;
        for (const auto& cam : rig.cameras)
            cf.cameras.push_back({cam.id, cam.intrinsics.width, cam.intrinsics.height, cam.modality});
        cf.views = synth::makeCheckerboardViews(rig, b.board, poses, b.noise, a.seed + 1, &warnings);
        for (const auto& w : warnings)
            err << "warning: " << w << '\n';
        io::writeCorners(dir / "corners.txt", cf);

        for (std::size_t i = 0; i < poses.size(); ++i)
        {
            synth::SceneSpec boardScene;
            boardScene.ground = false;
            boardScene.primitives.push_back(synth::boardPrimitive(b.board, poses[i], 0.5 * b.board.squareSize));
            synth::DepthRenderOptions bopt = sc.depth;
            bopt.seed = a.seed + 1000 + i;
            const DepthMap dm = synth::renderDepth(boardScene, rig.depthCamera(), bopt);
            io::writeFileAtomic(dir / "boards" / (synth::viewName(i) + "." + a.depthFormat),
                                a.depthFormat == "pgm" ? io::encodeDepthPgm(dm) : io::encodeDepthPfm(dm));
        }
    }
    out << "wrote synthetic dataset to " << dir.string() << '\n';
    return kExitOk;
}

config::SceneConfig defaultScene()
{
    config::SceneConfig sc;
    sc.scene = synth::deskScene();
    config::BoardSection board;
    board.noise = 0.1;
    sc.board = board;
    return sc;
}

int templateCmd(const TemplateArgs& a, std::ostream& out)
{
    if (!a.rig.empty())
    {
        config::RigConfig rc;
        rc.rig = synth::defaultRig(!a.noDistortion);
        rc.settings.roi = synth::deskScene().roi;
        rc.settings.groundZ = synth::deskScene().groundZ;
        io::writeFileAtomic(a.rig, config::formatRig(rc));
        out << "wrote " << a.rig << '\n';
    }
    if (!a.scene.empty())
    {
        io::writeFileAtomic(a.scene, config::formatScene(defaultScene()));
        out << "wrote " << a.scene << '\n';
    }
    return kExitOk;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Multimodal ray-cast image registration"};
    app.require_subcommand(1);

    CalibrateArgs ca;
    auto* cal = app.add_subcommand("calibrate", "calibrate a rig from checkerboard corner files");
    cal->add_option("--corners", ca.corners, "corner files")->required();
    cal->add_option("--board", ca.board, "board geometry ROWSxCOLS:SQUARE (overrides missing headers)");
    cal->add_option("--out", ca.out, "output rig config")->required();
    cal->add_option("--report", ca.report, "error report path (default: next to --out)");
    cal->add_option("--depth-camera", ca.depthCamera, "id of the depth camera (default: first declared)");
    cal->add_option("--roi", ca.roi, "xmin,xmax,ymin,ymax,zmin,zmax in meters")->delimiter(',');
    cal->add_option("--ground-z", ca.groundZ, "ground plane depth in meters (default: ROI zmax)");
    cal->add_option("--max-angle", ca.maxAngle, "mesh vertical angle threshold in degrees");

    RegisterArgs ra;
    auto* reg = app.add_subcommand("register", "register source images into a target camera");
    reg->add_option("--rig", ra.rig, "rig config")->required();
    reg->add_option("--depth", ra.depth, "depth map (16-bit PGM in mm or PFM in m)")->required();
    reg->add_option("--image", ra.images, "CAM=FILE, repeatable");
    reg->add_option("--target", ra.target, "target camera id")->required();
    reg->add_option("--out", ra.out, "output directory")->required();
    reg->add_option("--interp", ra.interp, "bilinear or nearest")->check(CLI::IsMember({"bilinear", "nearest"}));
    reg->add_flag("--pointcloud", ra.pointcloud, "write pointcloud.ply");
    reg->add_flag("--ascii", ra.ascii, "ASCII instead of binary PLY");
    reg->add_flag("--meshes", ra.meshes, "also write the object and uncertainty meshes");

    EvaluateArgs ea;
    auto* ev = app.add_subcommand("evaluate", "intrinsic, extrinsic and depth error tables");
    ev->add_option("--rig", ea.rig, "rig config")->required();
    ev->add_option("--corners", ea.corners, "corner files")->required();
    ev->add_option("--board", ea.board, "board geometry ROWSxCOLS:SQUARE");
    ev->add_option("--depth-dir", ea.depthDir, "directory with <viewId>.pfm or <viewId>.pgm depth maps");
    ev->add_option("--out", ea.out, "report path")->required();
    ev->add_option("--residuals", ea.residuals, "optional per-corner residual dump");
    ev->add_option("--z-range", ea.zRange, "epipolar sampling depths NEAR,FAR (default: ROI z range)")
        ->delimiter(',');
    ev->add_flag("--no-depth", ea.noDepth, "skip the depth error table");

    SynthArgs sa;
    auto* sy = app.add_subcommand("synth", "render a synthetic dataset");
    sy->add_option("--scene", sa.scene, "scene config")->required();
    sy->add_option("--rig", sa.rig, "rig config")->required();
    sy->add_option("--seed", sa.seed, "random seed");
    sy->add_option("--out", sa.out, "output directory")->required();
    sy->add_option("--target", sa.target, "camera for the ground-truth table (default: depth camera)");
    sy->add_option("--depth-format", sa.depthFormat, "pfm or pgm")->check(CLI::IsMember({"pfm", "pgm"}));
    sy->add_flag("--occlusion", sa.occlusion, "add dense shadow-volume flags to the ground truth (slow)");

    TemplateArgs ta;
    auto* tp = app.add_subcommand("template", "write the default desk rig and scene configs");
    tp->add_option("--rig", ta.rig, "rig config to write");
    tp->add_option("--scene", ta.scene, "scene config to write");
    tp->add_flag("--no-distortion", ta.noDistortion, "zero lens distortion in the rig");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try
    {
        if (*cal)
            return calibrate(ca, out, err);
        if (*reg)
            return registerCmd(ra, out, err);
        if (*ev)
            return evaluate(ea, out, err);
        if (*sy)
            return synthCmd(sa, out, err);
        if (*tp)
            return templateCmd(ta, out);
    }
    catch (const OptimizationError& e)
    {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
    catch (const NumericError& e)
    {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
    catch (const DomainError& e)
    {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
    catch (const FormatError& e)
    {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
    catch (const EstimationError& e)
    {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
    catch (const std::invalid_argument& e)
    {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
    catch (const fs::filesystem_error& e)
    {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
    return kExitInput;
}

} // namespace mmreg::cli
