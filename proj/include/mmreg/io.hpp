#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmreg/calibration.hpp"
#include "mmreg/image.hpp"
#include "mmreg/mesh.hpp"
#include "mmreg/registration.hpp"

namespace mmreg::io {

namespace fs = std::filesystem;

/// Writes `bytes` to a temporary sibling and renames it over `path`.
void writeFileAtomic(const fs::path& path, const std::string& bytes);
std::string readFile(const fs::path& path);

// Corner files --------------------------------------------------------------

struct CameraDecl
{
    std::string id;
    int width = 0;
    int height = 0;
    std::string modality;
};

struct CornerFile
{
    bool hasBoard = false;
    BoardSpec board;
    std::vector<CameraDecl> cameras;
    std::vector<CalibrationView> views; // one per (camera, view), in order of first appearance
};

/// Format:
///   # comment
///   board <rows> <cols> <squareSizeMeters>
///   camera <id> <width> <height> [modality]
///   <viewId> <cameraId> <boardRow> <boardCol> <u> <v>
/// Throws FormatError with the line number on malformed input.
CornerFile parseCorners(const std::string& text, const BoardSpec* boardOverride = nullptr);
CornerFile readCorners(const fs::path& path, const BoardSpec* boardOverride = nullptr);
std::string formatCorners(const CornerFile& file);
void writeCorners(const fs::path& path, const CornerFile& file);

/// Concatenates several corner files; board and camera declarations must agree.
CornerFile mergeCorners(const std::vector<CornerFile>& files);

/// "RxC:SIZE", e.g. "6x9:0.025".
BoardSpec parseBoardArg(const std::string& arg);

// Images ----------------------------------------------------------------------

/// Binary PGM (P5, 8 or 16 bit) and PPM (P6, 8 or 16 bit, big-endian samples).
std::string encodePnm(const Image& img);
Image decodePnm(const std::string& bytes);

/// PFM, one or three channels, little-endian, rows stored bottom to top.
std::string encodePfm(const Image& img);
Image decodePfm(const std::string& bytes);

/// Band-sequential little-endian float32 samples plus a text header naming the
/// raw file, size, band count and wavelengths. `headerPath` ends in .hdr.
void writeMultiband(const fs::path& headerPath, const Image& img);
Image readMultiband(const fs::path& headerPath);

/// Dispatch on extension / magic number: .pgm .ppm .pfm .hdr
Image readImage(const fs::path& path);
/// Picks a format from type and channel count; returns the path actually written
/// (the extension of `stem` is replaced).
fs::path writeImage(const fs::path& stem, const Image& img);

/// Depth in meters. PGM: 16-bit millimeters, 0 invalid. PFM: meters, <= 0 or non-finite invalid.
DepthMap readDepth(const fs::path& path, const Intrinsics& intr);
std::string encodeDepthPgm(const DepthMap& dm);
std::string encodeDepthPfm(const DepthMap& dm);

/// 8-bit PGM of mask codes.
std::string encodeMask(int width, int height, const std::vector<std::uint8_t>& mask);

// PLY -------------------------------------------------------------------------

enum class PlyFormat
{
    Ascii,
    BinaryLittleEndian,
};

std::string encodePointCloud(const MultimodalPointCloud& cloud, PlyFormat format);

struct PlyProperty
{
    std::string name;
    std::string type;
};

/// Vertex element of a PLY file, values widened to double.
struct PlyTable
{
    PlyFormat format = PlyFormat::Ascii;
    std::vector<PlyProperty> properties;
    std::vector<std::vector<double>> rows;
};

PlyTable decodePly(const std::string& bytes);

std::string encodeMeshPly(const TriangleMesh& mesh);

} // namespace mmreg::io
