#include "mmreg/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

#include "mmreg/errors.hpp"

namespace mmreg::io {

static_assert(std::endian::native == std::endian::little, "binary writers assume a little-endian host");

namespace {

std::vector<std::string> tokenize(const std::string& line)
{
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok)
        out.push_back(tok);
    return out;
}

template <typename T>
bool parseNumber(const std::string& s, T& out)
{
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

template <typename T>
T number(const std::string& s, const char* what, std::size_t line)
{
    T v{};
    if (!parseNumber(s, v))
        throw FormatError(std::string("invalid ") + what + " '" + s + "'", line);
    if constexpr (std::is_floating_point_v<T>)
        if (!std::isfinite(v))
            throw FormatError(std::string("non-finite ") + what, line);
    return v;
}

std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Header tokens of a binary netpbm / PFM file, leaving `pos` at the sample data.
std::string headerToken(const std::string& bytes, std::size_t& pos)
{
    for (;;)
    {
        while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos])))
            ++pos;
        if (pos < bytes.size() && bytes[pos] == '#')
        {
            while (pos < bytes.size() && bytes[pos] != '\n')
                ++pos;
            continue;
        }
        break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])))
        ++pos;
    if (start == pos)
        throw FormatError("truncated image header");
    return bytes.substr(start, pos - start);
}

int headerInt(const std::string& bytes, std::size_t& pos, const char* what)
{
    int v = 0;
    const std::string tok = headerToken(bytes, pos);
    if (!parseNumber(tok, v) || v <= 0)
        throw FormatError(std::string("invalid image ") + what + " '" + tok + "'");
    return v;
}

void appendFloat(std::string& out, float f)
{
    char b[4];
    std::memcpy(b, &f, 4);
    out.append(b, 4);
}

float readFloat(const std::string& bytes, std::size_t pos, bool bigEndian)
{
    std::uint32_t u;
    std::memcpy(&u, bytes.data() + pos, 4);
    if (bigEndian)
        u = __builtin_bswap32(u);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

std::string plyName(const std::string& s)
{
    std::string out;
    for (char c : s)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_') ? c : '_';
    return out;
}

std::size_t plyTypeSize(const std::string& type)
{
    static const std::map<std::string, std::size_t> sizes = {
        {"char", 1},  {"uchar", 1},  {"int8", 1},   {"uint8", 1},   {"short", 2},  {"ushort", 2},
        {"int16", 2}, {"uint16", 2}, {"int", 4},    {"uint", 4},    {"int32", 4},  {"uint32", 4},
        {"float", 4}, {"float32", 4}, {"double", 8}, {"float64", 8},
    };
    auto it = sizes.find(type);
    if (it == sizes.end())
        throw FormatError("unsupported PLY property type '" + type + "'");
    return it->second;
}

double readPlyBinary(const char* p, const std::string& type)
{
    auto get = [p](auto v) {
        std::memcpy(&v, p, sizeof v);
        return static_cast<double>(v);
    };
    if (type == "char" || type == "int8")
        return get(std::int8_t{});
    if (type == "uchar" || type == "uint8")
        return get(std::uint8_t{});
    if (type == "short" || type == "int16")
        return get(std::int16_t{});
    if (type == "ushort" || type == "uint16")
        return get(std::uint16_t{});
    if (type == "int" || type == "int32")
        return get(std::int32_t{});
    if (type == "uint" || type == "uint32")
        return get(std::uint32_t{});
    if (type == "float" || type == "float32")
        return get(float{});
    return get(double{});
}

} // namespace

void writeFileAtomic(const fs::path& path, const std::string& bytes)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp-" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw UsageError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out)
        {
            out.close();
            fs::remove(tmp);
            throw UsageError("write failed for " + path.string());
        }
    }
    fs::rename(tmp, path);
}

std::string readFile(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw UsageError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Corner files ------------------------------------------------------------------

CornerFile parseCorners(const std::string& text, const BoardSpec* boardOverride)
{
    CornerFile file;
    if (boardOverride)
    {
        file.board = *boardOverride;
        file.hasBoard = true;
    }
    std::map<std::pair<std::string, std::string>, std::size_t> viewIndex;
    std::set<std::tuple<std::string, std::string, int, int>> seen;
    std::set<std::string> declared;

    std::istringstream in(text);
    std::string line;
    std::size_t lineNo = 0;
    bool headerFromFile = false;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        const auto tok = tokenize(line);
        if (tok.empty() || tok[0][0] == '#')
            continue;
        if (tok[0] == "board")
        {
            if (tok.size() != 4)
                throw FormatError("board line needs: board <rows> <cols> <squareSize>", lineNo);
            if (headerFromFile)
                throw FormatError("duplicate board line", lineNo);
            BoardSpec b;
            b.rows = number<int>(tok[1], "board rows", lineNo);
            b.cols = number<int>(tok[2], "board cols", lineNo);
            b.squareSize = number<double>(tok[3], "square size", lineNo);
            try
            {
                b.validate();
            }
            catch (const UsageError& e)
            {
                throw FormatError(e.what(), lineNo);
            }
            if (boardOverride && (b.rows != boardOverride->rows || b.cols != boardOverride->cols ||
                                  b.squareSize != boardOverride->squareSize))
                throw FormatError("board line disagrees with the requested board geometry", lineNo);
            file.board = b;
            file.hasBoard = true;
            headerFromFile = true;
            continue;
        }
        if (tok[0] == "camera")
        {
            if (tok.size() != 4 && tok.size() != 5)
                throw FormatError("camera line needs: camera <id> <width> <height> [modality]", lineNo);
            CameraDecl d;
            d.id = tok[1];
            d.width = number<int>(tok[2], "width", lineNo);
            d.height = number<int>(tok[3], "height", lineNo);
            if (d.width <= 0 || d.height <= 0)
                throw FormatError("camera size must be positive", lineNo);
            if (tok.size() == 5)
                d.modality = tok[4];
            if (!declared.insert(d.id).second)
                throw FormatError("camera '" + d.id + "' declared twice", lineNo);
            file.cameras.push_back(d);
            continue;
        }
        if (tok.size() != 6)
            throw FormatError("corner line needs: <viewId> <cameraId> <row> <col> <u> <v>", lineNo);
        if (!file.hasBoard)
            throw FormatError("corner line before the board line", lineNo);
        CornerObservation c;
        c.row = number<int>(tok[2], "board row", lineNo);
        c.col = number<int>(tok[3], "board col", lineNo);
        if (c.row < 0 || c.row >= file.board.rows || c.col < 0 || c.col >= file.board.cols)
            throw FormatError("corner (" + tok[2] + "," + tok[3] + ") outside the declared grid", lineNo);
        c.imagePoint.u = number<double>(tok[4], "u", lineNo);
        c.imagePoint.v = number<double>(tok[5], "v", lineNo);
        c.boardPoint = file.board.cornerPosition(c.row, c.col);
        if (!seen.insert({tok[0], tok[1], c.row, c.col}).second)
            throw FormatError("duplicate corner", lineNo);
        const auto key = std::make_pair(tok[1], tok[0]);
        auto it = viewIndex.find(key);
        if (it == viewIndex.end())
        {
            CalibrationView v;
            v.cameraId = tok[1];
            v.viewId = tok[0];
            file.views.push_back(std::move(v));
            it = viewIndex.emplace(key, file.views.size() - 1).first;
        }
        file.views[it->second].corners.push_back(c);
    }
    if (!file.hasBoard)
        throw FormatError("no board geometry (board line or --board)");
    return file;
}

CornerFile readCorners(const fs::path& path, const BoardSpec* boardOverride)
{
    try
    {
        return parseCorners(readFile(path), boardOverride);
    }
    catch (const FormatError& e)
    {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string formatCorners(const CornerFile& file)
{
    std::ostringstream out;
    out << "# viewId cameraId boardRow boardCol u v\n";
    out << "board " << file.board.rows << ' ' << file.board.cols << ' ' << fmt17(file.board.squareSize) << '\n';
    for (const auto& c : file.cameras)
    {
        out << "camera " << c.id << ' ' << c.width << ' ' << c.height;
        if (!c.modality.empty())
            out << ' ' << c.modality;
        out << '\n';
    }
    for (const auto& v : file.views)
        for (const auto& c : v.corners)
            out << v.viewId << ' ' << v.cameraId << ' ' << c.row << ' ' << c.col << ' ' << fmt17(c.imagePoint.u) << ' '
                << fmt17(c.imagePoint.v) << '\n';
    return out.str();
}

void writeCorners(const fs::path& path, const CornerFile& file)
{
    writeFileAtomic(path, formatCorners(file));
}

CornerFile mergeCorners(const std::vector<CornerFile>& files)
{
    CornerFile out;
    std::map<std::pair<std::string, std::string>, std::size_t> viewIndex;
    std::map<std::string, CameraDecl> decls;
    for (const auto& f : files)
    {
        if (f.hasBoard)
        {
            if (out.hasBoard && (f.board.rows != out.board.rows || f.board.cols != out.board.cols ||
                                 f.board.squareSize != out.board.squareSize))
                throw FormatError("corner files declare different boards");
            out.board = f.board;
            out.hasBoard = true;
        }
        for (const auto& c : f.cameras)
        {
            auto [it, inserted] = decls.emplace(c.id, c);
            if (inserted)
                out.cameras.push_back(c);
            else if (it->second.width != c.width || it->second.height != c.height)
                throw FormatError("camera '" + c.id + "' declared with different sizes");
        }
        for (const auto& v : f.views)
        {
            const auto key = std::make_pair(v.cameraId, v.viewId);
            if (viewIndex.count(key))
                throw FormatError("view " + v.viewId + " of camera " + v.cameraId + " appears in several files");
            viewIndex[key] = out.views.size();
            out.views.push_back(v);
        }
    }
    return out;
}

BoardSpec parseBoardArg(const std::string& arg)
{
    const auto x = arg.find('x');
    const auto colon = arg.find(':');
    BoardSpec b;
    if (x == std::string::npos || colon == std::string::npos || colon < x ||
        !parseNumber(arg.substr(0, x), b.rows) || !parseNumber(arg.substr(x + 1, colon - x - 1), b.cols) ||
        !parseNumber(arg.substr(colon + 1), b.squareSize))
        throw UsageError("board must look like ROWSxCOLS:SQUARE, got '" + arg + "'");
    b.validate();
    return b;
}

// Images ----------------------------------------------------------------------------

std::string encodePnm(const Image& img)
{
    if (img.type == SampleType::F32)
        throw UsageError("netpbm output needs an integer sample type");
    if (img.channels != 1 && img.channels != 3)
        throw UsageError("netpbm output needs 1 or 3 channels");
    const bool wide = img.type == SampleType::U16;
    const int maxval = wide ? 65535 : 255;
    std::string out = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n" + std::to_string(maxval) + "\n";
    out.reserve(out.size() + img.data.size() * (wide ? 2 : 1));
    for (float f : img.data)
    {
        const long v = std::clamp<long>(std::lround(f), 0, maxval);
        if (wide)
            out.push_back(static_cast<char>(v >> 8));
        out.push_back(static_cast<char>(v & 0xff));
    }
    return out;
}

Image decodePnm(const std::string& bytes)
{
    std::size_t pos = 0;
    const std::string magic = headerToken(bytes, pos);
    if (magic != "P5" && magic != "P6")
        throw FormatError("not a binary PGM/PPM file");
    const int w = headerInt(bytes, pos, "width");
    const int h = headerInt(bytes, pos, "height");
    const int maxval = headerInt(bytes, pos, "maxval");
    if (maxval > 65535)
        throw FormatError("maxval above 65535");
    ++pos; // single whitespace after maxval
    const int channels = magic == "P5" ? 1 : 3;
    const bool wide = maxval > 255;
    Image img(w, h, channels, wide ? SampleType::U16 : SampleType::U8);
    const std::size_t need = img.data.size() * (wide ? 2 : 1);
    if (bytes.size() < pos + need)
        throw FormatError("image data truncated");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = wide ? static_cast<float>((p[2 * i] << 8) | p[2 * i + 1]) : static_cast<float>(p[i]);
    return img;
}

std::string encodePfm(const Image& img)
{
    if (img.channels != 1 && img.channels != 3)
        throw UsageError("PFM output needs 1 or 3 channels");
    std::string out = (img.channels == 1 ? "Pf\n" : "PF\n") + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n-1.0\n";
    out.reserve(out.size() + img.data.size() * 4);
    for (int row = img.height - 1; row >= 0; --row)
        for (int col = 0; col < img.width; ++col)
            for (int c = 0; c < img.channels; ++c)
                appendFloat(out, img.at(col, row, c));
    return out;
}

Image decodePfm(const std::string& bytes)
{
    std::size_t pos = 0;
    const std::string magic = headerToken(bytes, pos);
    if (magic != "Pf" && magic != "PF")
        throw FormatError("not a PFM file");
    const int w = headerInt(bytes, pos, "width");
    const int h = headerInt(bytes, pos, "height");
    double scale = 0.0;
    const std::string scaleTok = headerToken(bytes, pos);
    if (!parseNumber(scaleTok, scale) || scale == 0.0)
        throw FormatError("invalid PFM scale '" + scaleTok + "'");
    ++pos;
    const bool bigEndian = scale > 0.0;
    Image img(w, h, magic == "Pf" ? 1 : 3, SampleType::F32);
    if (bytes.size() < pos + img.data.size() * 4)
        throw FormatError("image data truncated");
    for (int row = h - 1; row >= 0; --row)
        for (int col = 0; col < w; ++col)
            for (int c = 0; c < img.channels; ++c, pos += 4)
                img.at(col, row, c) = readFloat(bytes, pos, bigEndian);
    return img;
}

void writeMultiband(const fs::path& headerPath, const Image& img)
{
    fs::path raw = headerPath;
    raw.replace_extension(".raw");
    std::string data;
    data.reserve(img.data.size() * 4);
    for (int b = 0; b < img.channels; ++b)
        for (int row = 0; row < img.height; ++row)
            for (int col = 0; col < img.width; ++col)
                appendFloat(data, img.at(col, row, b));
    std::ostringstream hdr;
    hdr << "mmreg-multiband\n";
    hdr << "data " << raw.filename().string() << '\n';
    hdr << "width " << img.width << '\n';
    hdr << "height " << img.height << '\n';
    hdr << "bands " << img.channels << '\n';
    if (!img.wavelengths.empty())
    {
        hdr << "wavelengths";
        for (double wl : img.wavelengths)
            hdr << ' ' << fmt17(wl);
        hdr << '\n';
    }
    writeFileAtomic(raw, data);
    writeFileAtomic(headerPath, hdr.str());
}

Image readMultiband(const fs::path& headerPath)
{
    std::istringstream in(readFile(headerPath));
    std::string line;
    std::size_t lineNo = 0;
    std::string dataName;
    int w = 0, h = 0, bands = 0;
    std::vector<double> wavelengths;
    while (std::getline(in, line))
    {
        ++lineNo;
        const auto tok = tokenize(line);
        if (tok.empty() || tok[0][0] == '#')
            continue;
        if (lineNo == 1 || (tok.size() == 1 && tok[0] == "mmreg-multiband"))
        {
            if (tok[0] != "mmreg-multiband")
                throw FormatError(headerPath.string() + ": not a multiband header", lineNo);
            continue;
        }
        if (tok[0] == "data" && tok.size() == 2)
            dataName = tok[1];
        else if (tok[0] == "width" && tok.size() == 2)
            w = number<int>(tok[1], "width", lineNo);
        else if (tok[0] == "height" && tok.size() == 2)
            h = number<int>(tok[1], "height", lineNo);
        else if (tok[0] == "bands" && tok.size() == 2)
            bands = number<int>(tok[1], "bands", lineNo);
        else if (tok[0] == "wavelengths")
            for (std::size_t i = 1; i < tok.size(); ++i)
                wavelengths.push_back(number<double>(tok[i], "wavelength", lineNo));
        else
            throw FormatError(headerPath.string() + ": unknown header entry '" + tok[0] + "'", lineNo);
    }
    if (w <= 0 || h <= 0 || bands <= 0 || dataName.empty())
        throw FormatError(headerPath.string() + ": header needs data, width, height and bands");
    if (!wavelengths.empty() && static_cast<int>(wavelengths.size()) != bands)
        throw FormatError(headerPath.string() + ": wavelength count differs from band count");
    const std::string data = readFile(headerPath.parent_path() / dataName);
    Image img(w, h, bands, SampleType::F32);
    img.wavelengths = wavelengths;
    if (data.size() != img.data.size() * 4)
        throw FormatError(headerPath.string() + ": raw data size does not match the header");
    std::size_t pos = 0;
    for (int b = 0; b < bands; ++b)
        for (int row = 0; row < h; ++row)
            for (int col = 0; col < w; ++col, pos += 4)
                img.at(col, row, b) = readFloat(data, pos, false);
    return img;
}

Image readImage(const fs::path& path)
{
    const std::string ext = path.extension().string();
    try
    {
        if (ext == ".hdr")
            return readMultiband(path);
        const std::string bytes = readFile(path);
        if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == 'f' || bytes[1] == 'F'))
            return decodePfm(bytes);
        return decodePnm(bytes);
    }
    catch (const FormatError& e)
    {
        const std::string msg = e.what();
        if (msg.rfind(path.string(), 0) == 0)
            throw;
        throw FormatError(path.string() + ": " + msg);
    }
}

fs::path writeImage(const fs::path& stem, const Image& img)
{
    fs::path out = stem;
    if (img.type != SampleType::F32 && (img.channels == 1 || img.channels == 3))
    {
        out.replace_extension(img.channels == 1 ? ".pgm" : ".ppm");
        writeFileAtomic(out, encodePnm(img));
    }
    else if (img.type == SampleType::F32 && img.wavelengths.empty() && (img.channels == 1 || img.channels == 3))
    {
        out.replace_extension(".pfm");
        writeFileAtomic(out, encodePfm(img));
    }
    else
    {
        out.replace_extension(".hdr");
        writeMultiband(out, img);
    }
    return out;
}

DepthMap readDepth(const fs::path& path, const Intrinsics& intr)
{
    const Image img = readImage(path);
    if (img.channels != 1)
        throw FormatError(path.string() + ": depth must have one channel");
    if (img.width != intr.width || img.height != intr.height)
        throw UsageError(path.string() + ": depth map is " + std::to_string(img.width) + "x" +
                         std::to_string(img.height) + ", depth camera expects " + std::to_string(intr.width) + "x" +
                         std::to_string(intr.height));
    DepthMap dm(img.width, img.height, intr);
    const double scale = img.type == SampleType::F32 ? 1.0 : 0.001;
    for (int row = 0; row < img.height; ++row)
        for (int col = 0; col < img.width; ++col)
        {
            const double v = img.at(col, row);
            if (std::isfinite(v) && v > 0.0)
                dm.set(col, row, v * scale);
        }
    return dm;
}

std::string encodeDepthPgm(const DepthMap& dm)
{
    Image img(dm.width, dm.height, 1, SampleType::U16);
    for (int row = 0; row < dm.height; ++row)
        for (int col = 0; col < dm.width; ++col)
            if (dm.isValid(col, row))
                img.at(col, row) = static_cast<float>(std::clamp<long>(std::lround(dm.at(col, row) * 1000.0), 1, 65535));
    return encodePnm(img);
}

std::string encodeDepthPfm(const DepthMap& dm)
{
    Image img(dm.width, dm.height, 1, SampleType::F32);
    for (int row = 0; row < dm.height; ++row)
        for (int col = 0; col < dm.width; ++col)
            if (dm.isValid(col, row))
                img.at(col, row) = static_cast<float>(dm.at(col, row));
    return encodePfm(img);
}

std::string encodeMask(int width, int height, const std::vector<std::uint8_t>& mask)
{
    if (mask.size() != static_cast<std::size_t>(width) * height)
        throw UsageError("mask size does not match its dimensions");
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(mask.data()), mask.size());
    return out;
}

// PLY -------------------------------------------------------------------------------

std::string encodePointCloud(const MultimodalPointCloud& cloud, PlyFormat format)
{
    std::ostringstream hdr;
    hdr << "ply\n";
    hdr << (format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n");
    hdr << "element vertex " << cloud.points.size() << '\n';
    hdr << "property float x\nproperty float y\nproperty float z\n";
    for (const auto& m : cloud.modalities)
    {
        for (int c = 0; c < m.channels; ++c)
            hdr << "property float " << plyName(m.cameraId) << '_' << c << '\n';
        hdr << "property uchar case_" << plyName(m.cameraId) << '\n';
    }
    hdr << "end_header\n";
    std::string out = hdr.str();

    char buf[48];
    for (std::size_t i = 0; i < cloud.points.size(); ++i)
    {
        const Vec3& p = cloud.points[i];
        if (format == PlyFormat::Ascii)
        {
            std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g", static_cast<float>(p.x()), static_cast<float>(p.y()),
                          static_cast<float>(p.z()));
            out += buf;
            for (const auto& m : cloud.modalities)
            {
                for (int c = 0; c < m.channels; ++c)
                {
                    std::snprintf(buf, sizeof buf, " %.9g", m.values[i * m.channels + c]);
                    out += buf;
                }
                out += ' ' + std::to_string(m.cases[i]);
            }
            out += '\n';
        }
        else
        {
            appendFloat(out, static_cast<float>(p.x()));
            appendFloat(out, static_cast<float>(p.y()));
            appendFloat(out, static_cast<float>(p.z()));
            for (const auto& m : cloud.modalities)
            {
                for (int c = 0; c < m.channels; ++c)
                    appendFloat(out, m.values[i * m.channels + c]);
                out.push_back(static_cast<char>(m.cases[i]));
            }
        }
    }
    return out;
}

PlyTable decodePly(const std::string& bytes)
{
    PlyTable table;
    std::size_t pos = 0;
    auto nextLine = [&]() {
        const std::size_t end = bytes.find('\n', pos);
        if (end == std::string::npos)
            throw FormatError("PLY header not terminated");
        std::string line = bytes.substr(pos, end - pos);
        pos = end + 1;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        return line;
    };
    if (nextLine() != "ply")
        throw FormatError("not a PLY file");
    std::size_t count = 0;
    bool inVertex = false, sawVertex = false, vertexFirst = true;
    for (;;)
    {
        const std::string line = nextLine();
        const auto tok = tokenize(line);
        if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info")
            continue;
        if (tok[0] == "end_header")
            break;
        if (tok[0] == "format")
        {
            if (tok.size() != 3)
                throw FormatError("bad PLY format line");
            if (tok[1] == "ascii")
                table.format = PlyFormat::Ascii;
            else if (tok[1] == "binary_little_endian")
                table.format = PlyFormat::BinaryLittleEndian;
            else
                throw FormatError("unsupported PLY format '" + tok[1] + "'");
        }
        else if (tok[0] == "element")
        {
            if (tok.size() != 3)
                throw FormatError("bad PLY element line");
            inVertex = tok[1] == "vertex";
            if (inVertex)
            {
                if (!parseNumber(tok[2], count))
                    throw FormatError("bad PLY vertex count");
                sawVertex = true;
            }
            else if (!sawVertex)
                vertexFirst = false;
        }
        else if (tok[0] == "property")
        {
            if (inVertex)
            {
                if (tok.size() != 3)
                    throw FormatError("list properties on vertices are not supported");
                plyTypeSize(tok[1]);
                table.properties.push_back({tok[2], tok[1]});
            }
        }
        else
            throw FormatError("unknown PLY header keyword '" + tok[0] + "'");
    }
    if (!sawVertex || !vertexFirst)
        throw FormatError("PLY file must start with a vertex element");

    const std::size_t np = table.properties.size();
    table.rows.reserve(count);
    if (table.format == PlyFormat::Ascii)
    {
        for (std::size_t i = 0; i < count; ++i)
        {
            if (pos >= bytes.size())
                throw FormatError("PLY file has fewer vertices than declared");
            const auto tok = tokenize(nextLine());
            if (tok.size() != np)
                throw FormatError("PLY vertex " + std::to_string(i) + " has " + std::to_string(tok.size()) +
                                  " values, expected " + std::to_string(np));
            std::vector<double> row(np);
            for (std::size_t k = 0; k < np; ++k)
            {
                if (table.properties[k].type == "float" || table.properties[k].type == "float32")
                {
                    float f;
                    if (!parseNumber(tok[k], f))
                        throw FormatError("bad PLY value '" + tok[k] + "'");
                    row[k] = f;
                }
                else if (!parseNumber(tok[k], row[k]))
                    throw FormatError("bad PLY value '" + tok[k] + "'");
            }
            table.rows.push_back(std::move(row));
        }
    }
    else
    {
        std::size_t stride = 0;
        for (const auto& p : table.properties)
            stride += plyTypeSize(p.type);
        if (bytes.size() < pos + stride * count)
            throw FormatError("PLY file has fewer vertices than declared");
        for (std::size_t i = 0; i < count; ++i)
        {
            std::vector<double> row(np);
            for (std::size_t k = 0; k < np; ++k)
            {
                row[k] = readPlyBinary(bytes.data() + pos, table.properties[k].type);
                pos += plyTypeSize(table.properties[k].type);
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

std::string encodeMeshPly(const TriangleMesh& mesh)
{
    std::ostringstream hdr;
    hdr << "ply\nformat binary_little_endian 1.0\n";
    hdr << "element vertex " << mesh.vertices.size() << '\n';
    hdr << "property float x\nproperty float y\nproperty float z\n";
    hdr << "element face " << mesh.triangles.size() << '\n';
    hdr << "property list uchar int vertex_indices\nend_header\n";
    std::string out = hdr.str();
    for (const auto& v : mesh.vertices)
        for (int k = 0; k < 3; ++k)
            appendFloat(out, static_cast<float>(v[k]));
    for (const auto& t : mesh.triangles)
    {
        out.push_back(3);
        for (auto idx : t)
        {
            const auto i = static_cast<std::int32_t>(idx);
            char b[4];
            std::memcpy(b, &i, 4);
            out.append(b, 4);
        }
    }
    return out;
}

} // namespace mmreg::io
