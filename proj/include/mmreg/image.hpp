#pragma once

#include <cstdint>
#include <vector>

namespace mmreg {

enum class SampleType
{
    U8,
    U16,
    F32,
};

enum class Interpolation
{
    Bilinear, // continuous-valued channels
    Nearest,  // label channels
};

/// Interleaved multi-channel image. Integer samples are held exactly as floats;
/// `type` records the on-disk sample type.
struct Image
{
    int width = 0;
    int height = 0;
    int channels = 1;
    SampleType type = SampleType::F32;
    std::vector<float> data;
    // Band centre wavelengths in nm for multi-band captures; empty otherwise.
    std::vector<double> wavelengths;

    Image() = default;
    Image(int w, int h, int c, SampleType t = SampleType::F32)
        : width(w)
        , height(h)
        , channels(c)
        , type(t)
        , data(static_cast<std::size_t>(w) * h * c, 0.0f)
    {
    }

    std::size_t offset(int col, int row) const
    {
        return (static_cast<std::size_t>(row) * width + col) * channels;
    }
    float at(int col, int row, int ch = 0) const { return data[offset(col, row) + ch]; }
    float& at(int col, int row, int ch = 0) { return data[offset(col, row) + ch]; }
};

/// Samples all channels at a continuous coordinate (pixel centres at i + 0.5)
/// into `out`. Returns false when the coordinate lies outside the image.
bool sampleImage(const Image& img, double u, double v, Interpolation interp, float* out);

} // namespace mmreg
