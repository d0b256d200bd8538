#include "mmreg/image.hpp"

#include <algorithm>
#include <cmath>

namespace mmreg {

bool sampleImage(const Image& img, double u, double v, Interpolation interp, float* out)
{
    if (!(u >= 0.0 && v >= 0.0 && u < img.width && v < img.height))
        return false;

    if (interp == Interpolation::Nearest)
    {
        const int col = std::min(img.width - 1, static_cast<int>(u));
        const int row = std::min(img.height - 1, static_cast<int>(v));
        const float* px = img.data.data() + img.offset(col, row);
        std::copy(px, px + img.channels, out);
        return true;
    }

    const double x = u - 0.5;
    const double y = v - 0.5;
    const double fx0 = std::floor(x);
    const double fy0 = std::floor(y);
    const double ax = x - fx0;
    const double ay = y - fy0;
    const int x0 = std::clamp(static_cast<int>(fx0), 0, img.width - 1);
    const int x1 = std::clamp(static_cast<int>(fx0) + 1, 0, img.width - 1);
    const int y0 = std::clamp(static_cast<int>(fy0), 0, img.height - 1);
    const int y1 = std::clamp(static_cast<int>(fy0) + 1, 0, img.height - 1);
    const float* p00 = img.data.data() + img.offset(x0, y0);
    const float* p10 = img.data.data() + img.offset(x1, y0);
    const float* p01 = img.data.data() + img.offset(x0, y1);
    const float* p11 = img.data.data() + img.offset(x1, y1);
    for (int c = 0; c < img.channels; ++c)
    {
        const double top = (1.0 - ax) * p00[c] + ax * p10[c];
        const double bottom = (1.0 - ax) * p01[c] + ax * p11[c];
        out[c] = static_cast<float>((1.0 - ay) * top + ay * bottom);
    }
    return true;
}

} // namespace mmreg
