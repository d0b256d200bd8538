#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "mmreg/calibration.hpp"
#include "mmreg/registration.hpp"
#include "mmreg/synthetic.hpp"

namespace mmreg::config {

/// Rig plus the registration settings stored alongside it.
struct RigConfig
{
    CameraRig rig;
    RegistrationSettings settings;
};

/// JSON document; unknown keys are rejected with FormatError.
RigConfig parseRig(const std::string& text);
RigConfig readRig(const std::filesystem::path& path);
std::string formatRig(const RigConfig& cfg);

struct BoardSection
{
    BoardSpec board;
    int poses = 23;
    double noise = 0.0;
    double minZ = 0.55;
    double maxZ = 0.9;
};

struct SceneConfig
{
    synth::SceneSpec scene;
    synth::DepthRenderOptions depth;
    std::optional<BoardSection> board;
};

SceneConfig parseScene(const std::string& text);
SceneConfig readScene(const std::filesystem::path& path);
std::string formatScene(const SceneConfig& cfg);

} // namespace mmreg::config
