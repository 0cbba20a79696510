#pragma once

#include <filesystem>
#include <string>

#include "gnnpower/gumbel.hpp"
#include "gnnpower/modular.hpp"
#include "gnnpower/regnn.hpp"

namespace gnnpower {

/// Structured-text checkpoints. Doubles are written with 17 significant
/// digits so save/load round-trips are bit-exact.

void save_params(const std::filesystem::path& path, const ReGnnParams& params,
                 const std::string& provenance);
ReGnnParams load_params(const std::filesystem::path& path);

void save_module_set(const std::filesystem::path& path, const ModuleSet& mods,
                     const std::string& provenance);
ModuleSet load_module_set(const std::filesystem::path& path);

void save_assignment(const std::filesystem::path& path, const HardAssignment& s,
                     const std::string& provenance);
HardAssignment load_assignment(const std::filesystem::path& path);

/// "params", "modules", or "assignment", by file header.
std::string checkpoint_kind(const std::filesystem::path& path);

/// %.17g formatting used by every full-precision text artifact.
std::string format_full(double v);

} // namespace gnnpower
