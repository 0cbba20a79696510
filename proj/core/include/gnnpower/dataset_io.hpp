#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "gnnpower/netsim.hpp"

namespace gnnpower {

/// Structured-text dataset fixture: one header block with the generating
/// config, then per-period blocks with placements, adjacency, split indices
/// and row-major gain matrices at full (17 significant digit) precision.
void write_dataset(const std::filesystem::path& path, const SimConfig& cfg,
                   std::span<const PeriodDataset> periods);

std::pair<SimConfig, std::vector<PeriodDataset>> read_dataset(
    const std::filesystem::path& path);

} // namespace gnnpower
