#pragma once

#include <filesystem>
#include <string>

#include "funnelsim/harness.hpp"

namespace fsim {

/// Run export, one row per output sample. Columns: t, y, ydot, controller
/// state, u, e, phi, funnel_radius (empty where phi = 0), occupancy, then
/// theta_norm (filter controller) or k0,k1,k2 (comparison controller).
/// 17-significant-digit decimal cells, LF line endings. Partial runs carry a
/// trailing "# status: ..." comment row.
std::string csv_text(const RunResult& r);
void write_csv(const RunResult& r, const std::filesystem::path& path);

/// Side-by-side export of a comparison pair over the shared grid:
/// t, then y/u/e per side, then the common funnel columns.
std::string compare_csv_text(const CompareResult& c);
void write_compare_csv(const CompareResult& c, const std::filesystem::path& path);

}  // namespace fsim
