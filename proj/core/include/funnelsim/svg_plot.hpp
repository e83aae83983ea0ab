#pragma once

#include <filesystem>
#include <string>

#include "funnelsim/harness.hpp"

namespace fsim {

/// Two stacked panels: tracking error with the funnel boundary +-1/phi(t)
/// shaded, and the control input. Scalar outputs are drawn signed; for m > 1
/// the norms are drawn against the +1/phi boundary. Breached runs are marked
/// with a vertical line at the breach time.
std::string svg_text(const RunResult& r);
void write_svg(const RunResult& r, const std::filesystem::path& path);

/// Both runs overlaid in the same two panels, with the first scenario's
/// funnel as the common boundary.
std::string svg_pair_text(const RunResult& a, const RunResult& b);
void write_svg_pair(const RunResult& a, const RunResult& b,
                    const std::filesystem::path& path);

}  // namespace fsim
