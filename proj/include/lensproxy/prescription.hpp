#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "lensproxy/optics.hpp"

namespace lensproxy {

// Plain-text lens prescription:
//
//   index_before=1
//   source_z=-100
//   target_z=15
//   surface kind=spherical vertex_z=0 radius=59.5 semi_aperture=25.3 index_after=1.5168
//
// `#` starts a comment. Header keys may appear in any order before or between
// surface lines. Errors are FormatError with the 1-based line number.

OpticalSystem parse_prescription(std::string_view text);
std::string format_prescription(const OpticalSystem& system);

OpticalSystem load_prescription(const std::filesystem::path& path);
void save_prescription(const OpticalSystem& system, const std::filesystem::path& path);

}  // namespace lensproxy
