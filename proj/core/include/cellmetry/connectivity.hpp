#pragma once

#include <filesystem>
#include <string>

#include "cellmetry/store.hpp"

namespace cellmetry {

/// u8 {0,255} multi-page TIFF of every voxel whose label has `connected_to_<target>`
/// true in the individual analysis table (false when `inverted`), written to
/// `export/<labelmap>_connected_to_<target>[_inverted].tif`.
std::filesystem::path export_connectivity(const Project& project, const std::string& labelmap_id,
                                          const std::string& target_id, bool inverted);

}  // namespace cellmetry
