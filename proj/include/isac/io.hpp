#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "isac/types.hpp"

namespace isac {

// Channel binary format: magic "ISACCH1\0", little-endian u32 rows (N_r),
// u32 cols (N_t), then row-major interleaved (re, im) f64.
void save_channel(const std::string& path, const ChannelMatrix& h);
ChannelMatrix load_channel(const std::string& path);

// Voxel contrast binary format: magic "ISACVX1\0", three little-endian u32
// dims, f64 voxel edge, three f64 origin coords, then interleaved (re, im)
// f64 in x-fastest order.
void save_voxels(const std::string& path, const VoxelContrast& grid);
VoxelContrast load_voxels(const std::string& path);

// Run manifest: ordered key=value lines; deterministic for identical inputs.
void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries);

// Byte-wise file comparison (reproducibility checks).
bool files_identical(const std::string& a, const std::string& b);

}  // namespace isac
