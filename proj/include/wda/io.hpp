#ifndef WDA_IO_HPP_
#define WDA_IO_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wda/grid.hpp"

namespace wda::io {

// ---- PNG (single-channel 8/16-bit and RGB8) -------------------------------

// Values clamped to [0,1] then quantized.
void write_png_gray8(const std::string& path, const GridF& img);
void write_png_gray16(const std::string& path, const GridF& img);
// Raw integer planes (instance ids, binary labels scaled by the caller).
void write_png_gray16_raw(const std::string& path, const Grid<uint16_t>& img);
void write_png_rgb8(const std::string& path, const Grid<std::array<uint8_t, 3>>& img);

// Reads 8- or 16-bit grayscale (RGB collapses to luma), normalized to [0,1].
GridF read_png_gray(const std::string& path);
// Reads the raw integer values without normalization (for instance maps).
Grid<uint16_t> read_png_gray16_raw(const std::string& path);

// ---- npy (version 1.0, little-endian, C order) ----------------------------

void write_npy(const std::string& path, const GridF& g);
void write_npy(const std::string& path, const GridI& g);
GridF read_npy_f32(const std::string& path);
GridI read_npy_i32(const std::string& path);
// 3D float volume, shape [d][h][w], used by stack ingestion.
std::vector<GridF> read_npy_volume(const std::string& path);

// ---- misc ------------------------------------------------------------------

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);
void make_dirs(const std::string& path);
// Sorted regular-file names (not paths) inside a directory.
std::vector<std::string> list_files(const std::string& dir,
                                    const std::string& ext = "");
// FNV-1a over file bytes; used by determinism tests.
uint64_t file_checksum(const std::string& path);

}  // namespace wda::io

#endif  // WDA_IO_HPP_
