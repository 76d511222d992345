// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace srum::io {

// FNV-1a 64-bit over raw bytes; used for content-addressed filenames and
// external-judge cache keys.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

// Grid binary format: 8-byte header (height, width as little-endian u32)
// followed by row-major float32 values. Rasters store 3 interleaved
// channels per pixel, reward maps one value per pixel; the channel count
// is implied by the payload size.
std::string grid_f32_bytes(int height, int width, const std::vector<float>& values);
void write_grid_f32(const std::filesystem::path& path, int height, int width,
                    const std::vector<float>& values);
std::vector<float> read_grid_f32(const std::filesystem::path& path, int* height, int* width);

// Minimal RGB PNG writer (8-bit, zlib-compressed) for visual inspection.
// `scale` repeats each pixel as a scale x scale block.
void write_png_rgb8(const std::filesystem::path& path, int height, int width,
                    const std::vector<std::uint8_t>& rgb, int scale = 1);

std::string format_double(double v, int decimals);
// Shortest text form that round-trips the exact double ("%.17g").
std::string format_double_exact(double v);

} // namespace srum::io
