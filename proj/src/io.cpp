// Copyright 2026 The SRUM Authors
// SPDX-License-Identifier: Apache-2.0
#include "srum/io.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace srum::io {

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open file for reading: " + path.string());
    }
    std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open file for writing: " + path.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

namespace {

void put_u32le(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

} // namespace

std::string grid_f32_bytes(int height, int width, const std::vector<float>& values) {
    std::string payload;
    payload.reserve(8 + values.size() * 4);
    put_u32le(payload, static_cast<std::uint32_t>(height));
    put_u32le(payload, static_cast<std::uint32_t>(width));
    const std::size_t base = payload.size();
    payload.resize(base + values.size() * 4);
    static_assert(sizeof(float) == 4);
    std::memcpy(payload.data() + base, values.data(), values.size() * 4);
    return payload;
}

void write_grid_f32(const std::filesystem::path& path, int height, int width,
                    const std::vector<float>& values) {
    write_file(path, grid_f32_bytes(height, width, values));
}

std::vector<float> read_grid_f32(const std::filesystem::path& path, int* height, int* width) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 8 || (bytes.size() - 8) % 4 != 0) {
        throw std::runtime_error("malformed grid file: " + path.string());
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const int h = static_cast<int>(get_u32le(p));
    const int w = static_cast<int>(get_u32le(p + 4));
    if (height) *height = h;
    if (width) *width = w;
    std::vector<float> values((bytes.size() - 8) / 4);
    std::memcpy(values.data(), bytes.data() + 8, bytes.size() - 8);
    return values;
}

namespace {

void put_u32be(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>((v >> 24) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>(v & 0xff));
}

void png_chunk(std::string& out, const char type[4], const std::string& data) {
    put_u32be(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    const auto crc =
        crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    put_u32be(out, static_cast<std::uint32_t>(crc));
}

} // namespace

void write_png_rgb8(const std::filesystem::path& path, int height, int width,
                    const std::vector<std::uint8_t>& rgb, int scale) {
    if (scale < 1 || height <= 0 || width <= 0 ||
        rgb.size() != static_cast<std::size_t>(height) * width * 3) {
        throw std::invalid_argument("write_png_rgb8: bad dimensions");
    }
    const int oh = height * scale;
    const int ow = width * scale;
    // Filter byte 0 per scanline.
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(oh) * (1 + ow * 3));
    std::size_t k = 0;
    for (int y = 0; y < oh; ++y) {
        raw[k++] = 0;
        const int sy = y / scale;
        for (int x = 0; x < ow; ++x) {
            const int sx = x / scale;
            const std::size_t src = (static_cast<std::size_t>(sy) * width + sx) * 3;
            raw[k++] = rgb[src];
            raw[k++] = rgb[src + 1];
            raw[k++] = rgb[src + 2];
        }
    }
    uLongf comp_cap = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_cap);
    if (compress2(comp.data(), &comp_cap, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw std::runtime_error("png deflate failed");
    }

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    put_u32be(ihdr, static_cast<std::uint32_t>(ow));
    put_u32be(ihdr, static_cast<std::uint32_t>(oh));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    png_chunk(out, "IHDR", ihdr);
    png_chunk(out, "IDAT", std::string(reinterpret_cast<const char*>(comp.data()), comp_cap));
    png_chunk(out, "IEND", "");
    write_file(path, out);
}

std::string format_double(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string format_double_exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace srum::io
