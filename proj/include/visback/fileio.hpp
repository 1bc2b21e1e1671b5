#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace visback {

/// Whole file as bytes; throws Error(io) when unreadable.
std::string read_file(const std::string& path);

/// Writes to "<path>.tmp" then renames over `path`.
void write_file_atomic(const std::string& path, std::string_view bytes);

std::uint32_t crc32(std::string_view bytes);

// Little-endian primitives.
void put_u32(std::string& out, std::uint32_t v);
void put_f32(std::string& out, float v);
std::uint32_t get_u32(std::string_view in, std::size_t offset);
float get_f32(std::string_view in, std::size_t offset);

}  // namespace visback
