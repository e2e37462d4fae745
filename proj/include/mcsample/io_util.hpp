#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mcs {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

void append_u16_le(std::vector<std::uint8_t>& out, std::uint16_t v);
void append_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v);
void append_f32_le(std::vector<std::uint8_t>& out, float v);
std::uint16_t load_u16_le(const std::uint8_t* p);
std::uint32_t load_u32_le(const std::uint8_t* p);
float load_f32_le(const std::uint8_t* p);

std::vector<std::uint8_t> encode_f32_blob(std::span<const float> values);
std::vector<float> decode_f32_blob(std::span<const std::uint8_t> bytes);

/// Shortest round-trip decimal form; infinities print as "inf" / "-inf".
std::string format_real(double value);

}  // namespace mcs
