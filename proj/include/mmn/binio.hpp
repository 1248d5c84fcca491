#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace mmn::binio {

// Little-endian primitives shared by the dataset and checkpoint formats.
// Read failures throw FormatError naming `what` (the section being read).

void write_u8(std::ostream& os, std::uint8_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f32(std::ostream& os, float v);
void write_f64(std::ostream& os, double v);
void write_string(std::ostream& os, const std::string& s);

std::uint8_t read_u8(std::istream& is, const char* what);
std::uint32_t read_u32(std::istream& is, const char* what);
std::uint64_t read_u64(std::istream& is, const char* what);
float read_f32(std::istream& is, const char* what);
double read_f64(std::istream& is, const char* what);
std::string read_string(std::istream& is, const char* what);

}  // namespace mmn::binio
