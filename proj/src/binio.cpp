#include "mmn/binio.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mmn/error.hpp"

namespace mmn::binio {

namespace {

void write_le(std::ostream& os, std::uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>(v >> (8 * i));
  os.write(buf, bytes);
}

std::uint64_t read_le(std::istream& is, int bytes, const char* what) {
  char buf[8];
  is.read(buf, bytes);
  if (is.gcount() != bytes)
    throw FormatError(std::string("truncated file while reading ") + what);
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i]))
         << (8 * i);
  return v;
}

}  // namespace

void write_u8(std::ostream& os, std::uint8_t v) { write_le(os, v, 1); }
void write_u32(std::ostream& os, std::uint32_t v) { write_le(os, v, 4); }
void write_u64(std::ostream& os, std::uint64_t v) { write_le(os, v, 8); }

void write_f32(std::ostream& os, float v) {
  write_le(os, std::bit_cast<std::uint32_t>(v), 4);
}

void write_f64(std::ostream& os, double v) {
  write_le(os, std::bit_cast<std::uint64_t>(v), 8);
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint8_t read_u8(std::istream& is, const char* what) {
  return static_cast<std::uint8_t>(read_le(is, 1, what));
}

std::uint32_t read_u32(std::istream& is, const char* what) {
  return static_cast<std::uint32_t>(read_le(is, 4, what));
}

std::uint64_t read_u64(std::istream& is, const char* what) {
  return read_le(is, 8, what);
}

float read_f32(std::istream& is, const char* what) {
  return std::bit_cast<float>(read_u32(is, what));
}

double read_f64(std::istream& is, const char* what) {
  return std::bit_cast<double>(read_u64(is, what));
}

std::string read_string(std::istream& is, const char* what) {
  const std::uint32_t len = read_u32(is, what);
  if (len > (1u << 20))
    throw FormatError(std::string("implausible string length in ") + what);
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (is.gcount() != static_cast<std::streamsize>(len))
    throw FormatError(std::string("truncated file while reading ") + what);
  return s;
}

}  // namespace mmn::binio
