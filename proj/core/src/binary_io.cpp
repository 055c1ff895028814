#include "binary_io.hpp"

#include <fstream>

#include "prmi/checksum.hpp"

namespace prmi::detail {

std::vector<std::byte> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("cannot open " + path);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw FormatError("read failed: " + path);
  return bytes;
}

void write_file(const std::string& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed: " + path);
}

void append_crc(std::vector<std::byte>& bytes) {
  const std::uint32_t crc = prmi::crc32(bytes);
  const auto* p = reinterpret_cast<const std::byte*>(&crc);
  bytes.insert(bytes.end(), p, p + sizeof(crc));
}

std::span<const std::byte> verify_and_strip_crc(std::span<const std::byte> bytes) {
  if (bytes.size() < sizeof(std::uint32_t)) throw TruncatedFileError("file too short for checksum");
  const auto payload = bytes.first(bytes.size() - sizeof(std::uint32_t));
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + payload.size(), sizeof(stored));
  if (prmi::crc32(payload) != stored) throw ChecksumError("CRC32 mismatch");
  return payload;
}

}  // namespace prmi::detail
