#ifndef UAPMIMO_BINARY_IO_HPP
#define UAPMIMO_BINARY_IO_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace uapmimo {

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

std::uint64_t fnv1a(std::string_view bytes);

/// Append-only little-endian byte sink.
class ByteWriter {
 public:
  void raw(std::string_view bytes) { buf_.append(bytes); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

/// Little-endian cursor over a byte buffer. Reads past the end throw DataError.
class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : buf_(std::move(bytes)) {}

  std::string raw(std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const;

  std::string buf_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace uapmimo

#endif  // UAPMIMO_BINARY_IO_HPP
