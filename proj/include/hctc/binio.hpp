#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "hctc/errors.hpp"

// Little-endian binary readers/writers for the on-disk formats (features,
// model and LM checkpoints). Strings are u32 length-prefixed.
static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts are unsupported");

namespace hctc {

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path) : path_(path), f_(path, std::ios::binary) {
    if (!f_) throw DataError("cannot open for writing: " + path);
  }

  void bytes(const void* p, std::size_t n) { f_.write(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f32(float v) { bytes(&v, 4); }
  void f64(double v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void magic(const char m[4]) { bytes(m, 4); }

  void close() {
    f_.close();
    if (!f_) throw DataError("write failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream f_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path) : path_(path), f_(path, std::ios::binary) {
    if (!f_) throw DataError("cannot open: " + path);
  }

  void bytes(void* p, std::size_t n) {
    f_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(f_.gcount()) != n) {
      throw ParseError("truncated file: " + path_, offset_ + static_cast<std::size_t>(f_.gcount()));
    }
    offset_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  float f32() {
    float v;
    bytes(&v, 4);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, 8);
    return v;
  }
  std::string str(std::size_t max_len = 1 << 20) {
    const std::uint32_t n = u32();
    if (n > max_len) throw ParseError("string length " + std::to_string(n) + " too large", offset_ - 4);
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n);
    return s;
  }
  void expect_magic(const char m[4], const char* what) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, m, 4) != 0) {
      throw ParseError(std::string("bad magic, not a ") + what + " file: " + path_, offset_ - 4);
    }
  }
  bool at_eof() {
    f_.peek();
    return f_.eof();
  }
  std::size_t offset() const { return offset_; }

 private:
  std::string path_;
  std::ifstream f_;
  std::size_t offset_ = 0;
};

}  // namespace hctc
