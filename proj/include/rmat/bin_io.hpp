#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "rmat/error.hpp"

namespace rmat {

// Little-endian binary encode/decode with offset tracking, so parse failures
// can report the exact byte where the file went wrong.
class BinWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { raw_le(&v, 2); }
  void u32(std::uint32_t v) { raw_le(&v, 4); }
  void u64(std::uint64_t v) { raw_le(&v, 8); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void bytes(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  std::size_t offset() const { return buf_.size(); }
  const std::vector<char>& data() const { return buf_; }

 private:
  template <typename T>
  void raw_le(const T* v, int n) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, v, static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }

  std::vector<char> buf_;
};

class BinReader {
 public:
  BinReader(const char* data, std::size_t size) : data_(data), size_(size) {}

  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(take(1, what)[0]); }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(le(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(le(4, what)); }
  std::uint64_t u64(const char* what) { return le(8, what); }
  float f32(const char* what) {
    const std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64(const char* what) {
    const std::uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(std::size_t n, const char* what) { return std::string(take(n, what), n); }
  void skip_to(std::size_t pos, const char* what) {
    if (pos > size_) throw ParseError(pos, std::string("offset beyond end of file for ") + what);
    pos_ = pos;
  }
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }
  void expect_end(const char* what) {
    if (pos_ != size_) throw ParseError(pos_, std::string("trailing bytes after ") + what);
  }

 private:
  const char* take(std::size_t n, const char* what) {
    if (pos_ + n > size_) {
      throw ParseError(pos_, std::string("truncated file while reading ") + what);
    }
    const char* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  std::uint64_t le(int n, const char* what) {
    const char* p = take(static_cast<std::size_t>(n), what);
    std::uint64_t bits = 0;
    for (int i = 0; i < n; ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return bits;
  }

  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

// Whole-file helpers (binary mode).
std::vector<char> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<char>& data);

}  // namespace rmat
