#ifndef MLCFL_BINARY_IO_H_
#define MLCFL_BINARY_IO_H_

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "mlcfl/common.h"

namespace mlcfl {

// Little-endian writer for the self-describing binary containers. Byte
// order is fixed regardless of host.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { bytes_.append(s.data(), s.size()); }
  void str(std::string_view s) {
    u64(s.size());
    raw(s);
  }

  template <typename M>
  void matrix(const M& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }
  void vector(const Vector& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    for (double d : v) f64(d);
  }

  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string module)
      : bytes_(bytes), module_(std::move(module)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string out(bytes_.substr(pos_, n));
    pos_ += n;
    return out;
  }
  std::string str() { return raw(count()); }

  template <typename M>
  M matrix() {
    const std::size_t rows = count();
    const std::size_t cols = count();
    if (cols != 0 && rows > remaining() / 8 / cols) truncated();
    M m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = f64();
    return m;
  }
  Vector vector() {
    const std::size_t n = count();
    if (n > remaining() / 8) truncated();
    Vector v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = f64();
    return v;
  }
  std::vector<double> doubles() {
    const std::size_t n = count();
    if (n > remaining() / 8) truncated();
    std::vector<double> v(n);
    for (double& d : v) d = f64();
    return v;
  }

  // Element counts are bounded by the remaining payload so a corrupt
  // length cannot trigger a huge allocation.
  std::size_t count() {
    const std::uint64_t n = u64();
    if (n > remaining()) truncated();
    return static_cast<std::size_t>(n);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) truncated();
  }
  [[noreturn]] void truncated() const {
    throw Error(module_, "truncated or corrupt container at byte " +
                             std::to_string(pos_));
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string module_;
};

}  // namespace mlcfl

#endif  // MLCFL_BINARY_IO_H_
