#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

// Client report records and their wire format. Records are little-endian:
//   one-attribute report: y int8, j uint16, l uint32            (7 bytes)
//   two-attribute report: y int8, j uint16, l1 uint32, l2 uint32 (11 bytes)
// The payload is constant in the domain size: one sign plus bounded indices.

namespace ldpjs {

struct PerturbedReport {
  std::int8_t y = +1;   // in {-1, +1}
  std::uint16_t j = 0;  // row index in [0, k)
  std::uint32_t l = 0;  // column index in [0, m)

  friend bool operator==(const PerturbedReport&, const PerturbedReport&) = default;
};

struct PerturbedReport2D {
  std::int8_t y = +1;
  std::uint16_t j = 0;
  std::uint32_t l1 = 0;
  std::uint32_t l2 = 0;

  friend bool operator==(const PerturbedReport2D&, const PerturbedReport2D&) = default;
};

inline constexpr std::size_t kReportWireBytes = 7;
inline constexpr std::size_t kReport2DWireBytes = 11;

namespace detail {

inline void put_u16le(unsigned char* p, std::uint16_t v) {
  p[0] = static_cast<unsigned char>(v & 0xff);
  p[1] = static_cast<unsigned char>(v >> 8);
}

inline void put_u32le(unsigned char* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
}

inline std::uint16_t get_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

inline std::int8_t check_sign(int v) {
  if (v != -1 && v != +1)
    throw std::invalid_argument("report sign must be -1 or +1");
  return static_cast<std::int8_t>(v);
}

}  // namespace detail

inline void encode_report(const PerturbedReport& r,
                          unsigned char out[kReportWireBytes]) {
  out[0] = static_cast<unsigned char>(r.y);
  detail::put_u16le(out + 1, r.j);
  detail::put_u32le(out + 3, r.l);
}

inline PerturbedReport decode_report(const unsigned char in[kReportWireBytes]) {
  PerturbedReport r;
  r.y = detail::check_sign(static_cast<std::int8_t>(in[0]));
  r.j = detail::get_u16le(in + 1);
  r.l = detail::get_u32le(in + 3);
  return r;
}

inline void encode_report(const PerturbedReport2D& r,
                          unsigned char out[kReport2DWireBytes]) {
  out[0] = static_cast<unsigned char>(r.y);
  detail::put_u16le(out + 1, r.j);
  detail::put_u32le(out + 3, r.l1);
  detail::put_u32le(out + 7, r.l2);
}

inline PerturbedReport2D decode_report_2d(const unsigned char in[kReport2DWireBytes]) {
  PerturbedReport2D r;
  r.y = detail::check_sign(static_cast<std::int8_t>(in[0]));
  r.j = detail::get_u16le(in + 1);
  r.l1 = detail::get_u32le(in + 3);
  r.l2 = detail::get_u32le(in + 7);
  return r;
}

inline void write_reports(std::ostream& os, std::span<const PerturbedReport> rs) {
  unsigned char buf[kReportWireBytes];
  for (const auto& r : rs) {
    encode_report(r, buf);
    os.write(reinterpret_cast<const char*>(buf), kReportWireBytes);
  }
}

inline std::vector<PerturbedReport> read_reports(std::istream& is) {
  std::vector<PerturbedReport> out;
  unsigned char buf[kReportWireBytes];
  while (is.read(reinterpret_cast<char*>(buf), kReportWireBytes))
    out.push_back(decode_report(buf));
  if (is.gcount() != 0)
    throw std::runtime_error("report stream truncated mid-record");
  return out;
}

inline void write_reports(std::ostream& os, std::span<const PerturbedReport2D> rs) {
  unsigned char buf[kReport2DWireBytes];
  for (const auto& r : rs) {
    encode_report(r, buf);
    os.write(reinterpret_cast<const char*>(buf), kReport2DWireBytes);
  }
}

inline std::vector<PerturbedReport2D> read_reports_2d(std::istream& is) {
  std::vector<PerturbedReport2D> out;
  unsigned char buf[kReport2DWireBytes];
  while (is.read(reinterpret_cast<char*>(buf), kReport2DWireBytes))
    out.push_back(decode_report_2d(buf));
  if (is.gcount() != 0)
    throw std::runtime_error("report stream truncated mid-record");
  return out;
}

}  // namespace ldpjs
