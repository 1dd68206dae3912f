#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geodecomp/errors.hpp"

namespace geodecomp::detail {

inline const char* b64_alphabet() {
  return "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

inline std::string base64_encode(const std::uint8_t* data, std::size_t len) {
  const char* tab = b64_alphabet();
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= len; i += 3) {
    std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out.push_back(tab[(v >> 18) & 63]);
    out.push_back(tab[(v >> 12) & 63]);
    out.push_back(tab[(v >> 6) & 63]);
    out.push_back(tab[v & 63]);
  }
  if (i + 1 == len) {
    std::uint32_t v = data[i] << 16;
    out.push_back(tab[(v >> 18) & 63]);
    out.push_back(tab[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == len) {
    std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out.push_back(tab[(v >> 18) & 63]);
    out.push_back(tab[(v >> 12) & 63]);
    out.push_back(tab[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& s) {
  static int inv[256];
  static bool init = [] {
    for (int& x : inv) x = -1;
    const char* tab = b64_alphabet();
    for (int i = 0; i < 64; ++i) inv[static_cast<std::uint8_t>(tab[i])] = i;
    return true;
  }();
  (void)init;
  if (s.size() % 4 != 0) throw FormatError("base64 payload length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i < s.size(); i += 4) {
    int pad = 0;
    std::uint32_t v = 0;
    for (int j = 0; j < 4; ++j) {
      char c = s[i + j];
      if (c == '=') {
        if (i + 4 != s.size() || j < 2) throw FormatError("misplaced base64 padding");
        ++pad;
        v <<= 6;
        continue;
      }
      int d = inv[static_cast<std::uint8_t>(c)];
      if (d < 0 || pad > 0) throw FormatError("invalid base64 character");
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  return out;
}

}  // namespace geodecomp::detail
