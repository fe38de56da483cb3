#include "cacaotk/util.hpp"

#include <openssl/sha.h>

#include <cctype>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "cacaotk/errors.hpp"

namespace cacaotk {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnreadableFile("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw UnreadableFile("read failed: " + path.string());
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UnreadableFile("cannot open file for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw UnreadableFile("write failed: " + path.string());
}

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string normalize_name(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xf]);
  }
  return out;
}

std::vector<char32_t> utf8_decode(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    char32_t cp = 0xFFFD;
    size_t len = 1;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6 && i + 1 < s.size()) {
      cp = static_cast<char32_t>(c & 0x1F) << 6 |
           (static_cast<unsigned char>(s[i + 1]) & 0x3F);
      len = 2;
    } else if ((c >> 4) == 0xE && i + 2 < s.size()) {
      cp = static_cast<char32_t>(c & 0x0F) << 12 |
           (static_cast<char32_t>(static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6) |
           (static_cast<unsigned char>(s[i + 2]) & 0x3F);
      len = 3;
    } else if ((c >> 3) == 0x1E && i + 3 < s.size()) {
      cp = static_cast<char32_t>(c & 0x07) << 18 |
           (static_cast<char32_t>(static_cast<unsigned char>(s[i + 1]) & 0x3F) << 12) |
           (static_cast<char32_t>(static_cast<unsigned char>(s[i + 2]) & 0x3F) << 6) |
           (static_cast<unsigned char>(s[i + 3]) & 0x3F);
      len = 4;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

Rational decimal_to_rational(std::string_view text) {
  std::string t = trim(text);
  if (t.empty()) throw Error("empty decimal literal");
  bool negative = false;
  size_t i = 0;
  if (t[0] == '+' || t[0] == '-') {
    negative = t[0] == '-';
    i = 1;
  }
  long long num = 0;
  long long den = 1;
  bool seen_digit = false;
  bool after_dot = false;
  for (; i < t.size(); ++i) {
    char c = t[i];
    if (c == '.') {
      if (after_dot) throw Error("malformed decimal literal: " + t);
      after_dot = true;
      continue;
    }
    if (c < '0' || c > '9') throw Error("malformed decimal literal: " + t);
    seen_digit = true;
    num = num * 10 + (c - '0');
    if (after_dot) den *= 10;
  }
  if (!seen_digit) throw Error("malformed decimal literal: " + t);
  return Rational(negative ? -num : num, den);
}

std::string rational_to_decimal(const Rational& r, int places) {
  long long scale = 1;
  for (int i = 0; i < places; ++i) scale *= 10;
  Rational scaled = r * scale;
  long long whole = scaled.numerator() / scaled.denominator();
  long long rem = scaled.numerator() % scaled.denominator();
  // round half up, away from zero
  if (rem != 0) {
    long long rem_abs = rem < 0 ? -rem : rem;
    if (2 * rem_abs >= scaled.denominator()) whole += (scaled.numerator() < 0) ? -1 : 1;
  }
  bool neg = whole < 0;
  unsigned long long mag = neg ? static_cast<unsigned long long>(-whole)
                               : static_cast<unsigned long long>(whole);
  std::string digits = std::to_string(mag);
  if (places == 0) return (neg ? "-" : "") + digits;
  if (digits.size() <= static_cast<size_t>(places))
    digits.insert(0, static_cast<size_t>(places) + 1 - digits.size(), '0');
  digits.insert(digits.size() - static_cast<size_t>(places), ".");
  return (neg ? "-" : "") + digits;
}

bool is_rfc3339_utc(std::string_view s) {
  // YYYY-MM-DDTHH:MM:SS(.fraction)?Z
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (s.size() < 20) return false;
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9, 11, 12, 14, 15, 17, 18})
    if (!digit(s[static_cast<size_t>(i)])) return false;
  if (s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' || s[16] != ':')
    return false;
  size_t i = 19;
  if (s[i] == '.') {
    ++i;
    size_t frac_start = i;
    while (i < s.size() && digit(s[i])) ++i;
    if (i == frac_start) return false;
  }
  return i + 1 == s.size() && s[i] == 'Z';
}

std::string format_rfc3339_ms(std::int64_t unix_millis) {
  std::time_t secs = static_cast<std::time_t>(unix_millis / 1000);
  int ms = static_cast<int>(unix_millis % 1000);
  if (ms < 0) {
    ms += 1000;
    --secs;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, ms);
  return buf;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

}  // namespace cacaotk
