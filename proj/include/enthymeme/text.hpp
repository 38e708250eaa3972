#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace enthymeme::text {

std::string trim(std::string_view s);

// Replaces every whitespace run (including newlines) with a single space and trims.
std::string collapse_whitespace(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);

std::string to_lower(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);

std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

// ASCII-only case helpers on the first alphabetic character.
std::string upper_first_letter(std::string s);
std::string lower_first_letter(std::string s);

// Hex-encoded SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

// Writes to a temporary sibling then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Invokes fn(line, line_number) for every line, line numbers starting at 1.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(const std::string&, std::size_t)>& fn);

// Current UTC time as ISO-8601 with second precision, e.g. 2024-05-01T12:00:00Z.
std::string utc_timestamp();

// Deterministic 64-bit mixer (splitmix64), identical on every platform.
std::uint64_t splitmix64(std::uint64_t& state);

// FNV-1a 64-bit.
std::uint64_t fnv1a(std::string_view s);

// Portable seeded RNG: unbiased bounded draws without relying on
// implementation-defined std distributions.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() { return splitmix64(state_); }
  // Uniform in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  // Uniform in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

}  // namespace enthymeme::text
