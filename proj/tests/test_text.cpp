#include <doctest.h>

#include <set>

#include "enthymeme/error.hpp"
#include "enthymeme/text.hpp"
#include "support.hpp"

using namespace enthymeme;

TEST_CASE("whitespace helpers") {
  CHECK(text::trim("  a b \n") == "a b");
  CHECK(text::collapse_whitespace(" a \t b\n\nc ") == "a b c");
  CHECK(text::split_whitespace("  x  y ").size() == 2);
  CHECK(text::count_occurrences("[SEP] a [SEP]", "[SEP]") == 2);
  CHECK(text::upper_first_letter("\"hello") == "\"Hello");
  CHECK(text::lower_first_letter("Amy") == "amy");
}

TEST_CASE("sha256 matches the published test vector") {
  CHECK(text::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(text::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("hash and rng reference values") {
  CHECK(text::fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(text::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  std::uint64_t state = 0;
  CHECK(text::splitmix64(state) == 0xe220a8397b1dcdafULL);

  text::SeededRng a(13);
  text::SeededRng b(13);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.below(7);
    CHECK(x == b.below(7));
    CHECK(x < 7);
    seen.insert(x);
    const double u = a.unit();
    b.unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("atomic write and line iteration") {
  TempDir dir;
  const auto p = dir / "f.txt";
  text::write_file_atomic(p, "one\ntwo\r\nthree");
  std::vector<std::string> lines;
  text::for_each_line(p, [&](const std::string& line, std::size_t n) {
    CHECK(n == lines.size() + 1);
    lines.push_back(line);
  });
  REQUIRE(lines.size() == 3);
  CHECK(lines[1] == "two");
  CHECK(text::read_file(p) == "one\ntwo\r\nthree");
  CHECK_THROWS_AS(text::read_file(dir / "missing"), IoError);
}
