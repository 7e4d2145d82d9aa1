#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "support.hpp"
#include "ttspin/spin_model.hpp"
#include "ttspin/tt_io.hpp"

using namespace ttspin;
using namespace testing_support;

namespace {

std::string bytes(const AnyTrain& t) {
  std::ostringstream os(std::ios::binary);
  std::visit([&](const auto& x) { write_tt(os, x); }, t);
  return os.str();
}

AnyTrain parse(const std::string& s) {
  std::istringstream is(s, std::ios::binary);
  return read_tt(is);
}

bool same_cores(const TTVector& a, const TTVector& b) {
  if (a.ranks() != b.ranks() || a.modes() != b.modes()) return false;
  for (std::size_t n = 0; n < a.order(); ++n) {
    if (a.core(n).data() != b.core(n).data()) return false;
  }
  return true;
}

} // namespace

TEST_CASE("random vectors round-trip bit for bit") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const RandomShape s = random_shape(rng);
    const TTVector t = TTVector::random(s.modes, s.ranks, 1000 + trial);
    const AnyTrain back = parse(bytes(t));
    REQUIRE(std::holds_alternative<TTVector>(back));
    CHECK(same_cores(std::get<TTVector>(back), t));
  }
}

TEST_CASE("operators keep their row and column sizes") {
  const TTOperator h = analytic_zz_chain(5);
  const AnyTrain back = parse(bytes(h));
  REQUIRE(std::holds_alternative<TTOperator>(back));
  const auto& a = std::get<TTOperator>(back);
  CHECK(a.rows() == h.rows());
  CHECK(a.cols() == h.cols());
  CHECK(same_cores(a.as_vector(), h.as_vector()));

  const TTOperator rect(TTVector::random(std::vector<Index>{6, 2},
                                         std::vector<Index>{1, 3, 1}, 4),
                        {2, 1}, {3, 2});
  const TTOperator r = std::get<TTOperator>(parse(bytes(rect)));
  CHECK(r.rows() == rect.rows());
  CHECK(r.cols() == rect.cols());
  CHECK(rel_diff(to_dense(r), to_dense(rect)) == 0.0);
}

TEST_CASE("header layout is little-endian") {
  const std::vector<Index> modes{3};
  const std::vector<Complex> one{Complex(1.0, -2.0), 0.0, 0.5};
  Vector v(3);
  for (Index k = 0; k < 3; ++k) v[k] = one[k];
  const std::string s = bytes(TTVector(std::vector<Core>{Core(1, 3, 1, v)}));
  REQUIRE(s.size() == 8 + 4 + 4 + 8 + 8 + 16 + 3 * 16);
  CHECK(s.substr(0, 8) == std::string("TTSPIN1\0", 8));
  CHECK(s[8] == 0);   // kind
  CHECK(s[12] == 1);  // scalar type
  CHECK(s[16] == 1);  // order
  CHECK(s[24] == 3);  // mode size
  // 1.0 = 0x3ff0000000000000, lowest byte first
  CHECK(static_cast<unsigned char>(s[48 + 7]) == 0x3f);
  CHECK(static_cast<unsigned char>(s[48 + 6]) == 0xf0);
  CHECK(s[48] == 0);
}

TEST_CASE("malformed containers are rejected") {
  const std::string good = bytes(TTVector::random(std::vector<Index>{2, 3},
                                                  std::vector<Index>{1, 2, 1}, 9));
  auto rejects = [](const std::string& s) {
    try {
      parse(s);
    } catch (const Error& e) {
      return e.code() == ErrorCode::io;
    }
    return false;
  };
  CHECK(rejects(""));
  CHECK(rejects("TTSPIN2" + good.substr(7)));
  CHECK(rejects(good.substr(0, good.size() - 1)));
  std::string kind = good;
  kind[8] = 7;
  CHECK(rejects(kind));
  std::string scalar = good;
  scalar[12] = 0;
  CHECK(rejects(scalar));
  std::string rank = good;
  rank[8 + 4 + 4 + 8 + 2 * 8] = 2;  // leading rank
  CHECK(rejects(rank));
  std::string zero_mode = good;
  zero_mode[24] = 0;
  CHECK(rejects(zero_mode));
  std::string huge = good;
  huge[24 + 7] = 0x7f;
  CHECK(rejects(huge));
}

TEST_CASE("files") {
  const auto dir = std::filesystem::temp_directory_path() / "ttspin_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "h.tt";
  const TTOperator h = analytic_total_sz(4);
  save_tt(path, h);
  const auto back = load_tt(path);
  CHECK(same_cores(std::get<TTOperator>(back).as_vector(), h.as_vector()));
  {
    std::ofstream app(path, std::ios::binary | std::ios::app);
    app << 'x';
  }
  CHECK_THROWS_AS(load_tt(path), Error);
  CHECK_THROWS_AS(load_tt(dir / "missing.tt"), Error);
  std::filesystem::remove_all(dir);
}
