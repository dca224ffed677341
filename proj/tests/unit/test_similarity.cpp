#include <cmath>
#include <random>

#include "castscan/errors.hpp"
#include "castscan/similarity.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace castscan;

namespace {

GrayFrame frame_of(int w, int h, std::vector<float> px) {
  GrayFrame f;
  f.width = w;
  f.height = h;
  f.pixels = std::move(px);
  return f;
}

}  // namespace

TEST_CASE("nrmse examples") {
  auto a = make_uniform_frame(4, 4, 0.5f);
  CHECK(nrmse(a, a) == 0.0);
  CHECK(nrmse(make_uniform_frame(4, 4, 0.5f), make_uniform_frame(4, 4, 0.0f)) == 1.0);
  // Hand evaluation: numerator 1, denominator 4.
  CHECK(nrmse(frame_of(2, 2, {1, 1, 1, 1}), frame_of(2, 2, {1, 1, 1, 0})) == 0.5);
  // Zero-energy reference.
  CHECK(nrmse(make_uniform_frame(4, 4, 0.0f), make_uniform_frame(4, 4, 0.5f)) == 1.0);
  CHECK(nrmse(make_uniform_frame(4, 4, 0.0f), make_uniform_frame(4, 4, 0.0f)) == 0.0);
}

TEST_CASE("nrmse clamps super-unit ratios") {
  // sqrt(sum (0.1 - 1)^2 / sum 0.1^2) = 9 before the clamp.
  CHECK(nrmse(make_uniform_frame(3, 3, 0.1f), make_uniform_frame(3, 3, 1.0f)) == 1.0);
}

TEST_CASE("nrmse rejects mismatched dimensions") {
  CHECK_THROWS_AS(nrmse(make_uniform_frame(4, 4, 0.5f), make_uniform_frame(4, 5, 0.5f)), ParameterError);
  CHECK_THROWS_AS(nrmse(make_uniform_frame(2, 8, 0.5f), make_uniform_frame(4, 4, 0.5f)), ParameterError);
}

TEST_CASE("nrmse properties on random frames") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> px(0.0, 1.0);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(64), b(64);
    for (auto& v : a) v = px(rng);
    for (auto& v : b) v = px(rng);
    const double d = nrmse<double>(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(nrmse<double>(a, a) == 0.0);
    CHECK(d == doctest::Approx(testing::nrmse_oracle(a, b)).epsilon(1e-12));

    const double c = scale(rng);
    std::vector<double> ca(a), cb(b);
    for (auto& v : ca) v *= c;
    for (auto& v : cb) v *= c;
    CHECK(std::abs(nrmse<double>(ca, cb) - d) <= 1e-9);
  }
}

TEST_CASE("mark_duplicates examples") {
  // Reference frame r, then a frame 0.01 away from it, then one 0.10 away.
  // 2x2 frames with reference energy 4: other = r except one pixel shifted
  // by delta gives nrmse = delta / 2.
  auto r = frame_of(2, 2, {1, 1, 1, 1});
  auto near = frame_of(2, 2, {1, 1, 1, 1 - 0.02f});
  auto far = frame_of(2, 2, {1, 1, 1, 1 - 0.20f});
  REQUIRE(nrmse(r, near) == doctest::Approx(0.01).epsilon(1e-5));
  REQUIRE(nrmse(r, far) == doctest::Approx(0.10).epsilon(1e-5));

  std::vector<GrayFrame> seq{r, near, far};
  auto m = mark_duplicates(seq, 0.05);
  CHECK(m.duplicate == std::vector<bool>{false, true, false});
  CHECK(m.reference_index[1] == 0u);
  CHECK(m.reference_index[2] == 0u);
  CHECK(m.informative_count() == 2);

  std::vector<GrayFrame> same(5, r);
  CHECK(mark_duplicates(same, 0.05).duplicate == std::vector<bool>{false, true, true, true, true});

  std::vector<GrayFrame> distinct{make_uniform_frame(2, 2, 0.2f), make_uniform_frame(2, 2, 0.6f),
                                  make_uniform_frame(2, 2, 0.2f)};
  CHECK(mark_duplicates(distinct, 0.05).duplicate == std::vector<bool>{false, false, false});
}

TEST_CASE("mark_duplicates compares against the running reference, not the predecessor") {
  // Each step drifts 0.03 from its predecessor; against frame 0 the third
  // frame is 0.06 away and becomes a new reference.
  auto base = frame_of(2, 2, {1, 1, 1, 1});
  auto step1 = frame_of(2, 2, {1, 1, 1, 1 - 0.06f});
  auto step2 = frame_of(2, 2, {1, 1, 1, 1 - 0.12f});
  std::vector<GrayFrame> seq{base, step1, step2};
  auto m = mark_duplicates(seq, 0.05);
  CHECK(m.duplicate == std::vector<bool>{false, true, false});
}

TEST_CASE("mark_duplicates boundary and limits") {
  auto r = frame_of(2, 2, {1, 1, 1, 1});
  auto half = frame_of(2, 2, {1, 1, 1, 0});  // exactly 0.5
  std::vector<GrayFrame> seq{r, half};
  CHECK(mark_duplicates(seq, 0.5).duplicate[1]);
  CHECK_FALSE(mark_duplicates(seq, 0.49).duplicate[1]);

  std::vector<GrayFrame> mixed{r, r, half, make_uniform_frame(2, 2, 0.0f)};
  CHECK(mark_duplicates(mixed, 0.0).duplicate == std::vector<bool>{false, true, false, false});
  CHECK(mark_duplicates(mixed, 1.0).duplicate == std::vector<bool>{false, true, true, true});

  CHECK_THROWS_AS(mark_duplicates(std::span<const GrayFrame>{}, 0.05), ParameterError);
  CHECK_THROWS_AS(mark_duplicates(seq, 1.5), ParameterError);
  CHECK_THROWS_AS(mark_duplicates(seq, -0.1), ParameterError);
}

TEST_CASE("mark_duplicates invariants and oracle on random sequences") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    auto seq = testing::random_sequence(rng, 20, 4);
    const double threshold = std::uniform_real_distribution<double>(0.0, 0.6)(rng);
    auto m = mark_duplicates(seq, threshold);
    CHECK_FALSE(m.duplicate[0]);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (!m.duplicate[i]) continue;
      REQUIRE(m.reference_index[i]);
      CHECK(*m.reference_index[i] < i);
      CHECK_FALSE(m.duplicate[*m.reference_index[i]]);
    }
    CHECK(m.duplicate == testing::mark_duplicates_oracle(seq, threshold));
  }
}
