#include <doctest.h>

#include <cmath>

#include "uapmimo/error.hpp"
#include "uapmimo/maxprod.hpp"
#include "uapmimo/scenario.hpp"

using namespace uapmimo;

TEST_CASE("default config matches the reference deployment") {
  NetworkConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.n_cells == 4);
  CHECK(c.n_ues_per_cell == 5);
  CHECK(c.n_antennas == 100);
  CHECK(c.p_max == 500.0);
  CHECK(c.noise_power == doctest::Approx(std::pow(10.0, -9.4)).epsilon(1e-15));
  CHECK(c.input_dim() == 40);
}

TEST_CASE("config validation rejects bad geometry") {
  NetworkConfig c;
  c.n_cells = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.n_cells = 2;
  CHECK_NOTHROW(c.validate());
  c.n_cells = 9;
  CHECK_NOTHROW(c.validate());
  c.min_bs_ue_distance = 125.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = NetworkConfig{};
  c.noise_power = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("config text round-trips and rejects unknown keys") {
  NetworkConfig c;
  c.n_antennas = 64;
  c.cell_side = 200.5;
  c.self_interference = false;
  const NetworkConfig back = parse_config(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.fingerprint() == c.fingerprint());
  CHECK(parse_config("# comment\n\np_max = 250\n").p_max == 250.0);
  CHECK_THROWS_AS(parse_config("bandwidth=20\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("n_cells=abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("n_cells=3\n"), ConfigError);
}

TEST_CASE("drop_ues is deterministic per seed") {
  NetworkConfig c;
  const auto a = drop_ues(c, 42);
  const auto b = drop_ues(c, 42);
  const auto d = drop_ues(c, 43);
  REQUIRE(a.ue_positions.size() == 20);
  bool same = true;
  bool differs = false;
  for (std::size_t i = 0; i < a.ue_positions.size(); ++i) {
    same = same && a.ue_positions[i].x == b.ue_positions[i].x && a.ue_positions[i].y == b.ue_positions[i].y;
    differs = differs || a.ue_positions[i].x != d.ue_positions[i].x;
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("UEs stay inside their serving cell and respect the guard distance") {
  NetworkConfig c;
  const auto bs = bs_positions(c);
  REQUIRE(bs.size() == 4);
  CHECK(bs[0].x == 125.0);
  CHECK(bs[3].y == 375.0);
  long violations = 0;
  long outside = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto real = drop_ues(c, seed);
    for (int j = 0; j < c.n_cells; ++j) {
      for (int k = 0; k < c.n_ues_per_cell; ++k) {
        const Point& p = real.ue(j, k, c.n_ues_per_cell);
        violations += distance(p, bs[static_cast<std::size_t>(j)]) < 35.0;
        outside += std::abs(p.x - bs[static_cast<std::size_t>(j)].x) > 125.0 ||
                   std::abs(p.y - bs[static_cast<std::size_t>(j)].y) > 125.0 || p.x < 0 || p.x > 500 ||
                   p.y < 0 || p.y > 500;
      }
    }
  }
  CHECK(violations == 0);
  CHECK(outside == 0);
}

TEST_CASE("large-scale fading") {
  NetworkConfig c;
  CHECK(large_scale_fading(1000.0, c) == doctest::Approx(1.54881661891248134e-15).epsilon(1e-13));
  // 30-digit evaluation of 10^((-148.1 - 37.6 log10(0.25)) / 10).
  CHECK(large_scale_fading(250.0, c) == doctest::Approx(2.84279516019671346e-13).epsilon(1e-13));
  for (double d : {1.0, 35.0, 100.0, 333.3, 5000.0}) {
    CHECK(large_scale_fading(2 * d, c) < large_scale_fading(d, c));
  }
  CHECK_THROWS_AS(large_scale_fading(0.0, c), std::domain_error);
  CHECK_THROWS_AS(large_scale_fading(-3.0, c), std::domain_error);
}

TEST_CASE("MR gains carry the array gain on the serving link") {
  NetworkConfig c;
  const auto real = drop_ues(c, 7);
  const auto gains = mr_gain_profile(real, c);
  CHECK(gains.valid());
  for (int j = 0; j < c.n_cells; ++j) {
    for (int k = 0; k < c.n_ues_per_cell; ++k) {
      const double beta = large_scale_fading(distance(real.bs_positions[static_cast<std::size_t>(j)],
                                                      real.ue(j, k, c.n_ues_per_cell)),
                                             c);
      CHECK(gains.a(j, k) / beta == doctest::Approx(100.0).epsilon(1e-14));
      for (int kk = 0; kk < c.n_ues_per_cell; ++kk) {
        // Same BS-to-UE link, so a/b = M > 1.
        CHECK(gains.a(j, k) > gains.b(j, kk, j, k));
      }
      for (int l = 0; l < c.n_cells; ++l) {
        for (int i = 0; i < c.n_ues_per_cell; ++i) CHECK(gains.b(l, i, j, k) > 0);
      }
    }
  }
}

TEST_CASE("single link SINR closed form with and without the self term") {
  NetworkConfig c;
  c.n_cells = 1;
  c.n_ues_per_cell = 1;
  NetworkRealization real;
  real.bs_positions = {{125, 125}};
  real.ue_positions = {{125 + 60, 125 + 80}};  // 100 m
  const double beta = large_scale_fading(100.0, c);
  const double rho = 123.0;
  PowerAllocation p(1, 1, rho);

  const auto with_self = mr_gain_profile(real, c);
  CHECK(sinr(p, with_self, 0, 0) ==
        doctest::Approx(rho * 100 * beta / (rho * beta + c.noise_power)).epsilon(1e-13));

  c.self_interference = false;
  const auto without = mr_gain_profile(real, c);
  CHECK(without.b(0, 0, 0, 0) == 0.0);
  CHECK(sinr(p, without, 0, 0) == doctest::Approx(rho * 100 * beta / c.noise_power).epsilon(1e-13));
}

TEST_CASE("mirrored two-cell layout gives cell-swap symmetric gains") {
  NetworkConfig c;
  c.n_cells = 2;
  c.n_ues_per_cell = 2;
  NetworkRealization real;
  real.bs_positions = bs_positions(c);
  REQUIRE(real.bs_positions[1].x == 375.0);
  const std::vector<Point> left = {{60, 40}, {200, 190}};
  for (const Point& p : left) real.ue_positions.push_back(p);
  for (const Point& p : left) real.ue_positions.push_back({500 - p.x, p.y});
  const auto g = mr_gain_profile(real, c);
  for (int j = 0; j < 2; ++j) {
    for (int k = 0; k < 2; ++k) {
      CHECK(g.a(j, k) == doctest::Approx(g.a(1 - j, k)).epsilon(1e-14));
      for (int l = 0; l < 2; ++l) {
        for (int i = 0; i < 2; ++i) {
          CHECK(g.b(l, i, j, k) == doctest::Approx(g.b(1 - l, i, 1 - j, k)).epsilon(1e-14));
        }
      }
    }
  }
}

TEST_CASE("position normalization") {
  NetworkConfig c;
  const PositionScaler s = PositionScaler::for_config(c);
  CHECK(s.min_coord == 0.0);
  CHECK(s.max_coord == 500.0);
  CHECK(s.normalize(0.0) == 0.0);
  CHECK(s.normalize(250.0) == 0.5);
  CHECK_THROWS_AS(s.normalize(500.5), DataError);
  CHECK_THROWS_AS(s.normalize(-1e-9), DataError);

  NetworkConfig two = c;
  two.n_cells = 2;
  CHECK(PositionScaler::for_config(two).max_coord == 500.0);

  const auto real = drop_ues(c, 3);
  const Vector x = normalize_positions(real, s);
  REQUIRE(x.size() == 40);
  // Cell-major, UE-minor, x then y.
  CHECK(x[2 * (2 * 5 + 3)] == s.normalize(real.ue(2, 3, 5).x));
  CHECK(x[2 * (2 * 5 + 3) + 1] == s.normalize(real.ue(2, 3, 5).y));
  CHECK(x.minCoeff() >= 0.0);
  CHECK(x.maxCoeff() <= 1.0);

  const auto back = denormalize_positions(x, s);
  for (std::size_t u = 0; u < back.size(); ++u) {
    CHECK(back[u].x == doctest::Approx(real.ue_positions[u].x).epsilon(1e-12));
    CHECK(back[u].y == doctest::Approx(real.ue_positions[u].y).epsilon(1e-12));
  }
}
