#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "zimpute/errors.hpp"
#include "zimpute/impute.hpp"
#include "zimpute/io.hpp"
#include "zimpute/model.hpp"

using namespace zimpute;
using namespace testing;

TEST_CASE("population frame: minimal valid frame") {
  PopulationColumns c;
  c.y = vec({0, 5});
  c.z = ones(2);
  c.u = ones(2);
  c.v = vec({1, 1});
  const auto f = PopulationFrame::build(c);
  CHECK(f.size() == 2);
  CHECK(f.strata() == std::vector<int>{0});
}

TEST_CASE("population frame: non-positive v is rejected") {
  PopulationColumns c;
  c.y = vec({0, 5});
  c.z = ones(2);
  c.u = ones(2);
  c.v = vec({1, 0});
  CHECK_THROWS_WITH_AS(PopulationFrame::build(c), doctest::Contains("non-positive v"),
                       ValidationError);
}

TEST_CASE("population frame: ragged columns are rejected") {
  PopulationColumns c;
  c.y = vec({0, 5, 1});
  c.z = ones(2);
  c.u = ones(3);
  c.v = vec({1, 1, 1});
  CHECK_THROWS_WITH_AS(PopulationFrame::build(c), doctest::Contains("dimension"), ValidationError);
}

TEST_CASE("population frame: non-finite entries are rejected") {
  PopulationColumns c;
  c.y = vec({0, kNaN});
  c.z = ones(2);
  c.u = ones(2);
  c.v = vec({1, 1});
  CHECK_THROWS_AS(PopulationFrame::build(c), ValidationError);
}

TEST_CASE("population frame: intercept augmentation only on request") {
  PopulationColumns c;
  c.y = vec({1, 2});
  c.z = column(vec({3, 4}));
  c.u = column(vec({5, 6}));
  c.v = vec({1, 1});
  CHECK(PopulationFrame::build(c).z().cols() == 1);
  const auto f = PopulationFrame::build(c, {true, false});
  REQUIRE(f.z().cols() == 2);
  CHECK(f.z()(0, 0) == 1.0);
  CHECK(f.z()(1, 1) == 4.0);
  CHECK(f.u().cols() == 1);
}

TEST_CASE("derive eta: zero, non-zero and unobserved") {
  const auto s = sample_of(vec({0.0, 3.2, kNaN}), ones(3), ones(3), vec({1, 1, 1}),
                           vec({0.5, 0.5, 0.5}));
  CHECK(s.eta(0) == 0);
  CHECK(s.eta(1) == 1);
  CHECK_FALSE(s.eta_observed(2));
  CHECK_THROWS_WITH_AS(s.eta(2), doctest::Contains("not observed"), NotObservedError);
  CHECK_THROWS_AS(s.y(2), NotObservedError);
}

TEST_CASE("sample frame: design weights invert pi exactly and omega defaults to 1") {
  const auto s = sample_of(vec({1, 2, 3}), ones(3), ones(3), vec({1, 1, 1}), vec({0.3, 0.7, 1.0}));
  for (std::size_t i = 0; i < 3; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    CHECK(s.d()[k] == 1.0 / s.pi()[k]);
    CHECK(s.omega()[k] == 1.0);
  }
  CHECK(s.population_size() == doctest::Approx(1 / 0.3 + 1 / 0.7 + 1.0));
}

TEST_CASE("sample frame: pi outside (0, 1] is rejected") {
  CHECK_THROWS_AS(sample_of(vec({1, 2}), ones(2), ones(2), vec({1, 1}), vec({0.0, 0.5})),
                  ValidationError);
  CHECK_THROWS_AS(sample_of(vec({1, 2}), ones(2), ones(2), vec({1, 1}), vec({1.5, 0.5})),
                  ValidationError);
}

TEST_CASE("random stream: same (seed, stream) gives the same sequence") {
  RandomStream a(42, 7);
  RandomStream b(42, 7);
  RandomStream c(42, 8);
  bool differs = false;
  for (int k = 0; k < 100; ++k) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    differs |= x != c.uniform();
  }
  CHECK(differs);
}

TEST_CASE("random stream: children ignore the parent's consumed state") {
  RandomStream a(5, 1);
  const RandomStream fresh(5, 1);
  for (int k = 0; k < 17; ++k) a.normal(0, 1);
  RandomStream c1 = a.child(3);
  RandomStream c2 = fresh.child(3);
  for (int k = 0; k < 20; ++k) CHECK(c1.uniform() == c2.uniform());
  RandomStream d = fresh.child(4);
  RandomStream e = fresh.child(3);
  CHECK(d.uniform() != e.uniform());
}

TEST_CASE("random stream: distinct streams look independent") {
  RandomStream a(11, 0);
  RandomStream b(11, 1);
  const int n = 20000;
  double sab = 0, sa = 0, sb = 0, saa = 0, sbb = 0;
  for (int k = 0; k < n; ++k) {
    const double x = a.uniform();
    const double y = b.uniform();
    sa += x;
    sb += y;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
  }
  const double cov = sab / n - sa / n * sb / n;
  const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  CHECK(std::abs(corr) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("determinism: same stream gives identical imputations downstream") {
  const auto s = synthetic_sample(120, 0.6, 3);
  const auto model = fit_model(s);
  for (Method m : kAllMethods) {
    RandomStream a(9, 2);
    RandomStream b(9, 2);
    const auto ra = impute(m, s, model, a);
    const auto rb = impute(m, s, model, b);
    CHECK(ra.y_star == rb.y_star);
    CHECK(ra.eta_star == rb.eta_star);
    CHECK(ra.donor == rb.donor);
  }
}

TEST_CASE("frame round trip: serialize, parse, serialize is byte-identical") {
  Vector y = vec({0.0, 1.0 / 3.0, kNaN, 12345.678901234567, 1e-300});
  Matrix z(5, 2);
  z << 1, 0.1, 1, 2.0 / 7.0, 1, 3.5, 1, -4.25, 1, 1e10;
  const auto s = sample_of(y, z, z.col(1), vec({1, 2, 0.5, 3, 1}),
                           vec({0.1, 0.2, 0.3, 1.0, 0.99}), vec({1, 2, 3, 4, 5}), {0, 0, 1, 1, 2});
  std::ostringstream first;
  write_sample_csv(first, s);
  std::istringstream in(first.str());
  const auto back = load_sample_csv(parse_csv(in));
  std::ostringstream second;
  write_sample_csv(second, back.frame);
  CHECK(first.str() == second.str());
  CHECK(back.frame.responded(1));
  CHECK_FALSE(back.frame.responded(2));
  CHECK(back.frame.y(1) == 1.0 / 3.0);
}
