#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "cmle/simulation.hpp"

using namespace cmle;

namespace {

bool summaries_identical(const SimSummary& a, const SimSummary& b) {
  return std::memcmp(&a.bias1, &b.bias1, sizeof(double)) == 0 &&
         std::memcmp(&a.bias2, &b.bias2, sizeof(double)) == 0 &&
         std::memcmp(&a.coverage1, &b.coverage1, sizeof(double)) == 0 &&
         std::memcmp(&a.coverage2, &b.coverage2, sizeof(double)) == 0 &&
         std::memcmp(&a.mc_se1, &b.mc_se1, sizeof(double)) == 0 &&
         std::memcmp(&a.mc_se2, &b.mc_se2, sizeof(double)) == 0 &&
         a.failures == b.failures && a.converged == b.converged &&
         a.local_max_positive == b.local_max_positive;
}

}  // namespace

TEST_CASE("multinomial draws close under the sample size") {
  std::mt19937_64 rng = replicate_engine(1, 0);
  const LogisticParams params = default_study_params();
  SUBCASE("empty sample") {
    const CellCounts c = generate_dataset(params, 0, rng);
    CHECK(c.total() == 0);
  }
  SUBCASE("totals are exact for every draw") {
    for (int rep = 0; rep < 200; ++rep) {
      const CellCounts c = generate_dataset(params, 1000, rng);
      CHECK(c.total() == 1000);
    }
  }
  SUBCASE("first-cell mean matches its expectation within Monte Carlo error") {
    const int reps = 4000;
    const std::int64_t n = 1000;
    double sum = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      std::mt19937_64 stream = replicate_engine(5, rep);
      sum += static_cast<double>(generate_dataset(params, n, stream).n[0]);
    }
    const double mean = sum / reps;
    const double expected = 0.288 * n;
    const double se = std::sqrt(0.288 * (1 - 0.288) * n / reps);
    CHECK(std::abs(mean - expected) <= 3.0 * se);
  }
}

TEST_CASE("replicate streams are pure functions of seed and index") {
  std::mt19937_64 a = replicate_engine(42, 7);
  std::mt19937_64 b = replicate_engine(42, 7);
  CHECK(a() == b());
  std::mt19937_64 c = replicate_engine(42, 8);
  std::mt19937_64 d = replicate_engine(43, 7);
  CHECK(replicate_engine(42, 7)() != c());
  CHECK(replicate_engine(42, 7)() != d());
}

TEST_CASE("parallel study reproduces the serial reference bit for bit") {
  SimConfig cfg;
  cfg.reps = 60;
  cfg.n = 500;
  cfg.seed = 12;
  const SimSummary serial = run_study_serial(cfg);
  const SimSummary parallel = run_study(cfg);
  CHECK(summaries_identical(serial, parallel));

  SUBCASE("and is reproducible across invocations") {
    const SimSummary again = run_study(cfg);
    CHECK(summaries_identical(parallel, again));
  }
  SUBCASE("per-replicate records agree as well") {
    std::vector<ReplicateRecord> rs, rp;
    run_study_serial(cfg, &rs);
    run_study(cfg, &rp);
    REQUIRE(rs.size() == rp.size());
    for (size_t i = 0; i < rs.size(); ++i) {
      CHECK(rs[i].converged == rp[i].converged);
      CHECK(std::memcmp(&rs[i].beta1, &rp[i].beta1, sizeof(double)) == 0);
      CHECK(std::memcmp(&rs[i].se1, &rp[i].se1, sizeof(double)) == 0);
    }
  }
}

TEST_CASE("a single huge replicate is consistent") {
  SimConfig cfg;
  cfg.reps = 1;
  cfg.n = 10000000;
  cfg.seed = 4;
  std::vector<ReplicateRecord> recs;
  const SimSummary s = run_study(cfg, &recs);
  CHECK(s.failures == 0);
  REQUIRE(recs.size() == 1);
  CHECK(std::abs(recs[0].beta1 - std::log(2.0)) <= 1e-2);
  CHECK(std::abs(recs[0].beta2 - std::log(3.0)) <= 1e-2);
}

TEST_CASE("study rejects invalid configurations") {
  SimConfig cfg;
  cfg.reps = 0;
  CHECK_THROWS_AS(run_study(cfg), Error);
  cfg.reps = 10;
  cfg.ci_level = 1.0;
  CHECK_THROWS_AS(run_study(cfg), Error);
  cfg.ci_level = 0.95;
  cfg.n = 0;
  CHECK_THROWS_AS(run_study(cfg), Error);
}

TEST_CASE("asymptotic matrices of the observed cells") {
  const LogisticParams params = default_study_params();
  const auto [unc, con] = asymptotic_matrices(params);

  SUBCASE("unconstrained entries follow the multinomial formula") {
    CHECK(unc(0, 0) == doctest::Approx(0.288 * 0.712).epsilon(1e-12));
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        if (i != j) CHECK(unc(i, j) < 0.0);
  }
  SUBCASE("constraints shrink every diagonal entry") {
    for (int i = 0; i < 8; ++i) CHECK(con(i, i) <= unc(i, i) + 1e-12);
  }
  SUBCASE("just-identified variant matches the unconstrained law") {
    const auto [u2, c2] = asymptotic_matrices(params, ModelVariant::MarOnly);
    CHECK((u2 - c2).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("non-additive settings are rejected") {
    LogisticParams bad = params;
    bad.beta3 = 0.2;
    CHECK_THROWS_AS(asymptotic_matrices(bad), Error);
  }
}

TEST_CASE("Wald intervals") {
  const Interval ci = wald_ci(0.0, 1.0, 0.95);
  CHECK(ci.lo == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  CHECK(ci.hi == doctest::Approx(1.959963984540054).epsilon(1e-12));

  const Interval degenerate = wald_ci(3.2, 0.0, 0.95);
  CHECK(degenerate.lo == 3.2);
  CHECK(degenerate.hi == 3.2);

  double last = 0.0;
  for (double level : {0.5, 0.8, 0.9, 0.95, 0.99, 0.999}) {
    const Interval w = wald_ci(0.0, 1.0, level);
    CHECK(w.hi > last);
    last = w.hi;
  }
  CHECK_THROWS_AS(wald_ci(0.0, -1.0, 0.95), Error);
  CHECK_THROWS_AS(wald_ci(0.0, 1.0, 1.0), Error);
}

TEST_CASE("moderate study lands near nominal calibration") {
  SimConfig cfg;
  cfg.reps = 400;
  cfg.n = 1000;
  cfg.seed = 2718;
  const SimSummary s = run_study(cfg);
  CHECK(s.converged + s.failures == cfg.reps);
  CHECK(s.failures <= 20);
  CHECK(std::abs(s.bias1) <= 0.05);
  CHECK(std::abs(s.bias2) <= 0.05);
  CHECK(s.coverage1 >= 0.90);
  CHECK(s.coverage1 <= 0.99);
  CHECK(s.coverage2 >= 0.90);
  CHECK(s.coverage2 <= 0.99);
  CHECK(s.max_kkt_residual <= 1e-10);
  CHECK(s.max_constraint_violation <= 1e-10);
  CHECK(s.local_max_positive >= s.converged * 99 / 100);
}
