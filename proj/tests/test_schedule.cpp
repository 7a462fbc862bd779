#include <cmath>

#include "doctest.h"

#include "dg/schedule.hpp"

using namespace dg;

TEST_SUITE("schedule") {

// Reference alpha_bar values computed with 50-digit arithmetic from the
// same closed-form definitions (independent of this implementation).
TEST_CASE("linear schedule matches the high-precision reference") {
  NoiseSchedule s = build_linear(1000, 1e-4, 0.02);
  CHECK(s.T == 1000);
  CHECK(s.beta(1) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(s.beta(1000) == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.alpha_bar(500) == doctest::Approx(0.078587242881778237).epsilon(1e-12));
  CHECK(s.alpha_bar(1000) == doctest::Approx(4.0358297653756833e-05).epsilon(1e-12));
}

TEST_CASE("cosine schedule matches the high-precision reference") {
  NoiseSchedule s = build_cosine(1000, 0.008);
  CHECK(s.alpha_bar(500) == doctest::Approx(0.49384359044063771).epsilon(1e-12));
  CHECK(s.alpha_bar(1000) == doctest::Approx(2.4287669070344684e-09).epsilon(1e-10));
  // the per-step clamp keeps every alpha at or above 0.001
  for (int t = 1; t <= 1000; ++t) CHECK(s.alpha(t) >= 0.001);
}

TEST_CASE("basic identities hold for both kinds") {
  for (const NoiseSchedule& s : {build_linear(50, 1e-3, 0.05), build_cosine(50)}) {
    double prod = 1.0;
    for (int t = 1; t <= s.T; ++t) {
      CHECK(s.alpha(t) == doctest::Approx(1.0 - s.beta(t)).epsilon(1e-15));
      prod *= s.alpha(t);
      CHECK(s.alpha_bar(t) == doctest::Approx(prod).epsilon(1e-13));
      CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));  // strictly decreasing
    }
  }
}

TEST_CASE("accessor range checks") {
  NoiseSchedule s = build_linear(10, 1e-4, 0.02);
  CHECK_THROWS(s.alpha(0));
  CHECK_THROWS(s.alpha(11));
  CHECK_THROWS(s.beta(0));
  CHECK_THROWS(s.alpha_bar(-1));
  CHECK_THROWS(s.alpha_bar(11));
  CHECK_NOTHROW(s.alpha_bar(0));
}

TEST_CASE("constructor argument validation") {
  CHECK_THROWS(build_linear(0, 1e-4, 0.02));
  CHECK_THROWS(build_linear(10, 0.0, 0.02));
  CHECK_THROWS(build_linear(10, 0.05, 0.02));   // start > end
  CHECK_THROWS(build_linear(10, 1e-4, 1.0));    // end not < 1
  CHECK_THROWS(build_cosine(0));
  CHECK_THROWS(build_cosine(10, 0.0));
}

TEST_CASE("ddpm sigma variants") {
  NoiseSchedule s = build_linear(100, 1e-4, 0.02);
  for (int t : {1, 2, 50, 100}) {
    const double post = ddpm_sigma(s, t, DdpmSigmaVariant::posterior);
    const double beta = ddpm_sigma(s, t, DdpmSigmaVariant::beta);
    const double expect_post =
        std::sqrt(s.beta(t) * (1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t)));
    CHECK(post == doctest::Approx(expect_post).epsilon(1e-14));
    CHECK(beta == doctest::Approx(std::sqrt(s.beta(t))).epsilon(1e-14));
    CHECK(post <= beta + 1e-15);
  }
  // at t=1: abar(0)=1 makes the posterior sigma exactly zero
  CHECK(ddpm_sigma(s, 1) == doctest::Approx(0.0));
}

TEST_CASE("ddim coefficients: eta 0 is deterministic, eta 1 matches ddpm") {
  NoiseSchedule s = build_linear(100, 1e-4, 0.02);

  for (int t : {2, 30, 100}) {
    const DdimCoeffs d0 = ddim_sigma(s, t, t - 1, 0.0);
    CHECK(d0.sigma == 0.0);
    CHECK(d0.dir_coeff == doctest::Approx(std::sqrt(1.0 - s.alpha_bar(t - 1))).epsilon(1e-13));

    const DdimCoeffs d1 = ddim_sigma(s, t, t - 1, 1.0);
    CHECK(d1.sigma == doctest::Approx(ddpm_sigma(s, t)).epsilon(1e-12));
  }

  // final transition to clean data
  const DdimCoeffs last = ddim_sigma(s, 1, 0, 0.0);
  CHECK(last.sigma == 0.0);
  CHECK(last.dir_coeff == doctest::Approx(0.0).epsilon(1e-13));

  CHECK_THROWS(ddim_sigma(s, 10, 10, 0.0));
  CHECK_THROWS(ddim_sigma(s, 10, 20, 0.0));
  CHECK_THROWS(ddim_sigma(s, 10, 5, 1.5));
  CHECK_THROWS(ddim_sigma(s, 10, -1, 0.0));
}

TEST_CASE("kind strings round trip") {
  CHECK(schedule_kind_from_string(to_string(ScheduleKind::linear)) == ScheduleKind::linear);
  CHECK(schedule_kind_from_string(to_string(ScheduleKind::cosine)) == ScheduleKind::cosine);
  CHECK_THROWS(schedule_kind_from_string("quadratic"));
}

}  // TEST_SUITE
