#include <cmath>
#include <random>

#include "doctest.h"
#include "mvs/policy.hpp"

using namespace mvs;

namespace {

MarketCurves market_for(double mu, std::size_t n = 2000) {
  return build_market(MarketSpec::single_asset(5.0, n, 0.05, mu, 0.25));
}

}  // namespace

TEST_SUITE("policy") {
  TEST_CASE("terminal allocation and distortion") {
    const MarketCurves m = market_for(0.15);
    const CoefficientTable t = solve_system(m, Preferences{}, ModelVariant::Full);
    const PolicyPoint p = equilibrium_policy(t, m, 5.0, 4.0);
    CHECK(p.allocation(0) == doctest::Approx(1.6).epsilon(1e-14));
    CHECK(p.distortion(0) == doctest::Approx(-0.2).epsilon(1e-14));
    CHECK(p.f == 0.5);
    CHECK(p.delta3 == doctest::Approx(2.0).epsilon(1e-14));

    const PolicyPoint p0 = equilibrium_policy(t, m, 0.0, 4.0);
    CHECK(p0.allocation(0) == doctest::Approx(1.10203).epsilon(1e-5));
  }

  TEST_CASE("allocation is linear in wealth") {
    const MarketCurves m = market_for(0.15);
    const CoefficientTable t = solve_system(m, Preferences{}, ModelVariant::Full);
    for (double s : {0.0, 1.3, 2.5, 4.9}) {
      const double u1 = equilibrium_policy(t, m, s, 1.0).allocation(0);
      for (double w : {4.0, 100.0}) {
        CHECK(equilibrium_policy(t, m, s, w).allocation(0) / w == doctest::Approx(u1).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("distortion does not depend on time or wealth") {
    const MarketCurves m = market_for(0.15);
    const CoefficientTable t = solve_system(m, Preferences{2.0, 0.5, 2.0}, ModelVariant::Full);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> time(0.0, 5.0), wealth(0.1, 50.0);
    for (int k = 0; k < 20; ++k) {
      const PolicyPoint p = equilibrium_policy(t, m, time(rng), wealth(rng));
      REQUIRE(p.distortion(0) == doctest::Approx(-2.0 / 3.0 * 0.4).epsilon(1e-13));
    }
    const CoefficientTable neutral = solve_system(m, Preferences{2.0, 0.5, 2.0}, ModelVariant::AmbiguityNeutral);
    CHECK(equilibrium_policy(neutral, m, 1.0, 4.0).distortion(0) == 0.0);
  }

  TEST_CASE("sensitivity aggregates") {
    const MarketCurves m = market_for(0.15);
    const CoefficientTable t = solve_system(m, Preferences{}, ModelVariant::Full);
    for (double s : {0.0, 1.0, 2.5, 5.0}) {
      for (double w : {1.0, 4.0}) {
        const PolicyPoint p = equilibrium_policy(t, m, s, w);
        CHECK(p.ambiguity_pref * p.delta1 * p.delta1 == doctest::Approx(-p.delta2).epsilon(1e-13));
        CHECK(p.delta3 == doctest::Approx(-w * p.delta2).epsilon(1e-13));
        CHECK(p.delta1 == doctest::Approx(p.f * p.delta3).epsilon(1e-12));
      }
    }
    const PolicyPoint p0 = equilibrium_policy(t, m, 0.0, 4.0);
    CHECK(p0.delta1 == doctest::Approx(1.318569).epsilon(1e-6));
    CHECK(p0.ambiguity_pref == doctest::Approx(0.550545).epsilon(1e-6));
  }

  TEST_CASE("interpolated coefficients are exact at nodes") {
    const MarketCurves m = market_for(0.15, 100);
    const CoefficientTable t = solve_system(m, Preferences{}, ModelVariant::Full);
    for (std::size_t i = 0; i < t.size(); i += 7) {
      REQUIRE(coefficients_at(t, t.grid.node(i)).f == t.f[i]);
    }
    const double mid = 0.5 * (t.grid.node(10) + t.grid.node(11));
    const double fm = coefficients_at(t, mid).f;
    CHECK(fm > std::min(t.f[10], t.f[11]));
    CHECK(fm < std::max(t.f[10], t.f[11]));
  }

  TEST_CASE("value losses do not depend on wealth") {
    const TableSet s = solve_all(market_for(0.15), Preferences{});
    const ValueReport r1 = value_at(s, 0.0, 1.0);
    for (double w : {4.0, 100.0}) {
      const ValueReport r = value_at(s, 0.0, w);
      CHECK(std::abs(r.loss_skew - r1.loss_skew) < 1e-14);
      CHECK(std::abs(r.loss_uncertainty - r1.loss_uncertainty) < 1e-14);
      CHECK(std::abs(r.loss_both - r1.loss_both) < 1e-14);
      CHECK(r.value_full == doctest::Approx(w * r1.value_full).epsilon(1e-14));
    }
  }

  TEST_CASE("values at the horizon equal wealth") {
    const TableSet s = solve_all(market_for(0.15), Preferences{});
    const ValueReport r = value_at(s, 5.0, 3.0);
    CHECK(r.value_full == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(r.value_neutral == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(r.value_mispec_u == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(r.value_mispec_both == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(r.loss_skew == doctest::Approx(0.0));
    CHECK(r.loss_uncertainty == doctest::Approx(0.0));
    CHECK(r.loss_both == doctest::Approx(0.0));
  }

  TEST_CASE("losses are fractions of the value") {
    for (double mu : {0.10, 0.15}) {
      const TableSet s = solve_all(market_for(mu), Preferences{});
      const ValueReport r = value_at(s, 0.0, 4.0);
      for (double l : {r.loss_skew, r.loss_uncertainty, r.loss_both}) {
        CHECK(l > 0.0);
        CHECK(l < 1.0);
      }
      CHECK(r.loss_both >= r.loss_uncertainty);
    }
  }

  TEST_CASE("delta3 scan") {
    const MarketCurves m = market_for(0.15);
    const CoefficientTable t = solve_system(m, Preferences{}, ModelVariant::Full);
    const Delta3Report d = delta3_scan(t);
    CHECK(d.all_positive);
    CHECK(d.min_value == doctest::Approx(2.0));
    CHECK(d.argmin_time == doctest::Approx(5.0));

    const CoefficientTable ns = solve_system(m, Preferences{3.0, 0.0, 1.0}, ModelVariant::Full);
    for (std::size_t i = 0; i < ns.size(); i += 100) REQUIRE(ns.delta3[i] == doctest::Approx(3.0 * ns.h2[i]));
  }

  TEST_CASE("error paths") {
    const MarketCurves m = market_for(0.15, 50);
    const CoefficientTable t = solve_system(m, Preferences{}, ModelVariant::Full);
    auto code = [](auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::InvalidArgument;
    };
    CHECK(code([&] { (void)equilibrium_policy(t, m, 1.0, 0.0); }) == ErrorCode::NonPositiveWealth);
    CHECK(code([&] { (void)equilibrium_policy(t, m, 1.0, -2.0); }) == ErrorCode::NonPositiveWealth);
    CHECK(code([&] { (void)equilibrium_policy(t, m, 6.0, 1.0); }) == ErrorCode::OutOfHorizon);
    CHECK(code([&] { (void)equilibrium_policy(CoefficientTable{}, m, 1.0, 1.0); }) == ErrorCode::UnsolvedTable);
    CHECK(code([&] { (void)equilibrium_policy(t, market_for(0.15, 60), 1.0, 1.0); }) == ErrorCode::UnsolvedTable);

    TableSet s = solve_all(m, Preferences{});
    s.noskew = solve_system(market_for(0.15, 40), Preferences{}, ModelVariant::NoSkew);
    CHECK(code([&] { (void)value_at(s, 0.0, 1.0); }) == ErrorCode::UnsolvedTable);
  }
}
