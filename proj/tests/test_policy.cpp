#include <doctest.h>

#include "obs360/policy.hpp"

#include <cmath>
#include <random>

using namespace obs360;

namespace {

JCandidate cand(int segment, std::initializer_list<double> g, std::initializer_list<double> opt,
                std::initializer_list<double> act) {
  JCandidate c;
  c.segment = segment;
  c.gradient.resize(static_cast<long>(g.size()));
  c.optimum.resize(static_cast<long>(opt.size()));
  c.actual.resize(static_cast<long>(act.size()));
  int i = 0;
  for (double x : g) c.gradient(i++) = x;
  i = 0;
  for (double x : opt) c.optimum(i++) = x;
  i = 0;
  for (double x : act) c.actual(i++) = x;
  return c;
}

SegmentContext context1(double dbar, double prev_mu = 0.0, double buffer = 2.0) {
  SegmentContext ctx;
  ctx.omega = Eigen::VectorXd::Constant(1, 1.0);
  ctx.prev_viewing_bitrate = prev_mu;
  ctx.buffer_before_s = buffer;
  ctx.mean_capacity_mbps = dbar;
  ctx.segment_length_s = 1.0;
  return ctx;
}

}  // namespace

TEST_CASE("compute_J picks the most binding revelation, ties to the earliest") {
  const JCandidate a = cand(1, {1, 0}, {8, 8}, {5, 5});    // value -3
  const JCandidate b = cand(2, {-1, 1}, {5, 8}, {5, 5});   // value -3
  const JCandidate c = cand(3, {2, 2}, {8, 8}, {5, 5});    // value -12
  CHECK(compute_J({a, b}) == 1);
  CHECK(compute_J({b, a}) == 1);
  CHECK(compute_J({a, b, c}) == 3);
  CHECK(compute_J({b}) == 2);
  CHECK_THROWS_AS(compute_J({}), std::invalid_argument);
}

TEST_CASE("compute_J agrees with a brute-force argmin") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ug(-3, 3), ur(1, 40);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(gen() % 5);
    const int K = 1 + static_cast<int>(gen() % 3);
    std::vector<JCandidate> cs;
    for (int i = 0; i < n; ++i) {
      JCandidate c;
      c.segment = 1 + static_cast<int>(gen() % 50);
      c.gradient.resize(K);
      c.optimum.resize(K);
      c.actual.resize(K);
      for (int k = 0; k < K; ++k) {
        c.gradient(k) = ug(gen);
        c.optimum(k) = ur(gen);
        c.actual(k) = ur(gen);
      }
      cs.push_back(c);
    }
    int expect = 0;
    double expect_value = 0.0;
    for (const JCandidate& c : cs) {
      const double value = -c.gradient.dot(c.optimum - c.actual);
      if (expect == 0 || value < expect_value ||
          (value == expect_value && c.segment < expect)) {
        expect = c.segment;
        expect_value = value;
      }
    }
    CHECK(compute_J(cs) == expect);
  }
}

TEST_CASE("discrete mirror step picks the per-coordinate minimizer") {
  const BitrateLadder ladder({1, 2.5, 5, 8, 16, 40});
  const Eigen::VectorXd base = Eigen::VectorXd::Constant(1, 5.0);

  auto step = [&](double g, double alpha) {
    return ogd_update(base, Eigen::VectorXd::Constant(1, g), alpha, ladder)(0);
  };
  CHECK(step(2.0, 1.0) == 8.0);
  CHECK(step(1.5, 1.0) == 5.0);   // exact tie between 5 and 8: lower level wins
  CHECK(step(-2.0, 1.0) == 2.5);
  CHECK(step(0.5, 20.0) == 16.0);
  CHECK(step(0.0, 1.0) == 5.0);
  CHECK_THROWS_AS(step(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("discrete mirror step equals the exhaustive vector minimizer") {
  const BitrateLadder ladder({1, 2.5, 5, 8, 16, 40});
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> ug(-5, 5);
  const double alphas[] = {0.3, 1.0, 4.0};
  for (int trial = 0; trial < 120; ++trial) {
    const int K = 3;
    Eigen::VectorXd base(K), g(K);
    for (int k = 0; k < K; ++k) {
      base(k) = ladder.level(static_cast<int>(gen() % ladder.size()));
      g(k) = ug(gen);
    }
    const double alpha = alphas[trial % 3];
    const Eigen::VectorXd fast = ogd_update(base, g, alpha, ladder);

    Eigen::VectorXd best;
    double best_obj = 0.0;
    std::vector<int> idx(K, 0);
    bool first = true;
    while (true) {
      Eigen::VectorXd x(K);
      for (int k = 0; k < K; ++k) x(k) = ladder.level(idx[k]);
      const double obj = -g.dot(x - base) + (x - base).squaredNorm() / (2 * alpha);
      if (first || obj < best_obj) {
        best = x;
        best_obj = obj;
        first = false;
      }
      int k = K - 1;
      while (k >= 0 && idx[k] == ladder.size() - 1) idx[k--] = 0;
      if (k < 0) break;
      ++idx[k];
    }
    CHECK((fast - best).cwiseAbs().maxCoeff() == 0.0);
    const double fast_obj = -g.dot(fast - base) + (fast - base).squaredNorm() / (2 * alpha);
    CHECK(fast_obj == best_obj);
  }
}

TEST_CASE("convex mirror step clips the gradient move to the hull") {
  const BitrateLadder hull({1, 2.5, 5, 8, 16, 40}, true);
  Eigen::VectorXd base(3), g(3);
  base << 5, 5, 5;
  g << 100, -100, 0.5;
  const Eigen::VectorXd r = ogd_update(base, g, 1.0, hull);
  CHECK(r(0) == 40.0);
  CHECK(r(1) == 1.0);
  CHECK(r(2) == 5.5);
}

TEST_CASE("rate limit moves each tile at most one ladder level") {
  const BitrateLadder ladder({1, 2.5, 5, 8, 16, 40});
  Eigen::VectorXd prev(3), next(3);
  prev << 5, 5, 5;
  next << 40, 1, 5;
  const Eigen::VectorXd limited = rate_limit(next, prev, ladder);
  CHECK(limited(0) == 8.0);
  CHECK(limited(1) == 2.5);
  CHECK(limited(2) == 5.0);

  // already within one level: unchanged, and limiting again is a no-op
  Eigen::VectorXd close(3);
  close << 8, 2.5, 8;
  CHECK((rate_limit(close, prev, ladder) - close).cwiseAbs().maxCoeff() == 0.0);
  CHECK((rate_limit(limited, prev, ladder) - limited).cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd top = Eigen::VectorXd::Constant(1, 40.0);
  Eigen::VectorXd bottom = Eigen::VectorXd::Constant(1, 1.0);
  CHECK(rate_limit(bottom, top, ladder)(0) == 16.0);

  const BitrateLadder hull({1, 40}, true);
  CHECK_THROWS_AS(rate_limit(bottom, top, hull), std::invalid_argument);
  Eigen::VectorXd off = Eigen::VectorXd::Constant(3, 7.0);
  CHECK_THROWS_AS(rate_limit(off, prev, ladder), std::invalid_argument);
}

TEST_CASE("policy starts at the median level and repeats without feedback") {
  const BitrateLadder ladder({1, 2.5, 5, 8, 16, 40});
  PolicyOptions options;
  Obs360Policy policy(ladder, QoEParams{}, 2, 10, options);
  const Eigen::VectorXd r1 = policy.decide(1, {});
  CHECK(r1(0) == 5.0);
  CHECK(r1(1) == 5.0);
  const Eigen::VectorXd r2 = policy.decide(2, {});
  CHECK((r2 - r1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(policy.name() == "obs360");

  PolicyOptions low;
  low.r0_level = 1;
  Obs360Policy at_bottom(ladder, QoEParams{}, 2, 10, low);
  CHECK(at_bottom.decide(1, {})(0) == 1.0);

  PolicyOptions bad;
  bad.r0_level = 7;
  CHECK_THROWS_AS(Obs360Policy(ladder, QoEParams{}, 2, 10, bad), std::invalid_argument);
}

TEST_CASE("policy enforces in-order decisions and known revelations") {
  const BitrateLadder ladder({1, 2.5, 5, 8, 16, 40});
  Obs360Policy policy(ladder, QoEParams{}, 1, 10, PolicyOptions{});
  policy.decide(1, {});
  CHECK_THROWS_AS(policy.decide(3, {}), std::invalid_argument);

  Obs360Policy fresh(ladder, QoEParams{}, 1, 10, PolicyOptions{});
  CHECK_THROWS_AS(fresh.decide(1, {Revelation{1, context1(20.0)}}), std::invalid_argument);
}

TEST_CASE("one revelation triggers one rate-limited mirror step") {
  const BitrateLadder ladder({1, 2.5, 5, 8, 16, 40});
  PolicyOptions options;
  options.alpha = 4.0;

  // gradient at r=5 under this context is 1.075, so the unconstrained
  // target is 9.3 and the per-coordinate minimizer is 8
  Obs360Policy policy(ladder, QoEParams{}, 1, 10, options);
  CHECK(policy.decide(1, {})(0) == 5.0);
  CHECK(std::abs(policy.alpha() - 4.0) < 1e-15);
  const Eigen::VectorXd r2 = policy.decide(2, {Revelation{1, context1(20.0)}});
  CHECK(r2(0) == 8.0);

  // without feedback the updated decision is repeated
  CHECK(policy.decide(3, {})(0) == 8.0);
}

TEST_CASE("rate limiting caps a large step that the unlimited variant takes in full") {
  const BitrateLadder ladder({1, 2.5, 5, 8, 16, 40});
  PolicyOptions options;
  options.alpha = 40.0;

  Obs360Policy limited(ladder, QoEParams{}, 1, 10, options);
  limited.decide(1, {});
  CHECK(limited.decide(2, {Revelation{1, context1(20.0)}})(0) == 8.0);

  options.level_rate_limit = false;
  Obs360Policy unlimited(ladder, QoEParams{}, 1, 10, options);
  CHECK(unlimited.name() == "obs360-unlimited");
  unlimited.decide(1, {});
  CHECK(unlimited.decide(2, {Revelation{1, context1(20.0)}})(0) == 40.0);
}

TEST_CASE("the update pivots on the revelation chosen by compute_J") {
  const BitrateLadder ladder({1, 2.5, 5, 8, 16, 40});
  PolicyOptions options;
  options.alpha = 4.0;
  Obs360Policy policy(ladder, QoEParams{}, 1, 10, options);
  policy.decide(1, {});
  policy.decide(2, {});
  // segment 1: steep positive gradient, bound -37.625; segment 2: negative
  // gradient, bound -3.6; the step must follow segment 1
  const Eigen::VectorXd r3 = policy.decide(
      3, {Revelation{1, context1(20.0)}, Revelation{2, context1(0.25, 5.0)}});
  CHECK(r3(0) == 8.0);
}

TEST_CASE("convex-mode policy takes clipped hull steps") {
  const BitrateLadder hull({1, 2.5, 5, 8, 16, 40}, true);
  PolicyOptions options;
  options.alpha = 4.0;
  Obs360Policy policy(hull, QoEParams{}, 1, 10, options);
  CHECK(policy.name() == "obs360-unlimited");
  CHECK(policy.decide(1, {})(0) == 5.0);
  const Eigen::VectorXd r2 = policy.decide(2, {Revelation{1, context1(20.0)}});
  CHECK(std::abs(r2(0) - 9.3) < 1e-12);
}

TEST_CASE("greedy capacity policy tracks the newest revealed throughput") {
  const BitrateLadder ladder({1, 2.5, 5, 8, 16, 40});
  GreedyCapacityPolicy policy(ladder, 2);
  CHECK(policy.decide(1, {})(0) == 5.0);  // median until feedback arrives
  CHECK(policy.decide(2, {Revelation{1, context1(40.0)}})(0) == 16.0);
  CHECK(policy.decide(3, {})(0) == 16.0);
  CHECK(policy.decide(4, {Revelation{2, context1(1.0)}})(0) == 1.0);
  // the newest segment wins when several surface at once
  GreedyCapacityPolicy two(ladder, 2);
  const Eigen::VectorXd r =
      two.decide(1, {Revelation{1, context1(40.0)}, Revelation{2, context1(10.0)}});
  CHECK(r(0) == 5.0);
}

TEST_CASE("constant policy emits one ladder level under its own name") {
  const BitrateLadder ladder({1, 2.5, 5, 8, 16, 40});
  ConstantPolicy policy(ladder, 2, 2);
  CHECK(policy.name() == "constant:3");
  const Eigen::VectorXd r = policy.decide(1, {});
  CHECK(r(0) == 5.0);
  CHECK(r(1) == 5.0);
  CHECK_THROWS_AS(ConstantPolicy(ladder, 2, 6), std::invalid_argument);
  CHECK_THROWS_AS(ConstantPolicy(ladder, 2, -1), std::invalid_argument);
}

TEST_CASE("make_policy resolves the CLI policy names") {
  const BitrateLadder ladder({1, 2.5, 5, 8, 16, 40});
  const QoEParams params;
  PolicyOptions options;
  CHECK(make_policy("obs360", ladder, params, 2, 10, options)->name() == "obs360");
  CHECK(make_policy("obs360-unlimited", ladder, params, 2, 10, options)->name() ==
        "obs360-unlimited");
  CHECK(make_policy("greedy-capacity", ladder, params, 2, 10, options)->name() ==
        "greedy-capacity");
  CHECK(make_policy("constant:median", ladder, params, 2, 10, options)->name() ==
        "constant:3");
  CHECK(make_policy("constant:4", ladder, params, 2, 10, options)->decide(1, {})(0) == 8.0);
  CHECK_THROWS_AS(make_policy("constant:0", ladder, params, 2, 10, options),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_policy("constant:7", ladder, params, 2, 10, options),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_policy("constant:x", ladder, params, 2, 10, options),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_policy("dash", ladder, params, 2, 10, options), std::invalid_argument);
}

TEST_CASE("step-size options") {
  PolicyOptions options;
  options.alpha = 2.5;
  CHECK(options.effective_alpha(100) == 2.5);
  options.horizon_schedule = true;
  options.alpha0 = 8.0;
  options.gamma = 2.0;
  CHECK(std::abs(options.effective_alpha(16) - 2.0) < 1e-15);
  options.horizon_schedule = false;
  options.alpha = 0.0;
  CHECK_THROWS_AS(options.effective_alpha(16), std::invalid_argument);
}
