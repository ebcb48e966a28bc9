#include <cmath>

#include "doctest.h"
#include "hypelift/errors.hpp"
#include "hypelift/optim.hpp"

using namespace hypelift;
using namespace hypelift::optim;

TEST_CASE("one-cycle endpoints and shape") {
  OneCycle s{1e-3, 10.0, 1000.0, 0.05, 1000};
  s.validate();
  CHECK(s.lr(0) == doctest::Approx(1e-4));
  CHECK(s.lr(49) == doctest::Approx(1e-3));  // 0.05 * 1000 - 1
  CHECK(s.lr(999) == doctest::Approx(1e-7));
  // Cosine midpoint of the warm-up.
  CHECK(s.lr(0) < s.lr(24));
  CHECK(s.multiplier(24) > 0.5);
  for (int k = 50; k < 1000; ++k) CHECK(s.lr(k) <= s.lr(k - 1));
  for (int k = 1; k < 50; ++k) CHECK(s.lr(k) >= s.lr(k - 1));
  CHECK(OneCycle{1e-3, 10, 1000, 0.05, 1}.lr(0) == 1e-3);
  CHECK_THROWS_AS((OneCycle{1e-3, 10, 1000, 0.0, 10}.validate()), ConfigError);
}

TEST_CASE("short schedules still start low and end low") {
  OneCycle s{1.0, 10.0, 1000.0, 0.05, 10};
  CHECK(s.multiplier(0) == doctest::Approx(1.0));  // warm-up shorter than one step
  CHECK(s.multiplier(9) == doctest::Approx(1e-4));
}

TEST_CASE("first Adam step moves each coordinate by lr against the gradient sign") {
  Adam opt({3}, AdamConfig{});
  Eigen::VectorXd p(3);
  p << 1.0, -2.0, 0.5;
  const Eigen::VectorXd before = p;
  Eigen::VectorXd g(3);
  g << 4.0, -0.01, 0.0;
  opt.step({&p}, {g}, 0.1);
  CHECK(p[0] == doctest::Approx(before[0] - 0.1));
  CHECK(p[1] == doctest::Approx(before[1] + 0.1).epsilon(1e-5));
  CHECK(p[2] == before[2]);
}

TEST_CASE("Adam minimizes a quadratic") {
  Adam opt({2}, AdamConfig{});
  Eigen::VectorXd p(2);
  p << 3.0, -4.0;
  for (int i = 0; i < 2000; ++i) {
    Eigen::VectorXd g = 2.0 * p;
    opt.step({&p}, {g}, 0.05);
  }
  CHECK(p.norm() < 1e-2);
}

TEST_CASE("decoupled decay shrinks weights with zero learning rate") {
  AdamConfig cfg;
  cfg.weight_decay = 0.1;
  Adam opt({2}, cfg);
  Eigen::VectorXd p(2);
  p << 2.0, -1.0;
  Eigen::VectorXd g(2);
  g << 100.0, -100.0;
  opt.step({&p}, {g}, 0.0, 0.5);
  CHECK(p[0] == doctest::Approx(2.0 * (1 - 0.05)));
  CHECK(p[1] == doctest::Approx(-1.0 * (1 - 0.05)));
  CHECK_THROWS_AS(opt.step({&p, &p}, {g, g}, 0.1), DimensionError);
}
