#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "skf/experiments.hpp"
#include "skf/model.hpp"

using namespace skf;

namespace {

NonlinearModel linear_model(const Matrix& f, const Matrix& h) {
  NonlinearModel m;
  m.state_dim = static_cast<int>(f.rows());
  m.input_dim = m.state_dim;
  m.meas_dim = static_cast<int>(h.rows());
  m.f = [f](const Vector& x, const Vector& u, const Vector& w, const std::vector<Vector>& a, int) {
    return Vector(f * x + u + w + a[0]);
  };
  m.h = [h](const Vector& x, const Vector& v, const Vector& b, int) {
    return Vector(h * x + v + b);
  };
  const auto n = f.rows();
  const auto p = h.rows();
  m.process_noise_cov = constant_matrix(Matrix::Identity(n, n));
  m.ubb_process_shapes = {constant_matrix(Matrix::Identity(n, n))};
  m.meas_noise_cov = constant_matrix(Matrix::Identity(p, p));
  m.ubb_meas_shape = constant_matrix(Matrix::Identity(p, p));
  return m;
}

NonlinearModel without_jacobians(NonlinearModel m) {
  m.jacobians = {};
  return m;
}

}  // namespace

TEST(WrapAngle, MapsIntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(0.0), 0.0);
  EXPECT_DOUBLE_EQ(wrap_angle(std::numbers::pi), std::numbers::pi);
  EXPECT_DOUBLE_EQ(wrap_angle(-std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(wrap_angle(3.0 * std::numbers::pi / 2.0), -std::numbers::pi / 2.0, 1e-15);
  EXPECT_NEAR(wrap_angle(-7.0), -7.0 + 2.0 * std::numbers::pi, 1e-15);
}

TEST(Innovation, WrapsOnlyAngularComponents) {
  NonlinearModel m;
  m.angular = {false, true};
  const Vector r = innovation(m, Vector{{4.0, 3.1}}, Vector{{0.0, -3.1}});
  EXPECT_DOUBLE_EQ(r(0), 4.0);
  EXPECT_NEAR(r(1), 6.2 - 2.0 * std::numbers::pi, 1e-15);
}

TEST(LinearizeProcess, LinearSystemIsExact) {
  const Matrix f{{1.0, 0.1}, {0.0, 1.0}};
  const auto m = linear_model(f, Matrix::Identity(2, 2));
  const Vector u{{0.3, -0.2}};
  const auto lin = linearize_process(m, Vector{{2.0, -1.0}}, u, 1);
  EXPECT_LE((lin.fx - f).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((lin.fw - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
  ASSERT_EQ(lin.fa.size(), 1u);
  EXPECT_LE((lin.fa[0] - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((lin.u_tilde - u).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LinearizeProcess, Example1DerivativeAtZero) {
  const auto cfg = default_config(ExampleId::example1);
  const auto m = example1_model(cfg);
  const auto lin = linearize_process(m, Vector::Zero(1), Vector::Constant(1, 8.0), 1);
  EXPECT_DOUBLE_EQ(lin.fx(0, 0), 25.5);
  EXPECT_DOUBLE_EQ(lin.fa[0](0, 0), 1.0);

  const auto f = [](double x) { return 0.5 * x + 25.0 * x / (1.0 + x * x); };
  EXPECT_NEAR(oracle::derivative(f, 0.0), 25.5, 1e-6);
  const auto fd = linearize_process(without_jacobians(m), Vector::Zero(1), Vector::Constant(1, 8.0), 1);
  EXPECT_NEAR(fd.fx(0, 0), 25.5, 1e-6);
  EXPECT_NEAR(fd.fa[0](0, 0), 1.0, 1e-8);
}

TEST(LinearizeProcess, UTildeIdentity) {
  const auto m = example1_model(default_config(ExampleId::example1));
  const Vector x{{1.7}};
  const Vector u{{example1_input(3)}};
  const auto lin = linearize_process(m, x, u, 3);
  EXPECT_EQ(lin.u_tilde, lin.predicted - lin.fx * x);
}

TEST(LinearizeProcess, NonFiniteValueThrows) {
  auto m = example1_model(default_config(ExampleId::example1));
  m.f = [](const Vector&, const Vector&, const Vector&, const std::vector<Vector>&, int) {
    return Vector::Constant(1, std::numeric_limits<double>::quiet_NaN());
  };
  try {
    linearize_process(m, Vector::Zero(1), Vector::Zero(1), 4);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.step(), 4);
  }
  EXPECT_THROW(linearize_process(m, Vector::Zero(2), Vector::Zero(1), 1), DimensionError);
}

TEST(LinearizeMeasurement, LinearHasZeroOffset) {
  const Matrix h{{1.0, 2.0}, {0.0, -1.0}};
  const auto m = linear_model(Matrix::Identity(2, 2), h);
  const auto lin = linearize_measurement(m, Vector{{3.0, 4.0}}, 1);
  EXPECT_LE(lin.z_tilde.cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((lin.hx - h).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((lin.hv - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((lin.hb - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LinearizeMeasurement, Example1AtTwo) {
  const auto m = example1_model(default_config(ExampleId::example1));
  const auto lin = linearize_measurement(m, Vector::Constant(1, 2.0), 1);
  EXPECT_DOUBLE_EQ(lin.hx(0, 0), 0.2);
  EXPECT_NEAR(lin.z_tilde(0), -0.2, 1e-15);

  const auto h = [](double x) { return x * x / 20.0; };
  EXPECT_NEAR(oracle::derivative(h, 2.0), 0.2, 1e-9);
  EXPECT_NEAR(h(2.0) - 0.2 * 2.0, -0.2, 1e-15);
  const auto fd = linearize_measurement(without_jacobians(m), Vector::Constant(1, 2.0), 1);
  EXPECT_NEAR(fd.hx(0, 0), 0.2, 1e-8);
}

TEST(LinearizeMeasurement, RangeGradientAlongAxis) {
  const Vector origin = Vector::Zero(2);
  const Vector far{{0.0, 500.0}};
  const Matrix j = range_bearing_jacobian(Vector{{100.0, 0.0, 0.0, 0.0}}, origin, far);
  EXPECT_DOUBLE_EQ(j(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(j(0, 1), 0.0);
}

TEST(Jacobians, AnalyticMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> x1(-20.0, 20.0);
  const auto c1 = default_config(ExampleId::example1);
  const auto m1 = example1_model(c1);
  const auto fd1 = without_jacobians(m1);
  const auto c2 = default_config(ExampleId::example2);
  const auto m2 = example2_model(c2);
  const auto fd2 = without_jacobians(m2);
  std::uniform_real_distribution<double> pos(-200.0, 300.0);
  std::uniform_real_distribution<double> vel(-5.0, 5.0);

  const auto rel = [](const Matrix& a, const Matrix& b) {
    return (a - b).norm() / std::max(1e-12, a.norm());
  };
  for (int i = 0; i < 100; ++i) {
    const Vector x{{x1(rng)}};
    const Vector u{{example1_input(i + 1)}};
    EXPECT_LE(rel(linearize_process(m1, x, u, i).fx, linearize_process(fd1, x, u, i).fx), 1e-5);
    EXPECT_LE(rel(linearize_measurement(m1, x, i).hx, linearize_measurement(fd1, x, i).hx), 1e-5);

    const Vector s{{pos(rng), pos(rng), vel(rng), vel(rng)}};
    EXPECT_LE(rel(linearize_process(m2, s, Vector{}, i).fx, linearize_process(fd2, s, Vector{}, i).fx), 1e-5);
    EXPECT_LE(rel(linearize_measurement(m2, s, i).hx, linearize_measurement(fd2, s, i).hx), 1e-5);
  }
}

TEST(Jacobians, FirstOrderErrorIsQuadratic) {
  const auto m = example1_model(default_config(ExampleId::example1));
  const Vector center{{0.7}};
  const Vector u{{1.0}};
  const auto lin = linearize_process(m, center, u, 1);
  const std::vector<Vector> a0{Vector::Zero(1)};
  const auto err = [&](double dx) {
    const Vector x = center + Vector::Constant(1, dx);
    return (m.f(x, u, Vector::Zero(1), a0, 1) - (lin.fx * x + lin.u_tilde)).norm();
  };
  for (double dx : {0.1, 0.05, 0.02}) EXPECT_GE(err(dx) / err(dx / 2.0), 3.5);
}
