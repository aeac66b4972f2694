#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "svbmpc/plant.hpp"

using namespace svbmpc;

namespace {

Vector state(double x1, double x2, double x3)
{
  Vector x(3);
  x << x1, x2, x3;
  return x;
}

Vector input(double u1, double u2)
{
  Vector u(2);
  u << u1, u2;
  return u;
}

}  // namespace

TEST_CASE("h_rad polynomial values")
{
  CHECK(h_rad(0.0) == Catch::Approx(-0.1147).margin(1e-12));
  CHECK(h_rad(1.0) == Catch::Approx(4.3403).margin(1e-12));
  // -1.4495*4 + 5.9045*2 - 0.1147
  CHECK(h_rad(2.0) == Catch::Approx(5.8963).margin(1e-10));
}

TEST_CASE("delta_T behavior")
{
  PlantParams p;
  CHECK(delta_T(p.T_amb, p.T_amb, 1.0, 1.0, p) == 0.0);

  const double base = delta_T(340.0, p.T_amb, 1.0, 1.0, p);
  const double halved = delta_T(340.0, p.T_amb, 2.0, 1.0, p);
  CHECK(halved == Catch::Approx(0.5 * base).epsilon(1e-12));

  PlantParams unit = p;
  unit.A_rad = 1.0;
  const double dt40 = delta_T(p.T_amb + 40.0, p.T_amb, 1.0, 1.0, unit);
  CHECK(dt40 == Catch::Approx(40.0 * 4.3403 / 4184.0).epsilon(1e-10));
  CHECK(dt40 == Catch::Approx(0.04150).margin(5e-5));

  CHECK(delta_T(340.0, p.T_amb, 0.0, 1.0, p) == 0.0);
  CHECK_THROWS_AS(delta_T(340.0, p.T_amb, -1.0, 1.0, p),
                  std::invalid_argument);
}

TEST_CASE("dynamics equilibrium and sign structure")
{
  PlantParams p;
  {
    // Uniform ambient temperature with no heat load is an equilibrium.
    PlantParams cold = p;
    cold.Q_gen = 0.0;
    const Vector dx =
        dynamics(state(p.T_amb, p.T_amb, p.T_amb), input(1.0, 1.0), cold);
    CHECK(dx.cwiseAbs().maxCoeff() < 1e-12);
  }
  {
    // Heat load with little flow pushes the stack outlet up.
    const Vector dx =
        dynamics(state(330.0, 330.0, 330.0), input(0.01, 0.5), p);
    CHECK(dx(2) > 0.0);
  }
}

TEST_CASE("newton steady state zeroes the dynamics and books the energy")
{
  PlantParams p;
  const Vector u = input(1.0243, 1.0);
  const Vector ss =
      plant_steady_state(p, u, state(336.0, 336.0, 343.0));
  CHECK(dynamics(ss, u, p).cwiseAbs().maxCoeff() < 1e-8);
  // Heat in equals heat out: Q = c_w W_w (x3 - x2) at the equilibrium.
  const double q_out = p.c_w * u(0) * (ss(2) - ss(1));
  CHECK(q_out == Catch::Approx(p.Q_gen).epsilon(1e-6));
}

TEST_CASE("reference pair is an interior equilibrium of the default plant")
{
  PlantParams p;
  const double u1 = p.Q_gen / (p.c_w * 7.0);
  const Vector u = input(u1, 1.0);
  const Vector ss = plant_steady_state(p, u, state(336.15, 336.15, 343.15));
  CHECK(ss(0) == Catch::Approx(336.15).margin(2e-3));
  CHECK(ss(2) == Catch::Approx(343.15).margin(2e-3));
  CHECK(u1 > p.u1_min);
  CHECK(u1 < p.u1_max);
}

TEST_CASE("monotone cooling: more air flow never heats the outlet")
{
  PlantParams p;
  double prev = std::numeric_limits<double>::infinity();
  Vector guess = state(400.0, 395.0, 405.0);
  for (double w_a = 0.2; w_a <= 2.0 + 1e-9; w_a += 0.2) {
    const Vector ss = plant_steady_state(p, input(1.0, w_a), guess);
    CHECK(ss(2) <= prev + 1e-9);
    prev = ss(2);
    guess = ss;
  }
}

TEST_CASE("integration order: one sample step vs fine substepping")
{
  PlantParams p;
  const Vector u = input(1.0, 1.0);
  CoolingPlant coarse(p, state(330.0, 328.0, 338.0), 0.0, 1);
  CoolingPlant fine(p, state(330.0, 328.0, 338.0), 0.0, 1);
  coarse.step(u, 0.1);
  for (int i = 0; i < 10; ++i) fine.step(u, 0.01);
  CHECK((coarse.state() - fine.state()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("step is stable at the pump-flow bound")
{
  PlantParams p;
  CoolingPlant plant(p, state(336.0, 336.0, 343.0), 0.0, 1);
  for (int i = 0; i < 50; ++i) plant.step(input(60.0, 2.0), 0.1);
  CHECK(plant.state().allFinite());
  CHECK(plant.state().maxCoeff() < 450.0);
}

TEST_CASE("measurement noise is seeded and optional")
{
  PlantParams p;
  {
    CoolingPlant a(p, state(336.0, 336.0, 343.0), 0.0, 7);
    const auto r = a.step(input(1.0, 1.0), 0.1);
    CHECK(r.y(0) == r.x(0));
    CHECK(r.y(1) == r.x(2));
  }
  {
    CoolingPlant a(p, state(336.0, 336.0, 343.0), 0.8367, 7);
    CoolingPlant b(p, state(336.0, 336.0, 343.0), 0.8367, 7);
    for (int i = 0; i < 5; ++i) {
      const auto ra = a.step(input(1.0, 1.0), 0.1);
      const auto rb = b.step(input(1.0, 1.0), 0.1);
      CHECK(ra.y(0) == rb.y(0));
      CHECK(ra.y(1) == rb.y(1));
    }
  }
}

TEST_CASE("noise parameter reading: variance by default, std on request")
{
  PlantParams p;
  CHECK(p.noise_std() == Catch::Approx(std::sqrt(0.7)).margin(1e-12));
  p.noise_is_std = true;
  CHECK(p.noise_std() == Catch::Approx(0.7).margin(1e-12));
}

TEST_CASE("plausibility guard counts excursions")
{
  PlantParams p;
  p.Q_gen = 3e6;  // absurd load heats the loop out of the plausible band
  CoolingPlant plant(p, state(336.0, 336.0, 343.0), 0.0, 7);
  for (int i = 0; i < 200; ++i) plant.step(input(0.5, 1.0), 0.1);
  CHECK(plant.guard_warnings() > 0);
}
