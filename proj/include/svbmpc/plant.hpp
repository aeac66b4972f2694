// Ground-truth PEMFC cooling-loop simulator.
//
// Three thermal stages share one coolant stream: the stack heats the coolant,
// the radiator rejects heat to ambient, and the tank buffers the cooled
// stream before it re-enters the stack. States (Kelvin):
//   x1 = T_w,tank   tank temperature (feeds the stack)
//   x2 = T_w,in     radiator outlet / tank inlet temperature
//   x3 = T_w,out    stack outlet temperature (feeds the radiator)
// Inputs: u1 = W_w coolant mass flow (kg/s), u2 = W_a radiator air mass flow.
//
// Component heat balances, with c_w the specific heat and Q_gen the stack
// heat production:
//   stack:    dx3/dt = -(u1/m_st)  (x3 - x1) + Q_gen/(m_st c_w)
//   radiator: dx2/dt =  (u1/m_rad) (x3 - x2 - dT),
//             dT = A_rad (x3 - T_amb) h_rad(u2) / (c_w u1)
//   tank:     dx1/dt =  (u1/m_tank)(x2 - x1)
// The radiator coefficient h_rad is the quadratic fan correlation
//   h_rad(W_a) = -1.4495 W_a^2 + 5.9045 W_a - 0.1147.
//
// At steady state the stack lift equals the radiator drop,
// Q_gen = c_w u1 (x3 - x1), which puts the default reference pair
// (336.15, 343.15) K at u1 ~ 1.024 kg/s, u2 = 1 for the default parameters.

#ifndef SVBMPC_PLANT_HPP
#define SVBMPC_PLANT_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string_view>
#include <utility>

#include "svbmpc/numerics.hpp"
#include "svbmpc/rng.hpp"

namespace svbmpc {

struct PlantParams {
  double m_st = 2.0;      // coolant mass inside the stack (kg)
  double m_tank = 5.0;    // tank coolant mass (kg)
  double m_rad = 1.0;     // radiator piping coolant mass (kg)
  double A_rad = 153.5992;  // effective radiator transfer area (m^2)
  double c_w = 4184.0;    // specific heat of water (J/(kg K))
  double T_amb = 298.15;  // ambient temperature (K)
  double Q_gen = 30000.0;  // stack heat production (W)
  double u1_min = 0.0, u1_max = 60.0;  // W_w bounds (kg/s)
  double u2_min = 0.0, u2_max = 2.0;   // W_a bounds (kg/s)
  // Measurement noise on (x1, x3). noise_param is the variance by default
  // (the N(mean, variance) reading); set noise_is_std to read it as the
  // standard deviation instead.
  double noise_param = 0.7;
  bool noise_is_std = false;
  double guard_lo = 250.0, guard_hi = 450.0;  // plausibility band (K)

  double noise_std() const
  {
    return noise_is_std ? noise_param : std::sqrt(noise_param);
  }

  void validate() const
  {
    if (!(m_st > 0.0 && m_tank > 0.0 && m_rad > 0.0 && A_rad > 0.0 &&
          c_w > 0.0))
      throw std::invalid_argument("PlantParams: masses, area, c_w must be > 0");
    if (!(u1_min <= u1_max && u2_min <= u2_max))
      throw std::invalid_argument("PlantParams: malformed input bounds");
    if (noise_param < 0.0)
      throw std::invalid_argument("PlantParams: negative noise parameter");
  }
};

// Flow floor applied before the 1/W_w division in the radiator drop; the
// model is singular at zero pump flow.
inline constexpr double kFlowFloor = 1e-3;

/// Radiator heat-transfer coefficient as a function of air mass flow.
inline double h_rad(double w_a)
{
  return -1.4495 * w_a * w_a + 5.9045 * w_a - 0.1147;
}

/// Temperature drop across the radiator. Returns 0 at zero coolant flow.
inline double delta_T(double t_hot, double t_amb, double w_w, double w_a,
                      const PlantParams& p)
{
  if (w_w < 0.0)
    throw std::invalid_argument("delta_T: negative coolant flow");
  if (w_w == 0.0) return 0.0;
  return p.A_rad * (t_hot - t_amb) * h_rad(w_a) / (p.c_w * w_w);
}

/// Right-hand side of the three-state cooling loop ODE.
inline Vector dynamics(const Vector& x, const Vector& u, const PlantParams& p)
{
  if (x.size() != 3 || u.size() != 2)
    throw std::invalid_argument("dynamics: expects 3 states, 2 inputs");
  const double u1 = std::max(u(0), kFlowFloor);
  const double u2 = u(1);
  const double dT = delta_T(x(2), p.T_amb, u1, u2, p);
  Vector dx(3);
  dx(0) = (u1 / p.m_tank) * (x(1) - x(0));
  dx(1) = (u1 / p.m_rad) * (x(2) - x(1) - dT);
  dx(2) = -(u1 / p.m_st) * (x(2) - x(0)) + p.Q_gen / (p.m_st * p.c_w);
  if (!dx.allFinite())
    throw std::runtime_error("dynamics: non-finite derivative");
  return dx;
}

/// Steady state of the loop under a fixed input, via Newton.
inline Vector plant_steady_state(const PlantParams& p, const Vector& u,
                                 const Vector& x_guess)
{
  return newton_root([&](const Vector& x) { return dynamics(x, u, p); },
                     x_guess, 1e-9, 200, 1e-4);
}

/**
 * Deterministic plant integrator with measurement noise on (x1, x3).
 * One sample step integrates dt with as many internal RK4 substeps as the
 * fastest flow-induced rate requires (a single step in the nominal regime;
 * W_w near the upper bound would make one 0.1 s RK4 step unstable).
 */
class CoolingPlant {
 public:
  CoolingPlant(PlantParams params, Vector x0, double noise_std,
               std::uint64_t seed, std::string_view noise_stream = "plant-noise")
      : params_(std::move(params)),
        x_(std::move(x0)),
        noise_std_(noise_std),
        rng_(seed, noise_stream)
  {
    params_.validate();
    if (x_.size() != 3)
      throw std::invalid_argument("CoolingPlant: state must have 3 entries");
  }

  struct StepResult {
    Vector x;  // true state after the step
    Vector y;  // measured outputs (x1, x3) + noise
  };

  StepResult step(const Vector& u, double dt)
  {
    if (!(dt > 0.0))
      throw std::invalid_argument("CoolingPlant::step: dt must be positive");
    const int n_sub = substeps(u, dt);
    const double h = dt / n_sub;
    for (int i = 0; i < n_sub; ++i)
      x_ = rk4_step([this](const Vector& x, const Vector& uu)
                        { return dynamics(x, uu, params_); },
                    x_, u, h);
    if (x_.minCoeff() < params_.guard_lo || x_.maxCoeff() > params_.guard_hi)
      ++guard_warnings_;

    StepResult out;
    out.x = x_;
    out.y.resize(2);
    out.y << x_(0) + noise_std_ * (noise_std_ > 0.0 ? rng_.normal() : 0.0),
        x_(2) + noise_std_ * (noise_std_ > 0.0 ? rng_.normal() : 0.0);
    return out;
  }

  const Vector& state() const { return x_; }
  void set_state(const Vector& x) { x_ = x; }
  int guard_warnings() const { return guard_warnings_; }
  const PlantParams& params() const { return params_; }

 private:
  int substeps(const Vector& u, double dt) const
  {
    const double u1 = std::max(u(0), kFlowFloor);
    const double max_rate =
        u1 * std::max({1.0 / params_.m_st, 1.0 / params_.m_tank,
                       1.0 / params_.m_rad});
    return std::max(1, static_cast<int>(std::ceil(dt * max_rate / 0.5)));
  }

  PlantParams params_;
  Vector x_;
  double noise_std_;
  RngStream rng_;
  int guard_warnings_ = 0;
};

}  // namespace svbmpc

#endif  // SVBMPC_PLANT_HPP
