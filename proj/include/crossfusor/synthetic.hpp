#pragma once

// Synthetic three-vehicle platoons: a scripted leader followed by two
// Intelligent Driver Model vehicles, integrated at 10 Hz with sub-stepping.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "crossfusor/errors.hpp"
#include "crossfusor/platoon_data.hpp"
#include "crossfusor/random.hpp"

namespace crossfusor::data {

enum class Scenario { steady, brake, oscillate };

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::steady: return "steady";
    case Scenario::brake: return "brake";
    case Scenario::oscillate: return "oscillate";
  }
  return "steady";
}

inline Scenario parse_scenario(const std::string& s) {
  if (s == "steady") return Scenario::steady;
  if (s == "brake") return Scenario::brake;
  if (s == "oscillate") return Scenario::oscillate;
  fail(ErrorKind::config, "unknown scenario '" + s + "' (expected steady|brake|oscillate)");
}

/// IDM parameters in feet and seconds.
struct IdmParams {
  double desired_speed = 65.0;   // v0, ft/s
  double time_headway = 1.5;     // T, s
  double min_gap = 6.5;          // s0, ft
  double max_accel = 3.3;        // a, ft/s^2
  double comfort_decel = 5.0;    // b, ft/s^2
  double exponent = 4.0;         // delta
  double vehicle_length = 15.0;  // ft, front-to-front gap minus this is the bumper gap
};

inline double idm_acceleration(const IdmParams& p, double speed, double leader_speed, double bumper_gap) {
  const double dv = speed - leader_speed;
  const double s_star =
      p.min_gap + std::max(0.0, speed * p.time_headway + speed * dv / (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
  const double free_term = std::pow(speed / p.desired_speed, p.exponent);
  const double gap = std::max(bumper_gap, 1e-3);
  return p.max_accel * (1.0 - free_term - (s_star / gap) * (s_star / gap));
}

/// Bumper gap at which an IDM vehicle cruising at `speed` behind an equal-speed leader has zero acceleration.
inline double idm_equilibrium_gap(const IdmParams& p, double speed) {
  const double free_term = std::pow(speed / p.desired_speed, p.exponent);
  require(free_term < 1.0, ErrorKind::invalid_argument, "equilibrium undefined at or above desired speed");
  return (p.min_gap + speed * p.time_headway) / std::sqrt(1.0 - free_term);
}

struct SynthConfig {
  int frames = kDefaultPlatoonFrames;
  int substeps = 10;
  IdmParams idm;
  bool heterogeneous_drivers = true;  // +-10% jitter on v0 and T per driver
  int max_attempts = 10;
};

namespace detail {

struct LeaderProfile {
  Scenario scenario = Scenario::steady;
  double cruise = 45.0;
  // brake
  double brake_start = 5.0, brake_decel = 6.0, low_speed = 20.0, hold = 3.0, recover_accel = 3.0;
  // oscillate
  double amplitude = 8.0, period = 12.0, phase = 0.0;

  double speed(double t) const {
    switch (scenario) {
      case Scenario::steady: return cruise;
      case Scenario::oscillate:
        return cruise + amplitude * std::sin(2.0 * std::numbers::pi * t / period + phase);
      case Scenario::brake: {
        if (t < brake_start) return cruise;
        const double decel_time = (cruise - low_speed) / brake_decel;
        if (t < brake_start + decel_time) return cruise - brake_decel * (t - brake_start);
        const double hold_end = brake_start + decel_time + hold;
        if (t < hold_end) return low_speed;
        return std::min(cruise, low_speed + recover_accel * (t - hold_end));
      }
    }
    return cruise;
  }
};

inline LeaderProfile draw_profile(Scenario scenario, Rng& rng, double duration) {
  LeaderProfile p;
  p.scenario = scenario;
  p.cruise = uniform(rng, 35.0, 55.0);
  if (scenario == Scenario::brake) {
    p.brake_start = uniform(rng, 1.0, 0.6 * duration);
    p.brake_decel = uniform(rng, 4.0, 10.0);
    p.low_speed = p.cruise * uniform(rng, 0.3, 0.7);
    p.hold = uniform(rng, 1.0, 5.0);
    p.recover_accel = uniform(rng, 2.0, 4.0);
  } else if (scenario == Scenario::oscillate) {
    p.amplitude = uniform(rng, 5.0, 12.0);
    p.period = uniform(rng, 8.0, 20.0);
    p.phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    // Peak speed stays under every jittered driver's desired speed (>= 0.9 * 65 ft/s).
    p.cruise = std::min(p.cruise, 55.0 - p.amplitude);
  }
  return p;
}

struct SimState {
  double x = 0.0;
  double v = 0.0;
};

}  // namespace detail

/// Simulates one platoon; returns false if any bumper gap closes.
inline bool simulate_platoon(const detail::LeaderProfile& leader, const IdmParams& stu_idm, const IdmParams& fol_idm,
                             double spacing_factor, const SynthConfig& cfg, Platoon& out) {
  const double dt = 1.0 / kFrameRateHz;
  const double h = dt / cfg.substeps;
  const double v_init = leader.speed(0.0);

  detail::SimState lea{0.0, v_init};
  detail::SimState stu{lea.x - stu_idm.vehicle_length - spacing_factor * idm_equilibrium_gap(stu_idm, v_init), v_init};
  detail::SimState fol{stu.x - fol_idm.vehicle_length - spacing_factor * idm_equilibrium_gap(fol_idm, v_init), v_init};

  // Positions are offset so the follower starts near a plausible roadway coordinate.
  const double origin = 500.0;
  auto record = [&](VehicleTrack& track, const detail::SimState& s) {
    track.position.push_back(origin + s.x);
    track.speed.push_back(s.v);
  };
  out.leader.position.clear();
  out.leader.speed.clear();
  out.study.position.clear();
  out.study.speed.clear();
  out.follower.position.clear();
  out.follower.speed.clear();

  auto advance = [h](detail::SimState& s, double accel) {
    const double v_new = std::max(0.0, s.v + accel * h);
    s.x += 0.5 * (s.v + v_new) * h;
    s.v = v_new;
  };

  for (int frame = 0; frame < cfg.frames; ++frame) {
    record(out.leader, lea);
    record(out.study, stu);
    record(out.follower, fol);
    if (lea.x - stu.x - stu_idm.vehicle_length <= 0.0 || stu.x - fol.x - fol_idm.vehicle_length <= 0.0) return false;
    for (int s = 0; s < cfg.substeps; ++s) {
      const double t = frame * dt + s * h;
      const double a_stu = idm_acceleration(stu_idm, stu.v, lea.v, lea.x - stu.x - stu_idm.vehicle_length);
      const double a_fol = idm_acceleration(fol_idm, fol.v, stu.v, stu.x - fol.x - fol_idm.vehicle_length);
      const double v_lea_next = std::max(0.0, leader.speed(t + h));
      lea.x += 0.5 * (lea.v + v_lea_next) * h;
      lea.v = v_lea_next;
      advance(stu, a_stu);
      advance(fol, a_fol);
    }
  }
  return true;
}

/// `n_platoons` synthetic platoons, a pure function of (n, seed, scenario).
inline std::vector<Platoon> generate_synthetic(int n_platoons, std::uint64_t seed, Scenario scenario,
                                               const SynthConfig& cfg = {}) {
  require(n_platoons >= 1, ErrorKind::invalid_argument, "n_platoons must be >= 1");
  std::vector<Platoon> platoons;
  platoons.reserve(static_cast<std::size_t>(n_platoons));
  const double duration = cfg.frames / kFrameRateHz;
  for (int i = 0; i < n_platoons; ++i) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(i));
    const detail::LeaderProfile profile = detail::draw_profile(scenario, rng, duration);
    IdmParams stu = cfg.idm, fol = cfg.idm;
    if (cfg.heterogeneous_drivers) {
      stu.desired_speed *= uniform(rng, 0.9, 1.1);
      stu.time_headway *= uniform(rng, 0.9, 1.1);
      fol.desired_speed *= uniform(rng, 0.9, 1.1);
      fol.time_headway *= uniform(rng, 0.9, 1.1);
    }
    Platoon p;
    p.platoon_id = i;
    p.lane_id = 1;
    p.start_frame = 1;
    p.leader.vehicle_id = 3 * i + 1;
    p.study.vehicle_id = 3 * i + 2;
    p.follower.vehicle_id = 3 * i + 3;
    bool ok = false;
    for (int attempt = 0; attempt < cfg.max_attempts && !ok; ++attempt) {
      const double spacing = attempt == 0 ? 1.0 : 1.0 + uniform(rng, 0.1, 0.5) * attempt;
      ok = simulate_platoon(profile, stu, fol, spacing, cfg, p);
    }
    require(ok, ErrorKind::data,
            "synthetic platoon " + std::to_string(i) + " collided in all " + std::to_string(cfg.max_attempts) +
                " attempts");
    platoons.push_back(std::move(p));
  }
  return platoons;
}

/// Mix of scenarios, cycling through `scenarios` by platoon index. Platoon ids stay unique.
inline std::vector<Platoon> generate_mixed(int n_platoons, std::uint64_t seed, const std::vector<Scenario>& scenarios,
                                           const SynthConfig& cfg = {}) {
  require(!scenarios.empty(), ErrorKind::invalid_argument, "no scenarios given");
  std::vector<Platoon> out;
  for (int i = 0; i < n_platoons; ++i) {
    const Scenario s = scenarios[static_cast<std::size_t>(i) % scenarios.size()];
    auto one = generate_synthetic(1, derive_seed(seed, static_cast<std::uint64_t>(i)), s, cfg);
    Platoon p = std::move(one.front());
    p.platoon_id = i;
    p.leader.vehicle_id = 3 * i + 1;
    p.study.vehicle_id = 3 * i + 2;
    p.follower.vehicle_id = 3 * i + 3;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace crossfusor::data
