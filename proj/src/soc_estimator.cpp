#include "kibam/soc_estimator.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <memory>
#include <set>

#include "kibam/battery_model.hpp"
#include "kibam/format.hpp"
#include "kibam/rng.hpp"

namespace kibam::soc {

void CapacityParams::validate() const {
  if (!(C > 0.0) || !(k > 0.0) || !(c > 0.0 && c < 1.0) || !std::isfinite(C) || !std::isfinite(k))
    throw InvalidArgument("capacity parameters need C > 0, k > 0, 0 < c < 1");
}

void VoltageParams::validate() const {
  if (!(D > 1.0)) throw InvalidArgument("voltage parameter D must exceed 1");
  if (A == 0.0) throw InvalidArgument("voltage parameter A must be nonzero");
}

double qmax(const CapacityParams& p, double T) {
  if (!(T > 0.0)) throw NonpositiveT("qmax needs T > 0, got " + format_decimal(T));
  const double kp = p.k_prime();
  const double x = kp * T;
  const double em = std::expm1(-x);
  return p.C * kp * p.c * T / (-em + p.c * (x + em));
}

double drain_time(const CapacityParams& p, double current) {
  p.validate();
  if (current < 0.0) throw InvalidArgument("drain_time needs a nonnegative current");
  if (current == 0.0) return std::numeric_limits<double>::infinity();
  auto f = [&](double T) { return qmax(p, T) - current * T; };
  double lo = std::min(1e-9, p.c * p.C / current * 1e-3);
  double hi = p.C / current;
  if (f(hi) >= 0.0) return hi;
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

double qmax_at_current(const CapacityParams& p, double current) {
  if (current == 0.0) return p.C;
  return current * drain_time(p, current);
}

namespace {

struct FitData {
  std::span<const CapacityRecord> records;
};

CapacityParams from_coords(const gsl_vector* u) {
  const double C = std::exp(gsl_vector_get(u, 0));
  const double kp = std::exp(gsl_vector_get(u, 1));
  const double c = 1.0 / (1.0 + std::exp(-gsl_vector_get(u, 2)));
  return CapacityParams::from_k_prime(C, kp, c);
}

double sum_squares(const CapacityParams& p, std::span<const CapacityRecord> records) {
  double s = 0.0;
  for (const auto& r : records) {
    const double e = r.current * r.hours - qmax(p, r.hours);
    s += e * e;
  }
  return s;
}

double objective(const gsl_vector* u, void* data) {
  const auto* d = static_cast<const FitData*>(data);
  const auto p = from_coords(u);
  if (!std::isfinite(p.C) || !std::isfinite(p.k) || !(p.c > 0.0 && p.c < 1.0))
    return std::numeric_limits<double>::max();
  const double s = sum_squares(p, d->records);
  return std::isfinite(s) ? s : std::numeric_limits<double>::max();
}

}  // namespace

FitResult fit_capacity(std::span<const CapacityRecord> records, const FitOptions& options) {
  std::set<double> currents;
  double max_charge = 0.0;
  double mean_charge = 0.0;
  for (const auto& r : records) {
    if (!(r.current > 0.0) || !(r.hours > 0.0)) throw InvalidArgument("capacity records need I > 0 and T > 0");
    currents.insert(r.current);
    max_charge = std::max(max_charge, r.current * r.hours);
    mean_charge += r.current * r.hours;
  }
  if (records.size() < 3 || currents.size() < 3)
    throw InvalidArgument("fit_capacity needs at least 3 records with distinct currents");
  mean_charge /= static_cast<double>(records.size());

  gsl_set_error_handler_off();
  FitData data{records};
  gsl_multimin_function fn{&objective, 3, &data};
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(3), &gsl_vector_free);
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> step(gsl_vector_alloc(3), &gsl_vector_free);
  std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> solver(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3), &gsl_multimin_fminimizer_free);
  gsl_vector_set(x.get(), 0, std::log(1.2 * max_charge));
  gsl_vector_set(x.get(), 1, std::log(1.0));
  gsl_vector_set(x.get(), 2, std::log(0.3 / 0.7));

  FitResult result;
  for (int round = 0; round <= options.restarts; ++round) {
    gsl_vector_set_all(step.get(), round == 0 ? 0.5 : 0.05);
    gsl_multimin_fminimizer_set(solver.get(), &fn, x.get(), step.get());
    for (int it = 0; it < options.max_iterations; ++it) {
      ++result.iterations;
      if (gsl_multimin_fminimizer_iterate(solver.get()) != GSL_SUCCESS) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver.get()), 1e-13) == GSL_SUCCESS) break;
    }
    gsl_vector_memcpy(x.get(), gsl_multimin_fminimizer_x(solver.get()));
  }
  result.params = from_coords(x.get());
  result.residual = sum_squares(result.params, records);
  result.relative_rms = std::sqrt(result.residual / static_cast<double>(records.size())) / mean_charge;
  if (!std::isfinite(result.residual) || !(result.relative_rms <= options.max_relative_rms) ||
      !(result.params.C < 1e6 * max_charge) || !(result.params.k_prime() < 1e6))
    throw FitDiverged("capacity fit diverged (relative RMS residual " + format_decimal(result.relative_rms) + ")");
  return result;
}

double voltage_of(const VoltageParams& vp, double X) {
  if (X < 0.0) throw InvalidArgument("consumed fraction X must be >= 0");
  if (X >= vp.D) throw XAtPole("X=" + format_decimal(X) + " reaches the voltage pole at D=" + format_decimal(vp.D));
  return vp.v_emf + vp.A * X + vp.B * X / (vp.D - X);
}

double invert_voltage(const VoltageParams& vp, double v_adj) {
  const double F = (vp.B + vp.A * vp.D + v_adj) / (2.0 * vp.A);
  const double p = vp.D * v_adj / vp.A;  // product of the roots
  const double disc = F * F - p;
  if (disc < 0.0) throw NegativeDiscriminant("voltage reading " + format_decimal(v_adj) + " V has no consumed fraction");
  const double s = std::sqrt(disc);
  // F - s written without cancellation.
  if (F > 0.0) return p / (F + s);
  return F - s;
}

double solve_t_nom(const CapacityParams& cp, double X, double Q) {
  if (!(Q > 0.0) || !(X > 0.0)) throw NoConvergence("solve_t_nom needs Q > 0 and X > 0");
  const double kp = cp.k_prime();
  const double c = cp.c;
  const double r = cp.C * X / Q;
  if (!(r > 1.0) || !(c * r < 1.0)) throw NoConvergence("no positive nominal time for C X / Q = " + format_decimal(r));
  auto g = [&](double T) { return (1.0 - c) + (c - 1.0) * std::exp(-kp * T) + c * kp * (1.0 - r) * T; };
  auto dg = [&](double T) { return (1.0 - c) * kp * std::exp(-kp * T) + c * kp * (1.0 - r); };
  // g(0) = 0 and g is concave: the positive root lies beyond the maximum.
  double lo = -std::log(c * (r - 1.0) / (1.0 - c)) / kp;
  double hi = std::max(2.0 * lo, 1.0);
  for (int i = 0; g(hi) > 0.0; ++i) {
    if (i > 200) throw NoConvergence("could not bracket the nominal time");
    lo = hi;
    hi *= 2.0;
  }
  double T = 4.0;
  for (int it = 0; it < 100; ++it) {
    if (!(T > lo && T < hi)) T = 0.5 * (lo + hi);
    const double v = g(T);
    (v > 0.0 ? lo : hi) = T;
    const double slope = dg(T);
    double next = slope != 0.0 ? T - v / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - T) <= 1e-10 * std::max(1.0, T)) return next;
    T = next;
  }
  throw NoConvergence("nominal time iteration did not converge");
}

SocEstimator::SocEstimator(CapacityParams cp, VoltageParams vp, EstimatorConfig config)
    : cp_(cp), vp_(vp), config_(config) {
  cp_.validate();
  vp_.validate();
  if (config_.window == 0) throw InvalidArgument("window must be positive");
}

SocEstimate SocEstimator::push(const SensorSample& sample) {
  if (last_) {
    if (sample.t < last_->t) throw InvalidArgument("sensor samples must be time-ordered");
    q_ += 0.5 * (last_->current + sample.current) * (sample.t - last_->t);
  }
  last_ = sample;
  const double kp = cp_.k_prime();
  SocEstimate est;
  est.t = sample.t;
  est.gamma = cp_.C - q_;

  auto finish = [&](double delta, bool fallback) {
    est.delta = delta;
    est.available = std::min(cp_.c * (est.gamma - (1.0 - cp_.c) * delta), cp_.c * cp_.C);
    est.fallback = fallback;
    est.low_confidence = est.X > config_.knee;
    return est;
  };
  auto last_good = [&] { return good_delta_.value_or(0.0); };

  if (!(sample.current > config_.loaded_threshold)) {
    loaded_run_ = 0;
    window_.clear();
    sum_v_ = sum_i_ = sum_q_ = 0.0;
    est.X = q_ / cp_.C;
    if (!good_delta_) return finish(0.0, false);
    return finish(*good_delta_ * std::exp(-kp * (sample.t - good_delta_time_)), false);
  }

  ++loaded_run_;
  window_.push_back({sample.voltage, sample.current, q_});
  sum_v_ += sample.voltage;
  sum_i_ += sample.current;
  sum_q_ += q_;
  if (window_.size() > config_.window) {
    sum_v_ -= window_.front().voltage;
    sum_i_ -= window_.front().current;
    sum_q_ -= window_.front().charge;
    window_.pop_front();
  }
  if (window_.size() < config_.window) return finish(last_good(), true);

  const double n = static_cast<double>(window_.size());
  const double v_obs = sum_v_ / n + config_.r_int * (sum_i_ / n);
  const double q_mean = sum_q_ / n;
  if (config_.v_emf_from_first_window && !v_emf_) v_emf_ = v_obs;
  const double v_adj = v_obs - v_emf_.value_or(vp_.v_emf);
  try {
    const double X = invert_voltage(vp_, v_adj);
    est.X = X;
    if (!(X > 0.0 && X < 1.0)) return finish(last_good(), true);
    const double qm = q_mean / X;
    if (!(qm > cp_.c * cp_.C && qm < cp_.C)) return finish(last_good(), true);
    const double T = solve_t_nom(cp_, X, q_mean);
    const double i_nom = qm / T;
    // Elapsed nominal time Q / I_nom = X T.
    const double delta = i_nom * (-std::expm1(-kp * X * T)) / (cp_.c * kp);
    if (cp_.c * (est.gamma - (1.0 - cp_.c) * delta) < 0.0) return finish(last_good(), true);
    good_delta_ = delta;
    good_delta_time_ = sample.t;
    return finish(delta, false);
  } catch (const Error&) {
    return finish(last_good(), true);
  }
}

SocEstimate estimate_state(std::span<const SensorSample> samples, const CapacityParams& cp, const VoltageParams& vp,
                           double r_int) {
  EstimatorConfig config;
  config.r_int = r_int;
  SocEstimator est(cp, vp, config);
  SocEstimate last;
  for (const auto& s : samples) last = est.push(s);
  if (est.loaded_run() < config.window)
    throw InsufficientSamples("need " + std::to_string(config.window) + " loaded samples, have " +
                              std::to_string(est.loaded_run()));
  return last;
}

std::string SensorTrace::to_csv() const {
  std::string out = "t_seconds,E_obs_volts,I_obs_amperes\n";
  for (const auto& s : samples)
    out += format_decimal(s.t * 3600.0) + "," + format_decimal(s.voltage) + "," + format_decimal(s.current) + "\n";
  return out;
}

SensorTrace simulate_sensor_trace(const CapacityParams& cp, const VoltageParams& vp, double r_int,
                                  const LoadProfile& profile, double noise_sigma, double sample_period_seconds,
                                  std::uint64_t seed, double horizon_hours) {
  cp.validate();
  vp.validate();
  if (!(sample_period_seconds > 0.0)) throw InvalidArgument("sample period must be positive");
  if (noise_sigma < 0.0) throw InvalidArgument("noise sigma must be >= 0");
  double end = profile.end();
  if (horizon_hours > 0.0) end = std::min(end, horizon_hours);
  if (!std::isfinite(end)) throw InvalidArgument("a repeating profile needs a horizon");

  const BatteryParams bp{cp.C, cp.c, cp.k_prime()};
  BatteryState state = BatteryState::fresh(bp);
  SplitMix64 rng(seed);
  SensorTrace trace;
  const double dt = sample_period_seconds / 3600.0;
  double t = 0.0;
  double q = 0.0;
  double cached_current = -1.0;
  double cached_qmax = 0.0;
  for (std::size_t k = 0;; ++k) {
    const double tk = static_cast<double>(k) * dt;
    if (tk >= end - LoadProfile::kBoundaryEps) break;
    bool died = false;
    while (t < tk - 1e-15) {
      const auto span = profile.span_at(t);
      const double len = std::min(span.end, tk) - t;
      if (span.current > 0.0) {
        const auto ttd = time_to_death(state, bp, span.current);
        if (ttd && *ttd < len) {
          died = true;
          break;
        }
      }
      state = evolve(state, bp, span.current, len);
      q += span.current * len;
      t += len;
    }
    if (died || !is_alive(state, bp)) break;
    const double current = profile.current_at(tk);
    if (current != cached_current) {
      cached_current = current;
      cached_qmax = qmax_at_current(cp, current);
    }
    const double X = q / cached_qmax;
    if (X >= vp.D) break;
    const double noise = noise_sigma > 0.0 ? noise_sigma * rng.next_normal() : 0.0;
    trace.samples.push_back({tk, voltage_of(vp, X) - r_int * current + noise, current});
    trace.truth.push_back({state.gamma, state.delta, available_charge(state, bp), X});
  }
  return trace;
}

std::string estimates_csv(std::span<const SocEstimate> estimates) {
  std::string out = "t,gamma,delta,available,fallback\n";
  for (const auto& e : estimates)
    out += format_decimal(e.t) + "," + format_decimal(e.gamma) + "," + format_decimal(e.delta) + "," +
           format_decimal(e.available) + "," + (e.fallback ? "1" : "0") + "\n";
  return out;
}

}  // namespace kibam::soc
