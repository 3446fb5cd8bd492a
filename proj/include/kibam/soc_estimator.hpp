#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kibam/errors.hpp"
#include "kibam/load_profile.hpp"

namespace kibam::soc {

KIBAM_DECLARE_ERROR(NonpositiveT, InvalidArgument);
KIBAM_DECLARE_ERROR(FitDiverged, Error);
KIBAM_DECLARE_ERROR(XAtPole, InvalidArgument);
KIBAM_DECLARE_ERROR(NegativeDiscriminant, Error);
KIBAM_DECLARE_ERROR(NoConvergence, Error);
KIBAM_DECLARE_ERROR(InsufficientSamples, Error);

/// Capacity model constants in hours / ampere-hours.
struct CapacityParams {
  double C = 1.372;     ///< Ah
  double k = 0.1967;    ///< per hour
  double c = 0.387;

  double k_prime() const { return k / (c * (1.0 - c)); }
  void validate() const;
  static CapacityParams from_k_prime(double C, double k_prime, double c) { return {C, k_prime * c * (1.0 - c), c}; }
  /// The 6 V lead-acid pack used throughout the estimator tests.
  static CapacityParams lead_acid() { return {}; }
};

/// V = V_EMF + A X + B X / (D - X), X the consumed fraction of qmax.
struct VoltageParams {
  double v_emf = 6.5;
  double A = -0.194;
  double B = -2.22e-3;
  double D = 1.05;

  void validate() const;
  static VoltageParams lead_acid() { return {}; }
};

inline constexpr double kLeadAcidInternalResistance = 0.34;  ///< ohms

/// Charge delivered before death when discharging at constant current for T
/// hours: C k' c T / (1 - e^{-k'T} + c (k'T - 1 + e^{-k'T})). Throws
/// NonpositiveT.
double qmax(const CapacityParams& p, double T);

/// Drain time T at constant current I, solving qmax(T) = I T. Infinite for
/// I = 0.
double drain_time(const CapacityParams& p, double current);

/// qmax at constant current I (C when I = 0).
double qmax_at_current(const CapacityParams& p, double current);

struct CapacityRecord {
  double current = 0.0;  ///< A
  double hours = 0.0;    ///< time to exhaustion at that current
};

struct FitOptions {
  double max_relative_rms = 0.05;  ///< residual RMS / mean(I T) above this diverges
  int max_iterations = 20000;
  int restarts = 3;
};

struct FitResult {
  CapacityParams params;
  double residual = 0.0;  ///< sum of squared charge residuals (Ah^2)
  double relative_rms = 0.0;
  int iterations = 0;
};

/// Least squares over (C, k', c) by Nelder-Mead from C = 1.2 max(I T),
/// c = 0.3, k' = 1.0, searched in log / logit coordinates. Needs >= 3
/// records with >= 3 distinct currents. Throws FitDiverged.
FitResult fit_capacity(std::span<const CapacityRecord> records, const FitOptions& options = {});

/// Throws XAtPole for X >= D, InvalidArgument for X < 0.
double voltage_of(const VoltageParams& vp, double X);

/// Smaller root X of A X^2 - (A D + B + V) X + D V = 0 for V = V_adj.
/// Throws NegativeDiscriminant.
double invert_voltage(const VoltageParams& vp, double v_adj);

/// Nominal discharge time T solving
/// (1 - c) + (c - 1) e^{-k'T} + c k' (1 - C X / Q) T = 0 by Newton from 4 h,
/// safeguarded by bisection. Throws NoConvergence when no positive root
/// exists or iteration fails.
double solve_t_nom(const CapacityParams& cp, double X, double Q);

struct SensorSample {
  double t = 0.0;  ///< hours
  double voltage = 0.0;
  double current = 0.0;
};

struct EstimatorConfig {
  std::size_t window = 65;
  double r_int = kLeadAcidInternalResistance;
  double knee = 0.98;  ///< X above this is flagged low confidence
  double loaded_threshold = 1e-6;  ///< amperes
  /// Fix V_EMF from the first full loaded window instead of VoltageParams.
  bool v_emf_from_first_window = false;
};

struct SocEstimate {
  double t = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  double available = 0.0;
  double X = 0.0;
  bool fallback = false;
  bool low_confidence = false;
};

/// Rolling voltage/current estimator for one battery.
class SocEstimator {
 public:
  SocEstimator(CapacityParams cp, VoltageParams vp, EstimatorConfig config = {});

  SocEstimate push(const SensorSample& sample);
  double charge_consumed() const { return q_; }
  std::size_t loaded_run() const { return loaded_run_; }

 private:
  CapacityParams cp_;
  VoltageParams vp_;
  EstimatorConfig config_;
  struct Entry {
    double voltage, current, charge;
  };
  std::deque<Entry> window_;
  double sum_v_ = 0.0, sum_i_ = 0.0, sum_q_ = 0.0;
  std::optional<SensorSample> last_;
  double q_ = 0.0;
  std::size_t loaded_run_ = 0;
  std::optional<double> v_emf_;
  std::optional<double> good_delta_;
  double good_delta_time_ = 0.0;
};

/// Runs an estimator over `samples` and returns the final estimate. Throws
/// InsufficientSamples unless the trace ends with a full loaded window.
SocEstimate estimate_state(std::span<const SensorSample> samples, const CapacityParams& cp, const VoltageParams& vp,
                           double r_int = kLeadAcidInternalResistance);

struct TruthSample {
  double gamma = 0.0;
  double delta = 0.0;
  double available = 0.0;
  double X = 0.0;
};

struct SensorTrace {
  std::vector<SensorSample> samples;
  std::vector<TruthSample> truth;

  /// `t_seconds,E_obs_volts,I_obs_amperes`.
  std::string to_csv() const;
};

/// Simulated sensor: exact KiBaM in hours, X = Q / qmax(I), terminal
/// voltage voltage_of(X) - R_int I plus seeded Gaussian noise. Profile
/// durations are read as hours. Stops at the profile end (`horizon_hours`
/// for repeating profiles) or when the battery dies.
SensorTrace simulate_sensor_trace(const CapacityParams& cp, const VoltageParams& vp, double r_int,
                                  const LoadProfile& profile, double noise_sigma, double sample_period_seconds,
                                  std::uint64_t seed, double horizon_hours = 0.0);

/// `t,gamma,delta,available,fallback` rows.
std::string estimates_csv(std::span<const SocEstimate> estimates);

}  // namespace kibam::soc
