#ifndef FEELSIM_DEVICE_ENERGY_HPP
#define FEELSIM_DEVICE_ENERGY_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace feelsim {

struct DeviceProfile {
  int device_id = 0;
  double cpu_freq_hz = 1e9;          // f_cmp
  double cycles_per_sample = 1e5;    // cycles to process one sample
  double capacitance_alpha = 2e-28;  // applied as alpha/2
  double tx_power_w = 0.5;
  double uplink_bps = 1e6;
  double initial_energy_j = 100.0;
};

struct DeviceState {
  DeviceProfile profile;
  double remaining_energy_j = 0.0;
  bool alive = true;
};

struct RoundCosts {
  double t_cmp_s = 0.0;
  double t_up_s = 0.0;
  double e_cmp_j = 0.0;
  double e_up_j = 0.0;

  double total_time_s() const { return t_cmp_s + t_up_s; }
  double total_energy_j() const { return e_cmp_j + e_up_j; }
};

// epochs * sample_count * cycles_per_sample / cpu_freq
double compute_time(const DeviceProfile& profile, long long sample_count, int epochs);

// (alpha/2) * epochs * cpu_freq^2 * sample_count * cycles_per_sample;
// algebraically identical to (alpha/2) * cpu_freq^3 * compute_time.
double compute_energy(const DeviceProfile& profile, long long sample_count, int epochs);

// model_bits / uplink rate
double upload_time(const DeviceProfile& profile, double model_bits);

// upload_time * tx power
double upload_energy(const DeviceProfile& profile, double model_bits);

RoundCosts round_costs(const DeviceProfile& profile, long long sample_count, int epochs,
                       double model_bits);

// Deadline and battery constraints, both closed (<=).
bool feasible(double remaining_energy_j, const RoundCosts& costs, double deadline_s);
bool feasible(const DeviceState& state, const RoundCosts& costs, double deadline_s);

// Commits a round's energy drain. Overdrafts indicate a selection bug and throw.
DeviceState charge(const DeviceState& state, const RoundCosts& costs);

struct ProfileRanges {
  double cpu_freq_hz_min = 0.5e9;
  double cpu_freq_hz_max = 2.0e9;
  double cycles_per_sample_min = 1e5;
  double cycles_per_sample_max = 1e6;
  double capacitance_alpha = 2e-28;
  double tx_power_w_min = 0.2;
  double tx_power_w_max = 1.0;
  double uplink_bps_min = 1e6;
  double uplink_bps_max = 10e6;
  double initial_energy_j_min = 50.0;
  double initial_energy_j_max = 200.0;
};

std::vector<DeviceProfile> generate_fleet(int device_count, const ProfileRanges& ranges,
                                          std::uint64_t seed);

// CSV columns: device_id,cpu_freq_hz,cycles_per_sample,alpha,tx_power_w,uplink_bps,initial_energy_j
std::vector<DeviceProfile> load_fleet_csv(const std::string& path);

}  // namespace feelsim

#endif
