#include "feelsim/device_energy.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "feelsim/rng.hpp"

namespace feelsim {

double compute_time(const DeviceProfile& profile, long long sample_count, int epochs) {
  if (sample_count < 0) throw std::invalid_argument("compute_time: negative sample count");
  return static_cast<double>(epochs) * static_cast<double>(sample_count) *
         profile.cycles_per_sample / profile.cpu_freq_hz;
}

double compute_energy(const DeviceProfile& profile, long long sample_count, int epochs) {
  if (sample_count < 0) throw std::invalid_argument("compute_energy: negative sample count");
  return 0.5 * profile.capacitance_alpha * static_cast<double>(epochs) * profile.cpu_freq_hz *
         profile.cpu_freq_hz * static_cast<double>(sample_count) * profile.cycles_per_sample;
}

double upload_time(const DeviceProfile& profile, double model_bits) {
  if (model_bits <= 0) throw std::invalid_argument("upload_time: model_bits <= 0");
  return model_bits / profile.uplink_bps;
}

double upload_energy(const DeviceProfile& profile, double model_bits) {
  return upload_time(profile, model_bits) * profile.tx_power_w;
}

RoundCosts round_costs(const DeviceProfile& profile, long long sample_count, int epochs,
                       double model_bits) {
  RoundCosts c;
  c.t_cmp_s = compute_time(profile, sample_count, epochs);
  c.e_cmp_j = compute_energy(profile, sample_count, epochs);
  c.t_up_s = upload_time(profile, model_bits);
  c.e_up_j = upload_energy(profile, model_bits);
  return c;
}

bool feasible(double remaining_energy_j, const RoundCosts& costs, double deadline_s) {
  return costs.total_time_s() <= deadline_s && costs.total_energy_j() <= remaining_energy_j;
}

bool feasible(const DeviceState& state, const RoundCosts& costs, double deadline_s) {
  return state.alive && feasible(state.remaining_energy_j, costs, deadline_s);
}

DeviceState charge(const DeviceState& state, const RoundCosts& costs) {
  const double total = costs.total_energy_j();
  if (total > state.remaining_energy_j) {
    std::ostringstream oss;
    oss << "charge: device " << state.profile.device_id << " overdraft (" << total << " J > "
        << state.remaining_energy_j << " J remaining); selection must filter infeasible nodes";
    throw std::logic_error(oss.str());
  }
  DeviceState next = state;
  next.remaining_energy_j -= total;
  next.alive = next.remaining_energy_j > 0.0;
  return next;
}

std::vector<DeviceProfile> generate_fleet(int device_count, const ProfileRanges& r,
                                          std::uint64_t seed) {
  if (device_count < 1) throw std::invalid_argument("generate_fleet: device_count < 1");
  Rng rng(seed);
  std::vector<DeviceProfile> fleet(device_count);
  for (int i = 0; i < device_count; ++i) {
    DeviceProfile& p = fleet[i];
    p.device_id = i;
    p.cpu_freq_hz = rng.uniform(r.cpu_freq_hz_min, r.cpu_freq_hz_max);
    p.cycles_per_sample = rng.uniform(r.cycles_per_sample_min, r.cycles_per_sample_max);
    p.capacitance_alpha = r.capacitance_alpha;
    p.tx_power_w = rng.uniform(r.tx_power_w_min, r.tx_power_w_max);
    p.uplink_bps = rng.uniform(r.uplink_bps_min, r.uplink_bps_max);
    p.initial_energy_j = rng.uniform(r.initial_energy_j_min, r.initial_energy_j_max);
  }
  return fleet;
}

std::vector<DeviceProfile> load_fleet_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open fleet file");
  std::vector<DeviceProfile> fleet;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.find("device_id") != std::string::npos) continue;  // header
    std::istringstream row(line);
    DeviceProfile p;
    char comma;
    if (!(row >> p.device_id >> comma >> p.cpu_freq_hz >> comma >> p.cycles_per_sample >> comma >>
          p.capacitance_alpha >> comma >> p.tx_power_w >> comma >> p.uplink_bps >> comma >>
          p.initial_energy_j)) {
      std::ostringstream oss;
      oss << path << ":" << line_no << ": malformed fleet row";
      throw std::runtime_error(oss.str());
    }
    if (p.cpu_freq_hz <= 0 || p.cycles_per_sample <= 0 || p.capacitance_alpha <= 0 ||
        p.tx_power_w <= 0 || p.uplink_bps <= 0 || p.initial_energy_j <= 0) {
      std::ostringstream oss;
      oss << path << ":" << line_no << ": fleet fields must be strictly positive";
      throw std::runtime_error(oss.str());
    }
    fleet.push_back(p);
  }
  if (fleet.empty()) throw std::runtime_error(path + ": fleet file has no rows");
  return fleet;
}

}  // namespace feelsim
