#include "iscc/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace iscc {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ModelError(what);
}

void require_devices(const Eigen::Index n, const std::vector<DeviceProfile>& devices) {
  require(n == static_cast<Eigen::Index>(devices.size()),
          "allocation has " + std::to_string(n) + " entries for " +
              std::to_string(devices.size()) + " devices");
}

}  // namespace

void ClassStatistics::validate() const {
  require(num_classes >= 2, "num_classes must be at least 2");
  require(centroids.size() == variance.size(), "centroid and variance device counts differ");
  for (std::size_t k = 0; k < centroids.size(); ++k) {
    require(centroids[k].rows() == num_classes,
            "device " + std::to_string(k) + " centroid rows != num_classes");
    require(centroids[k].cols() >= 1, "device " + std::to_string(k) + " has no features");
    require(centroids[k].cols() == variance[k].size(),
            "device " + std::to_string(k) + " centroid/variance feature counts differ");
    require(centroids[k].allFinite(), "device " + std::to_string(k) + " has non-finite centroids");
    require((variance[k].array() >= 0.0).all() && variance[k].allFinite(),
            "device " + std::to_string(k) + " has negative or non-finite variance");
  }
}

void DeviceProfile::validate() const {
  require(feature_count >= 1, "feature_count must be >= 1");
  require(clutter_variance >= 0.0, "clutter_variance must be >= 0");
  require(quantization_variance > 0.0, "quantization_variance must be > 0");
  require(sensing_time >= 0.0 && computation_time >= 0.0, "times must be >= 0");
  require(computation_energy >= 0.0 && energy_budget >= 0.0, "energies must be >= 0");
  require(channel_gain > 0.0, "channel_gain must be > 0");
}

void SystemParams::validate() const {
  require(latency_budget > 0.0, "latency_budget must be > 0");
  require(bandwidth > 0.0, "bandwidth must be > 0");
  require(channel_noise > 0.0, "channel_noise must be > 0");
  require(sensing_noise > 0.0, "sensing_noise must be > 0");
}

bool Allocation::all_positive() const {
  return (sensing_power.array() > 0.0).all() && (transmit_power.array() > 0.0).all() &&
         (comm_time.array() > 0.0).all() && (quantization_gain.array() > 0.0).all();
}

TransformedAllocation to_transformed(const Allocation& alloc,
                                     const std::vector<DeviceProfile>& devices,
                                     const SystemParams& sys) {
  require_devices(alloc.size(), devices);
  const Eigen::Index n = alloc.size();
  TransformedAllocation t;
  t.sensing_distortion = sys.sensing_noise / alloc.sensing_power.array();
  t.quant_distortion.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    t.quant_distortion[k] = devices[k].quantization_variance / alloc.quantization_gain[k];
  }
  t.comm_energy = alloc.transmit_power.cwiseProduct(alloc.comm_time);
  t.comm_time = alloc.comm_time;
  return t;
}

Allocation to_physical(const TransformedAllocation& t, const std::vector<DeviceProfile>& devices,
                       const SystemParams& sys) {
  require_devices(t.size(), devices);
  const Eigen::Index n = t.size();
  Allocation a;
  a.sensing_power = sys.sensing_noise / t.sensing_distortion.array();
  a.quantization_gain.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    a.quantization_gain[k] = devices[k].quantization_variance / t.quant_distortion[k];
  }
  a.transmit_power = t.comm_energy.cwiseQuotient(t.comm_time);
  a.comm_time = t.comm_time;
  return a;
}

std::vector<WeightedPair> weighted_pairs(const ClassStatistics& stats, std::size_t k,
                                         const DeviceProfile& device) {
  const int classes = stats.num_classes;
  const auto& mu = stats.centroids.at(k);
  const auto& var = stats.variance.at(k);
  const double pair_count = 0.5 * classes * (classes - 1);
  std::vector<WeightedPair> pairs;
  pairs.reserve(static_cast<std::size_t>(mu.cols() * pair_count));
  for (int n = 0; n < mu.cols(); ++n) {
    for (int l2 = 1; l2 < classes; ++l2) {
      for (int l = 0; l < l2; ++l) {
        const double gap = mu(l, n) - mu(l2, n);
        pairs.push_back({n, l, l2, gap * gap / pair_count, var[n] + device.clutter_variance});
      }
    }
  }
  return pairs;
}

double pair_gain(const ClassStatistics& stats, std::size_t k, const DeviceProfile& device,
                 double sensing_distortion, double quant_distortion, int first, int second,
                 int feature) {
  require(sensing_distortion > 0.0, "sensing distortion must be > 0");
  require(quant_distortion > 0.0, "quantization distortion must be > 0");
  require(first != second, "pair gain needs two distinct classes");
  const auto& mu = stats.centroids.at(k);
  require(first >= 0 && second >= 0 && first < mu.rows() && second < mu.rows(),
          "class index out of range");
  require(feature >= 0 && feature < mu.cols(), "feature index out of range");
  const double gap = mu(first, feature) - mu(second, feature);
  const double var = stats.variance[k][feature] + device.clutter_variance + sensing_distortion +
                     quant_distortion;
  return gap * gap / var;
}

double device_gain(const std::vector<WeightedPair>& pairs, double distortion) {
  double g = 0.0;
  for (const auto& p : pairs) g += p.weight / (p.base_variance + distortion);
  return g;
}

GainBreakdown total_gain(const ClassStatistics& stats, const std::vector<DeviceProfile>& devices,
                         const TransformedAllocation& t) {
  require(stats.num_devices() == devices.size(), "statistics cover " +
                                                     std::to_string(stats.num_devices()) +
                                                     " devices, profiles " +
                                                     std::to_string(devices.size()));
  require_devices(t.size(), devices);
  const double pair_count = 0.5 * stats.num_classes * (stats.num_classes - 1);
  GainBreakdown out;
  out.terms.resize(devices.size());
  out.device_total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(devices.size()));
  for (std::size_t k = 0; k < devices.size(); ++k) {
    require(stats.feature_count(k) == devices[k].feature_count,
            "device " + std::to_string(k) + " feature count disagrees with statistics");
    const double u = t.sensing_distortion[k] + t.quant_distortion[k];
    for (const auto& p : weighted_pairs(stats, k, devices[k])) {
      const double var = p.base_variance + u;
      PairTerm term{p.feature, p.first, p.second, p.weight / var, p.weight * pair_count / var,
                    p.weight > 0.0 ? var / p.weight : std::numeric_limits<double>::infinity()};
      out.device_total[k] += term.gain;
      out.terms[k].push_back(term);
    }
  }
  out.total = out.device_total.sum();
  return out;
}

double required_bits(int feature_count, double quant_distortion) {
  require(quant_distortion > 0.0, "quantization distortion must be > 0");
  return feature_count * std::log1p(1.0 / quant_distortion) / std::numbers::ln2;
}

double mutual_info_bits(const DeviceProfile& device, double quantization_gain) {
  require(quantization_gain > 0.0, "quantization gain must be > 0");
  return device.feature_count * std::log1p(quantization_gain / device.quantization_variance) /
         std::numbers::ln2;
}

double channel_capacity_bits(const SystemParams& sys, const DeviceProfile& device,
                             double comm_time, double comm_energy) {
  require(comm_time > 0.0, "communication time must be > 0");
  require(comm_energy >= 0.0, "communication energy must be >= 0");
  const double snr = comm_energy * device.channel_gain / (comm_time * sys.channel_noise);
  return comm_time * sys.bandwidth * std::log1p(snr) / std::numbers::ln2;
}

std::string FeasibilityReport::violated() const {
  if (feasible) return {};
  if (!positive) return "positivity";
  std::string name = "C1";
  double worst = latency_slack;
  for (Eigen::Index k = 0; k < capacity_slack.size(); ++k) {
    if (capacity_slack[k] < worst) {
      worst = capacity_slack[k];
      name = "C2[" + std::to_string(k) + "]";
    }
  }
  for (Eigen::Index k = 0; k < energy_slack.size(); ++k) {
    if (energy_slack[k] < worst) {
      worst = energy_slack[k];
      name = "C3[" + std::to_string(k) + "]";
    }
  }
  return name;
}

FeasibilityReport check_feasibility(const std::vector<DeviceProfile>& devices,
                                    const SystemParams& sys, const Allocation& alloc,
                                    double tolerance) {
  require_devices(alloc.size(), devices);
  const Eigen::Index n = alloc.size();
  FeasibilityReport r;
  r.positive = alloc.all_positive();
  r.capacity_slack.resize(n);
  r.energy_slack.resize(n);
  double used_time = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& dev = devices[k];
    used_time += dev.sensing_time + dev.computation_time + alloc.comm_time[k];
    const double payload = alloc.quantization_gain[k] > 0.0
                               ? mutual_info_bits(dev, alloc.quantization_gain[k])
                               : 0.0;
    const double capacity =
        alloc.comm_time[k] > 0.0 && alloc.transmit_power[k] >= 0.0
            ? channel_capacity_bits(sys, dev, alloc.comm_time[k],
                                    alloc.transmit_power[k] * alloc.comm_time[k])
            : 0.0;
    r.capacity_slack[k] = capacity - payload;
    r.energy_slack[k] = dev.energy_budget - (alloc.sensing_power[k] * dev.sensing_time +
                                             dev.computation_energy +
                                             alloc.transmit_power[k] * alloc.comm_time[k]);
  }
  r.latency_slack = sys.latency_budget - used_time;
  r.feasible = r.positive && r.latency_slack >= -tolerance &&
               (n == 0 || (r.capacity_slack.minCoeff() >= -tolerance &&
                           r.energy_slack.minCoeff() >= -tolerance));
  return r;
}

}  // namespace iscc
