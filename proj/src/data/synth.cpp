#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numbers>
#include <random>

#include "icaclf/data.hpp"
#include "icaclf/error.hpp"
#include "icaclf/hash.hpp"

namespace icaclf::inline ICACLF_ABI {

void SynthConfig::validate() const {
  if (n_subjects == 0 || components_per_subject == 0) {
    throw ParameterError("synthetic config: subject and component counts must be positive");
  }
  for (std::size_t extent : grid) {
    if (extent < 4) throw ParameterError("synthetic config: grid extents must be at least 4");
  }
  if (timepoints < 8) throw ParameterError("synthetic config: need at least 8 timepoints");
  if (!(artifact_fraction > 0.0 && artifact_fraction < 1.0)) {
    throw ParameterError("synthetic config: artifact fraction must lie in (0, 1)");
  }
  if (!(noise_level >= 0.0)) throw ParameterError("synthetic config: noise level must be non-negative");
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"n_subjects", c.n_subjects},       {"components_per_subject", c.components_per_subject},
          {"grid", c.grid},                   {"timepoints", c.timepoints},
          {"artifact_fraction", c.artifact_fraction}, {"noise_level", c.noise_level},
          {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    c.n_subjects = j.value("n_subjects", c.n_subjects);
    c.components_per_subject = j.value("components_per_subject", c.components_per_subject);
    c.grid = j.value("grid", c.grid);
    c.timepoints = j.value("timepoints", c.timepoints);
    c.artifact_fraction = j.value("artifact_fraction", c.artifact_fraction);
    c.noise_level = j.value("noise_level", c.noise_level);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed synthetic config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Volume {
  Grid grid;
  std::vector<double> values;
  std::vector<double> radius;  // normalized ellipsoid radius per voxel

  explicit Volume(Grid g) : grid(g), values(g[0] * g[1] * g[2], 0.0), radius(values.size()) {
    std::size_t i = 0;
    for (std::size_t z = 0; z < g[0]; ++z)
      for (std::size_t y = 0; y < g[1]; ++y)
        for (std::size_t x = 0; x < g[2]; ++x, ++i) {
          const double dz = (double(z) - centre(0)) / semi_axis(0);
          const double dy = (double(y) - centre(1)) / semi_axis(1);
          const double dx = (double(x) - centre(2)) / semi_axis(2);
          radius[i] = std::sqrt(dz * dz + dy * dy + dx * dx);
        }
  }
  double centre(int axis) const { return (double(grid[axis]) - 1.0) / 2.0; }
  double semi_axis(int axis) const { return 0.45 * double(grid[axis]); }
  bool in_mask(std::size_t i) const { return radius[i] <= 1.0; }

  template <typename Fn>
  void for_each(Fn&& fn) {
    std::size_t i = 0;
    for (std::size_t z = 0; z < grid[0]; ++z)
      for (std::size_t y = 0; y < grid[1]; ++y)
        for (std::size_t x = 0; x < grid[2]; ++x, ++i) fn(i, double(z), double(y), double(x));
  }
};

void signal_map(Volume& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> blob_count(1, 3);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> amplitude(1.0, 2.0);
  std::uniform_real_distribution<double> width(0.05, 0.09);
  const double min_extent = double(*std::min_element(v.grid.begin(), v.grid.end()));
  const int blobs = blob_count(rng);
  for (int b = 0; b < blobs; ++b) {
    // Centre inside the inner 60% of the ellipsoid.
    double p[3];
    do {
      for (double& c : p) c = unit(rng) * 0.6;
    } while (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] > 0.36);
    const double cz = v.centre(0) + p[0] * v.semi_axis(0);
    const double cy = v.centre(1) + p[1] * v.semi_axis(1);
    const double cx = v.centre(2) + p[2] * v.semi_axis(2);
    const double sigma = width(rng) * min_extent;
    const double amp = amplitude(rng);
    v.for_each([&](std::size_t i, double z, double y, double x) {
      if (!v.in_mask(i)) return;
      const double d2 = (z - cz) * (z - cz) + (y - cy) * (y - cy) + (x - cx) * (x - cx);
      v.values[i] += amp * std::exp(-d2 / (2 * sigma * sigma));
    });
  }
}

void artifact_map(Volume& v, SpatialArtifact kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> amplitude(1.0, 2.0);
  const double amp = amplitude(rng);
  switch (kind) {
    case SpatialArtifact::rim: {
      // Shell at the mask boundary, optionally restricted to one side.
      std::normal_distribution<double> normal;
      double dir[3] = {normal(rng), normal(rng), normal(rng)};
      const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]) + 1e-12;
      const bool one_sided = std::bernoulli_distribution(0.5)(rng);
      v.for_each([&](std::size_t i, double z, double y, double x) {
        if (!v.in_mask(i) || v.radius[i] < 0.8) return;
        const double dot = ((z - v.centre(0)) * dir[0] + (y - v.centre(1)) * dir[1] + (x - v.centre(2)) * dir[2]) /
                           norm;
        if (one_sided && dot < 0) return;
        v.values[i] += amp;
      });
      break;
    }
    case SpatialArtifact::speckle: {
      std::bernoulli_distribution hit(0.05);
      std::normal_distribution<double> normal;
      v.for_each([&](std::size_t i, double, double, double) {
        if (v.in_mask(i) && hit(rng)) v.values[i] += amp * (1.0 + std::abs(normal(rng)));
      });
      break;
    }
    case SpatialArtifact::slice_band: {
      const auto depth = v.grid[0];
      std::uniform_int_distribution<std::size_t> slice(depth / 5, depth - 1 - depth / 5);
      const std::size_t z0 = slice(rng);
      const std::size_t thickness = std::bernoulli_distribution(0.5)(rng) ? 1 : 2;
      v.for_each([&](std::size_t i, double z, double, double) {
        const auto zi = static_cast<std::size_t>(z);
        if (v.in_mask(i) && zi >= z0 && zi < z0 + thickness) v.values[i] += amp;
      });
      break;
    }
  }
}

// Sum of sinusoids with frequencies in [lo, hi] cycles/sample.
std::vector<double> band_limited(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(3, 8);
  std::uniform_real_distribution<double> freq(lo, hi);
  std::uniform_real_distribution<double> amp(0.5, 1.5);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::vector<double> x(n, 0.0);
  const int k = count(rng);
  for (int j = 0; j < k; ++j) {
    const double f = freq(rng), a = amp(rng), ph = phase(rng);
    for (std::size_t t = 0; t < n; ++t) x[t] += a * std::sin(kTwoPi * f * double(t) + ph);
  }
  return x;
}

std::vector<double> artifact_series(std::size_t n, TemporalArtifact kind, std::mt19937_64& rng) {
  std::vector<double> x(n, 0.0);
  switch (kind) {
    case TemporalArtifact::spike_train: {
      std::uniform_int_distribution<int> count(4, 12);
      std::uniform_int_distribution<std::size_t> where(0, n - 1);
      std::uniform_real_distribution<double> height(4.0, 8.0);
      std::normal_distribution<double> base(0.0, 0.3);
      for (auto& v : x) v = base(rng);
      const int spikes = count(rng);
      for (int s = 0; s < spikes; ++s) {
        const double h = height(rng) * (std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0);
        x[where(rng)] += h;
      }
      break;
    }
    case TemporalArtifact::high_frequency: {
      std::uniform_real_distribution<double> freq(0.2, 0.45);
      std::uniform_real_distribution<double> phase(0.0, kTwoPi);
      const double f = freq(rng), ph = phase(rng);
      const double drift = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
      for (std::size_t t = 0; t < n; ++t) {
        x[t] = std::sin(kTwoPi * f * double(t) + ph) * (1.0 + drift * std::sin(kTwoPi * double(t) / double(n)));
      }
      break;
    }
    case TemporalArtifact::sawtooth_drift: {
      std::uniform_real_distribution<double> period(100.0, 300.0);
      std::uniform_real_distribution<double> phase(0.0, 1.0);
      const double p = period(rng), ph = phase(rng);
      for (std::size_t t = 0; t < n; ++t) {
        const double u = double(t) / p + ph;
        x[t] = 2.0 * (u - std::floor(u)) - 1.0;
      }
      break;
    }
  }
  return x;
}

void add_noise_unit_scale(std::vector<double>& x, double noise, std::mt19937_64& rng) {
  const auto z = standardize(std::span<const double>(x));
  std::normal_distribution<double> normal(0.0, noise);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = z[i] + normal(rng);
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& config, std::vector<ArtifactKinds>* kinds) {
  config.validate();
  Dataset dataset;
  dataset.grid = config.grid;
  dataset.timepoints = config.timepoints;
  const std::size_t total = config.n_subjects * config.components_per_subject;
  dataset.records.resize(total);
  if (kinds) kinds->assign(total, ArtifactKinds{});
  const Volume mask_template(config.grid);

  // Each component draws from its own stream, so generation order and thread
  // count do not affect the result.
  const auto count = static_cast<std::ptrdiff_t>(total);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t idx = 0; idx < count; ++idx) {
    const auto i = static_cast<std::size_t>(idx);
    std::mt19937_64 rng(derive_seed(config.seed, i));
    auto& record = dataset.records[i];
    char subject[32];
    std::snprintf(subject, sizeof subject, "sub-%04zu", i / config.components_per_subject);
    record.subject_id = subject;
    record.component_id = static_cast<std::int32_t>(i % config.components_per_subject);
    record.label = std::bernoulli_distribution(config.artifact_fraction)(rng) ? kArtifact : kSignal;

    Volume volume = mask_template;
    std::vector<double> series;
    ArtifactKinds chosen;
    if (record.label == kSignal) {
      signal_map(volume, rng);
      series = band_limited(config.timepoints, 0.01, 0.1, rng);
    } else {
      chosen.spatial = static_cast<SpatialArtifact>(std::uniform_int_distribution<int>(0, 2)(rng));
      chosen.temporal = static_cast<TemporalArtifact>(std::uniform_int_distribution<int>(0, 2)(rng));
      artifact_map(volume, chosen.spatial, rng);
      series = artifact_series(config.timepoints, chosen.temporal, rng);
    }
    if (kinds) (*kinds)[i] = chosen;

    std::normal_distribution<double> noise(0.0, config.noise_level);
    for (std::size_t v = 0; v < volume.values.size(); ++v) {
      if (volume.in_mask(v)) volume.values[v] += noise(rng);
    }
    // Guarantees a non-constant map even without noise.
    volume.values[volume.values.size() / 2] += 1e-3;
    add_noise_unit_scale(series, config.noise_level, rng);

    const auto map = standardize(std::span<const double>(volume.values));
    record.spatial_map.assign(map.begin(), map.end());
    const auto tc = standardize(std::span<const double>(series));
    record.timecourse.assign(tc.begin(), tc.end());
    const auto ps = power_spectrum(std::span<const double>(tc));
    record.power_spectrum.assign(ps.begin(), ps.end());
  }
  return dataset;
}

}  // namespace icaclf
