#include "mdgru/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mdgru/rvol.hpp"

namespace mdgru {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Basis {
  double r[3][3];  // rows are orthonormal principal axes
};

// Random orthonormal basis from Gram-Schmidt over Gaussian vectors.
Basis random_basis(Rng& rng) {
  Basis b;
  for (int i = 0; i < 3; ++i) {
    while (true) {
      double v[3] = {rng.normal(), rng.normal(), rng.normal()};
      for (int j = 0; j < i; ++j) {
        double d = v[0] * b.r[j][0] + v[1] * b.r[j][1] + v[2] * b.r[j][2];
        for (int k = 0; k < 3; ++k) v[k] -= d * b.r[j][k];
      }
      const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      if (norm > 1e-6) {
        for (int k = 0; k < 3; ++k) b.r[i][k] = v[k] / norm;
        break;
      }
    }
  }
  return b;
}

}  // namespace

void SynthSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    const int64_t n = extents[static_cast<size_t>(a)];
    if (n < 2) throw_config("synth: extents must be >= 2");
    if (margin < 0 || 2 * margin >= n) {
      throw_config("synth: margin " + std::to_string(margin) +
                   " leaves no room for the apex inside extent " + std::to_string(n));
    }
    if (!(spacing[static_cast<size_t>(a)] > 0)) throw_config("synth: spacing must be > 0");
  }
  if (!(notch_width_narrow > 0) || !(notch_width_wide > 0)) {
    throw_config("synth: notch widths must be > 0");
  }
  if (noise_level < 0 || background_amp < 0 || background_terms < 0) {
    throw_config("synth: noise, background amplitude and term count must be >= 0");
  }
}

SynthCase synth_case(const SynthSpec& spec, int64_t index) {
  spec.validate();
  Rng rng = Rng(spec.seed).stream("volume", static_cast<uint64_t>(index));

  const auto& n = spec.extents;
  std::array<int64_t, 3> apex;
  for (int a = 0; a < 3; ++a) {
    apex[static_cast<size_t>(a)] =
        rng.uniform_int(spec.margin, n[static_cast<size_t>(a)] - 1 - spec.margin);
  }
  const Basis basis = random_basis(rng);
  const double sig[3] = {spec.notch_width_narrow, spec.notch_width_narrow, spec.notch_width_wide};

  struct Wave {
    double amp, fx, fy, fz, phase;
  };
  std::vector<Wave> waves;
  for (int t = 0; t < spec.background_terms; ++t) {
    Wave w;
    w.amp = spec.background_amp * rng.uniform(0.5, 1.0);
    w.fx = rng.uniform(-spec.background_cycles, spec.background_cycles);
    w.fy = rng.uniform(-spec.background_cycles, spec.background_cycles);
    w.fz = rng.uniform(-spec.background_cycles, spec.background_cycles);
    w.phase = rng.uniform(0.0, kTwoPi);
    waves.push_back(w);
  }

  Volume vol = Volume::zeros(n, spec.spacing, VoxelType::f32);
  for (int64_t z = 0; z < n[2]; ++z) {
    for (int64_t y = 0; y < n[1]; ++y) {
      for (int64_t x = 0; x < n[0]; ++x) {
        double v = 100.0;
        for (const Wave& w : waves) {
          v += w.amp * std::cos(kTwoPi * (w.fx * static_cast<double>(x) / static_cast<double>(n[0]) +
                                          w.fy * static_cast<double>(y) / static_cast<double>(n[1]) +
                                          w.fz * static_cast<double>(z) / static_cast<double>(n[2])) +
                                w.phase);
        }
        const double d[3] = {static_cast<double>(x - apex[0]), static_cast<double>(y - apex[1]),
                             static_cast<double>(z - apex[2])};
        double q = 0;
        for (int i = 0; i < 3; ++i) {
          const double proj = basis.r[i][0] * d[0] + basis.r[i][1] * d[1] + basis.r[i][2] * d[2];
          q += (proj / sig[i]) * (proj / sig[i]);
        }
        v -= spec.notch_depth * std::exp(-0.5 * q);
        vol.at(x, y, z) = v;
      }
    }
  }
  if (spec.noise_level > 0) {
    for (double& v : vol.data) v += spec.noise_level * rng.normal();
  }

  SynthCase c;
  c.volume = std::move(vol);
  c.truth.space = Space::original;
  for (int a = 0; a < 3; ++a) c.truth.pos[static_cast<size_t>(a)] = static_cast<double>(apex[static_cast<size_t>(a)]);
  return c;
}

DatasetManifest generate_synthetic(const SynthSpec& spec, const SplitCounts& counts,
                                   const std::string& out_dir) {
  spec.validate();
  if (counts.total() < 1) throw_config("synth: split counts must cover at least one subject");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "volumes");
  fs::create_directories(fs::path(out_dir) / "landmarks");

  DatasetManifest m;
  for (int64_t i = 0; i < counts.total(); ++i) {
    const SynthCase c = synth_case(spec, i);
    char id[32];
    std::snprintf(id, sizeof(id), "s%04lld", static_cast<long long>(i));
    const std::string vol_rel = std::string("volumes/") + id + ".rvol";
    const std::string lm_rel = std::string("landmarks/") + id + ".txt";
    write_volume(c.volume, (fs::path(out_dir) / vol_rel).string());
    write_landmark(c.truth, (fs::path(out_dir) / lm_rel).string());
    const char* split = i < counts.train                      ? "train"
                        : i < counts.train + counts.validation ? "validation"
                                                                : "test";
    m.entries.push_back(ManifestEntry{id, vol_rel, lm_rel, split});
  }
  m.write((fs::path(out_dir) / "manifest.tsv").string());
  // Re-read so entry paths are resolved exactly as consumers will see them.
  return DatasetManifest::read((fs::path(out_dir) / "manifest.tsv").string());
}

}  // namespace mdgru
