#include "mdgru/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mdgru/rvol.hpp"

namespace mdgru {

double euclidean_error_mm(const Landmark& a, const Landmark& b,
                          const std::array<double, 3>& spacing) {
  if (a.space != b.space) {
    throw_contract(std::string("euclidean_error_mm: landmarks live in different spaces (") +
                   space_name(a.space) + " vs " + space_name(b.space) + ")");
  }
  double s = 0;
  for (size_t i = 0; i < 3; ++i) {
    const double d = (a.pos[i] - b.pos[i]) * spacing[i];
    s += d * d;
  }
  return std::sqrt(s);
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  a.n = static_cast<int64_t>(values.size());
  if (values.empty()) return a;
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  a.median = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double sum = 0;
  for (double v : sorted) sum += v;
  a.mean = sum / static_cast<double>(n);
  if (n >= 2) {
    double ss = 0;
    for (double v : sorted) ss += (v - a.mean) * (v - a.mean);
    a.sample_std = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return a;
}

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_error_csv(const std::string& path, const std::vector<CaseError>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw_error(ErrorKind::Runtime, "cannot open for writing: " + path);
  f << kErrorCsvHeader << "\n";
  for (const CaseError& r : rows) {
    f << r.case_id << ',' << r.variant << ',' << g17(r.err_mm) << ',' << g17(r.err_vox[0]) << ','
      << g17(r.err_vox[1]) << ',' << g17(r.err_vox[2]) << ',' << g17(r.err_vox_norm) << "\n";
  }
  if (!f) throw_error(ErrorKind::Runtime, "write failed: " + path);
}

std::vector<CaseError> read_error_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw_error(ErrorKind::Runtime, "cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) throw_parse(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kErrorCsvHeader) throw_parse(path + ":1: unexpected header '" + line + "'");

  std::vector<CaseError> rows;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7) {
      throw_parse(path + ":" + std::to_string(lineno) + ": expected 7 fields, got " +
                  std::to_string(fields.size()));
    }
    CaseError r;
    r.case_id = fields[0];
    r.variant = fields[1];
    double nums[5];
    for (int i = 0; i < 5; ++i) {
      const std::string& s = fields[static_cast<size_t>(i) + 2];
      size_t used = 0;
      try {
        nums[i] = std::stod(s, &used);
      } catch (const std::exception&) {
        throw_parse(path + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
      }
      if (used != s.size()) {
        throw_parse(path + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
      }
    }
    r.err_mm = nums[0];
    r.err_vox = {nums[1], nums[2], nums[3]};
    r.err_vox_norm = nums[4];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::map<std::string, Aggregate> aggregate_by_variant(const std::vector<CaseError>& rows) {
  std::map<std::string, std::vector<double>> buckets;
  for (const CaseError& r : rows) buckets[r.variant].push_back(r.err_mm);
  std::map<std::string, Aggregate> out;
  for (const auto& [variant, values] : buckets) out[variant] = aggregate(values);
  return out;
}

std::string format_report(const EvalReport& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %10s %10s %10s %6s\n", "variant", "median_mm", "mean_mm",
                "std_mm", "n");
  out += buf;
  for (const auto& [variant, agg] : r.by_variant) {
    std::snprintf(buf, sizeof buf, "%-16s %10.4f %10.4f %10.4f %6lld\n", variant.c_str(),
                  agg.median, agg.mean, agg.sample_std, static_cast<long long>(agg.n));
    out += buf;
  }
  return out;
}

namespace {

CaseError make_row(const std::string& id, const std::string& variant,
                   const std::array<double, 3>& est, const Landmark& truth,
                   const std::array<double, 3>& spacing) {
  CaseError r;
  r.case_id = id;
  r.variant = variant;
  double vox2 = 0, mm2 = 0;
  for (size_t i = 0; i < 3; ++i) {
    const double d = est[i] - truth.pos[i];
    r.err_vox[i] = d;
    vox2 += d * d;
    mm2 += d * spacing[i] * d * spacing[i];
  }
  r.err_vox_norm = std::sqrt(vox2);
  r.err_mm = std::sqrt(mm2);
  return r;
}

// window-relative decode of one fine distribution, with parabola refinement.
std::array<double, 3> parab_decode(const CoordinateDistribution& dist, int64_t n) {
  const auto peak = argmax_coordinate(dist);
  std::array<double, 3> pos{};
  for (size_t a = 0; a < 3; ++a) {
    pos[a] = parabola_refine(dist.axis[a], peak[a]) / static_cast<double>(n);
  }
  return pos;
}

}  // namespace

EvalReport evaluate_variants(const std::vector<ManifestEntry>& cases, CoarseModel& coarse,
                             FineModel& fine_n1, FineModel& fine_n4,
                             const PipelineConfig& pcfg) {
  pcfg.validate();
  EvalReport report;
  for (const ManifestEntry& e : cases) {
    const Volume v = read_volume(e.volume_path);
    Landmark truth = read_landmark(e.landmark_path);
    truth.space = Space::original;

    const Tensor pre = preprocess(v, pcfg.sigma_hp);
    PadResult pad = pad_center(pre, pcfg.padded_extents);
    StageOutput co = coarse_stage(pad.padded, coarse);
    const Landmark coarse_orig = coarse_to_original(co.lm, pad.origin_offset, pcfg.coarse_factor);
    report.rows.push_back(make_row(e.subject_id, "coarse", coarse_orig.pos, truth, v.spacing));

    WindowResult win = extract_window(pre, coarse_orig, pcfg.window_extents);
    const std::array<double, 3> origin{static_cast<double>(win.origin[0]),
                                       static_cast<double>(win.origin[1]),
                                       static_cast<double>(win.origin[2])};

    struct FineVariant {
      FineModel* model;
      const char* plain;
      const char* parab;
    };
    const FineVariant fines[2] = {{&fine_n1, "fine_n1", "fine_parab_n1"},
                                  {&fine_n4, "fine_n4", "fine_parab_n4"}};
    for (const FineVariant& fv : fines) {
      StageOutput fo = fine_stage(win.window, *fv.model, /*use_parabola=*/false);
      std::array<double, 3> plain{}, parab = parab_decode(fo.dist, fv.model->n);
      for (size_t a = 0; a < 3; ++a) {
        plain[a] = fo.lm.pos[a] + origin[a];
        parab[a] += origin[a];
      }
      report.rows.push_back(make_row(e.subject_id, fv.plain, plain, truth, v.spacing));
      report.rows.push_back(make_row(e.subject_id, fv.parab, parab, truth, v.spacing));
    }
  }
  report.by_variant = aggregate_by_variant(report.rows);
  return report;
}

}  // namespace mdgru
