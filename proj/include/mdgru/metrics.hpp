// Localization error metrics, per-case CSV reporting, and the multi-variant
// evaluation harness (coarse-only, fine at n=1 and n=4, each with and
// without parabola refinement).
#pragma once

#include <map>
#include <string>
#include <vector>

#include "mdgru/dataset.hpp"
#include "mdgru/pipeline.hpp"

namespace mdgru {

// Both landmarks must live in the same coordinate space.
double euclidean_error_mm(const Landmark& a, const Landmark& b,
                          const std::array<double, 3>& spacing);

struct Aggregate {
  double median = 0;
  double mean = 0;
  double sample_std = 0;  // n-1 denominator, 0 when n < 2
  int64_t n = 0;
};
Aggregate aggregate(const std::vector<double>& values);

struct CaseError {
  std::string case_id;
  std::string variant;
  double err_mm = 0;
  std::array<double, 3> err_vox{};  // estimate - truth, per axis
  double err_vox_norm = 0;
};

struct EvalReport {
  std::vector<CaseError> rows;
  // variant -> aggregate over err_mm
  std::map<std::string, Aggregate> by_variant;
};

inline constexpr const char* kErrorCsvHeader =
    "case_id,variant,err_mm,err_vox_x,err_vox_y,err_vox_z,err_vox_norm";

void write_error_csv(const std::string& path, const std::vector<CaseError>& rows);
std::vector<CaseError> read_error_csv(const std::string& path);
std::map<std::string, Aggregate> aggregate_by_variant(const std::vector<CaseError>& rows);
std::string format_report(const EvalReport& r);

// Runs the full pipeline once per case with the shared coarse stage, then
// decodes each fine net's distribution twice (argmax, argmax+parabola).
// Variant names: coarse, fine_n1, fine_parab_n1, fine_n4, fine_parab_n4.
EvalReport evaluate_variants(const std::vector<ManifestEntry>& cases, CoarseModel& coarse,
                             FineModel& fine_n1, FineModel& fine_n4,
                             const PipelineConfig& pcfg);

}  // namespace mdgru
