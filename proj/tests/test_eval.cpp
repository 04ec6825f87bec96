#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "mdgru/metrics.hpp"
#include "mdgru/optim.hpp"
#include "mdgru/rng.hpp"
#include "mdgru/synthetic.hpp"

using namespace mdgru;

namespace {

std::string temp_dir(const char* tag) {
  auto p = std::filesystem::temp_directory_path() / (std::string("mdgru_eval_") + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("euclidean error weights each axis by its spacing") {
  Landmark a{{1, 2, 3}, Space::original};
  Landmark b{{2, 4, 1}, Space::original};
  CHECK(euclidean_error_mm(a, b, {1, 1, 1}) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(euclidean_error_mm(a, b, {2, 1, 1}) ==
        doctest::Approx(std::sqrt(4 + 4 + 4)).epsilon(1e-12));

  Landmark w{{1, 2, 3}, Space::window};
  CHECK_THROWS_AS(euclidean_error_mm(a, w, {1, 1, 1}), Error);
}

TEST_CASE("aggregate computes median, mean, and sample deviation") {
  Aggregate g = aggregate({3, 1, 2});
  CHECK(g.median == 2);
  CHECK(g.mean == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(g.sample_std == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.n == 3);

  Aggregate one = aggregate({5});
  CHECK(one.median == 5);
  CHECK(one.sample_std == 0);

  Aggregate even = aggregate({4, 1, 2, 3});
  CHECK(even.median == doctest::Approx(2.5).epsilon(1e-12));

  CHECK(aggregate({}).n == 0);
}

TEST_CASE("error CSVs round-trip and regenerate the aggregates") {
  const std::string dir = temp_dir("csv");
  Rng rng(60);
  std::vector<CaseError> rows;
  const char* variants[3] = {"coarse", "fine_n1", "fine_parab_n4"};
  for (int i = 0; i < 30; ++i) {
    CaseError r;
    r.case_id = "s" + std::to_string(i / 3);
    r.variant = variants[i % 3];
    for (auto& e : r.err_vox) e = rng.uniform(-4, 4);
    r.err_vox_norm = std::sqrt(r.err_vox[0] * r.err_vox[0] + r.err_vox[1] * r.err_vox[1] +
                               r.err_vox[2] * r.err_vox[2]);
    r.err_mm = r.err_vox_norm * 1.25;
    rows.push_back(r);
  }
  const std::string path = dir + "/errors.csv";
  write_error_csv(path, rows);

  {
    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    CHECK(header == kErrorCsvHeader);
  }

  std::vector<CaseError> back = read_error_csv(path);
  REQUIRE(back.size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].case_id == rows[i].case_id);
    CHECK(back[i].variant == rows[i].variant);
    CHECK(back[i].err_mm == rows[i].err_mm);  // 17 digits round-trip exactly
    CHECK(back[i].err_vox == rows[i].err_vox);
    CHECK(back[i].err_vox_norm == rows[i].err_vox_norm);
  }

  auto agg = aggregate_by_variant(back);
  CHECK(agg.size() == 3);
  CHECK(agg.at("coarse").n == 10);
  CHECK(agg.at("fine_n1").n == 10);

  // malformed rows are rejected with a line number
  {
    std::ofstream f(dir + "/bad.csv");
    f << kErrorCsvHeader << "\n1,coarse,notanumber,0,0,0,0\n";
  }
  try {
    read_error_csv(dir + "/bad.csv");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  {
    std::ofstream f(dir + "/hdr.csv");
    f << "wrong,header\n";
  }
  CHECK_THROWS_AS(read_error_csv(dir + "/hdr.csv"), Error);
}

TEST_CASE("the report table lists every variant with its statistics") {
  EvalReport r;
  r.rows.push_back({"s0", "coarse", 4.0, {4, 0, 0}, 4.0});
  r.rows.push_back({"s0", "fine_n1", 1.0, {1, 0, 0}, 1.0});
  r.by_variant = aggregate_by_variant(r.rows);
  const std::string text = format_report(r);
  CHECK(text.find("variant") != std::string::npos);
  CHECK(text.find("coarse") != std::string::npos);
  CHECK(text.find("fine_n1") != std::string::npos);
  CHECK(text.find("median_mm") != std::string::npos);
  CHECK(text.find("4.00") != std::string::npos);
}

TEST_CASE("the evaluation harness emits five variants per case") {
  // untrained miniature models; this checks plumbing, not accuracy
  PipelineConfig pcfg;
  pcfg.window_extents = {8, 8, 8};
  pcfg.coarse_factor = 2;
  pcfg.padded_extents = {16, 16, 16};
  pcfg.input_conv_channels = 2;
  pcfg.superres_n = 4;
  NetProfile prof;
  prof.mdgru_channels = {2, 2, 2};
  prof.pointwise_channels = {2, 2, 2};

  CoarseModel coarse = CoarseModel::make(pcfg, prof);
  FineModel f1 = FineModel::make(pcfg, prof, 1);
  FineModel f4 = FineModel::make(pcfg, prof, 4);
  Rng r1(61), r2(62), r3(63);
  init_coarse_model(coarse, r1);
  init_fine_model(f1, r2);
  init_fine_model(f4, r3);

  SynthSpec spec;
  spec.extents = {12, 12, 12};
  spec.margin = 4;
  spec.seed = 64;
  spec.notch_width_narrow = 1.5;
  spec.notch_width_wide = 3.0;
  const std::string dir = temp_dir("harness");
  DatasetManifest m = generate_synthetic(spec, SplitCounts{0, 0, 2}, dir);

  EvalReport rep = evaluate_variants(m.split("test"), coarse, f1, f4, pcfg);
  REQUIRE(rep.rows.size() == 10);
  std::set<std::string> seen;
  for (const CaseError& row : rep.rows) {
    seen.insert(row.variant);
    CHECK(std::isfinite(row.err_mm));
    CHECK(row.err_mm >= 0);
    const double norm = std::sqrt(row.err_vox[0] * row.err_vox[0] +
                                  row.err_vox[1] * row.err_vox[1] +
                                  row.err_vox[2] * row.err_vox[2]);
    CHECK(row.err_vox_norm == doctest::Approx(norm).epsilon(1e-9));
  }
  CHECK(seen == std::set<std::string>{"coarse", "fine_n1", "fine_parab_n1", "fine_n4",
                                      "fine_parab_n4"});
  CHECK(rep.by_variant.at("coarse").n == 2);

  // rerunning is deterministic
  EvalReport rep2 = evaluate_variants(m.split("test"), coarse, f1, f4, pcfg);
  for (size_t i = 0; i < rep.rows.size(); ++i) {
    CHECK(rep.rows[i].err_mm == rep2.rows[i].err_mm);
  }
}
