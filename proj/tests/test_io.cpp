#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mdgru/checkpoint.hpp"
#include "mdgru/dataset.hpp"
#include "mdgru/optim.hpp"
#include "mdgru/rng.hpp"
#include "mdgru/rvol.hpp"
#include "mdgru/synthetic.hpp"

using namespace mdgru;

namespace {

std::string temp_dir(const char* tag) {
  auto p = std::filesystem::temp_directory_path() / (std::string("mdgru_io_") + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

std::vector<unsigned char> slurp_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
}

void spit_bytes(const std::string& path, const std::vector<unsigned char>& b) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

void check_throws_containing(const std::function<void()>& fn, const char* needle) {
  try {
    fn();
    const std::string m = std::string("expected an error containing \"") + needle + "\"";
    FAIL(m);
  } catch (const Error& e) {
    const std::string msg = e.what();
    if (msg.find(needle) == std::string::npos) {
      const std::string m = "error \"" + msg + "\" does not mention \"" + needle + "\"";
      FAIL(m);
    }
  }
}

}  // namespace

TEST_CASE("volume files round-trip through both voxel types") {
  const std::string dir = temp_dir("rvol_rt");
  Rng rng(50);
  for (int i = 0; i < 40; ++i) {
    Volume v;
    for (int a = 0; a < 3; ++a) {
      v.extents[static_cast<size_t>(a)] = rng.uniform_int(1, 6);
      v.spacing[static_cast<size_t>(a)] = rng.uniform(0.25, 3.0);
    }
    v.dtype = (i % 2 == 0) ? VoxelType::f32 : VoxelType::f64;
    v.data.resize(static_cast<size_t>(v.size()));
    for (double& d : v.data) d = rng.uniform(-1e4, 1e4);
    if (v.dtype == VoxelType::f32) {
      // store what a float can represent so the round-trip is exact
      for (double& d : v.data) d = static_cast<double>(static_cast<float>(d));
    }

    const std::string path = dir + "/v" + std::to_string(i) + ".rvol";
    write_volume(v, path);
    Volume r = read_volume(path);
    CHECK(r.extents == v.extents);
    CHECK(r.spacing == v.spacing);
    CHECK(r.dtype == v.dtype);
    CHECK(r.data == v.data);

    // a rewrite is byte-identical
    const std::string copy = path + ".copy";
    write_volume(r, copy);
    CHECK(slurp_bytes(path) == slurp_bytes(copy));
  }
}

TEST_CASE("volume file layout is header plus raw payload") {
  const std::string dir = temp_dir("rvol_layout");
  Volume v = Volume::zeros({2, 3, 4}, {1.5, 1.0, 0.5}, VoxelType::f64);
  for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<double>(i);
  const std::string path = dir + "/v.rvol";
  write_volume(v, path);
  auto bytes = slurp_bytes(path);
  CHECK(static_cast<int64_t>(bytes.size()) == kRVolHeaderBytes + 24 * 8);
  CHECK(std::memcmp(bytes.data(), "RVOL", 4) == 0);
  // x runs fastest: voxel (1, 0, 0) is the second payload element
  Volume r = read_volume(path);
  CHECK(r.at(1, 0, 0) == 1.0);
  CHECK(r.at(0, 1, 0) == 2.0);
  CHECK(r.at(0, 0, 1) == 6.0);
}

TEST_CASE("corrupted volume files fail with positioned messages") {
  const std::string dir = temp_dir("rvol_bad");
  Volume v = Volume::zeros({2, 2, 2}, {1, 1, 1}, VoxelType::f32);
  const std::string good = dir + "/good.rvol";
  write_volume(v, good);
  const auto base = slurp_bytes(good);

  auto mutated = [&](size_t at, unsigned char value) {
    auto b = base;
    b[at] = value;
    const std::string p = dir + "/bad.rvol";
    spit_bytes(p, b);
    return p;
  };

  check_throws_containing([&] { read_volume(mutated(0, 'X')); }, "bad magic at byte offset 0");
  check_throws_containing([&] { read_volume(mutated(4, 9)); }, "byte offset 4");
  check_throws_containing([&] { read_volume(mutated(8, 0)); }, "zero extent at byte offset 8");

  {  // negative spacing on axis 1: f64 at offset 20 + 8
    auto b = base;
    const double bad = -1.0;
    std::memcpy(b.data() + 28, &bad, 8);
    spit_bytes(dir + "/sp.rvol", b);
    check_throws_containing([&] { read_volume(dir + "/sp.rvol"); },
                            "non-positive spacing at byte offset 28");
  }
  check_throws_containing([&] { read_volume(mutated(44, 7)); },
                          "unknown dtype code 7 at byte offset 44");

  {  // trailing garbage
    auto b = base;
    b.push_back(0);
    spit_bytes(dir + "/tail.rvol", b);
    check_throws_containing([&] { read_volume(dir + "/tail.rvol"); }, "payload length");
  }
  {  // truncated payload
    auto b = base;
    b.resize(b.size() - 5);
    spit_bytes(dir + "/short.rvol", b);
    check_throws_containing([&] { read_volume(dir + "/short.rvol"); }, "payload length");
  }
  {  // truncated header
    auto b = base;
    b.resize(10);
    spit_bytes(dir + "/hdr.rvol", b);
    check_throws_containing([&] { read_volume(dir + "/hdr.rvol"); }, "truncated");
  }
  check_throws_containing([&] { read_volume(dir + "/nonexistent.rvol"); }, "cannot open");
}

TEST_CASE("landmark files round-trip to the last digit") {
  const std::string dir = temp_dir("landmark");
  Rng rng(51);
  for (int i = 0; i < 50; ++i) {
    Landmark lm;
    lm.space = Space::original;
    for (auto& p : lm.pos) p = rng.uniform(-500, 500);
    const std::string path = dir + "/lm.txt";
    write_landmark(lm, path);
    Landmark r = read_landmark(path);
    CHECK(r.pos == lm.pos);
    CHECK(r.space == Space::original);
  }
}

TEST_CASE("landmark parsing skips comments and reports bad lines") {
  const std::string dir = temp_dir("landmark_parse");
  auto write_text = [&](const char* name, const char* text) {
    std::ofstream f(dir + "/" + name);
    f << text;
    return dir + "/" + name;
  };

  Landmark lm = read_landmark(write_text("ok.txt", "# header\n\n  \t\n12.5 3 -4.25\n"));
  CHECK(lm.pos == std::array<double, 3>{12.5, 3, -4.25});

  check_throws_containing([&] { read_landmark(write_text("two.txt", "1 2\n")); },
                          "two.txt:1: expected three numeric coordinates");
  check_throws_containing([&] { read_landmark(write_text("word.txt", "# c\n1 2 banana\n")); },
                          "word.txt:2");
  check_throws_containing([&] { read_landmark(write_text("four.txt", "1 2 3 4\n")); },
                          "trailing token \"4\"");
  check_throws_containing([&] { read_landmark(write_text("empty.txt", "# nothing\n")); },
                          "no coordinate line");
}

TEST_CASE("manifests round-trip and resolve relative paths") {
  const std::string dir = temp_dir("manifest");
  std::filesystem::create_directories(dir + "/sub");
  DatasetManifest m;
  m.entries.push_back({"s0", dir + "/v0.rvol", dir + "/l0.txt", "train"});
  m.entries.push_back({"s1", dir + "/v1.rvol", dir + "/l1.txt", "validation"});
  m.entries.push_back({"s2", dir + "/v2.rvol", dir + "/l2.txt", "test"});
  const std::string path = dir + "/sub/manifest.tsv";
  m.write(path);
  DatasetManifest r = DatasetManifest::read(path);
  REQUIRE(r.entries.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(r.entries[i].subject_id == m.entries[i].subject_id);
    CHECK(r.entries[i].volume_path == m.entries[i].volume_path);
    CHECK(r.entries[i].split == m.entries[i].split);
  }
  CHECK(r.split("train").size() == 1);
  CHECK(r.split("validation").size() == 1);
  CHECK(r.split("test")[0].subject_id == "s2");
  CHECK(r.split("nope").empty());

  {  // relative paths resolve against the manifest directory
    std::ofstream f(dir + "/rel.tsv");
    f << "s0\tvolumes/a.rvol\tlandmarks/a.txt\ttrain\n";
  }
  DatasetManifest rel = DatasetManifest::read(dir + "/rel.tsv");
  CHECK(rel.entries[0].volume_path == dir + "/volumes/a.rvol");
  CHECK(rel.entries[0].landmark_path == dir + "/landmarks/a.txt");

  {  // comments and blank lines are skipped
    std::ofstream f(dir + "/cmt.tsv");
    f << "# comment\n\ns0\tv\tl\ttrain\n";
  }
  CHECK(DatasetManifest::read(dir + "/cmt.tsv").entries.size() == 1);

  {  // wrong field count is a parse error with a line number
    std::ofstream f(dir + "/bad.tsv");
    f << "s0\tv\tl\n";
  }
  check_throws_containing([&] { DatasetManifest::read(dir + "/bad.tsv"); },
                          "bad.tsv:1: expected 4 tab-separated fields");

  DatasetManifest wrong;
  wrong.entries.push_back({"s0", "v", "l", "holdout"});
  check_throws_containing([&] { wrong.validate(); }, "unknown split \"holdout\"");

  DatasetManifest dup;
  dup.entries.push_back({"s0", "v", "l", "train"});
  dup.entries.push_back({"s0", "v", "l", "test"});
  check_throws_containing([&] { dup.validate(); }, "appears in splits");
}

TEST_CASE("synthetic cases are deterministic and honor the margin") {
  SynthSpec spec;
  spec.extents = {20, 24, 16};
  spec.margin = 5;
  spec.seed = 7;

  SynthCase a = synth_case(spec, 3);
  SynthCase b = synth_case(spec, 3);
  CHECK(a.volume.data == b.volume.data);
  CHECK(a.truth.pos == b.truth.pos);

  SynthCase other = synth_case(spec, 4);
  CHECK(a.volume.data != other.volume.data);

  for (int64_t i = 0; i < 10; ++i) {
    SynthCase c = synth_case(spec, i);
    for (int axis = 0; axis < 3; ++axis) {
      const size_t a2 = static_cast<size_t>(axis);
      const double p = c.truth.pos[a2];
      CHECK(p == std::floor(p));  // integer apex
      CHECK(p >= spec.margin);
      CHECK(p <= static_cast<double>(spec.extents[a2] - 1 - spec.margin));
    }
  }
}

TEST_CASE("without noise the darkest voxel is the landmark") {
  SynthSpec spec;
  spec.extents = {24, 24, 24};
  spec.margin = 6;
  spec.noise_level = 0;
  spec.seed = 8;
  for (int64_t i = 0; i < 8; ++i) {
    SynthCase c = synth_case(spec, i);
    const auto it = std::min_element(c.volume.data.begin(), c.volume.data.end());
    const int64_t flat = it - c.volume.data.begin();
    const auto& e = c.volume.extents;
    const int64_t x = flat % e[0];
    const int64_t y = (flat / e[0]) % e[1];
    const int64_t z = flat / (e[0] * e[1]);
    CHECK(static_cast<double>(x) == c.truth.pos[0]);
    CHECK(static_cast<double>(y) == c.truth.pos[1]);
    CHECK(static_cast<double>(z) == c.truth.pos[2]);
  }
}

TEST_CASE("dataset generation writes the documented layout") {
  SynthSpec spec;
  spec.extents = {10, 10, 10};
  spec.margin = 2;
  spec.seed = 9;
  const std::string dir = temp_dir("gen");
  DatasetManifest m = generate_synthetic(spec, SplitCounts{2, 1, 1}, dir);

  REQUIRE(m.entries.size() == 4);
  const char* want_split[4] = {"train", "train", "validation", "test"};
  for (size_t i = 0; i < 4; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "s%04d", static_cast<int>(i));
    CHECK(m.entries[i].subject_id == id);
    CHECK(m.entries[i].split == want_split[i]);
    CHECK(std::filesystem::exists(m.entries[i].volume_path));
    CHECK(std::filesystem::exists(m.entries[i].landmark_path));

    // files agree with the in-memory case
    SynthCase c = synth_case(spec, static_cast<int64_t>(i));
    Volume v = read_volume(m.entries[i].volume_path);
    CHECK(v.extents == c.volume.extents);
    Landmark lm = read_landmark(m.entries[i].landmark_path);
    CHECK(lm.pos == c.truth.pos);
  }
  CHECK(std::filesystem::exists(dir + "/manifest.tsv"));
  CHECK(std::filesystem::exists(dir + "/volumes/s0000.rvol"));
  CHECK(std::filesystem::exists(dir + "/landmarks/s0003.txt"));

  // regenerating is byte-identical
  const std::string dir2 = temp_dir("gen2");
  generate_synthetic(spec, SplitCounts{2, 1, 1}, dir2);
  CHECK(slurp_bytes(dir + "/volumes/s0002.rvol") == slurp_bytes(dir2 + "/volumes/s0002.rvol"));
}

TEST_CASE("checkpoints round-trip parameters and config") {
  const std::string dir = temp_dir("ckpt");
  Rng rng(52);
  Parameter a{"net/a", Tensor({2, 3})};
  Parameter b{"net/b", Tensor({4})};
  for (Parameter* p : {&a, &b}) {
    for (int64_t i = 0; i < p->value.size(); ++i) {
      p->value[i] = static_cast<real>(rng.uniform(-2, 2));
    }
  }
  nlohmann::json cfg = {{"stage", "coarse"}, {"note", 7}};
  const std::string path = dir + "/m.mgck";
  write_checkpoint(path, cfg, {&a, &b});

  Checkpoint ck = read_checkpoint(path);
  CHECK(ck.config == cfg);
  CHECK(ck.order == std::vector<std::string>{"net/a", "net/b"});
  REQUIRE(ck.tensors.count("net/a") == 1);
  CHECK(max_abs_diff(ck.tensors.at("net/a"), a.value) == 0);

  Parameter a2{"net/a", Tensor({2, 3})};
  Parameter b2{"net/b", Tensor({4})};
  load_into(ck, {&a2, &b2});
  CHECK(max_abs_diff(a2.value, a.value) == 0);
  CHECK(max_abs_diff(b2.value, b.value) == 0);

  // missing tensor
  Parameter c{"net/c", Tensor({1})};
  check_throws_containing([&] { load_into(ck, {&a2, &b2, &c}); }, "missing tensor net/c");
  // shape mismatch
  Parameter wrong{"net/a", Tensor({3, 2})};
  check_throws_containing([&] { load_into(ck, {&wrong, &b2}); }, "has shape (2,3)");
  // extra tensor in the file
  check_throws_containing([&] { load_into(ck, {&a2}); }, "unexpected tensor net/b");

  // corrupted container
  auto bytes = slurp_bytes(path);
  bytes[0] = 'X';
  spit_bytes(dir + "/bad.mgck", bytes);
  check_throws_containing([&] { read_checkpoint(dir + "/bad.mgck"); }, "bad magic at byte 0");
  auto trail = slurp_bytes(path);
  trail.push_back(0);
  spit_bytes(dir + "/trail.mgck", trail);
  check_throws_containing([&] { read_checkpoint(dir + "/trail.mgck"); }, "trailing bytes");
}

TEST_CASE("stage loaders rebuild models from their own checkpoints") {
  const std::string dir = temp_dir("loaders");
  PipelineConfig pcfg;
  pcfg.window_extents = {8, 8, 8};
  pcfg.coarse_factor = 2;
  pcfg.padded_extents = {16, 16, 16};
  pcfg.input_conv_channels = 2;
  pcfg.superres_n = 2;
  NetProfile prof;
  prof.mdgru_channels = {2, 2, 2};
  prof.pointwise_channels = {2, 2, 2};

  CoarseModel cm = CoarseModel::make(pcfg, prof);
  Rng r1(53);
  init_coarse_model(cm, r1);
  const std::string cpath = dir + "/coarse.mgck";
  write_checkpoint(cpath, coarse_config_json(pcfg, prof), cm.all_params());
  LoadedCoarse lc = load_coarse_model(cpath);
  CHECK(lc.pipeline.coarse_factor == 2);
  CHECK(lc.profile.mdgru_channels == prof.mdgru_channels);
  auto cp = cm.all_params();
  auto lp = lc.model.all_params();
  REQUIRE(cp.size() == lp.size());
  for (size_t i = 0; i < cp.size(); ++i) {
    CHECK(cp[i]->name == lp[i]->name);
    CHECK(max_abs_diff(cp[i]->value, lp[i]->value) == 0);
  }

  FineModel fm = FineModel::make(pcfg, prof, 2);
  Rng r2(54);
  init_fine_model(fm, r2);
  const std::string fpath = dir + "/fine.mgck";
  write_checkpoint(fpath, fine_config_json(pcfg, prof, 2), fm.all_params());
  LoadedFine lf = load_fine_model(fpath);
  CHECK(lf.model.n == 2);
  CHECK(max_abs_diff(lf.model.net.fc2_w.value, fm.net.fc2_w.value) == 0);

  // loading the wrong stage is rejected
  check_throws_containing([&] { load_coarse_model(fpath); }, "stage is fine, expected coarse");
  check_throws_containing([&] { load_fine_model(cpath); }, "stage is coarse, expected fine");
}
