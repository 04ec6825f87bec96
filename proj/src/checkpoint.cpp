#include "mdgru/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "mdgru/runconfig.hpp"

namespace mdgru {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'G', 'C', 'K'};

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

void put_str(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out.append(s);
}

// Offset-tracking reader so format errors can name the failing byte.
struct Reader {
  const std::string& buf;
  size_t pos = 0;
  const std::string& path;

  void need(size_t n, const char* what) {
    if (pos + n > buf.size()) {
      throw_format(path + ": truncated reading " + what + " at byte " + std::to_string(pos));
    }
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64(const char* what) {
    uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(const char* what) {
    uint64_t n = u64(what);
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void write_checkpoint(const std::string& path, const json& config,
                      const std::vector<Parameter*>& params) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_str(out, config.dump());
  put_u64(out, params.size());
  for (const Parameter* p : params) {
    put_str(out, p->name);
    put_u64(out, p->value.shape().size());
    for (int64_t e : p->value.shape()) put_u64(out, static_cast<uint64_t>(e));
    for (int64_t i = 0; i < p->value.size(); ++i) {
      put_f64(out, static_cast<double>(p->value.data()[i]));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw_error(ErrorKind::Runtime, "cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw_error(ErrorKind::Runtime, "write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw_error(ErrorKind::Runtime, "cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf, 0, path};
  r.need(4, "magic");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) throw_format(path + ": bad magic at byte 0");
  r.pos = 4;
  uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw_format(path + ": unsupported version " + std::to_string(version) + " at byte 4");
  }

  Checkpoint ck;
  const std::string cfg = r.str("config");
  ck.config = json::parse(cfg, nullptr, false);
  if (ck.config.is_discarded()) throw_format(path + ": config blob is not valid JSON");

  uint64_t count = r.u64("tensor count");
  for (uint64_t i = 0; i < count; ++i) {
    std::string name = r.str("tensor name");
    if (ck.tensors.count(name)) throw_format(path + ": duplicate tensor " + name);
    uint64_t rank = r.u64("tensor rank");
    if (rank > 8) throw_format(path + ": implausible rank for " + name);
    std::vector<int64_t> shape(rank);
    int64_t n = 1;
    for (uint64_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int64_t>(r.u64("tensor extent"));
      if (shape[d] <= 0) throw_format(path + ": non-positive extent for " + name);
      n *= shape[d];
    }
    Tensor t(shape);
    for (int64_t k = 0; k < n; ++k) t.data()[k] = static_cast<real>(r.f64("tensor data"));
    ck.order.push_back(name);
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  if (r.pos != buf.size()) {
    throw_format(path + ": " + std::to_string(buf.size() - r.pos) + " trailing bytes at byte " +
                 std::to_string(r.pos));
  }
  return ck;
}

void load_into(const Checkpoint& ck, const std::vector<Parameter*>& params) {
  size_t used = 0;
  for (Parameter* p : params) {
    auto it = ck.tensors.find(p->name);
    if (it == ck.tensors.end()) throw_format("checkpoint is missing tensor " + p->name);
    if (it->second.shape() != p->value.shape()) {
      throw_format("checkpoint tensor " + p->name + " has shape " + it->second.shape_str() +
                   ", model expects " + p->value.shape_str());
    }
    p->value = it->second;
    ++used;
  }
  if (used != ck.tensors.size()) {
    for (const auto& [name, t] : ck.tensors) {
      bool found = false;
      for (Parameter* p : params) {
        if (p->name == name) {
          found = true;
          break;
        }
      }
      if (!found) throw_format("checkpoint has unexpected tensor " + name);
    }
  }
}

json coarse_config_json(const PipelineConfig& pcfg, const NetProfile& profile) {
  return json{{"stage", "coarse"},
              {"pipeline", pipeline_to_json(pcfg)},
              {"net", profile_to_json(profile)}};
}

json fine_config_json(const PipelineConfig& pcfg, const NetProfile& profile, int64_t n) {
  return json{{"stage", "fine"},
              {"superres_n", n},
              {"pipeline", pipeline_to_json(pcfg)},
              {"net", profile_to_json(profile)}};
}

namespace {

void check_stage(const Checkpoint& ck, const std::string& want, const std::string& path) {
  std::string stage;
  try {
    stage = ck.config.at("stage").get<std::string>();
  } catch (const json::exception&) {
    throw_format(path + ": config has no stage field");
  }
  if (stage != want) throw_format(path + ": stage is " + stage + ", expected " + want);
}

}  // namespace

LoadedCoarse load_coarse_model(const std::string& path) {
  Checkpoint ck = read_checkpoint(path);
  check_stage(ck, "coarse", path);
  LoadedCoarse out;
  try {
    out.pipeline = pipeline_from_json(ck.config.at("pipeline"));
    out.profile = profile_from_json(ck.config.at("net"));
  } catch (const json::exception& e) {
    throw_format(path + ": bad config: " + e.what());
  }
  out.pipeline.validate();
  out.model = CoarseModel::make(out.pipeline, out.profile);
  load_into(ck, out.model.all_params());
  return out;
}

LoadedFine load_fine_model(const std::string& path) {
  Checkpoint ck = read_checkpoint(path);
  check_stage(ck, "fine", path);
  LoadedFine out;
  int64_t n = 0;
  try {
    out.pipeline = pipeline_from_json(ck.config.at("pipeline"));
    out.profile = profile_from_json(ck.config.at("net"));
    n = ck.config.at("superres_n").get<int64_t>();
  } catch (const json::exception& e) {
    throw_format(path + ": bad config: " + e.what());
  }
  out.pipeline.validate();
  out.model = FineModel::make(out.pipeline, out.profile, n);
  load_into(ck, out.model.all_params());
  return out;
}

}  // namespace mdgru
