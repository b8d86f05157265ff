#include "realmlp/model_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "realmlp/rng.hpp"

namespace realmlp {
namespace {

using nlohmann::json;

// little-endian primitives
void put_u8(std::string& out, std::uint8_t v) {
  out.push_back(static_cast<char>(v));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_i32(std::string& out, std::int32_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
}
void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}
void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() {
    const char* p = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | static_cast<std::uint8_t>(p[i]);
    return v;
  }
  std::uint64_t u64() {
    const char* p = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
      v = (v << 8) | static_cast<std::uint8_t>(p[i]);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    return std::string(take(n), n);
  }
  std::string raw(std::size_t n) { return std::string(take(n), n); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const char* take(std::size_t n) {
    if (pos_ + n > bytes_.size())
      throw ContractError("model file: truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void put_scaler(std::string& out, const FittedColumnScaler& s) {
  put_f64(out, s.q0);
  put_f64(out, s.q1_4);
  put_f64(out, s.q1_2);
  put_f64(out, s.q3_4);
  put_f64(out, s.q1);
  put_f64(out, s.s);
}

FittedColumnScaler read_scaler(Reader& r) {
  FittedColumnScaler s;
  s.q0 = r.f64();
  s.q1_4 = r.f64();
  s.q1_2 = r.f64();
  s.q3_4 = r.f64();
  s.q1 = r.f64();
  s.s = r.f64();
  return s;
}

ParamGroup group_from_u8(std::uint8_t v) {
  switch (v) {
    case 0: return ParamGroup::weight;
    case 1: return ParamGroup::bias;
    case 2: return ParamGroup::scaling;
    case 3: return ParamGroup::num_emb;
    case 4: return ParamGroup::cat_emb;
    case 5: return ParamGroup::act_alpha;
  }
  throw ContractError("model file: unknown parameter group");
}

std::uint8_t group_to_u8(ParamGroup g) {
  switch (g) {
    case ParamGroup::weight: return 0;
    case ParamGroup::bias: return 1;
    case ParamGroup::scaling: return 2;
    case ParamGroup::num_emb: return 3;
    case ParamGroup::cat_emb: return 4;
    case ParamGroup::act_alpha: return 5;
  }
  return 0;
}

}  // namespace

std::string serialize_model(const ModelBundle& bundle) {
  const auto& model = bundle.model;
  std::string out;
  out += "RMLP";
  put_u32(out, kModelFormatVersion);

  json meta;
  meta["task"] = to_string(model.config.task);
  meta["preset"] = model.config.preset_name;
  meta["config"] = config_to_kv(model.config);
  meta["schema"] = schema_to_text(bundle.schema);
  char digest[32];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(bundle.schema.digest()));
  meta["schema_digest"] = digest;
  meta["seed"] = bundle.seed;
  meta["output_width"] = model.output_width;
  meta["element_width"] = 8;
  put_str(out, meta.dump());

  // preprocessor
  const auto& fp = model.preprocessor;
  put_i32(out, fp.max_onehot);
  put_u32(out, static_cast<std::uint32_t>(fp.cat_plan.size()));
  for (const auto& plan : fp.cat_plan) {
    put_u8(out, static_cast<std::uint8_t>(plan.route));
    put_u32(out, static_cast<std::uint32_t>(plan.train_codes.size()));
    for (int code : plan.train_codes) put_i32(out, code);
  }
  put_u32(out, static_cast<std::uint32_t>(fp.scalers.size()));
  for (const auto& s : fp.scalers) put_scaler(out, s);
  put_u32(out, static_cast<std::uint32_t>(fp.columns.size()));
  for (const auto& c : fp.columns) {
    put_u64(out, static_cast<std::uint64_t>(c.source_column));
    put_u8(out, c.from_numeric);
    put_u8(out, c.embed_eligible);
  }
  put_u32(out, static_cast<std::uint32_t>(fp.embed_routed.size()));
  for (std::size_t i = 0; i < fp.embed_routed.size(); ++i) {
    put_i32(out, fp.embed_routed[i]);
    put_i32(out, fp.embed_cardinalities[i]);
  }

  // vocabularies and labels
  put_u32(out, static_cast<std::uint32_t>(bundle.vocabulary.cat_vocabs.size()));
  for (const auto& vocab : bundle.vocabulary.cat_vocabs) {
    put_u32(out, static_cast<std::uint32_t>(vocab.size()));
    for (const auto& v : vocab) put_str(out, v);
  }
  put_u32(out,
          static_cast<std::uint32_t>(bundle.vocabulary.target_labels.size()));
  for (const auto& l : bundle.vocabulary.target_labels) put_str(out, l);

  // standardizer and clip range
  put_f64(out, model.standardizer.mean);
  put_f64(out, model.standardizer.std);
  put_u8(out, model.standardizer.degenerate);
  put_f64(out, model.clip_lo);
  put_f64(out, model.clip_hi);

  // named parameter arrays (column-major payload)
  put_u32(out, static_cast<std::uint32_t>(model.params.entries.size()));
  for (const auto& e : model.params.entries) {
    put_str(out, e.name);
    put_u8(out, group_to_u8(e.group));
    put_u8(out, sizeof(double));
    put_u64(out, static_cast<std::uint64_t>(e.value.rows()));
    put_u64(out, static_cast<std::uint64_t>(e.value.cols()));
    for (Index c = 0; c < e.value.cols(); ++c)
      for (Index r = 0; r < e.value.rows(); ++r)
        put_f64(out, e.value(r, c));
  }
  return out;
}

void save_model(const ModelBundle& bundle, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError("cannot write model file: " + path);
  const std::string bytes = serialize_model(bundle);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ContractError("failed writing model file: " + path);
}

ModelBundle deserialize_model(const std::string& bytes) {
  Reader r(bytes);
  if (r.raw(4) != "RMLP") throw ContractError("model file: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion)
    throw ContractError("model file: unsupported format version " +
                        std::to_string(version));

  const json meta = json::parse(r.str());
  ModelBundle bundle;
  bundle.schema = parse_schema(meta.at("schema").get<std::string>());
  bundle.seed = meta.at("seed").get<std::uint64_t>();
  if (meta.at("element_width").get<int>() != 8)
    throw ContractError("model file: unsupported element width");
  const auto kv =
      meta.at("config").get<std::map<std::string, std::string>>();
  ModelConfig config = config_from_kv(kv);
  if (to_string(config.task) != meta.at("task").get<std::string>())
    throw ContractError("model file: task/preset mismatch");
  const int output_width = meta.at("output_width").get<int>();

  // preprocessor
  FittedPreprocessor fp;
  fp.max_onehot = r.i32();
  const std::uint32_t n_plans = r.u32();
  for (std::uint32_t i = 0; i < n_plans; ++i) {
    CatPlanEntry plan;
    const std::uint8_t route = r.u8();
    if (route > 2) throw ContractError("model file: bad categorical route");
    plan.route = static_cast<CatRoute>(route);
    const std::uint32_t n_codes = r.u32();
    plan.train_codes.reserve(n_codes);
    for (std::uint32_t c = 0; c < n_codes; ++c)
      plan.train_codes.push_back(r.i32());
    fp.cat_plan.push_back(std::move(plan));
  }
  const std::uint32_t n_scalers = r.u32();
  for (std::uint32_t i = 0; i < n_scalers; ++i)
    fp.scalers.push_back(read_scaler(r));
  const std::uint32_t n_cols = r.u32();
  for (std::uint32_t i = 0; i < n_cols; ++i) {
    OutputColumnInfo info;
    info.source_column = static_cast<Index>(r.u64());
    info.from_numeric = r.u8() != 0;
    info.embed_eligible = r.u8() != 0;
    fp.columns.push_back(info);
  }
  const std::uint32_t n_routed = r.u32();
  for (std::uint32_t i = 0; i < n_routed; ++i) {
    fp.embed_routed.push_back(r.i32());
    fp.embed_cardinalities.push_back(r.i32());
  }

  // vocabularies and labels
  const std::uint32_t n_vocabs = r.u32();
  for (std::uint32_t i = 0; i < n_vocabs; ++i) {
    std::vector<std::string> vocab(r.u32());
    for (auto& v : vocab) v = r.str();
    bundle.vocabulary.cat_vocabs.push_back(std::move(vocab));
  }
  bundle.vocabulary.target_labels.resize(r.u32());
  for (auto& l : bundle.vocabulary.target_labels) l = r.str();

  TargetStandardizer standardizer;
  standardizer.mean = r.f64();
  standardizer.std = r.f64();
  standardizer.degenerate = r.u8() != 0;
  const double clip_lo = r.f64();
  const double clip_hi = r.f64();

  // rebuild the model structure, then overwrite every parameter array
  RngStream dummy(0, rng_purpose::init);
  bundle.model = build_model<double>(config, std::move(fp), output_width, dummy);
  bundle.model.standardizer = standardizer;
  bundle.model.clip_lo = clip_lo;
  bundle.model.clip_hi = clip_hi;
  bundle.model.target_labels = bundle.vocabulary.target_labels;

  const std::uint32_t n_params = r.u32();
  if (n_params != bundle.model.params.entries.size())
    throw ContractError("model file: parameter count mismatch");
  for (std::uint32_t i = 0; i < n_params; ++i) {
    auto& entry = bundle.model.params.entries[i];
    const std::string name = r.str();
    const ParamGroup group = group_from_u8(r.u8());
    const std::uint8_t width = r.u8();
    const auto rows = static_cast<Index>(r.u64());
    const auto cols = static_cast<Index>(r.u64());
    if (name != entry.name || group != entry.group || width != sizeof(double) ||
        rows != entry.value.rows() || cols != entry.value.cols())
      throw ContractError("model file: parameter '" + name +
                          "' does not match the model structure");
    for (Index c = 0; c < cols; ++c)
      for (Index rr = 0; rr < rows; ++rr) entry.value(rr, c) = r.f64();
  }
  if (!r.done()) throw ContractError("model file: trailing bytes");
  return bundle;
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace realmlp
