#include "weights.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "byte_io.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace latentsearch::weights {

using numerics::ConvParams;
using numerics::DeconvParams;
using numerics::LinearParams;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'L', 'I', 'C', 'W'};

std::string stage(const char* prefix, int i, const char* leaf) {
  return std::string(prefix) + "." + std::to_string(i) + "." + leaf;
}

ConvParams make_conv(int in, int out, int stride, int pad) {
  ConvParams p;
  p.in_ch = in;
  p.out_ch = out;
  p.kernel = 3;
  p.stride = stride;
  p.padding = pad;
  p.weights.assign(static_cast<std::size_t>(out) * in * 9, 0.0f);
  p.bias.assign(out, 0.0f);
  return p;
}

DeconvParams make_deconv(int in, int out) {
  DeconvParams p;
  p.in_ch = in;
  p.out_ch = out;
  p.weights.assign(static_cast<std::size_t>(out) * in * 9, 0.0f);
  p.bias.assign(out, 0.0f);
  return p;
}

LinearParams make_linear(int in, int out) {
  LinearParams p;
  p.in_dim = in;
  p.out_dim = out;
  p.weights.assign(static_cast<std::size_t>(out) * in, 0.0f);
  p.bias.assign(out, 0.0f);
  return p;
}

// He-uniform with an extra gain; fan_in counts the taps that reach one output.
void fill(std::vector<float>& v, Rng& rng, double fan_in, double gain) {
  const auto bound = static_cast<float>(gain * std::sqrt(6.0 / fan_in));
  for (float& x : v) x = rng.uniform(-bound, bound);
}

void fill_bias(std::vector<float>& v, Rng& rng, float bound) {
  for (float& x : v) x = rng.uniform(-bound, bound);
}

adapter::AdapterWeights adapter_skeleton(const ModelConfig& c) {
  adapter::AdapterWeights a;
  a.branch_b = make_conv(c.m_ch, c.adapter_ch, 2, 1);
  a.branch_c1 = make_conv(c.m_ch, c.adapter_ch, 2, 1);
  a.branch_c2 = make_conv(c.adapter_ch, c.adapter_ch, 2, 1);
  a.fusion[0] = make_linear(c.m_ch + 2 * c.adapter_ch, c.fusion_hidden);
  a.fusion[1] = make_linear(c.fusion_hidden, c.fusion_hidden);
  a.fusion[2] = make_linear(c.fusion_hidden, c.embed_dim);
  return a;
}

codec::CodecWeights codec_skeleton(const ModelConfig& c) {
  codec::CodecWeights w;
  w.ga = {make_conv(3, c.n_ch, 2, 1), make_conv(c.n_ch, c.n_ch, 2, 1), make_conv(c.n_ch, c.n_ch, 2, 1),
          make_conv(c.n_ch, c.m_ch, 2, 1)};
  w.gs = {make_deconv(c.m_ch, c.n_ch), make_deconv(c.n_ch, c.n_ch), make_deconv(c.n_ch, c.n_ch),
          make_deconv(c.n_ch, 3)};
  w.ha = {make_conv(c.m_ch, c.hz_ch, 2, 1), make_conv(c.hz_ch, c.hz_ch, 2, 1)};
  w.hs = {make_deconv(c.hz_ch, c.n_ch), make_deconv(c.n_ch, 2 * c.m_ch)};
  return w;
}

void randomize_adapter(adapter::AdapterWeights& a, Rng& rng) {
  for (ConvParams* p : {&a.branch_b, &a.branch_c1, &a.branch_c2}) {
    fill(p->weights, rng, p->in_ch * 9.0, 1.0);
    fill_bias(p->bias, rng, 0.05f);
  }
  for (auto& f : a.fusion) {
    fill(f.weights, rng, f.in_dim, 1.0);
    fill_bias(f.bias, rng, 0.05f);
  }
}

codec::FactorizedPrior random_prior(const ModelConfig& c, Rng& rng) {
  std::vector<double> scales(c.hz_ch);
  for (double& s : scales) s = rng.uniform(0.5f, 3.0f);
  return codec::FactorizedPrior::logistic(scales, c.z_min, c.z_max);
}

// Four taps cover a 2x2 block: offsets (0,0),(0,1),(1,0),(1,1) from the
// stride-aligned origin sit at kernel indices (1..2, 1..2).
void set_block_taps(std::vector<float>& w, std::size_t kernel_base, float value) {
  for (int ky = 1; ky <= 2; ++ky)
    for (int kx = 1; kx <= 2; ++kx) w[kernel_base + ky * 3 + kx] = value;
}

std::vector<float> to_float(std::span<const uint32_t> v) { return {v.begin(), v.end()}; }

ArchiveTensor tensor(std::vector<int64_t> shape, std::vector<float> data) { return {std::move(shape), std::move(data)}; }

const ArchiveTensor& need(const WeightArchive& a, const std::string& name, std::size_t expected) {
  const auto it = a.tensors.find(name);
  require(it != a.tensors.end(), ErrorCode::kInvalidArgument, "weight archive lacks tensor " + name);
  if (it->second.data.size() != expected) {
    fail(ErrorCode::kShapeMismatch, "tensor " + name + " has " + std::to_string(it->second.data.size()) +
                                        " values, expected " + std::to_string(expected));
  }
  return it->second;
}

template <typename P>
void load_params(const WeightArchive& a, const std::string& base, P& p) {
  p.weights = need(a, base + ".w", p.weights.size()).data;
  p.bias = need(a, base + ".b", p.bias.size()).data;
}

template <typename P>
void store_params(WeightArchive& a, const std::string& base, const P& p, std::vector<int64_t> wshape) {
  a.tensors[base + ".w"] = tensor(std::move(wshape), p.weights);
  a.tensors[base + ".b"] = tensor({static_cast<int64_t>(p.bias.size())}, p.bias);
}

// Rejects duplicate keys anywhere in the metadata.
json parse_strict(const std::string& text) {
  std::vector<std::set<std::string>> seen;
  json::parser_callback_t cb = [&seen](int, json::parse_event_t event, json& parsed) {
    if (event == json::parse_event_t::object_start) {
      seen.emplace_back();
    } else if (event == json::parse_event_t::object_end) {
      seen.pop_back();
    } else if (event == json::parse_event_t::key) {
      const auto key = parsed.get<std::string>();
      if (!seen.back().insert(key).second) fail(ErrorCode::kCorruptStream, "weight archive repeats key " + key);
    }
    return true;
  };
  try {
    return json::parse(text, cb);
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorruptStream, std::string("weight archive metadata: ") + e.what());
  }
}

}  // namespace

void ModelConfig::validate() const {
  require(n_ch >= 1 && m_ch >= 1 && hz_ch >= 1 && embed_dim >= 1 && adapter_ch >= 1 && fusion_hidden >= 1,
          ErrorCode::kInvalidArgument, "model dimensions must be positive");
  require(z_min <= z_max, ErrorCode::kInvalidArgument, "empty hyper-latent symbol range");
}

std::vector<std::string> canonical_tensor_names() {
  std::vector<std::string> names;
  for (int i = 0; i < 4; ++i) names.insert(names.end(), {stage("ga", i, "w"), stage("ga", i, "b")});
  for (int i = 0; i < 4; ++i) names.insert(names.end(), {stage("gs", i, "w"), stage("gs", i, "b")});
  for (int i = 0; i < 2; ++i) names.insert(names.end(), {stage("ha", i, "w"), stage("ha", i, "b")});
  for (int i = 0; i < 2; ++i) names.insert(names.end(), {stage("hs", i, "w"), stage("hs", i, "b")});
  for (const char* b : {"branch_b", "branch_c1", "branch_c2"}) {
    names.push_back(std::string("adapter.") + b + ".w");
    names.push_back(std::string("adapter.") + b + ".b");
  }
  for (int i = 0; i < 3; ++i) names.insert(names.end(), {stage("adapter.fusion", i, "w"), stage("adapter.fusion", i, "b")});
  names.insert(names.end(), {"prior.factorized.cdf", "prior.factorized.offset", "prior.gaussian.scales"});
  return names;
}

WeightArchive to_archive(const ModelWeights& m) {
  WeightArchive a;
  a.config = m.config;
  const auto conv_shape = [](const ConvParams& p) {
    return std::vector<int64_t>{p.out_ch, p.in_ch, p.kernel, p.kernel};
  };
  const auto deconv_shape = [](const DeconvParams& p) {
    return std::vector<int64_t>{p.in_ch, p.out_ch, p.kernel, p.kernel};
  };
  for (int i = 0; i < 4; ++i) store_params(a, "ga." + std::to_string(i), m.codec.ga[i], conv_shape(m.codec.ga[i]));
  for (int i = 0; i < 4; ++i) store_params(a, "gs." + std::to_string(i), m.codec.gs[i], deconv_shape(m.codec.gs[i]));
  for (int i = 0; i < 2; ++i) store_params(a, "ha." + std::to_string(i), m.codec.ha[i], conv_shape(m.codec.ha[i]));
  for (int i = 0; i < 2; ++i) store_params(a, "hs." + std::to_string(i), m.codec.hs[i], deconv_shape(m.codec.hs[i]));
  store_params(a, "adapter.branch_b", m.adapter.branch_b, conv_shape(m.adapter.branch_b));
  store_params(a, "adapter.branch_c1", m.adapter.branch_c1, conv_shape(m.adapter.branch_c1));
  store_params(a, "adapter.branch_c2", m.adapter.branch_c2, conv_shape(m.adapter.branch_c2));
  for (int i = 0; i < 3; ++i) {
    const auto& f = m.adapter.fusion[i];
    store_params(a, "adapter.fusion." + std::to_string(i), f, {f.out_dim, f.in_dim});
  }

  const auto& prior = m.priors.factorized;
  const int symbols = prior.cdf(0).num_symbols();
  std::vector<float> cdf;
  std::vector<float> offsets;
  for (int c = 0; c < prior.channels(); ++c) {
    require(prior.cdf(c).num_symbols() == symbols, ErrorCode::kInvalidArgument,
            "archive requires equal symbol counts across factorized channels");
    const auto row = to_float(prior.cdf(c).cum);
    cdf.insert(cdf.end(), row.begin(), row.end());
    offsets.push_back(static_cast<float>(prior.cdf(c).offset));
  }
  a.tensors["prior.factorized.cdf"] = tensor({prior.channels(), symbols + 1}, std::move(cdf));
  a.tensors["prior.factorized.offset"] = tensor({prior.channels()}, std::move(offsets));
  const auto scales = m.priors.gaussian.scale_table();
  a.tensors["prior.gaussian.scales"] =
      tensor({static_cast<int64_t>(scales.size())}, std::vector<float>(scales.begin(), scales.end()));
  return a;
}

ModelWeights from_archive(const WeightArchive& a) {
  std::vector<std::string> missing;
  for (const auto& name : canonical_tensor_names()) {
    if (!a.tensors.contains(name)) missing.push_back(name);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& n : missing) list += (list.empty() ? "" : ", ") + n;
    fail(ErrorCode::kInvalidArgument, "weight archive is missing tensors: " + list);
  }
  a.config.validate();

  ModelWeights m;
  m.config = a.config;
  m.codec = codec_skeleton(a.config);
  m.adapter = adapter_skeleton(a.config);
  for (int i = 0; i < 4; ++i) load_params(a, "ga." + std::to_string(i), m.codec.ga[i]);
  for (int i = 0; i < 4; ++i) load_params(a, "gs." + std::to_string(i), m.codec.gs[i]);
  for (int i = 0; i < 2; ++i) load_params(a, "ha." + std::to_string(i), m.codec.ha[i]);
  for (int i = 0; i < 2; ++i) load_params(a, "hs." + std::to_string(i), m.codec.hs[i]);
  load_params(a, "adapter.branch_b", m.adapter.branch_b);
  load_params(a, "adapter.branch_c1", m.adapter.branch_c1);
  load_params(a, "adapter.branch_c2", m.adapter.branch_c2);
  for (int i = 0; i < 3; ++i) load_params(a, "adapter.fusion." + std::to_string(i), m.adapter.fusion[i]);

  const ArchiveTensor& cdf = a.tensors.at("prior.factorized.cdf");
  require(cdf.shape.size() == 2 && cdf.shape[0] == a.config.hz_ch && cdf.shape[1] >= 2, ErrorCode::kShapeMismatch,
          "prior.factorized.cdf must be [hz_ch, symbols + 1]");
  const auto row_len = static_cast<std::size_t>(cdf.shape[1]);
  const ArchiveTensor& offsets = need(a, "prior.factorized.offset", static_cast<std::size_t>(a.config.hz_ch));
  std::vector<codec::QuantizedCdf> channels;
  for (int c = 0; c < a.config.hz_ch; ++c) {
    codec::QuantizedCdf q;
    q.offset = static_cast<int32_t>(offsets.data[c]);
    for (std::size_t j = 0; j < row_len; ++j) {
      const float v = cdf.data[c * row_len + j];
      require(v >= 0.0f && v <= static_cast<float>(codec::kCdfTotal) && v == std::floor(v), ErrorCode::kCorruptStream,
              "prior.factorized.cdf holds a non-integer frequency");
      q.cum.push_back(static_cast<uint32_t>(v));
    }
    channels.push_back(std::move(q));
  }
  m.priors.factorized = codec::FactorizedPrior(std::move(channels));
  const ArchiveTensor& scales = a.tensors.at("prior.gaussian.scales");
  m.priors.gaussian = codec::GaussianConditional(scales.data);

  m.codec.validate();
  m.adapter.validate();
  return m;
}

std::vector<uint8_t> WeightArchive::serialize() const {
  json meta;
  meta["format"] = "LICW";
  meta["model_id"] = config.model_id;
  meta["config"] = {{"n_ch", config.n_ch},           {"m_ch", config.m_ch},
                    {"hz_ch", config.hz_ch},         {"embed_dim", config.embed_dim},
                    {"adapter_ch", config.adapter_ch}, {"fusion_hidden", config.fusion_hidden},
                    {"z_min", config.z_min},         {"z_max", config.z_max}};
  json entries = json::object();
  uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    entries[name] = {{"dtype", "f32"}, {"shape", t.shape}, {"offset", offset}};
    offset += t.data.size() * sizeof(float);
  }
  meta["tensors"] = std::move(entries);
  const std::string text = meta.dump();

  std::vector<uint8_t> out;
  out.reserve(12 + text.size() + offset);
  ByteWriter w(out);
  w.bytes({reinterpret_cast<const uint8_t*>(kMagic), 4});
  w.put<uint32_t>(kArchiveVersion);
  w.put<uint32_t>(static_cast<uint32_t>(text.size()));
  w.text(text);
  for (const auto& [name, t] : tensors) {
    for (float v : t.data) w.put<float>(v);
  }
  return out;
}

WeightArchive WeightArchive::parse(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, "weight archive");
  if (std::memcmp(r.bytes(4).data(), kMagic, 4) != 0) fail(ErrorCode::kBadMagic, "not a LICW weight archive");
  const auto version = r.get<uint32_t>();
  if (version != kArchiveVersion) {
    fail(ErrorCode::kUnsupportedVersion, "weight archive version " + std::to_string(version) + " unsupported");
  }
  const auto meta_len = r.get<uint32_t>();
  const auto meta_bytes = r.bytes(meta_len);
  const json meta = parse_strict(std::string(meta_bytes.begin(), meta_bytes.end()));
  const auto blob = bytes.subspan(r.position());

  WeightArchive a;
  try {
    const json& c = meta.at("config");
    a.config.n_ch = c.at("n_ch");
    a.config.m_ch = c.at("m_ch");
    a.config.hz_ch = c.at("hz_ch");
    a.config.embed_dim = c.at("embed_dim");
    a.config.adapter_ch = c.at("adapter_ch");
    a.config.fusion_hidden = c.at("fusion_hidden");
    a.config.z_min = c.at("z_min");
    a.config.z_max = c.at("z_max");
    a.config.model_id = meta.at("model_id").get<uint8_t>();
    for (const auto& [name, entry] : meta.at("tensors").items()) {
      require(entry.at("dtype") == "f32", ErrorCode::kCorruptStream, "tensor " + name + " has unsupported dtype");
      ArchiveTensor t;
      t.shape = entry.at("shape").get<std::vector<int64_t>>();
      uint64_t count = 1;
      for (int64_t d : t.shape) {
        require(d >= 1 && d <= (int64_t{1} << 31), ErrorCode::kCorruptStream, "tensor " + name + " has a bad extent");
        count *= static_cast<uint64_t>(d);
      }
      const auto offset = entry.at("offset").get<uint64_t>();
      require(offset % sizeof(float) == 0 && offset <= blob.size() && count <= (blob.size() - offset) / sizeof(float),
              ErrorCode::kCorruptStream, "tensor " + name + " lies outside the blob");
      t.data.resize(count);
      std::memcpy(t.data.data(), blob.data() + offset, count * sizeof(float));
      a.tensors.emplace(name, std::move(t));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorruptStream, std::string("weight archive metadata: ") + e.what());
  }
  return a;
}

void WeightArchive::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(f), ErrorCode::kIo, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(f), ErrorCode::kIo, "short write to " + path.string());
}

WeightArchive WeightArchive::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::kIo, "cannot open weight archive " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse(bytes);
}

ModelWeights generate_random(const ModelConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ModelWeights m;
  m.config = config;
  m.codec = codec_skeleton(config);
  auto& w = m.codec;
  for (int i = 0; i < 4; ++i) {
    // The last analysis stage is amplified so latents span several integers.
    fill(w.ga[i].weights, rng, w.ga[i].in_ch * 9.0, i == 3 ? 3.0 : 1.0);
  }
  // First-stage filters keep a tenth of their DC response and analysis biases
  // stay zero: flat regions map to small latents and code cheaply, but colour
  // still reaches the latent so distinct flat images stay apart.
  for (std::size_t k = 0; k < w.ga[0].weights.size(); k += 9) {
    float mean = 0.0f;
    for (std::size_t t = 0; t < 9; ++t) mean += w.ga[0].weights[k + t];
    mean /= 9.0f;
    for (std::size_t t = 0; t < 9; ++t) w.ga[0].weights[k + t] -= 0.9f * mean;
  }
  for (int i = 0; i < 4; ++i) {
    fill(w.gs[i].weights, rng, w.gs[i].in_ch * 9.0 / 4.0, i == 0 ? 0.3 : 1.0);
    fill_bias(w.gs[i].bias, rng, 0.05f);
  }
  w.gs[3].bias.assign(3, 0.5f);
  for (auto& p : w.ha) {
    fill(p.weights, rng, p.in_ch * 9.0, 0.8);
    fill_bias(p.bias, rng, 0.05f);
  }
  fill(w.hs[0].weights, rng, w.hs[0].in_ch * 9.0 / 4.0, 1.0);
  fill_bias(w.hs[0].bias, rng, 0.05f);
  fill(w.hs[1].weights, rng, w.hs[1].in_ch * 9.0 / 4.0, 0.3);
  // Second half of hs output is the raw scale; bias it towards sigma ~ 2.
  for (int c = 0; c < 2 * config.m_ch; ++c) w.hs[1].bias[c] = c < config.m_ch ? 0.0f : 2.0f;

  m.priors.factorized = random_prior(config, rng);
  m.priors.gaussian = codec::GaussianConditional();
  m.adapter = adapter_skeleton(config);
  randomize_adapter(m.adapter, rng);
  return m;
}

ModelWeights generate_block_mean(const ModelConfig& config, uint64_t seed) {
  config.validate();
  require(config.n_ch >= 3 && config.m_ch >= 3 && config.hz_ch >= 3, ErrorCode::kInvalidArgument, "block-mean codec needs >= 3 channels");
  constexpr float kLevels = 16.0f;
  ModelWeights m;
  m.config = config;
  m.codec = codec_skeleton(config);
  auto& w = m.codec;
  for (int i = 0; i < 4; ++i) {
    const float gain = i == 3 ? 0.25f * kLevels : 0.25f;
    for (int c = 0; c < 3; ++c) set_block_taps(w.ga[i].weights, (static_cast<std::size_t>(c) * w.ga[i].in_ch + c) * 9, gain);
  }
  for (int i = 0; i < 4; ++i) {
    const float gain = i == 0 ? 1.0f / kLevels : 1.0f;
    // Deconv weights are [in, out, k, k].
    for (int c = 0; c < 3; ++c) set_block_taps(w.gs[i].weights, (static_cast<std::size_t>(c) * w.gs[i].out_ch + c) * 9, gain);
  }
  // Latents are centred: y = 16 * mean - 8. The hyper path carries the mean of
  // each 4x4 latent block as z and hands it back as mu, with a tight sigma, so
  // flat content codes to all-zero residuals. Biases of +-8 keep the values
  // non-negative across the relu between stages.
  const float half = kLevels / 2.0f;
  for (int c = 0; c < 3; ++c) {
    w.ga[3].bias[c] = -half;
    w.gs[0].bias[c] = 0.5f;
    set_block_taps(w.ha[0].weights, (static_cast<std::size_t>(c) * w.ha[0].in_ch + c) * 9, 0.25f);
    set_block_taps(w.ha[1].weights, (static_cast<std::size_t>(c) * w.ha[1].in_ch + c) * 9, 0.25f);
    w.ha[0].bias[c] = half;
    w.ha[1].bias[c] = -half;
    set_block_taps(w.hs[0].weights, (static_cast<std::size_t>(c) * w.hs[0].out_ch + c) * 9, 1.0f);
    set_block_taps(w.hs[1].weights, (static_cast<std::size_t>(c) * w.hs[1].out_ch + c) * 9, 1.0f);
    w.hs[0].bias[c] = half;
    w.hs[1].bias[c] = -half;
    w.hs[1].bias[config.m_ch + c] = 0.11f;
  }
  Rng rng(seed);
  std::vector<double> scales(config.hz_ch, 0.5);
  for (int c = 0; c < 3; ++c) scales[c] = 4.0;
  m.priors.factorized = codec::FactorizedPrior::logistic(scales, config.z_min, config.z_max);
  m.priors.gaussian = codec::GaussianConditional();
  m.adapter = adapter_skeleton(config);
  randomize_adapter(m.adapter, rng);
  return m;
}

}  // namespace latentsearch::weights
