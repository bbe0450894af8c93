#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pipeforge/errors.hpp"
#include "pipeforge/learn.hpp"

namespace pipeforge {

namespace {

using json = nlohmann::ordered_json;
constexpr const char* kFormat = "pipeforge-checkpoint";
constexpr int kVersion = 1;

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mlp_to_json(const MlpParams& p) {
  json layers = json::array();
  for (const auto& l : p.layers) {
    const Eigen::VectorXd w = l.weight.reshaped();
    layers.push_back({{"rows", l.weight.rows()},
                      {"cols", l.weight.cols()},
                      {"activation", l.activation == Activation::kTanh ? "tanh" : "identity"},
                      {"weight", to_vector(w)},
                      {"bias", to_vector(l.bias)}});
  }
  return layers;
}

MlpParams mlp_from_json(const json& j) {
  MlpParams p;
  for (const auto& jl : j) {
    Layer l;
    const auto rows = jl.at("rows").get<Eigen::Index>();
    const auto cols = jl.at("cols").get<Eigen::Index>();
    const auto w = jl.at("weight").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols) {
      throw ConfigError("checkpoint layer weight has the wrong size");
    }
    l.weight = Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, cols);
    l.bias = to_eigen(jl.at("bias").get<std::vector<double>>());
    const auto act = jl.at("activation").get<std::string>();
    if (act != "tanh" && act != "identity") throw ConfigError("unknown activation '" + act + "'");
    l.activation = act == "tanh" ? Activation::kTanh : Activation::kIdentity;
    p.layers.push_back(std::move(l));
  }
  try {
    validate_mlp(p);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("checkpoint network is malformed: ") + e.what());
  }
  return p;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  const auto& p = c.policy;
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["obs_mode"] = std::string(to_string(c.obs_mode));
  j["step"] = c.step;
  j["config_hash"] = c.config_hash;
  j["config"] = c.config_text;
  j["policy"] = {{"mean", mlp_to_json(p.mean)},
                 {"log_std", {p.log_std(0), p.log_std(1), p.log_std(2)}},
                 {"value", mlp_to_json(p.value)},
                 {"normalizer",
                  {{"mean", to_vector(p.normalizer.mean)},
                   {"m2", to_vector(p.normalizer.m2)},
                   {"count", p.normalizer.count},
                   {"clip", p.normalizer.clip},
                   {"min_std", p.normalizer.min_std}}}};
  return j.dump() + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  Checkpoint c;
  try {
    if (j.at("format").get<std::string>() != kFormat || j.at("version").get<int>() != kVersion) {
      throw ConfigError("unsupported checkpoint format");
    }
    c.obs_mode = parse_obs_mode(j.at("obs_mode").get<std::string>());
    c.step = j.at("step").get<long>();
    c.config_hash = j.at("config_hash").get<std::string>();
    c.config_text = j.at("config").get<std::string>();
    const auto& jp = j.at("policy");
    c.policy.mean = mlp_from_json(jp.at("mean"));
    c.policy.value = mlp_from_json(jp.at("value"));
    const auto ls = jp.at("log_std").get<std::vector<double>>();
    if (ls.size() != 3) throw ConfigError("checkpoint log_std must have 3 entries");
    c.policy.log_std = {ls[0], ls[1], ls[2]};
    const auto& jn = jp.at("normalizer");
    c.policy.normalizer.mean = to_eigen(jn.at("mean").get<std::vector<double>>());
    c.policy.normalizer.m2 = to_eigen(jn.at("m2").get<std::vector<double>>());
    c.policy.normalizer.count = jn.at("count").get<double>();
    c.policy.normalizer.clip = jn.at("clip").get<double>();
    c.policy.normalizer.min_std = jn.at("min_std").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint is missing a field: ") + e.what());
  }
  const int dim = c.policy.obs_dim();
  if (static_cast<std::size_t>(dim) != obs_dim(c.obs_mode) || c.policy.value.input_dim() != dim ||
      c.policy.normalizer.mean.size() != dim || c.policy.normalizer.m2.size() != dim) {
    throw ConfigError("checkpoint dimensions do not match its observation mode");
  }
  const std::string actual = hash_hex(Config::from_text(c.config_text).full_hash());
  if (actual != c.config_hash) {
    throw ConfigError("checkpoint config hash mismatch: stored " + c.config_hash + ", snapshot " +
                      actual);
  }
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << serialize_checkpoint(checkpoint);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace pipeforge
