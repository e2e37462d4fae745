#include "mcsample/run_config.hpp"

#include <set>

#include "json.hpp"
#include "mcsample/error.hpp"
#include "mcsample/io_util.hpp"

namespace mcs {
namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "batch_size", "steps",     "seed",
      "budget",        "lambda",     "slope",      "multi_contrast", "depth", "base_channels", "residual",
      "data",          "out"};
  return keys;
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::Config, std::string("wrong type for key '") + key + "'");
  }
}

}  // namespace

RunConfig run_config_from_json(const std::string& text, RunConfig base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("config is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
  for (const auto& item : j.items())
    if (!known_keys().count(item.key())) throw Error(ErrorKind::Config, "unknown config key '" + item.key() + "'");

  RunConfig c = std::move(base);
  auto& t = c.train;
  read_key(j, "learning_rate", t.adam.learning_rate);
  read_key(j, "adam_beta1", t.adam.beta1);
  read_key(j, "adam_beta2", t.adam.beta2);
  read_key(j, "adam_eps", t.adam.eps);
  read_key(j, "batch_size", t.batch_size);
  read_key(j, "steps", t.steps);
  read_key(j, "seed", t.seed);
  read_key(j, "budget", t.budget);
  read_key(j, "lambda", t.sparsity);
  read_key(j, "slope", t.slope);
  read_key(j, "multi_contrast", t.multi_contrast);
  read_key(j, "depth", t.net.depth);
  read_key(j, "base_channels", t.net.base_channels);
  read_key(j, "residual", t.net.residual);
  read_key(j, "data", c.data);
  read_key(j, "out", c.out);
  t.net.seed = t.seed;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  return run_config_from_json(read_text_file(path), std::move(base));
}

std::string run_config_to_json(const RunConfig& c) {
  const auto& t = c.train;
  nlohmann::ordered_json j;
  j["learning_rate"] = t.adam.learning_rate;
  j["adam_beta1"] = t.adam.beta1;
  j["adam_beta2"] = t.adam.beta2;
  j["adam_eps"] = t.adam.eps;
  j["batch_size"] = t.batch_size;
  j["steps"] = t.steps;
  j["seed"] = t.seed;
  j["budget"] = t.budget;
  j["lambda"] = t.sparsity;
  j["slope"] = t.slope;
  j["multi_contrast"] = t.multi_contrast;
  j["depth"] = t.net.depth;
  j["base_channels"] = t.net.base_channels;
  j["residual"] = t.net.residual;
  j["data"] = c.data;
  j["out"] = c.out;
  return j.dump(2) + "\n";
}

void validate(const RunConfig& config) {
  try {
    validate(config.train);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    throw Error(ErrorKind::Config, e.what());
  }
}

}  // namespace mcs
