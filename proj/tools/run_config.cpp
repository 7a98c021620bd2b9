#include "run_config.hpp"

#include <fstream>

namespace myofeat::cli {

void check_keys(const nlohmann::json& given, const nlohmann::json& known, const std::string& where) {
  if (!given.is_object()) {
    if (known.is_object()) throw ConfigError(where + ": expected an object");
    return;
  }
  for (const auto& [key, value] : given.items()) {
    if (!known.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    check_keys(value, known.at(key), where + "." + key);
  }
}

training::TrainConfig desk_train_config() {
  training::TrainConfig c;
  c.arch.maps = 16;
  c.batch_size = 32;
  c.lr = 0.002;
  c.max_epochs = 30;
  c.patience = 8;
  return c;
}

nlohmann::json load_config(const std::filesystem::path& file) {
  if (file.empty()) return nlohmann::json::object();
  std::ifstream in(file);
  if (!in) throw LoadError(file.string() + ": cannot read config");
  try {
    auto doc = nlohmann::json::parse(in, nullptr, true, true);
    if (!doc.is_object()) throw ConfigError(file.string() + ": config must be a JSON object");
    return doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

}  // namespace myofeat::cli
