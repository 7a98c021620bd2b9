#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "myofeat/convnet.hpp"
#include "myofeat/error.hpp"

namespace myofeat::convnet {

namespace {

constexpr char kMagic[8] = {'M', 'Y', 'O', 'F', 'C', 'N', 'N', '1'};

template <class U>
void put(std::ostream& out, U v) {
  static_assert(std::is_trivially_copyable_v<U>);
  std::array<unsigned char, sizeof(U)> bytes = std::bit_cast<std::array<unsigned char, sizeof(U)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(U));
}

template <class U>
U get(std::istream& in, const std::filesystem::path& file) {
  std::array<unsigned char, sizeof(U)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(U))) {
    throw LoadError(file.string() + ": truncated checkpoint");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<U>(bytes);
}

}  // namespace

void save_checkpoint(const ConvNet<float>& model, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw LoadError(file.string() + ": cannot write");
  const auto& a = model.arch();
  out.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, a.hash());
  for (int v : {a.channels, a.length, a.maps, a.kernel, a.blocks, a.gestures, a.domain_outputs}) {
    put<std::int32_t>(out, v);
  }
  for (double v : {a.leak, a.dropout, a.bn_eps, a.bn_momentum}) put<double>(out, v);
  const auto domains = model.stat_domains();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(domains.size()));
  put<std::uint64_t>(out, model.parameter_count());
  for (float w : model.parameters()) put<float>(out, w);
  for (int d : domains) {
    put<std::int32_t>(out, d);
    const auto& s = model.stats(d);
    for (int b = 0; b < a.blocks; ++b) {
      for (float v : s.mean[static_cast<std::size_t>(b)]) put<float>(out, v);
      for (float v : s.var[static_cast<std::size_t>(b)]) put<float>(out, v);
    }
  }

  nlohmann::json manifest = {
      {"format", "myofeat convnet checkpoint v1"},
      {"weights", file.filename().string()},
      {"architecture_hash", a.hash()},
      {"architecture",
       {{"channels", a.channels}, {"length", a.length}, {"maps", a.maps}, {"kernel", a.kernel},
        {"blocks", a.blocks}, {"gestures", a.gestures}, {"domain_outputs", a.domain_outputs},
        {"leak", a.leak}, {"dropout", a.dropout}, {"bn_eps", a.bn_eps},
        {"bn_momentum", a.bn_momentum}}},
      {"parameters", model.parameter_count()},
      {"bn_domains", domains}};
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : model.groups()) groups.push_back({{"name", g.name}, {"offset", g.offset}, {"size", g.size}});
  manifest["groups"] = std::move(groups);
  auto manifest_path = file;
  manifest_path += ".json";
  std::ofstream mf(manifest_path);
  if (!mf) throw LoadError(manifest_path.string() + ": cannot write");
  mf << manifest.dump(1) << '\n';
}

ConvNet<float> load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw LoadError(file.string() + ": cannot open");
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw LoadError(file.string() + ": not a myofeat checkpoint");
  }
  const auto hash = get<std::uint64_t>(in, file);
  Architecture a;
  a.channels = get<std::int32_t>(in, file);
  a.length = get<std::int32_t>(in, file);
  a.maps = get<std::int32_t>(in, file);
  a.kernel = get<std::int32_t>(in, file);
  a.blocks = get<std::int32_t>(in, file);
  a.gestures = get<std::int32_t>(in, file);
  a.domain_outputs = get<std::int32_t>(in, file);
  a.leak = get<double>(in, file);
  a.dropout = get<double>(in, file);
  a.bn_eps = get<double>(in, file);
  a.bn_momentum = get<double>(in, file);
  if (a.hash() != hash) throw LoadError(file.string() + ": architecture hash mismatch");
  const auto n_domains = get<std::uint32_t>(in, file);
  const auto n_params = get<std::uint64_t>(in, file);
  ConvNet<float> model(a, 0);
  if (n_params != model.parameter_count()) throw LoadError(file.string() + ": parameter count mismatch");
  std::vector<float> w(n_params);
  for (auto& v : w) v = get<float>(in, file);
  model.set_parameters(w);
  for (std::uint32_t i = 0; i < n_domains; ++i) {
    const int d = get<std::int32_t>(in, file);
    BnStats<float> s;
    for (int b = 0; b < a.blocks; ++b) {
      Vec<float> mean(a.maps), var(a.maps);
      for (int m = 0; m < a.maps; ++m) mean[m] = get<float>(in, file);
      for (int m = 0; m < a.maps; ++m) var[m] = get<float>(in, file);
      s.mean.push_back(std::move(mean));
      s.var.push_back(std::move(var));
    }
    model.set_stats(d, std::move(s));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError(file.string() + ": trailing bytes");
  return model;
}

}  // namespace myofeat::convnet
