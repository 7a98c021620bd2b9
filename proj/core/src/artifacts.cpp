#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>
#include <vector>

#include <openssl/evp.h>

#include "myofeat/artifacts.hpp"
#include "myofeat/error.hpp"

#ifndef MYOFEAT_VERSION
#define MYOFEAT_VERSION "0.0.0"
#endif

namespace myofeat::artifacts {

namespace fs = std::filesystem;

std::string_view version() { return MYOFEAT_VERSION; }

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      EVP_MD_CTX_free(ctx_);
      throw Error("SHA-256 initialisation failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t size) {
    if (EVP_DigestUpdate(ctx_, data, size) != 1) throw Error("SHA-256 update failed");
  }
  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, digest, &len) != 1) throw Error("SHA-256 finalisation failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(kHex[digest[i] >> 4]);
      out.push_back(kHex[digest[i] & 15]);
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

std::string utc_stamp(const char* format) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out << text;
}

}  // namespace

std::string sha256_hex(std::span<const unsigned char> bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw LoadError(file.string() + ": cannot read");
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

fs::path timestamped_dir(const fs::path& base, std::string_view command) {
  const fs::path stem = base / (std::string(command) + "-" + utc_stamp("%Y%m%d-%H%M%S"));
  fs::path dir = stem;
  for (int i = 1; fs::exists(dir); ++i) dir = stem.string() + "-" + std::to_string(i);
  fs::create_directories(dir);
  return dir;
}

void write_run_record(const fs::path& dir, std::string_view command, const nlohmann::json& config,
                      std::uint64_t seed) {
  fs::create_directories(dir);
  write_text(dir / "config.json", config.dump(2) + "\n");
  write_text(dir / "seed.txt", std::to_string(seed) + "\n");
  const nlohmann::json stamp = {{"command", command},
                                {"version", version()},
                                {"created_utc", utc_stamp("%Y-%m-%dT%H:%M:%SZ")}};
  write_text(dir / "version.json", stamp.dump(2) + "\n");
}

nlohmann::json write_manifest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir);
    // version.json holds the wall-clock timestamp and would break byte-identical reruns.
    if (rel == "manifest.json" || rel == "version.json") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  nlohmann::json list = nlohmann::json::array();
  for (const auto& rel : files) {
    list.push_back({{"path", rel.generic_string()},
                    {"bytes", fs::file_size(dir / rel)},
                    {"sha256", sha256_file(dir / rel)}});
  }
  const nlohmann::json doc = {{"version", version()}, {"files", list}};
  write_text(dir / "manifest.json", doc.dump(2) + "\n");
  return doc;
}

}  // namespace myofeat::artifacts
