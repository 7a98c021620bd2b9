#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "myofeat/artifacts.hpp"

using namespace myofeat;
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> bytes(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("sha256 known answers") {
  CHECK(artifacts::sha256_hex(bytes("")) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(artifacts::sha256_hex(bytes("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("run record and manifest") {
  const auto base = fs::temp_directory_path() / "myofeat_artifacts";
  fs::remove_all(base);
  const auto dir = artifacts::timestamped_dir(base, "train");
  CHECK(fs::is_directory(dir));
  CHECK(dir.filename().string().rfind("train-", 0) == 0);
  const auto second = artifacts::timestamped_dir(base, "train");
  CHECK(second != dir);

  artifacts::write_run_record(dir, "train", nlohmann::json{{"lr", 0.1}}, 42);
  fs::create_directories(dir / "sub");
  {
    std::ofstream out(dir / "sub" / "a.txt");
    out << "abc";
  }
  const auto doc = artifacts::write_manifest(dir);
  CHECK(doc.at("version") == std::string(artifacts::version()));
  std::vector<std::string> paths;
  for (const auto& f : doc.at("files")) paths.push_back(f.at("path"));
  CHECK(paths == std::vector<std::string>{"config.json", "seed.txt", "sub/a.txt"});
  CHECK(doc.at("files")[2].at("bytes") == 3);
  CHECK(doc.at("files")[2].at("sha256") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  std::ifstream seed(dir / "seed.txt");
  std::string line;
  std::getline(seed, line);
  CHECK(line == "42");
  std::ifstream ver(dir / "version.json");
  const auto v = nlohmann::json::parse(ver);
  CHECK(v.contains("created_utc"));
  CHECK(v.at("command") == "train");
  fs::remove_all(base);
}
