#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "myofeat/dataio.hpp"
#include "myofeat/error.hpp"

namespace myofeat::dataio {

namespace fs = std::filesystem;
using nlohmann::json;

void validate_window(const Window& w) {
  if (w.data.rows() != kChannels || w.data.cols() != kWindowLength) {
    throw LoadError("window must be 10x151, got " + std::to_string(w.data.rows()) +
                    "x" + std::to_string(w.data.cols()));
  }
  if (!w.data.allFinite()) throw LoadError("window contains non-finite samples");
}

int window_count(int samples, int window_len, int step) {
  if (window_len <= 0 || step <= 0) throw ConfigError("window length and step must be positive");
  if (samples < window_len) return 0;
  return (samples - window_len) / step + 1;
}

std::vector<Eigen::MatrixXd> segment(const Eigen::MatrixXd& signal, int window_len,
                                     int step) {
  const int count = window_count(static_cast<int>(signal.cols()), window_len, step);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out.emplace_back(signal.middleCols(static_cast<Eigen::Index>(i) * step, window_len));
  }
  return out;
}

std::vector<Window> preprocess(const Recording& recording, const FilterSpec& spec,
                               PreprocessOrder order) {
  if (recording.samples.rows() != kChannels) {
    throw LoadError("expected 10 channels, got " + std::to_string(recording.samples.rows()));
  }
  const ButterworthBandpass filter(spec);
  std::vector<Eigen::MatrixXd> frames;
  if (order == PreprocessOrder::FilterThenSegment) {
    if (recording.samples.cols() < kWindowLength) return {};
    frames = segment(filter.apply_rows(recording.samples));
  } else {
    frames = segment(recording.samples);
    for (auto& f : frames) f = filter.apply_rows(f);
  }
  std::vector<Window> windows;
  windows.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    windows.push_back({std::move(frames[i]), recording.participant_id, recording.cycle_id,
                       recording.gesture_id, static_cast<int>(i)});
  }
  return windows;
}

std::vector<Window> preprocess_all(std::span<const Recording> recordings,
                                   const FilterSpec& spec, PreprocessOrder order) {
  std::vector<Window> all;
  for (const auto& r : recordings) {
    auto w = preprocess(r, spec, order);
    std::move(w.begin(), w.end(), std::back_inserter(all));
  }
  return all;
}

// ---------------------------------------------------------------------------

std::string recording_file_name(int participant, int cycle, int gesture) {
  return "p" + std::to_string(participant) + "_c" + std::to_string(cycle) + "_g" +
         std::to_string(gesture) + ".csv";
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view field, double& out) {
  field = trim(field);
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

}  // namespace

Recording load_recording_csv(const fs::path& file) {
  static const std::regex pattern(R"(p(\d+)_c(\d+)_g(\d+)\.csv)");
  std::smatch m;
  const std::string name = file.filename().string();
  if (!std::regex_match(name, m, pattern)) {
    throw LoadError(file.string() + ": file name does not match p<participant>_c<cycle>_g<gesture>.csv");
  }
  Recording rec;
  rec.participant_id = std::stoi(m[1]);
  rec.cycle_id = std::stoi(m[2]);
  rec.gesture_id = std::stoi(m[3]);
  if (rec.gesture_id < 0 || rec.gesture_id >= kGestures) {
    throw LoadError(file.string() + ": gesture id must be in [0,10]");
  }

  std::ifstream in(file);
  if (!in) throw LoadError(file.string() + ": cannot open");
  std::vector<double> values;
  std::string line;
  int line_no = 0;
  long rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::array<double, kChannels> row{};
    bool numeric = fields.size() == kChannels;
    if (numeric) {
      for (int c = 0; c < kChannels; ++c) numeric = numeric && parse_double(fields[c], row[c]);
    }
    if (!numeric) {
      // A header is allowed on the first line only.
      const bool header_like = line_no == 1 && std::none_of(fields.begin(), fields.end(), [](auto f) {
                                 double v;
                                 return parse_double(f, v);
                               });
      if (header_like) {
        if (fields.size() != kChannels) {
          throw LoadError(file.string() + ":" + std::to_string(line_no) +
                          ": expected 10 channels, got " + std::to_string(fields.size()));
        }
        continue;
      }
      if (fields.size() != kChannels) {
        throw LoadError(file.string() + ":" + std::to_string(line_no) +
                        ": expected 10 channels, got " + std::to_string(fields.size()));
      }
      throw LoadError(file.string() + ":" + std::to_string(line_no) + ": non-numeric sample");
    }
    for (double v : row) {
      if (!std::isfinite(v)) {
        throw LoadError(file.string() + ":" + std::to_string(line_no) + ": non-finite sample");
      }
    }
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  // values is row-major samples x channels; transpose into channels x samples.
  rec.samples = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, kChannels, Eigen::RowMajor>>(
                    values.data(), rows, kChannels)
                    .transpose();
  return rec;
}

std::vector<Recording> load_recordings(const fs::path& directory) {
  if (!fs::is_directory(directory)) {
    throw LoadError(directory.string() + ": not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::vector<Recording> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_recording_csv(f));
  if (out.empty()) spdlog::warn("no recordings found in {}", directory.string());
  std::sort(out.begin(), out.end(), [](const Recording& a, const Recording& b) {
    return std::tie(a.participant_id, a.cycle_id, a.gesture_id) <
           std::tie(b.participant_id, b.cycle_id, b.gesture_id);
  });
  return out;
}

void write_recording_csv(const Recording& recording, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  char buf[64];
  for (Eigen::Index t = 0; t < recording.samples.cols(); ++t) {
    for (Eigen::Index c = 0; c < recording.samples.rows(); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, recording.samples(c, t));
      if (c) out.put(',');
      out.write(buf, res.ptr - buf);
    }
    out.put('\n');
  }
}

void write_recordings(std::span<const Recording> recordings, const fs::path& directory) {
  fs::create_directories(directory);
  for (const auto& r : recordings) {
    write_recording_csv(r, directory / recording_file_name(r.participant_id, r.cycle_id, r.gesture_id));
  }
}

// ---------------------------------------------------------------------------

namespace {

void write_f32_le(std::ostream& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

float read_f32_le(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  return std::bit_cast<float>(bits);
}

}  // namespace

void write_windows(std::span<const Window> windows, const fs::path& bin_file,
                   const fs::path& index_file) {
  std::ofstream bin(bin_file, std::ios::binary);
  if (!bin) throw LoadError(bin_file.string() + ": cannot write");
  json index = json::array();
  for (const auto& w : windows) {
    validate_window(w);
    for (int c = 0; c < kChannels; ++c)
      for (int t = 0; t < kWindowLength; ++t) write_f32_le(bin, static_cast<float>(w.data(c, t)));
    index.push_back({{"participant", w.participant_id},
                     {"cycle", w.cycle_id},
                     {"gesture", w.gesture_id},
                     {"window", w.window_index}});
  }
  json doc = {{"format", "float32-le row-major"},
              {"rows", kChannels},
              {"cols", kWindowLength},
              {"count", windows.size()},
              {"labels", std::move(index)}};
  std::ofstream idx(index_file);
  if (!idx) throw LoadError(index_file.string() + ": cannot write");
  idx << doc.dump(1) << '\n';
}

std::vector<Window> read_windows(const fs::path& bin_file, const fs::path& index_file) {
  std::ifstream idx(index_file);
  if (!idx) throw LoadError(index_file.string() + ": cannot open");
  json doc;
  try {
    idx >> doc;
  } catch (const json::exception& e) {
    throw LoadError(index_file.string() + ": " + e.what());
  }
  const auto& labels = doc.at("labels");
  const std::size_t frame_bytes = sizeof(float) * kChannels * kWindowLength;
  std::ifstream bin(bin_file, std::ios::binary);
  if (!bin) throw LoadError(bin_file.string() + ": cannot open");
  std::vector<char> buf((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (buf.size() != frame_bytes * labels.size()) {
    throw LoadError(bin_file.string() + ": size does not match index (" +
                    std::to_string(labels.size()) + " frames)");
  }
  std::vector<Window> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Window w;
    w.data.resize(kChannels, kWindowLength);
    const char* p = buf.data() + i * frame_bytes;
    for (int c = 0; c < kChannels; ++c)
      for (int t = 0; t < kWindowLength; ++t, p += sizeof(float)) w.data(c, t) = read_f32_le(p);
    w.participant_id = labels[i].at("participant");
    w.cycle_id = labels[i].at("cycle");
    w.gesture_id = labels[i].at("gesture");
    w.window_index = labels[i].at("window");
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace myofeat::dataio
