#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "feature_methods.hpp"
#include "myofeat/error.hpp"
#include "myofeat/features.hpp"
#include "myofeat/parallel.hpp"

namespace myofeat::features {

std::string_view group_name(Group g) {
  switch (g) {
    case Group::SAP: return "SAP";
    case Group::FI: return "FI";
    case Group::NLC: return "NLC";
    case Group::TSM: return "TSM";
    case Group::UNI: return "UNI";
  }
  return "?";
}

std::string FeatureDescriptor::id() const {
  return outputs == 1 ? method : method + std::to_string(output_index + 1);
}

std::span<const MethodInfo> method_registry() { return detail::methods(); }

std::vector<FeatureDescriptor> feature_registry() {
  std::vector<FeatureDescriptor> out;
  for (const auto& m : method_registry()) {
    for (int i = 0; i < m.outputs; ++i) out.push_back({std::string(m.name), i, m.group, m.outputs});
  }
  return out;
}

const MethodInfo& method_info(std::string_view method) {
  for (const auto& m : method_registry())
    if (m.name == method) return m;
  throw ConfigError("unknown feature method '" + std::string(method) + "'");
}

std::vector<double> extract_method(std::string_view method, std::span<const double> samples,
                                   const FeatureConfig& config) {
  const auto& info = method_info(method);
  std::vector<double> out(static_cast<std::size_t>(info.outputs));
  detail::evaluate_method(method, samples, config, out);
  return out;
}

std::vector<double> extract_channel(std::span<const double> samples, const FeatureConfig& config) {
  std::vector<double> out(feature_registry().size());
  detail::evaluate_all(samples, config, out);
  return out;
}

// ---------------------------------------------------------------------------

FeaturePointCloud FeaturePointCloud::standardized() const {
  FeaturePointCloud out = *this;
  for (Eigen::Index r = 0; r < out.values.rows(); ++r) {
    auto row = out.values.row(r);
    const double mean = row.mean();
    const double var = (row.array() - mean).square().mean();
    if (var > 0.0) {
      row = (row.array() - mean) / std::sqrt(var);
    } else {
      row.setZero();
    }
  }
  return out;
}

FeaturePointCloud FeaturePointCloud::select_rows(std::span<const int> rows) const {
  FeaturePointCloud out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  out.column_labels = column_labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(rows[i]);
    out.row_labels.push_back(row_labels.at(static_cast<std::size_t>(rows[i])));
    out.row_groups.push_back(row_groups.at(static_cast<std::size_t>(rows[i])));
  }
  return out;
}

FeaturePointCloud FeaturePointCloud::concat(const FeaturePointCloud& top,
                                            const FeaturePointCloud& bottom) {
  if (top.values.cols() != bottom.values.cols() || top.column_labels != bottom.column_labels) {
    throw ConfigError("cannot concatenate point clouds with different column layouts");
  }
  FeaturePointCloud out;
  out.values.resize(top.values.rows() + bottom.values.rows(), top.values.cols());
  out.values << top.values, bottom.values;
  out.row_labels = top.row_labels;
  out.row_labels.insert(out.row_labels.end(), bottom.row_labels.begin(), bottom.row_labels.end());
  out.row_groups = top.row_groups;
  out.row_groups.insert(out.row_groups.end(), bottom.row_groups.begin(), bottom.row_groups.end());
  out.column_labels = top.column_labels;
  return out;
}

FeaturePointCloud extract_all(std::span<const dataio::Window> windows, const FeatureConfig& config) {
  if (windows.empty()) throw ConfigError("extract_all needs at least one window");
  const auto registry = feature_registry();
  const auto n_features = static_cast<Eigen::Index>(registry.size());
  const Eigen::Index columns = static_cast<Eigen::Index>(windows.size()) * dataio::kChannels;

  FeaturePointCloud cloud;
  cloud.values.resize(n_features, columns);
  for (const auto& d : registry) {
    cloud.row_labels.push_back(d.id());
    cloud.row_groups.emplace_back(group_name(d.group));
  }
  cloud.column_labels.reserve(static_cast<std::size_t>(columns));
  for (std::size_t n = 0; n < windows.size(); ++n) {
    dataio::validate_window(windows[n]);
    for (int c = 0; c < dataio::kChannels; ++c) cloud.column_labels.emplace_back(static_cast<int>(n), c);
  }

  parallel_for(static_cast<std::size_t>(columns), [&](std::size_t col) {
    const std::size_t n = col / dataio::kChannels;
    const auto c = static_cast<Eigen::Index>(col % dataio::kChannels);
    std::vector<double> samples(dataio::kWindowLength);
    for (int t = 0; t < dataio::kWindowLength; ++t) samples[static_cast<std::size_t>(t)] = windows[n].data(c, t);
    std::vector<double> values(registry.size());
    detail::evaluate_all(samples, config, values);
    for (Eigen::Index m = 0; m < n_features; ++m) {
      cloud.values(m, static_cast<Eigen::Index>(col)) = values[static_cast<std::size_t>(m)];
    }
  });

  // Sequential pass so the log order is deterministic.
  for (Eigen::Index col = 0; col < columns; ++col) {
    for (Eigen::Index m = 0; m < n_features; ++m) {
      double& v = cloud.values(m, col);
      if (!std::isfinite(v)) {
        spdlog::warn("non-finite feature {} at window {} channel {}; replaced by 0",
                     cloud.row_labels[static_cast<std::size_t>(m)], col / dataio::kChannels,
                     col % dataio::kChannels);
        v = 0.0;
      }
    }
  }
  return cloud;
}

// ---------------------------------------------------------------------------

void write_cloud_csv(const FeaturePointCloud& cloud, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out << "feature,group";
  for (const auto& [n, c] : cloud.column_labels) out << ",w" << n << 'c' << c;
  out << '\n';
  char buf[64];
  for (Eigen::Index r = 0; r < cloud.values.rows(); ++r) {
    out << cloud.row_labels[static_cast<std::size_t>(r)] << ',' << cloud.row_groups[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < cloud.values.cols(); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, cloud.values(r, c));
      out.put(',');
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

FeaturePointCloud read_cloud_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError(file.string() + ": cannot open");
  FeaturePointCloud cloud;
  std::string line;
  if (!std::getline(in, line)) throw LoadError(file.string() + ": empty file");
  {
    std::stringstream header(line);
    std::string field;
    int idx = 0;
    while (std::getline(header, field, ',')) {
      if (idx++ < 2) continue;
      int n = 0, c = 0;
      if (std::sscanf(field.c_str(), "w%dc%d", &n, &c) != 2) {
        throw LoadError(file.string() + ":1: bad column label '" + field + "'");
      }
      cloud.column_labels.emplace_back(n, c);
    }
  }
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string label, group, field;
    std::getline(ss, label, ',');
    std::getline(ss, group, ',');
    std::vector<double> row;
    row.reserve(cloud.column_labels.size());
    while (std::getline(ss, field, ',')) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw LoadError(file.string() + ":" + std::to_string(line_no) + ": non-numeric value");
      }
      row.push_back(v);
    }
    if (row.size() != cloud.column_labels.size()) {
      throw LoadError(file.string() + ":" + std::to_string(line_no) + ": wrong number of columns");
    }
    cloud.row_labels.push_back(label);
    cloud.row_groups.push_back(group);
    rows.push_back(std::move(row));
  }
  cloud.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cloud.column_labels.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      cloud.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return cloud;
}

void write_registry_json(const std::filesystem::path& file) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& d : feature_registry()) {
    doc.push_back({{"id", d.id()},
                   {"method", d.method},
                   {"output_index", d.output_index},
                   {"group", group_name(d.group)}});
  }
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out << doc.dump(1) << '\n';
}

}  // namespace myofeat::features
