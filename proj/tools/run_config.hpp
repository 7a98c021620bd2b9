#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "myofeat/dataio.hpp"
#include "myofeat/error.hpp"
#include "myofeat/features.hpp"
#include "myofeat/interpret.hpp"
#include "myofeat/mapper.hpp"
#include "myofeat/training.hpp"

// JSON mappings for the library configuration structs. Missing keys keep
// their defaults; unknown keys are rejected by check_keys.

namespace myofeat::dataio {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FilterSpec, low_hz, high_hz, order, sample_rate)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SynthConfig, n_domains, n_classes, n_cycles, samples_per_recording,
                                                amplitude, noise_floor, max_rotation, min_gain, max_gain,
                                                cycle_jitter, seed)
NLOHMANN_JSON_SERIALIZE_ENUM(PreprocessOrder, {{PreprocessOrder::FilterThenSegment, "filter_then_segment"},
                                               {PreprocessOrder::SegmentThenFilter, "segment_then_filter"}})
}  // namespace myofeat::dataio

namespace myofeat::features {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FeatureConfig, zc_threshold, ssc_threshold, wamp_threshold, ar_order,
                                                cc_order, entropy_dimension, entropy_tolerance, fr_split_hz,
                                                fr_low_hz, fr_high_hz, psr_half_width_hz, snr_noise_hz,
                                                smr_artifact_hz, dpr_smoothing_bins, v_order, tdpsd_lambda,
                                                afb_window, log_epsilon, sample_rate)
}  // namespace myofeat::features

namespace myofeat::convnet {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Architecture, channels, length, maps, kernel, blocks, gestures,
                                                domain_outputs, leak, dropout, bn_eps, bn_momentum)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AdamConfig, beta1, beta2, eps)
NLOHMANN_JSON_SERIALIZE_ENUM(BnSource, {{BnSource::Batch, "batch"}, {BnSource::Stored, "stored"}})
}  // namespace myofeat::convnet

namespace myofeat::training {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, lr, batch_size, lambda, reversal_constant,
                                                anneal_factor, patience, max_epochs, standard_steps_per_epoch,
                                                split_steps, target_bn, eval_chunk, seed, arch, adam)
}  // namespace myofeat::training

namespace myofeat::mapper {
NLOHMANN_JSON_SERIALIZE_ENUM(CoverMode, {{CoverMode::CellCentred, "cell"}, {CoverMode::VertexCentred, "vertex"}})
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TsneConfig, perplexity, iterations, exaggeration_iterations,
                                                exaggeration, learning_rate, momentum_initial, momentum_final,
                                                momentum_switch, min_gain, init_stddev, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MapperConfig, variance_target, tsne, k, overlap, cover_mode,
                                                gap_bins, standardize)
}  // namespace myofeat::mapper

namespace myofeat::interpret {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ProbeConfig, restarts, epochs, lr, batch_size, l2, seed, channels,
                                                chunk)
}  // namespace myofeat::interpret

namespace myofeat::cli {

/// Throws ConfigError naming the first key of `given` that `known` lacks,
/// recursing into nested objects.
void check_keys(const nlohmann::json& given, const nlohmann::json& known, const std::string& where);

/// Parses a section over the defaults in `value` and rejects unknown keys.
template <class T>
T parse_section(const nlohmann::json& doc, const std::string& name, T value) {
  if (!doc.contains(name)) return value;
  const auto& section = doc.at(name);
  check_keys(section, nlohmann::json(value), name);
  try {
    section.get_to(value);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(name + ": " + e.what());
  }
  return value;
}

/// Desk-scale training defaults used by the tool: a narrower network and a
/// shorter schedule that finish in well under a minute on the synthetic set.
training::TrainConfig desk_train_config();

/// Loads the --config document (empty object when no path is given).
nlohmann::json load_config(const std::filesystem::path& file);

}  // namespace myofeat::cli
