#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "merc/tensor.hpp"

namespace merc {

enum Modality : std::size_t { kText = 0, kAudio = 1, kVisual = 2 };
inline constexpr std::size_t kNumModalities = 3;

struct Utterance {
  std::size_t speaker = 0;
  std::size_t label = 0;
  std::array<std::vector<double>, kNumModalities> features;  // text, audio, visual

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
  std::vector<std::size_t> speakers() const;
  std::vector<std::size_t> labels() const;
  // N x d_m matrix of one modality's features in turn order.
  Tensor modality_matrix(Modality m) const;

  friend bool operator==(const Conversation&, const Conversation&) = default;
};

struct Dataset {
  std::vector<Conversation> conversations;
  std::size_t num_classes = 0;
  std::size_t num_speakers = 0;
  std::array<std::size_t, kNumModalities> dims{};

  std::size_t utterance_count() const;
  // Throws ParseError describing the first violated invariant.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Line-delimited text format:
//   C K d_t d_a d_v
//   conv_id speaker_id label v_t... v_a... v_v...
// Utterances of one conversation are contiguous and in turn order.
Dataset load_dataset(const std::string& path);
Dataset parse_dataset(const std::string& text, const std::string& source = "<memory>");
std::string format_dataset(const Dataset& d);
void write_dataset(const Dataset& d, const std::string& path);

struct SynthSpec {
  std::size_t conversations = 8;
  std::size_t max_len = 6;
  std::size_t classes = 4;
  std::size_t speakers = 2;
  std::array<std::size_t, kNumModalities> dims{16, 12, 12};
  std::uint64_t seed = 0;
  double noise_scale = 0.1;    // relative to prototype norm
  double speaker_scale = 0.3;  // relative to prototype norm
};

// Class prototypes per modality plus noise plus a per-speaker offset.
// Deterministic in spec.seed.
Dataset synth_generate(const SynthSpec& spec);

// Splits whole conversations; throws if either side would be empty.
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_frac, std::uint64_t seed);

}  // namespace merc
