#include "merc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "merc/error.hpp"
#include "merc/rng.hpp"

namespace merc {

std::vector<std::size_t> Conversation::speakers() const {
  std::vector<std::size_t> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) out.push_back(u.speaker);
  return out;
}

std::vector<std::size_t> Conversation::labels() const {
  std::vector<std::size_t> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) out.push_back(u.label);
  return out;
}

Tensor Conversation::modality_matrix(Modality m) const {
  const std::size_t n = utterances.size();
  const std::size_t d = n == 0 ? 0 : utterances.front().features[m].size();
  Tensor out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = utterances[i].features[m];
    if (f.size() != d) throw ShapeError("ragged modality features in conversation " + id);
    std::copy(f.begin(), f.end(), out.row_span(i).begin());
  }
  return out;
}

std::size_t Dataset::utterance_count() const {
  std::size_t n = 0;
  for (const auto& c : conversations) n += c.size();
  return n;
}

void Dataset::validate() const {
  if (conversations.empty()) throw ParseError("dataset has no conversations");
  if (num_classes == 0 || num_speakers == 0) throw ParseError("dataset needs C >= 1 and K >= 1");
  for (const auto& c : conversations) {
    if (c.utterances.empty()) throw ParseError("conversation '" + c.id + "' is empty");
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto& u = c.utterances[i];
      const std::string where = "conversation '" + c.id + "' turn " + std::to_string(i);
      if (u.label >= num_classes) throw ParseError(where + ": label out of range");
      if (u.speaker >= num_speakers) throw ParseError(where + ": speaker out of range");
      for (std::size_t m = 0; m < kNumModalities; ++m) {
        if (u.features[m].size() != dims[m]) throw ParseError(where + ": dimension mismatch");
        for (double v : u.features[m])
          if (!std::isfinite(v)) throw ParseError(where + ": non-finite feature");
      }
    }
  }
}

namespace {

template <typename T>
T parse_number(std::string_view tok, const std::string& where, const char* what) {
  T out{};
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw ParseError(where + ": invalid " + what + " '" + std::string(tok) + "'");
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, p);
}

}  // namespace

Dataset parse_dataset(const std::string& text, const std::string& source) {
  Dataset d;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::unordered_set<std::string> closed;

  while (std::getline(is, line)) {
    ++lineno;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);

    if (!have_header) {
      if (toks.size() != 5) throw ParseError(where + ": header must be 'C K d_t d_a d_v'");
      d.num_classes = parse_number<std::size_t>(toks[0], where, "class count");
      d.num_speakers = parse_number<std::size_t>(toks[1], where, "speaker count");
      for (std::size_t m = 0; m < kNumModalities; ++m)
        d.dims[m] = parse_number<std::size_t>(toks[2 + m], where, "dimension");
      if (d.num_classes == 0 || d.num_speakers == 0) {
        throw ParseError(where + ": C and K must be >= 1");
      }
      have_header = true;
      continue;
    }

    const std::size_t expected = 3 + d.dims[0] + d.dims[1] + d.dims[2];
    if (toks.size() != expected) {
      throw ParseError(where + ": dimension mismatch, expected " + std::to_string(expected - 3) +
                       " feature values, got " +
                       std::to_string(toks.size() >= 3 ? toks.size() - 3 : 0));
    }
    const std::string conv_id(toks[0]);
    Utterance u;
    u.speaker = parse_number<std::size_t>(toks[1], where, "speaker id");
    u.label = parse_number<std::size_t>(toks[2], where, "label");
    if (u.speaker >= d.num_speakers) {
      throw ParseError(where + ": speaker id " + std::to_string(u.speaker) + " out of range [0," +
                       std::to_string(d.num_speakers) + ")");
    }
    if (u.label >= d.num_classes) {
      throw ParseError(where + ": label " + std::to_string(u.label) + " out of range [0," +
                       std::to_string(d.num_classes) + ")");
    }
    std::size_t k = 3;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      u.features[m].reserve(d.dims[m]);
      for (std::size_t j = 0; j < d.dims[m]; ++j, ++k) {
        const double v = parse_number<double>(toks[k], where, "feature value");
        if (!std::isfinite(v)) throw ParseError(where + ": non-finite feature value");
        u.features[m].push_back(v);
      }
    }

    if (d.conversations.empty() || d.conversations.back().id != conv_id) {
      if (closed.count(conv_id)) {
        throw ParseError(where + ": conversation '" + conv_id + "' is not contiguous");
      }
      if (!d.conversations.empty()) closed.insert(d.conversations.back().id);
      d.conversations.push_back(Conversation{conv_id, {}});
    }
    d.conversations.back().utterances.push_back(std::move(u));
  }

  if (!have_header) throw ParseError(source + ": no conversations (empty file)");
  if (d.conversations.empty()) throw ParseError(source + ": no conversations");
  return d;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), path);
}

std::string format_dataset(const Dataset& d) {
  std::string out;
  out += std::to_string(d.num_classes) + " " + std::to_string(d.num_speakers);
  for (auto dim : d.dims) out += " " + std::to_string(dim);
  out += "\n";
  for (const auto& c : d.conversations) {
    for (const auto& u : c.utterances) {
      out += c.id + " " + std::to_string(u.speaker) + " " + std::to_string(u.label);
      for (const auto& f : u.features)
        for (double v : f) {
          out += ' ';
          append_double(out, v);
        }
      out += "\n";
    }
  }
  return out;
}

void write_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset file '" + path + "'");
  out << format_dataset(d);
}

Dataset synth_generate(const SynthSpec& spec) {
  if (spec.conversations == 0 || spec.max_len == 0 || spec.classes == 0 || spec.speakers == 0) {
    throw Error("synth_generate: all counts must be >= 1");
  }
  Rng rng(spec.seed);
  Dataset d;
  d.num_classes = spec.classes;
  d.num_speakers = spec.speakers;
  d.dims = spec.dims;

  auto random_vec = [&](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
  };
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };

  // prototypes[m][c], speaker offsets[m][k]
  std::array<std::vector<std::vector<double>>, kNumModalities> protos, offsets;
  std::array<double, kNumModalities> mean_norm{};
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      protos[m].push_back(random_vec(spec.dims[m]));
      mean_norm[m] += norm(protos[m].back()) / static_cast<double>(spec.classes);
    }
    for (std::size_t k = 0; k < spec.speakers; ++k) {
      auto dir = random_vec(spec.dims[m]);
      const double n = norm(dir);
      for (double& x : dir) x *= spec.speaker_scale * mean_norm[m] / n;
      offsets[m].push_back(std::move(dir));
    }
  }

  for (std::size_t ci = 0; ci < spec.conversations; ++ci) {
    Conversation conv;
    conv.id = "c" + std::to_string(ci);
    const std::size_t len = 1 + static_cast<std::size_t>(rng.below(spec.max_len));
    for (std::size_t i = 0; i < len; ++i) {
      Utterance u;
      u.speaker = static_cast<std::size_t>(rng.below(spec.speakers));
      u.label = static_cast<std::size_t>(rng.below(spec.classes));
      for (std::size_t m = 0; m < kNumModalities; ++m) {
        const auto& p = protos[m][u.label];
        const double sigma =
            spec.noise_scale * norm(p) / std::sqrt(static_cast<double>(spec.dims[m]));
        u.features[m].resize(spec.dims[m]);
        for (std::size_t j = 0; j < spec.dims[m]; ++j)
          u.features[m][j] = p[j] + sigma * rng.normal() + offsets[m][u.speaker][j];
      }
      conv.utterances.push_back(std::move(u));
    }
    d.conversations.push_back(std::move(conv));
  }
  return d;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw Error("split_dataset: train_frac must be in (0, 1)");
  }
  const std::size_t n = d.conversations.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw Error("split_dataset: split of " + std::to_string(n) + " conversations at " +
                std::to_string(train_frac) + " leaves one side empty");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  Dataset train, test;
  for (Dataset* out : {&train, &test}) {
    out->num_classes = d.num_classes;
    out->num_speakers = d.num_speakers;
    out->dims = d.dims;
  }
  for (std::size_t k = 0; k < n; ++k)
    (k < n_train ? train : test).conversations.push_back(d.conversations[order[k]]);
  return {std::move(train), std::move(test)};
}

}  // namespace merc
