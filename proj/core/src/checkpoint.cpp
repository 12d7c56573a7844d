#include "merc/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "merc/error.hpp"

namespace merc {

namespace {

constexpr const char* kMagic = "merc-checkpoint v1";

void append_hex(std::string& out, double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  out.append(buf, p);
}

double parse_hex(const std::string& tok, std::size_t line) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  bool neg = false;
  if (b != e && *b == '-') {
    neg = true;
    ++b;
  }
  auto [p, ec] = std::from_chars(b, e, v, std::chars_format::hex);
  if (ec != std::errc() || p != e) {
    throw ParseError("checkpoint line " + std::to_string(line) + ": invalid value '" + tok + "'");
  }
  return neg ? -v : v;
}

class LineReader {
 public:
  explicit LineReader(const std::string& text) : is_(text) {}

  std::string next() {
    std::string line;
    if (!std::getline(is_, line)) throw ParseError("checkpoint truncated after line " + std::to_string(n_));
    ++n_;
    return line;
  }
  // Reads "key rest..." and returns rest.
  std::string field(const std::string& key) {
    std::string line = next();
    if (line.rfind(key + " ", 0) != 0 && line != key) {
      throw ParseError("checkpoint line " + std::to_string(n_) + ": expected '" + key + "'");
    }
    return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
  }
  std::size_t line() const { return n_; }

 private:
  std::istringstream is_;
  std::size_t n_ = 0;
};

std::size_t to_size(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError("checkpoint line " + std::to_string(line) + ": invalid integer '" + s + "'");
  }
  return v;
}

}  // namespace

Checkpoint Checkpoint::from_model(const Model& model, std::size_t step,
                                  const std::string& rng_state) {
  Checkpoint c;
  c.config = model.config();
  c.classes = model.classes();
  c.speakers = model.speakers();
  c.dims = model.dims();
  c.step = step;
  c.rng_state = rng_state;
  c.params = model.params();
  return c;
}

Model Checkpoint::to_model() const {
  Model m(config, classes, speakers, dims, config.seed);
  auto& dst = m.params().entries();
  const auto& src = params.entries();
  if (dst.size() != src.size()) {
    throw ParseError("checkpoint has " + std::to_string(src.size()) + " parameters, model expects " +
                     std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != src[i].name || !dst[i].value.same_shape(src[i].value)) {
      throw ParseError("checkpoint parameter '" + src[i].name + "' " + src[i].value.shape_str() +
                       " does not match model parameter '" + dst[i].name + "' " +
                       dst[i].value.shape_str());
    }
    dst[i].value = src[i].value;
  }
  return m;
}

std::string Checkpoint::serialize() const {
  std::string out = std::string(kMagic) + "\n";
  out += "classes " + std::to_string(classes) + "\n";
  out += "speakers " + std::to_string(speakers) + "\n";
  out += "dims " + std::to_string(dims[0]) + " " + std::to_string(dims[1]) + " " +
         std::to_string(dims[2]) + "\n";
  out += "step " + std::to_string(step) + "\n";
  out += "rng " + rng_state + "\n";
  const std::string cfg = config.to_text();
  std::size_t cfg_lines = 0;
  for (char ch : cfg) cfg_lines += ch == '\n';
  out += "config " + std::to_string(cfg_lines) + "\n" + cfg;
  out += "params " + std::to_string(params.size()) + "\n";
  for (const auto& e : params.entries()) {
    out += e.name + " " + std::to_string(e.value.rows()) + " " + std::to_string(e.value.cols()) + "\n";
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      if (i) out += ' ';
      append_hex(out, e.value[i]);
    }
    out += "\n";
  }
  out += "end\n";
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& text) {
  LineReader r(text);
  if (r.next() != kMagic) throw ParseError("not a merc checkpoint (bad header)");
  Checkpoint c;
  c.classes = to_size(r.field("classes"), r.line());
  c.speakers = to_size(r.field("speakers"), r.line());
  {
    std::istringstream ds(r.field("dims"));
    for (auto& d : c.dims)
      if (!(ds >> d)) throw ParseError("checkpoint line " + std::to_string(r.line()) + ": bad dims");
  }
  c.step = to_size(r.field("step"), r.line());
  c.rng_state = r.field("rng");
  const std::size_t cfg_lines = to_size(r.field("config"), r.line());
  std::string cfg;
  for (std::size_t i = 0; i < cfg_lines; ++i) cfg += r.next() + "\n";
  c.config = Config::parse(cfg);
  const std::size_t count = to_size(r.field("params"), r.line());
  for (std::size_t k = 0; k < count; ++k) {
    std::istringstream hs(r.next());
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(hs >> name >> rows >> cols)) {
      throw ParseError("checkpoint line " + std::to_string(r.line()) + ": bad parameter header");
    }
    std::istringstream vs(r.next());
    std::vector<double> values;
    values.reserve(rows * cols);
    std::string tok;
    while (vs >> tok) values.push_back(parse_hex(tok, r.line()));
    if (values.size() != rows * cols) {
      throw ParseError("checkpoint line " + std::to_string(r.line()) + ": parameter '" + name +
                       "' has " + std::to_string(values.size()) + " values, expected " +
                       std::to_string(rows * cols));
    }
    c.params.add(name, Tensor(rows, cols, std::move(values)));
  }
  if (r.next() != "end") throw ParseError("checkpoint missing end marker");
  return c;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out << serialize();
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace merc
