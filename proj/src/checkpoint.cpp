#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "ega/error.hpp"
#include "ega/net.hpp"
#include "ega/textio.hpp"

namespace ega::net {

namespace {

constexpr std::string_view kMagic = "ega-checkpoint";
constexpr int kVersion = 1;

std::string activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "identity"; }

Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw InvalidInput("checkpoint: unknown activation '" + std::string(s) + "'");
}

void write_params(std::ostream& out, std::string_view label, std::span<const double> p) {
  out << label << ' ' << p.size() << '\n';
  for (double v : p) out << textio::format_real(v) << '\n';
}

std::vector<std::string_view> expect_line(std::istream& in, std::string& buf, std::string_view key,
                                          std::size_t min_tokens) {
  if (!std::getline(in, buf)) throw InvalidInput("checkpoint: truncated before '" + std::string(key) + "'");
  auto tok = textio::split_ws(buf);
  if (tok.empty() || tok[0] != key || tok.size() < min_tokens)
    throw InvalidInput("checkpoint: expected '" + std::string(key) + "', got '" + buf + "'");
  return tok;
}

void read_params(std::istream& in, std::string_view label, Mlp& mlp) {
  std::string buf;
  auto tok = expect_line(in, buf, label, 2);
  const auto count = textio::parse_u64(tok[1]);
  if (count != mlp.param_count()) throw InvalidInput("checkpoint: parameter count mismatch for " + std::string(label));
  std::vector<double> values(count);
  for (auto& v : values) {
    if (!std::getline(in, buf)) throw InvalidInput("checkpoint: truncated parameter block");
    v = textio::parse_real(textio::split_ws(buf).at(0));
  }
  mlp.unflatten(values);
}

}  // namespace

void save_checkpoint(const Model& model, std::ostream& out) {
  const auto& c = model.config;
  out << kMagic << ' ' << kVersion << '\n';
  out << "input_dim " << c.input_dim << '\n';
  out << "trunk_widths " << c.trunk_widths.size();
  for (auto w : c.trunk_widths) out << ' ' << w;
  out << '\n';
  out << "trunk_activation " << activation_name(c.trunk_activation) << '\n';
  out << "head_hidden " << c.head_hidden << '\n';
  out << "outputs " << c.waveform_dim << ' ' << c.anchor_classes << ' ' << c.length_classes << '\n';
  write_params(out, "trunk", model.trunk.params());
  for (std::size_t i = 0; i < kTaskCount; ++i)
    write_params(out, "head" + std::to_string(i), model.heads[i].params());
}

Model load_checkpoint(std::istream& in) {
  std::string buf;
  auto tok = expect_line(in, buf, kMagic, 2);
  if (textio::parse_int(tok[1]) != kVersion) throw InvalidInput("checkpoint: unsupported version " + std::string(tok[1]));
  ModelConfig c;
  c.input_dim = textio::parse_u64(expect_line(in, buf, "input_dim", 2)[1]);
  tok = expect_line(in, buf, "trunk_widths", 2);
  const auto layers = textio::parse_u64(tok[1]);
  if (tok.size() != layers + 2) throw InvalidInput("checkpoint: malformed trunk_widths");
  c.trunk_widths.clear();
  for (std::size_t i = 0; i < layers; ++i) c.trunk_widths.push_back(textio::parse_u64(tok[i + 2]));
  c.trunk_activation = parse_activation(expect_line(in, buf, "trunk_activation", 2)[1]);
  c.head_hidden = textio::parse_u64(expect_line(in, buf, "head_hidden", 2)[1]);
  tok = expect_line(in, buf, "outputs", 4);
  c.waveform_dim = textio::parse_u64(tok[1]);
  c.anchor_classes = textio::parse_u64(tok[2]);
  c.length_classes = textio::parse_u64(tok[3]);

  Model m = Model::create(c, 0);
  read_params(in, "trunk", m.trunk);
  for (std::size_t i = 0; i < kTaskCount; ++i) read_params(in, "head" + std::to_string(i), m.heads[i]);
  return m;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write checkpoint " + path.string());
  save_checkpoint(model, out);
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace ega::net
