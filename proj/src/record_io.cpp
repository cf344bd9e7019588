// Record file layout (line oriented, '#' lines are comments):
//
//   ega-record 1
//   fs <real>
//   seed <u64>
//   config_hash <16 hex digits>
//   noise <none|constant|abrupt> <snr_db>
//   bursts <count>            then <segment> <begin> <end> per line
//   cycles <count>            then a1 a2 b1 b2 f1 f2 t1 t2 ppi per line
//   anchors <count>           then <t1> <ppi> per line
//   samples <count>           then <radar> <ecg> per line
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "ega/error.hpp"
#include "ega/synth.hpp"
#include "ega/textio.hpp"

namespace ega::synth {

namespace {

using textio::format_real;

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::vector<std::string_view> next() {
    while (std::getline(in_, buf_)) {
      ++line_;
      if (buf_.empty() || buf_[0] == '#') continue;
      return textio::split_ws(buf_);
    }
    throw InvalidInput("record: unexpected end of file after line " + std::to_string(line_));
  }

  std::vector<std::string_view> keyed(std::string_view key, std::size_t tokens) {
    auto tok = next();
    if (tok.size() != tokens || tok[0] != key) {
      throw InvalidInput("record line " + std::to_string(line_) + ": expected '" + std::string(key) + "'");
    }
    return tok;
  }

  std::vector<double> reals(std::size_t count) {
    auto tok = next();
    if (tok.size() != count) {
      throw InvalidInput("record line " + std::to_string(line_) + ": expected " + std::to_string(count) + " columns");
    }
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = textio::parse_real(tok[i]);
    return out;
  }

 private:
  std::istream& in_;
  std::string buf_;
  std::size_t line_ = 0;
};

}  // namespace

void write_record(const SyntheticRecord& r, std::ostream& out) {
  if (r.radar.size() != r.ecg.size() || r.anchors.size() != r.ppi.size())
    throw InvalidInput("write_record: inconsistent record");
  out << "ega-record 1\n";
  out << "fs " << format_real(r.fs) << '\n';
  out << "seed " << r.seed << '\n';
  out << "config_hash " << textio::hex64(r.config_hash) << '\n';
  out << "noise " << r.noise.type << ' ' << format_real(r.noise.snr_db) << '\n';
  out << "bursts " << r.noise.bursts.size() << '\n';
  for (const auto& b : r.noise.bursts) out << b.segment << ' ' << b.begin << ' ' << b.end << '\n';
  out << "cycles " << r.cycles.size() << '\n';
  out << "# a1 a2 b1 b2 f1 f2 t1 t2 ppi\n";
  for (const auto& c : r.cycles) {
    out << format_real(c.a1) << ' ' << format_real(c.a2) << ' ' << format_real(c.b1) << ' '
        << format_real(c.b2) << ' ' << format_real(c.f1) << ' ' << format_real(c.f2) << ' '
        << format_real(c.t1) << ' ' << format_real(c.t2) << ' ' << format_real(c.ppi) << '\n';
  }
  out << "anchors " << r.anchors.size() << '\n';
  out << "# t1 ppi\n";
  for (std::size_t i = 0; i < r.anchors.size(); ++i)
    out << format_real(r.anchors[i]) << ' ' << format_real(r.ppi[i]) << '\n';
  out << "samples " << r.radar.size() << '\n';
  out << "# radar ecg\n";
  for (std::size_t i = 0; i < r.radar.size(); ++i)
    out << format_real(r.radar[i]) << ' ' << format_real(r.ecg[i]) << '\n';
}

SyntheticRecord read_record(std::istream& in) {
  LineReader rd(in);
  auto tok = rd.keyed("ega-record", 2);
  if (tok[1] != "1") throw InvalidInput("record: unsupported version " + std::string(tok[1]));
  SyntheticRecord r;
  r.fs = textio::parse_real(rd.keyed("fs", 2)[1]);
  r.seed = textio::parse_u64(rd.keyed("seed", 2)[1]);
  {
    auto h = rd.keyed("config_hash", 2)[1];
    if (h.size() != 16) throw InvalidInput("record: config_hash must have 16 hex digits");
    r.config_hash = std::stoull(std::string(h), nullptr, 16);
  }
  tok = rd.keyed("noise", 3);
  r.noise.type = std::string(tok[1]);
  if (r.noise.type != "none" && r.noise.type != "constant" && r.noise.type != "abrupt")
    throw InvalidInput("record: unknown noise type " + r.noise.type);
  r.noise.snr_db = textio::parse_real(tok[2]);

  const auto bursts = textio::parse_u64(rd.keyed("bursts", 2)[1]);
  for (std::size_t i = 0; i < bursts; ++i) {
    auto b = rd.next();
    if (b.size() != 3) throw InvalidInput("record: malformed burst line");
    r.noise.bursts.push_back({textio::parse_u64(b[0]), textio::parse_u64(b[1]), textio::parse_u64(b[2])});
  }
  const auto cycles = textio::parse_u64(rd.keyed("cycles", 2)[1]);
  for (std::size_t i = 0; i < cycles; ++i) {
    auto v = rd.reals(9);
    r.cycles.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]});
  }
  const auto anchors = textio::parse_u64(rd.keyed("anchors", 2)[1]);
  for (std::size_t i = 0; i < anchors; ++i) {
    auto v = rd.reals(2);
    r.anchors.push_back(v[0]);
    r.ppi.push_back(v[1]);
  }
  const auto samples = textio::parse_u64(rd.keyed("samples", 2)[1]);
  r.radar.reserve(samples);
  r.ecg.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    auto v = rd.reals(2);
    r.radar.push_back(v[0]);
    r.ecg.push_back(v[1]);
  }
  for (std::size_t i = 1; i < r.anchors.size(); ++i)
    if (!(r.anchors[i] > r.anchors[i - 1])) throw InvalidInput("record: anchors not strictly increasing");
  for (const auto& b : r.noise.bursts)
    if (b.begin > b.end || b.end > r.radar.size()) throw InvalidInput("record: burst outside the trace");
  return r;
}

void write_record(const SyntheticRecord& record, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  write_record(record, out);
}

SyntheticRecord read_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read " + path.string());
  return read_record(in);
}

}  // namespace ega::synth
