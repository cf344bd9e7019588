#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ega/error.hpp"
#include "ega/harness.hpp"
#include "ega/textio.hpp"

namespace ega::harness {

using nlohmann::json;

std::string_view task_name(std::size_t task) {
  static constexpr std::string_view kNames[] = {"waveform", "anchor", "length"};
  if (task >= net::kTaskCount) throw InvalidInput("task index out of range");
  return kNames[task];
}

std::string NoiseProtocol::label() const {
  switch (type) {
    case NoiseType::None: return "none";
    case NoiseType::Constant: return "constant";
    case NoiseType::Abrupt:
      return "abrupt_f" + textio::format_real(fraction) + "_d" + textio::format_real(duration_s);
  }
  return "none";
}

std::vector<NoiseProtocol> standard_noise_grid() {
  std::vector<NoiseProtocol> grid;
  for (double db : {6.0, 3.0, 0.0, -1.0, -2.0, -3.0}) grid.push_back({NoiseType::Constant, db});
  for (double d : {1.0, 2.0, 3.0})
    for (double db : {0.0, -9.0}) grid.push_back({NoiseType::Abrupt, db, 0.2, d});
  return grid;
}

std::vector<std::string> harness_strategy_ids() {
  auto ids = balance::strategy_ids();
  ids.push_back("single_task");
  return ids;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  std::string key = textio::hex64(seed);
  key += '/';
  key += tag;
  key += '/';
  key += std::to_string(index);
  return textio::fnv1a(key);
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidConfig(what);
}

bool known_strategy(const std::string& id) {
  const auto ids = harness_strategy_ids();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

std::string_view activation_name(net::Activation a) { return a == net::Activation::Tanh ? "tanh" : "identity"; }

json range_json(const synth::Range& r) { return json::array({r.lo, r.hi}); }

json noise_json(const NoiseProtocol& p) {
  switch (p.type) {
    case NoiseType::None: return {{"type", "none"}};
    case NoiseType::Constant: return {{"type", "constant"}, {"snr_db", p.snr_db}};
    case NoiseType::Abrupt:
      return {{"type", "abrupt"}, {"snr_db", p.snr_db}, {"fraction", p.fraction}, {"duration_s", p.duration_s}};
  }
  return {};
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["repeats"] = c.repeats;
  j["strategy"] = c.strategy;
  j["temperature"] = c.strategy_params.temperature;
  j["warmup_epoch"] = c.strategy_params.warmup_epoch;
  j["rank_tol"] = c.strategy_params.rank_tol;
  j["compare"] = c.compare;
  j["baseline"] = c.baseline;
  j["optimizer"] = {{"eta", c.eta}, {"momentum", c.momentum}, {"weight_decay", c.weight_decay}};
  j["data"] = {{"records", c.records},
               {"val_fraction", c.val_fraction},
               {"test_fraction", c.test_fraction},
               {"feature_pool", c.feature_pool},
               {"window_s", c.segments.window_s},
               {"step_s", c.segments.step_s}};
  const auto& s = c.synth;
  json waves = json::array();
  for (const auto& w : s.ecg) waves.push_back(json::array({w.amplitude, w.offset_ppi, w.width_s}));
  j["synth"] = {{"fs", s.fs},
                {"duration_s", s.duration_s},
                {"ppi", range_json(s.ppi)},
                {"max_ppi_step", s.max_ppi_step},
                {"f1", range_json(s.f1)},
                {"f2", range_json(s.f2)},
                {"b1", range_json(s.b1)},
                {"b2", range_json(s.b2)},
                {"a1", range_json(s.a1)},
                {"a2", range_json(s.a2)},
                {"t2_fraction", range_json(s.t2_fraction)},
                {"first_anchor", range_json(s.first_anchor)},
                {"ecg", waves}};
  j["model"] = {{"trunk_widths", c.model.trunk_widths},
                {"trunk_activation", activation_name(c.model.trunk_activation)},
                {"head_hidden", c.model.head_hidden}};
  j["gradient_scale"] = c.gradient_scale;
  json noise = json::array();
  for (const auto& p : c.noise) noise.push_back(noise_json(p));
  j["noise"] = noise;
  return j;
}

// Strict object reader: every key must be consumed.
class Fields {
 public:
  Fields(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    require(obj.is_object(), where_ + ": expected an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void real(const std::string& key, double& out) {
    if (auto* v = get(key)) {
      require(v->is_number(), where_ + "." + key + ": expected a number");
      out = v->get<double>();
    }
  }
  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (auto* v = get(key)) {
      require(v->is_number_integer(), where_ + "." + key + ": expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        require(v->is_number_unsigned() || v->get<long long>() >= 0, where_ + "." + key + ": must be >= 0");
      }
      out = v->get<Int>();
    }
  }
  void text(const std::string& key, std::string& out) {
    if (auto* v = get(key)) {
      require(v->is_string(), where_ + "." + key + ": expected a string");
      out = v->get<std::string>();
    }
  }
  void range(const std::string& key, synth::Range& out) {
    if (auto* v = get(key)) {
      require(v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number(),
              where_ + "." + key + ": expected [lo, hi]");
      out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
    }
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      require(seen_.contains(it.key()), where_ + ": unknown key '" + it.key() + "'");
  }

  const std::string& where() const { return where_; }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

NoiseProtocol parse_noise(const json& v) {
  Fields f(v, "noise[]");
  std::string type = "none";
  f.text("type", type);
  NoiseProtocol p;
  if (type == "none") {
    p.type = NoiseType::None;
  } else if (type == "constant") {
    p.type = NoiseType::Constant;
    f.real("snr_db", p.snr_db);
  } else if (type == "abrupt") {
    p.type = NoiseType::Abrupt;
    f.real("snr_db", p.snr_db);
    f.real("fraction", p.fraction);
    f.real("duration_s", p.duration_s);
  } else {
    throw InvalidConfig("noise: unknown type '" + type + "'");
  }
  f.finish();
  return p;
}

std::vector<std::string> string_list(const json& v, const std::string& where) {
  require(v.is_array(), where + ": expected a list of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    require(e.is_string(), where + ": expected a list of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  require(epochs >= 0, "epochs must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(repeats >= 1, "repeats must be >= 1");
  require(known_strategy(strategy), "unknown strategy '" + strategy + "'");
  for (const auto& s : compare) require(known_strategy(s), "unknown strategy '" + s + "'");
  require(known_strategy(baseline), "unknown strategy '" + baseline + "'");
  require(std::isfinite(strategy_params.temperature) && strategy_params.temperature > 0.0,
          "temperature must be finite and > 0");
  require(strategy_params.warmup_epoch >= 1, "warmup_epoch must be >= 1");
  require(std::isfinite(strategy_params.rank_tol) && strategy_params.rank_tol > 0.0 &&
              strategy_params.rank_tol < 1.0,
          "rank_tol must be in (0, 1)");
  require(std::isfinite(eta) && eta > 0.0, "eta must be > 0");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must be in [0, 1)");
  require(weight_decay >= 0.0 && std::isfinite(weight_decay), "weight_decay must be >= 0");
  require(records >= 3, "records must be >= 3");
  require(val_fraction >= 0.0 && test_fraction > 0.0 && val_fraction + test_fraction < 1.0,
          "val/test fractions must leave training records");
  const auto roles = split_roles(*this);
  require(std::count(roles.begin(), roles.end(), SplitRole::Train) >= 1, "no training records");
  synth.validate();
  require(synth.fs > 2.0 * std::max(synth.f1.hi, synth.f2.hi), "synth.fs must exceed twice the highest vibration frequency");
  require(feature_pool >= 1, "feature_pool must be >= 1");
  const double win = segments.window_s * synth.fs;
  require(segments.window_s > 0.0 && segments.step_s > 0.0, "window_s and step_s must be > 0");
  require(std::abs(win - std::round(win)) < 1e-9 &&
              static_cast<std::size_t>(std::llround(win)) % feature_pool == 0,
          "window length must be a whole multiple of feature_pool samples");
  require(segments.window_s <= synth.duration_s, "window longer than a record");
  require(!model.trunk_widths.empty(), "model.trunk_widths must not be empty");
  for (auto w : model.trunk_widths) require(w >= 1, "model.trunk_widths entries must be >= 1");
  for (double s : gradient_scale) require(std::isfinite(s) && s > 0.0, "gradient_scale entries must be > 0");
  for (const auto& p : noise) {
    require(std::isfinite(p.snr_db), "noise snr_db must be finite");
    if (p.type == NoiseType::Abrupt) {
      require(p.fraction > 0.0 && p.fraction <= 1.0, "noise fraction must be in (0, 1]");
      require(p.duration_s > 0.0 && p.duration_s <= segments.window_s, "noise duration must fit a window");
    }
  }
}

std::string ExperimentConfig::canonical() const { return to_json(*this).dump(); }

std::uint64_t ExperimentConfig::hash() const { return textio::fnv1a(canonical()); }

ExperimentConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    Fields f(root, "config");
    f.integer("seed", c.seed);
    f.integer("epochs", c.epochs);
    f.integer("batch_size", c.batch_size);
    f.integer("repeats", c.repeats);
    f.text("strategy", c.strategy);
    f.real("temperature", c.strategy_params.temperature);
    f.integer("warmup_epoch", c.strategy_params.warmup_epoch);
    f.real("rank_tol", c.strategy_params.rank_tol);
    if (auto* v = f.get("compare")) c.compare = string_list(*v, "compare");
    f.text("baseline", c.baseline);

    if (auto* v = f.get("optimizer")) {
      Fields o(*v, "optimizer");
      o.real("eta", c.eta);
      o.real("momentum", c.momentum);
      o.real("weight_decay", c.weight_decay);
      o.finish();
    }
    if (auto* v = f.get("data")) {
      Fields d(*v, "data");
      d.integer("records", c.records);
      d.real("val_fraction", c.val_fraction);
      d.real("test_fraction", c.test_fraction);
      d.integer("feature_pool", c.feature_pool);
      d.real("window_s", c.segments.window_s);
      d.real("step_s", c.segments.step_s);
      d.finish();
    }
    if (auto* v = f.get("synth")) {
      Fields s(*v, "synth");
      auto& sc = c.synth;
      s.real("fs", sc.fs);
      s.real("duration_s", sc.duration_s);
      s.range("ppi", sc.ppi);
      s.real("max_ppi_step", sc.max_ppi_step);
      s.range("f1", sc.f1);
      s.range("f2", sc.f2);
      s.range("b1", sc.b1);
      s.range("b2", sc.b2);
      s.range("a1", sc.a1);
      s.range("a2", sc.a2);
      s.range("t2_fraction", sc.t2_fraction);
      s.range("first_anchor", sc.first_anchor);
      if (auto* w = s.get("ecg")) {
        require(w->is_array() && !w->empty(), "synth.ecg: expected a list of [amplitude, offset, width]");
        sc.ecg.clear();
        for (const auto& e : *w) {
          require(e.is_array() && e.size() == 3 && e[0].is_number() && e[1].is_number() && e[2].is_number(),
                  "synth.ecg: expected [amplitude, offset, width]");
          sc.ecg.push_back({e[0].get<double>(), e[1].get<double>(), e[2].get<double>()});
        }
      }
      s.finish();
    }
    if (auto* v = f.get("model")) {
      Fields m(*v, "model");
      if (auto* w = m.get("trunk_widths")) {
        require(w->is_array(), "model.trunk_widths: expected a list");
        c.model.trunk_widths.clear();
        for (const auto& e : *w) {
          require(e.is_number_unsigned(), "model.trunk_widths: expected positive integers");
          c.model.trunk_widths.push_back(e.get<std::size_t>());
        }
      }
      std::string act(activation_name(c.model.trunk_activation));
      m.text("trunk_activation", act);
      if (act == "tanh") {
        c.model.trunk_activation = net::Activation::Tanh;
      } else if (act == "identity") {
        c.model.trunk_activation = net::Activation::Identity;
      } else {
        throw InvalidConfig("model.trunk_activation: expected tanh or identity");
      }
      m.integer("head_hidden", c.model.head_hidden);
      m.finish();
    }
    if (auto* v = f.get("gradient_scale")) {
      require(v->is_array() && v->size() == net::kTaskCount, "gradient_scale: expected three numbers");
      for (std::size_t i = 0; i < net::kTaskCount; ++i) {
        require((*v)[i].is_number(), "gradient_scale: expected three numbers");
        c.gradient_scale[i] = (*v)[i].get<double>();
      }
    }
    if (auto* v = f.get("noise")) {
      if (v->is_string()) {
        require(v->get<std::string>() == "standard", "noise: expected a list or \"standard\"");
        c.noise = standard_noise_grid();
      } else {
        require(v->is_array(), "noise: expected a list or \"standard\"");
        for (const auto& e : *v) c.noise.push_back(parse_noise(e));
      }
    }
    f.finish();
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace ega::harness
