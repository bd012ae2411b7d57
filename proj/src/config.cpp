#include "fedprune/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fedprune/errors.hpp"

namespace fedprune {

using json = nlohmann::json;

std::vector<SweepCell> SweepConfig::cells() const {
  std::vector<SweepCell> out;
  for (Strategy s : strategies) {
    if (s == Strategy::standard) {
      out.push_back({s, 0.0});
    } else {
      for (double q : rates) out.push_back({s, q});
    }
  }
  return out;
}

ExperimentConfig SweepConfig::cell_config(const SweepCell& cell) const {
  ExperimentConfig c = base;
  c.federation.strategy = cell.strategy;
  c.federation.pruning_rate = cell.rate;
  return c;
}

namespace {

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

std::size_t line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

class Reader {
 public:
  Reader(const json& doc, const std::string& text) : doc_(doc), text_(text) {}

  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    throw ConfigError("\"" + key + "\": " + why, line_of_key(text_, key));
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  void count(const std::string& key, std::size_t& out, std::size_t min = 0) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) {
        fail(key, "expected a non-negative integer");
      }
      out = v->get<std::size_t>();
      if (out < min) fail(key, "must be >= " + std::to_string(min));
    }
  }

  void real(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }

  void seed(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
        fail(key, "expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  std::string text(const std::string& key) {
    const json* v = find(key);
    if (!v) return {};
    if (!v->is_string()) fail(key, "expected a string");
    return v->get<std::string>();
  }

  void reject_unknown() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it) {
      if (!seen_.count(it.key())) fail(it.key(), "unknown key");
    }
  }

 private:
  const json& doc_;
  const std::string& text_;
  std::set<std::string> seen_;
};

}  // namespace

SweepConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what(),
                      line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1));
  }
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object", 1);

  SweepConfig cfg;
  FederationConfig& fc = cfg.base.federation;
  DataConfig& dc = cfg.base.data;
  Reader r(doc, text);

  r.count("clients", fc.clients, 1);
  r.count("rounds", fc.rounds, 1);
  r.count("local_epochs", fc.local_epochs, 1);
  r.count("warmup", fc.warmup, 1);
  r.count("batch_size", fc.batch_size, 1);
  r.real("learning_rate", fc.learning_rate);
  r.seed("seed", fc.seed);
  r.real("lrp_epsilon", fc.lrp.epsilon);

  if (const std::string s = r.text("mask_mode"); !s.empty()) {
    auto m = parse_mask_mode(s);
    if (!m) r.fail("mask_mode", "expected \"every_step\" or \"at_upload\"");
    fc.mask_mode = *m;
  }
  if (const std::string s = r.text("lrp_bias_mode"); !s.empty()) {
    if (s == "absorb") fc.lrp.bias_mode = BiasMode::absorb;
    else if (s == "ignore") fc.lrp.bias_mode = BiasMode::ignore;
    else r.fail("lrp_bias_mode", "expected \"absorb\" or \"ignore\"");
  }
  if (const std::string s = r.text("lrp_output"); !s.empty()) {
    if (s == "all_logits") fc.lrp.output = OutputRelevance::all_logits;
    else if (s == "true_labels") fc.lrp.output = OutputRelevance::true_labels;
    else r.fail("lrp_output", "expected \"all_logits\" or \"true_labels\"");
  }

  if (const std::string s = r.text("relevance_ranking"); !s.empty()) {
    if (s == "magnitude") fc.ranking = RelevanceRanking::magnitude;
    else if (s == "signed") fc.ranking = RelevanceRanking::signed_value;
    else r.fail("relevance_ranking", "expected \"magnitude\" or \"signed\"");
  }

  if (const json* v = r.find("strategies")) {
    if (!v->is_array() || v->empty()) r.fail("strategies", "expected a non-empty array");
    cfg.strategies.clear();
    for (const auto& s : *v) {
      auto parsed = s.is_string() ? parse_strategy(s.get<std::string>()) : std::nullopt;
      if (!parsed) r.fail("strategies", "entries must be standard, random or proposed");
      if (std::ranges::find(cfg.strategies, *parsed) != cfg.strategies.end()) {
        r.fail("strategies", "duplicate entry");
      }
      cfg.strategies.push_back(*parsed);
    }
  }
  const json* rates = r.find("pruning_rates");
  const json* rate = r.find("pruning_rate");
  if (rates && rate) r.fail("pruning_rate", "give either pruning_rate or pruning_rates");
  if (rate) {
    if (!rate->is_number()) r.fail("pruning_rate", "expected a number");
    cfg.rates = {rate->get<double>()};
  }
  if (rates) {
    if (!rates->is_array() || rates->empty()) r.fail("pruning_rates", "expected a non-empty array");
    cfg.rates.clear();
    for (const auto& q : *rates) {
      if (!q.is_number()) r.fail("pruning_rates", "entries must be numbers");
      cfg.rates.push_back(q.get<double>());
    }
  }
  for (double q : cfg.rates) {
    if (!(q >= 0.0 && q < 1.0)) {
      r.fail(rate ? "pruning_rate" : "pruning_rates", "rates must lie in [0, 1)");
    }
  }

  r.count("train_samples", dc.train_samples, 1);
  r.count("test_samples", dc.test_samples, 1);
  r.count("reference_samples", dc.reference_samples, 1);
  r.count("classes", dc.classes, 1);
  r.count("max_positives", dc.max_positives, 1);
  r.real("noise_sigma", dc.noise_sigma);
  r.real("dirichlet_alpha", dc.dirichlet_alpha);
  if (const json* v = r.find("image_shape")) {
    if (!v->is_array() || v->size() != 3) r.fail("image_shape", "expected [C, H, W]");
    dc.image_shape.clear();
    for (const auto& d : *v) {
      if (!d.is_number_integer() || d.get<long long>() < 1) {
        r.fail("image_shape", "extents must be positive integers");
      }
      dc.image_shape.push_back(d.get<std::size_t>());
    }
  }
  r.reject_unknown();

  auto check = [&](const std::string& key, bool ok, const std::string& why) {
    if (!ok) r.fail(key, why);
  };
  check("warmup", fc.warmup <= fc.rounds, "warmup must not exceed rounds");
  check("learning_rate", fc.learning_rate > 0.0, "must be positive");
  check("lrp_epsilon", fc.lrp.epsilon >= 0.0, "must be >= 0");
  check("noise_sigma", dc.noise_sigma >= 0.0, "must be >= 0");
  check("dirichlet_alpha", dc.dirichlet_alpha > 0.0, "must be positive");
  check("clients", dc.train_samples >= fc.clients,
        "train_samples must be at least the number of clients");
  try {
    infer_layers(cfg.base.resolved_architecture());
  } catch (const ShapeError& e) {
    r.fail("image_shape", std::string("default network cannot accept it: ") + e.what());
  }
  return cfg;
}

SweepConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string normalized_config(const SweepConfig& config) {
  const FederationConfig& fc = config.base.federation;
  const DataConfig& dc = config.base.data;
  json j;
  j["clients"] = fc.clients;
  j["rounds"] = fc.rounds;
  j["local_epochs"] = fc.local_epochs;
  j["warmup"] = fc.warmup;
  j["batch_size"] = fc.batch_size;
  j["learning_rate"] = fc.learning_rate;
  j["seed"] = fc.seed;
  j["lrp_epsilon"] = fc.lrp.epsilon;
  j["lrp_bias_mode"] = fc.lrp.bias_mode == BiasMode::absorb ? "absorb" : "ignore";
  j["lrp_output"] = fc.lrp.output == OutputRelevance::all_logits ? "all_logits" : "true_labels";
  j["mask_mode"] = std::string(to_string(fc.mask_mode));
  j["relevance_ranking"] = fc.ranking == RelevanceRanking::magnitude ? "magnitude" : "signed";
  json strategies = json::array();
  for (Strategy s : config.strategies) strategies.push_back(std::string(to_string(s)));
  j["strategies"] = strategies;
  j["pruning_rates"] = config.rates;
  j["train_samples"] = dc.train_samples;
  j["test_samples"] = dc.test_samples;
  j["reference_samples"] = dc.reference_samples;
  j["classes"] = dc.classes;
  j["image_shape"] = dc.image_shape;
  j["noise_sigma"] = dc.noise_sigma;
  j["max_positives"] = dc.max_positives;
  j["dirichlet_alpha"] = dc.dirichlet_alpha;
  return j.dump(2) + "\n";
}

}  // namespace fedprune
