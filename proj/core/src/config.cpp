#include "batchrl/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "batchrl/errors.hpp"
#include "json.hpp"

namespace batchrl {

using nlohmann::json;

namespace {

// Reads typed values out of one JSON object and remembers which keys were
// consumed so leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ConfigError(where() + "must be a JSON object");
  }

  bool has(const char* key) const { return object_.contains(key); }

  void read(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) throw type_error(key, "a number");
      out = v->get<double>();
    }
  }
  template <class U>
    requires(std::is_unsigned_v<U> && !std::is_same_v<U, bool>)
  void read(const char* key, U& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) throw type_error(key, "a non-negative integer");
      out = v->get<U>();
    }
  }
  void read(const char* key, int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) throw type_error(key, "an integer");
      out = v->get<int>();
    }
  }
  void read(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) throw type_error(key, "true or false");
      out = v->get<bool>();
    }
  }
  void read(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw type_error(key, "a string");
      out = v->get<std::string>();
    }
  }
  void read(const char* key, std::vector<double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) throw type_error(key, "an array of numbers");
      out.clear();
      for (const json& e : *v) {
        if (!e.is_number()) throw type_error(key, "an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }
  void read(const char* key, std::vector<std::size_t>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) throw type_error(key, "an array of non-negative integers");
      out.clear();
      for (const json& e : *v) {
        if (!e.is_number_unsigned()) throw type_error(key, "an array of non-negative integers");
        out.push_back(e.get<std::size_t>());
      }
    }
  }
  template <std::size_t N>
  void read(const char* key, std::array<double, N>& out) {
    const bool present = has(key);
    std::vector<double> v;
    read(key, v);
    if (!present) return;
    if (v.size() != N) {
      throw ConfigError(where() + "'" + key + "' needs exactly " + std::to_string(N) + " entries");
    }
    std::copy(v.begin(), v.end(), out.begin());
  }
  void read(const char* key, std::optional<double>& out) {
    if (const json* v = take(key)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        throw type_error(key, "a number or null");
      }
    }
  }

  // Child object, or nullptr when absent.
  const json* child(const char* key) { return take(key); }

  std::string child_path(const char* key) const { return path_ + key + "."; }

  void finish() const {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
      if (!seen_.contains(it.key())) {
        throw ConfigError("unknown configuration key '" + path_ + it.key() + "'");
      }
    }
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }
  std::string where() const { return path_.empty() ? "configuration " : "'" + path_ + "' "; }
  ConfigError type_error(const char* key, const char* expected) const {
    return ConfigError("configuration key '" + path_ + key + "' must be " + expected);
  }

  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

ActionMode parse_mode(const std::string& s) {
  if (s == "sample") return ActionMode::Sample;
  if (s == "mean") return ActionMode::Mean;
  throw ConfigError("evaluation mode must be 'sample' or 'mean', got '" + s + "'");
}

const char* mode_name(ActionMode m) { return m == ActionMode::Sample ? "sample" : "mean"; }

bool same_family(PlantKind a, PlantKind b) { return is_cs3(a) == is_cs3(b); }

}  // namespace

RunConfig default_config(PlantKind plant) {
  RunConfig c;
  c.plant = plant;
  c.offline_plant = approximate_kind(plant);
  if (is_cs3(plant)) {
    c.policy.hidden_layers = 4;
    c.policy.neurons = 20;
    c.policy.activation = Activation::LeakyRelu;
    c.policy.split_networks = false;
    c.b2b.offline_episodes = 500;
    c.evaluation.compare_nmpc = false;
  }
  set_seed(c, c.seed);
  set_threads(c, c.threads);
  return c;
}

void set_seed(RunConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.b2b.seed = seed;
}

void set_threads(RunConfig& config, std::size_t threads) {
  config.threads = threads;
  config.b2b.threads = threads;
}

void RunConfig::validate() const {
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (!same_family(plant, offline_plant)) {
    throw ConfigError("offline plant '" + std::string(to_string(offline_plant)) +
                      "' does not match the dimensions of plant '" +
                      std::string(to_string(plant)) + "'");
  }
  if (plant_options.substeps < 1) throw ConfigError("substeps must be at least 1");
  if (plant_options.cs1_disturbance_std < 0.0) {
    throw ConfigError("cs1 disturbance_std must be >= 0");
  }
  if (plant_options.cs2_diffusion < 0.0) throw ConfigError("cs2 diffusion must be >= 0");
  const Cs3Options& cs3 = plant_options.cs3;
  if (!(cs3.integration.horizon > 0.0)) throw ConfigError("cs3 horizon must be positive");
  for (std::size_t i = 0; i < 3; ++i) {
    if (cs3.disturbance[i] < 0.0 || cs3.measurement_variance[i] < 0.0 ||
        cs3.initial_variance[i] < 0.0) {
      throw ConfigError("cs3 disturbance and variance entries must be >= 0");
    }
  }
  for (std::size_t j = 0; j < 2; ++j) {
    if (!(cs3.lower[j] < cs3.upper[j])) throw ConfigError("cs3 control bounds are inverted");
    if (cs3.penalty[j] < 0.0) throw ConfigError("cs3 penalty weights must be >= 0");
  }
  if (policy.hidden_layers < 1 || policy.neurons < 1 || policy.history_depth < 1) {
    throw ConfigError("policy needs hidden_layers, neurons and history_depth >= 1");
  }
  if (!policy.std_scale.empty()) {
    if (policy.std_scale.size() != 2) {
      throw ConfigError("policy std_scale needs one entry per control (2)");
    }
    for (double s : policy.std_scale) {
      if (!(s > 0.0)) throw ConfigError("policy std_scale entries must be positive");
    }
  }
  for (std::size_t layer : b2b.trainable_layers) {
    if (layer > policy.hidden_layers) {
      throw ConfigError("online trainable layer " + std::to_string(layer) +
                        " does not exist (layers 0.." + std::to_string(policy.hidden_layers) +
                        ")");
    }
  }
  if (stop_at_ocp_gap) {
    if (!(*stop_at_ocp_gap > 0.0)) throw ConfigError("offline stop_at_ocp_gap must be positive");
    if (offline_plant != PlantKind::Cs1 && offline_plant != PlantKind::Cs1Approx) {
      throw ConfigError("offline stop_at_ocp_gap needs a smooth ODE offline plant");
    }
  }
  if (evaluation.episodes < 1) throw ConfigError("evaluation episodes must be at least 1");
  b2b.validate();
  nmpc.validate();
}

RunConfig parse_config_text(std::string_view text) {
  json root;
  bool blank = true;
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) blank = false;
  }
  if (blank) {
    root = json::object();
  } else {
    try {
      root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
    }
  }

  Section top(root, "");
  std::string plant_name = "cs1";
  top.read("plant", plant_name);
  const PlantKind plant = parse_plant_kind(plant_name);
  RunConfig c = default_config(plant);

  std::string offline_name(to_string(c.offline_plant));
  top.read("offline_plant", offline_name);
  c.offline_plant = parse_plant_kind(offline_name);
  std::uint64_t seed = c.seed;
  top.read("seed", seed);
  std::size_t threads = c.threads;
  top.read("threads", threads);
  top.read("intervals", c.plant_options.intervals);
  top.read("substeps", c.plant_options.substeps);
  top.read("discount", c.b2b.discount);
  top.read("record_wall_time", c.b2b.record_wall_time);

  if (const json* j = top.child("cs1")) {
    Section s(*j, top.child_path("cs1"));
    s.read("disturbance_std", c.plant_options.cs1_disturbance_std);
    s.finish();
  }
  if (const json* j = top.child("cs2")) {
    Section s(*j, top.child_path("cs2"));
    s.read("diffusion", c.plant_options.cs2_diffusion);
    s.finish();
  }
  if (const json* j = top.child("cs3")) {
    Section s(*j, top.child_path("cs3"));
    Cs3Options& o = c.plant_options.cs3;
    if (const json* p = s.child("parameters")) {
      Section ps(*p, s.child_path("parameters"));
      Cs3Parameters& k = o.parameters;
      ps.read("u_m", k.u_m);
      ps.read("u_d", k.u_d);
      ps.read("K_N", k.K_N);
      ps.read("Y_NX", k.Y_NX);
      ps.read("k_m", k.k_m);
      ps.read("k_d", k.k_d);
      ps.read("k_s", k.k_s);
      ps.read("k_i", k.k_i);
      ps.read("k_sq", k.k_sq);
      ps.read("k_iq", k.k_iq);
      ps.read("K_Np", k.K_Np);
      ps.finish();
    }
    s.read("horizon", o.integration.horizon);
    s.read("disturbance", o.disturbance);
    s.read("measurement_variance", o.measurement_variance);
    s.read("initial_mean", o.initial_mean);
    s.read("initial_variance", o.initial_variance);
    s.read("penalty", o.penalty);
    s.read("lower", o.lower);
    s.read("upper", o.upper);
    s.read("gate_enabled", o.gate_enabled);
    s.finish();
  }
  if (const json* j = top.child("policy")) {
    Section s(*j, top.child_path("policy"));
    s.read("hidden_layers", c.policy.hidden_layers);
    s.read("neurons", c.policy.neurons);
    std::string act(to_string(c.policy.activation));
    s.read("activation", act);
    c.policy.activation = parse_activation(act);
    s.read("split_networks", c.policy.split_networks);
    s.read("history_depth", c.policy.history_depth);
    s.read("std_scale", c.policy.std_scale);
    s.finish();
  }
  if (const json* j = top.child("offline")) {
    Section s(*j, top.child_path("offline"));
    s.read("epochs", c.b2b.offline_epochs);
    s.read("max_epochs", c.b2b.max_offline_epochs);
    s.read("episodes", c.b2b.offline_episodes);
    s.read("learning_rate", c.b2b.offline_learning_rate);
    s.read("stop_at_ocp_gap", c.stop_at_ocp_gap);
    s.finish();
  }
  if (const json* j = top.child("online")) {
    Section s(*j, top.child_path("online"));
    s.read("epochs", c.b2b.online_epochs);
    s.read("episodes", c.b2b.online_episodes);
    s.read("learning_rate", c.b2b.online_learning_rate);
    s.read("trainable_layers", c.b2b.trainable_layers);
    s.finish();
  }
  if (const json* j = top.child("adam")) {
    Section s(*j, top.child_path("adam"));
    s.read("beta1", c.b2b.beta1);
    s.read("beta2", c.b2b.beta2);
    s.read("epsilon", c.b2b.epsilon);
    s.finish();
  }
  if (const json* j = top.child("evaluation")) {
    Section s(*j, top.child_path("evaluation"));
    s.read("episodes", c.evaluation.episodes);
    std::string mode = mode_name(c.evaluation.mode);
    s.read("mode", mode);
    c.evaluation.mode = parse_mode(mode);
    s.read("compare_nmpc", c.evaluation.compare_nmpc);
    s.finish();
  }
  if (const json* j = top.child("nmpc")) {
    Section s(*j, top.child_path("nmpc"));
    s.read("multistarts", c.nmpc.multistarts);
    s.read("max_iterations", c.nmpc.max_iterations);
    s.read("gradient_tolerance", c.nmpc.gradient_tolerance);
    s.read("armijo", c.nmpc.armijo);
    s.read("backtrack", c.nmpc.backtrack);
    s.read("max_backtracks", c.nmpc.max_backtracks);
    s.finish();
  }
  top.finish();

  set_seed(c, seed);
  set_threads(c, threads);
  c.validate();
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open configuration file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string serialize_config(const RunConfig& c) {
  const Cs3Options& o = c.plant_options.cs3;
  const Cs3Parameters& k = o.parameters;
  json j;
  j["plant"] = std::string(to_string(c.plant));
  j["offline_plant"] = std::string(to_string(c.offline_plant));
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["intervals"] = c.plant_options.intervals;
  j["substeps"] = c.plant_options.substeps;
  j["discount"] = c.b2b.discount;
  j["record_wall_time"] = c.b2b.record_wall_time;
  j["cs1"] = {{"disturbance_std", c.plant_options.cs1_disturbance_std}};
  j["cs2"] = {{"diffusion", c.plant_options.cs2_diffusion}};
  j["cs3"] = {
      {"parameters",
       {{"u_m", k.u_m},
        {"u_d", k.u_d},
        {"K_N", k.K_N},
        {"Y_NX", k.Y_NX},
        {"k_m", k.k_m},
        {"k_d", k.k_d},
        {"k_s", k.k_s},
        {"k_i", k.k_i},
        {"k_sq", k.k_sq},
        {"k_iq", k.k_iq},
        {"K_Np", k.K_Np}}},
      {"horizon", o.integration.horizon},
      {"disturbance", o.disturbance},
      {"measurement_variance", o.measurement_variance},
      {"initial_mean", o.initial_mean},
      {"initial_variance", o.initial_variance},
      {"penalty", o.penalty},
      {"lower", o.lower},
      {"upper", o.upper},
      {"gate_enabled", o.gate_enabled},
  };
  j["policy"] = {{"hidden_layers", c.policy.hidden_layers},
                 {"neurons", c.policy.neurons},
                 {"activation", std::string(to_string(c.policy.activation))},
                 {"split_networks", c.policy.split_networks},
                 {"history_depth", c.policy.history_depth},
                 {"std_scale", c.policy.std_scale}};
  j["offline"] = {{"epochs", c.b2b.offline_epochs},
                  {"max_epochs", c.b2b.max_offline_epochs},
                  {"episodes", c.b2b.offline_episodes},
                  {"learning_rate", c.b2b.offline_learning_rate},
                  {"stop_at_ocp_gap", c.stop_at_ocp_gap ? json(*c.stop_at_ocp_gap) : json()}};
  j["online"] = {{"epochs", c.b2b.online_epochs},
                 {"episodes", c.b2b.online_episodes},
                 {"learning_rate", c.b2b.online_learning_rate},
                 {"trainable_layers", c.b2b.trainable_layers}};
  j["adam"] = {{"beta1", c.b2b.beta1}, {"beta2", c.b2b.beta2}, {"epsilon", c.b2b.epsilon}};
  j["evaluation"] = {{"episodes", c.evaluation.episodes},
                     {"mode", mode_name(c.evaluation.mode)},
                     {"compare_nmpc", c.evaluation.compare_nmpc}};
  j["nmpc"] = {{"multistarts", c.nmpc.multistarts},
               {"max_iterations", c.nmpc.max_iterations},
               {"gradient_tolerance", c.nmpc.gradient_tolerance},
               {"armijo", c.nmpc.armijo},
               {"backtrack", c.nmpc.backtrack},
               {"max_backtracks", c.nmpc.max_backtracks}};
  return j.dump(2) + "\n";
}

PolicyConfig make_policy_config(const RunConfig& config, const PlantModel& plant) {
  PolicyConfig pc;
  pc.state_inputs = plant.state_count();
  pc.actions = plant.control_count();
  pc.hidden_layers = config.policy.hidden_layers;
  pc.neurons = config.policy.neurons;
  pc.activation = config.policy.activation;
  pc.split_networks = config.policy.split_networks;
  pc.history_depth = config.policy.history_depth;
  pc.lower.assign(plant.control_lower().begin(), plant.control_lower().end());
  pc.upper.assign(plant.control_upper().begin(), plant.control_upper().end());
  pc.state_scale = plant.state_scale();
  if (!config.policy.std_scale.empty()) {
    pc.std_scale = config.policy.std_scale;
  } else if (is_cs3(config.plant)) {
    // The CS3 controls span hundreds of units; start exploration at a fifth
    // of each range instead of ~0.7 units.
    pc.std_scale.resize(pc.actions);
    for (std::size_t j = 0; j < pc.actions; ++j) pc.std_scale[j] = 0.2 * (pc.upper[j] - pc.lower[j]);
  } else {
    pc.std_scale.assign(pc.actions, 1.0);
  }
  pc.validate();
  return pc;
}

}  // namespace batchrl
