#include "cryopose/runconfig.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace cryopose {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  CP_CHECK(obj.is_object(), ConfigError, where + ": expected a JSON object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    CP_CHECK(ok, ConfigError, where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

json load_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  CP_CHECK(in.good(), ConfigError, "cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PhantomSpec parse_phantom(const json& p) {
  check_keys(p, "phantom", {"n", "pixel_size", "blobs"});
  PhantomSpec spec;
  spec.n = get_or(p, "n", 32);
  spec.pixel_size = get_or(p, "pixel_size", 1.0);
  if (p.contains("blobs")) {
    CP_CHECK(p.at("blobs").is_array(), ConfigError, "phantom.blobs must be an array");
    spec.blobs.clear();
    for (const auto& b : p.at("blobs")) {
      check_keys(b, "phantom.blobs[]", {"center", "sigma", "amplitude"});
      GaussianBlob blob;
      const auto c = b.at("center").get<std::vector<double>>();
      CP_CHECK(c.size() == 3, ConfigError, "blob center must have 3 entries");
      blob.center_frac = Eigen::Vector3d(c[0], c[1], c[2]);
      blob.sigma_vox = b.at("sigma").get<double>();
      blob.amplitude = get_or(b, "amplitude", 1.0);
      spec.blobs.push_back(blob);
    }
  } else {
    spec.blobs = default_phantom(spec.n, spec.pixel_size).blobs;
  }
  return spec;
}

DatasetConfig parse_dataset(const json& d) {
  check_keys(d, "dataset",
             {"n_images", "snr_db", "ctf_range_um", "split_train", "pad_factor"});
  DatasetConfig cfg;
  cfg.n_images = get_or(d, "n_images", cfg.n_images);
  if (d.contains("snr_db") && !d.at("snr_db").is_null())
    cfg.snr_db = d.at("snr_db").get<double>();
  if (d.contains("ctf_range_um") && !d.at("ctf_range_um").is_null()) {
    const auto r = d.at("ctf_range_um").get<std::vector<double>>();
    CP_CHECK(r.size() == 2, ConfigError, "ctf_range_um must be [lo, hi]");
    cfg.ctf_range_um = std::make_pair(r[0], r[1]);
  }
  cfg.split_train = get_or(d, "split_train", cfg.split_train);
  cfg.pad_factor = get_or(d, "pad_factor", cfg.pad_factor);
  return cfg;
}

OpticsConfig parse_optics(const json& o) {
  check_keys(o, "optics", {"voltage_kv", "cs_mm", "amplitude_contrast"});
  OpticsConfig cfg;
  cfg.voltage_kv = get_or(o, "voltage_kv", cfg.voltage_kv);
  cfg.cs_mm = get_or(o, "cs_mm", cfg.cs_mm);
  cfg.amplitude_contrast = get_or(o, "amplitude_contrast", cfg.amplitude_contrast);
  return cfg;
}

TrainConfig parse_train(const json& t) {
  check_keys(t, "train",
             {"mode", "head", "batch_size", "steps", "lr_volume", "lr_encoder", "beta1",
              "beta2", "eps", "loss", "eval_interval", "checkpoint_interval",
              "volume_init_max", "pad_factor", "filters", "mlp"});
  TrainConfig cfg;
  cfg.mode = train_mode_from_name(get_or<std::string>(t, "mode", "learned"));
  cfg.head = so3::head_from_name(get_or<std::string>(t, "head", "s2s2"));
  cfg.batch_size = get_or(t, "batch_size", cfg.batch_size);
  cfg.steps = get_or(t, "steps", cfg.steps);
  cfg.lr_volume = get_or(t, "lr_volume", cfg.lr_volume);
  cfg.lr_encoder = get_or(t, "lr_encoder", cfg.lr_encoder);
  cfg.beta1 = get_or(t, "beta1", cfg.beta1);
  cfg.beta2 = get_or(t, "beta2", cfg.beta2);
  cfg.eps = get_or(t, "eps", cfg.eps);
  const std::string loss = get_or<std::string>(t, "loss", "sum");
  CP_CHECK(loss == "sum" || loss == "mean", ConfigError, "train.loss must be sum|mean");
  cfg.loss = loss == "sum" ? LossKind::Sum : LossKind::Mean;
  cfg.eval_interval = get_or(t, "eval_interval", cfg.eval_interval);
  cfg.checkpoint_interval = get_or(t, "checkpoint_interval", cfg.checkpoint_interval);
  cfg.volume_init_max = get_or(t, "volume_init_max", cfg.volume_init_max);
  cfg.pad_factor = get_or(t, "pad_factor", cfg.pad_factor);
  if (t.contains("filters")) {
    const auto f = t.at("filters").get<std::vector<int>>();
    CP_CHECK(f.size() == 3, ConfigError, "train.filters must have 3 entries");
    cfg.filters = {f[0], f[1], f[2]};
  }
  if (t.contains("mlp")) {
    const auto m = t.at("mlp").get<std::vector<int>>();
    CP_CHECK(m.size() == 2, ConfigError, "train.mlp must have 2 entries");
    cfg.mlp = {m[0], m[1]};
  }
  return cfg;
}

}  // namespace

void SimRunConfig::validate() const {
  phantom.validate();
  dataset.validate();
  optics.validate();
}

void TrainRunConfig::validate() const { train.validate(); }

SimRunConfig parse_sim_config(const std::string& json_text) {
  const json root = load_json(json_text, "simulate config");
  check_keys(root, "config", {"seed", "phantom", "dataset", "optics"});
  SimRunConfig cfg;
  cfg.seed = get_or<std::uint64_t>(root, "seed", 0);
  if (root.contains("phantom")) cfg.phantom = parse_phantom(root.at("phantom"));
  else cfg.phantom = default_phantom();
  if (root.contains("dataset")) cfg.dataset = parse_dataset(root.at("dataset"));
  if (root.contains("optics")) cfg.optics = parse_optics(root.at("optics"));
  cfg.dataset.seed = cfg.seed;
  cfg.optics.pixel_size = cfg.phantom.pixel_size;
  cfg.validate();
  return cfg;
}

SimRunConfig parse_sim_config_file(const std::string& path) {
  return parse_sim_config(read_text(path));
}

TrainRunConfig parse_train_config(const std::string& json_text) {
  const json root = load_json(json_text, "train config");
  check_keys(root, "config", {"seed", "train"});
  TrainRunConfig cfg;
  cfg.seed = get_or<std::uint64_t>(root, "seed", 0);
  if (root.contains("train")) cfg.train = parse_train(root.at("train"));
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

TrainRunConfig parse_train_config_file(const std::string& path) {
  return parse_train_config(read_text(path));
}

std::string sim_config_json(const SimRunConfig& cfg) {
  json root;
  root["seed"] = cfg.seed;
  json& p = root["phantom"];
  p["n"] = cfg.phantom.n;
  p["pixel_size"] = cfg.phantom.pixel_size;
  p["blobs"] = json::array();
  for (const auto& b : cfg.phantom.blobs) {
    json blob;
    blob["center"] = {b.center_frac.x(), b.center_frac.y(), b.center_frac.z()};
    blob["sigma"] = b.sigma_vox;
    blob["amplitude"] = b.amplitude;
    p["blobs"].push_back(blob);
  }
  json& d = root["dataset"];
  d["n_images"] = cfg.dataset.n_images;
  d["snr_db"] = cfg.dataset.snr_db ? json(*cfg.dataset.snr_db) : json(nullptr);
  d["ctf_range_um"] = cfg.dataset.ctf_range_um
                          ? json({cfg.dataset.ctf_range_um->first,
                                  cfg.dataset.ctf_range_um->second})
                          : json(nullptr);
  d["split_train"] = cfg.dataset.split_train;
  d["pad_factor"] = cfg.dataset.pad_factor;
  json& o = root["optics"];
  o["voltage_kv"] = cfg.optics.voltage_kv;
  o["cs_mm"] = cfg.optics.cs_mm;
  o["amplitude_contrast"] = cfg.optics.amplitude_contrast;
  return root.dump(2) + "\n";
}

std::string train_config_json(const TrainRunConfig& cfg) {
  json root;
  root["seed"] = cfg.seed;
  json& t = root["train"];
  t["mode"] = train_mode_name(cfg.train.mode);
  t["head"] = so3::head_name(cfg.train.head);
  t["batch_size"] = cfg.train.batch_size;
  t["steps"] = cfg.train.steps;
  t["lr_volume"] = cfg.train.lr_volume;
  t["lr_encoder"] = cfg.train.lr_encoder;
  t["beta1"] = cfg.train.beta1;
  t["beta2"] = cfg.train.beta2;
  t["eps"] = cfg.train.eps;
  t["loss"] = cfg.train.loss == LossKind::Sum ? "sum" : "mean";
  t["eval_interval"] = cfg.train.eval_interval;
  t["checkpoint_interval"] = cfg.train.checkpoint_interval;
  t["volume_init_max"] = cfg.train.volume_init_max;
  t["pad_factor"] = cfg.train.pad_factor;
  t["filters"] = {cfg.train.filters[0], cfg.train.filters[1], cfg.train.filters[2]};
  t["mlp"] = {cfg.train.mlp[0], cfg.train.mlp[1]};
  return root.dump(2) + "\n";
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace cryopose
