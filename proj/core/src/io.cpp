#include "cryopose/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cryopose {

namespace fs = std::filesystem;
using nlohmann::json;

void atomic_write_file(const std::string& path, const std::string& bytes) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    CP_CHECK(out.good(), Error, "cannot open for writing: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    CP_CHECK(out.good(), Error, "write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  CP_CHECK(in.good(), DataError, "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool path_exists(const std::string& path) { return fs::exists(path); }

namespace {

const std::vector<std::string> kMetadataHeader = {
    "index", "q1", "q2", "q3", "q4", "t1", "t2",
    "d1_um", "d2_um", "alpha_rad", "sigma", "snr_db"};

}  // namespace

void write_metadata_csv(const std::string& path, const ParticleStack& stack) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(stack.meta.size());
  for (const auto& m : stack.meta) {
    std::vector<std::string> row;
    row.push_back(std::to_string(m.index));
    for (int i = 0; i < 4; ++i) row.push_back(fmt_double(m.rotation[i]));
    row.push_back(fmt_double(m.shift.x()));
    row.push_back(fmt_double(m.shift.y()));
    if (m.ctf) {
      row.push_back(fmt_double(m.ctf->d1_um));
      row.push_back(fmt_double(m.ctf->d2_um));
      row.push_back(fmt_double(m.ctf->alpha_rad));
    } else {
      row.insert(row.end(), {"", "", ""});
    }
    row.push_back(m.snr_db ? fmt_double(m.sigma) : std::string());
    row.push_back(fmt_optional(m.snr_db));
    rows.push_back(std::move(row));
  }
  write_csv(path, kMetadataHeader, rows);
}

std::vector<ParticleMeta> read_metadata_csv(const std::string& path,
                                            std::int64_t expected_count) {
  const CsvTable table = read_csv(path);
  for (const auto& col : kMetadataHeader) table.require_column(col);
  CP_CHECK(expected_count < 0 ||
               static_cast<std::int64_t>(table.rows.size()) == expected_count,
           DataError, "metadata row count does not match the image stack");
  std::vector<ParticleMeta> meta;
  meta.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    ParticleMeta m;
    m.index = static_cast<std::int64_t>(parse_double(row[0]));
    for (int i = 0; i < 4; ++i) m.rotation[i] = parse_double(row[1 + i]);
    CP_CHECK(std::abs(m.rotation.norm() - 1.0) < 1e-6, DataError,
             "metadata quaternion is not unit-norm");
    m.shift = Eigen::Vector2d(parse_double(row[5]), parse_double(row[6]));
    const auto d1 = parse_optional(row[7]);
    const auto d2 = parse_optional(row[8]);
    const auto alpha = parse_optional(row[9]);
    if (d1 || d2 || alpha) {
      CP_CHECK(d1 && d2 && alpha, DataError,
               "metadata CTF columns must be all present or all absent");
      m.ctf = CtfParams{*d1, *d2, *alpha};
    }
    const auto sigma = parse_optional(row[10]);
    m.sigma = sigma.value_or(0.0);
    m.snr_db = parse_optional(row[11]);
    meta.push_back(std::move(m));
  }
  return meta;
}

void write_dataset_dir(const std::string& dir, const ParticleStack& stack,
                       const Volume& ground_truth, const SimRunConfig& cfg, bool force) {
  const fs::path base(dir);
  if (fs::exists(base / "images.mrc") && !force) {
    throw ConfigError("output directory already contains a dataset: " + dir +
                      " (pass --force to overwrite)");
  }
  fs::create_directories(base);
  write_mrc((base / "images.mrc").string(), stack.images, stack.pixel_size,
            /*as_volume=*/false);
  write_metadata_csv((base / "metadata.csv").string(), stack);
  write_mrc((base / "ground_truth.mrc").string(), ground_truth.density,
            ground_truth.pixel_size, /*as_volume=*/true);
  const std::string config = sim_config_json(cfg);
  atomic_write_file((base / "config.json").string(), config);
  write_manifest((base / "manifest.json").string(), "simulate", cfg.seed, config);
}

LoadedDataset read_dataset_dir(const std::string& dir) {
  const fs::path base(dir);
  CP_CHECK(fs::exists(base / "images.mrc"), DataError,
           "no images.mrc under " + dir);
  LoadedDataset out;
  MrcData images = read_mrc((base / "images.mrc").string());
  CP_CHECK(images.data.dim(1) == images.data.dim(2), DataError,
           "image stack is not square");
  out.stack.images = images.data;
  out.stack.pixel_size = images.pixel_size;
  out.stack.meta =
      read_metadata_csv((base / "metadata.csv").string(), images.data.dim(0));

  if (fs::exists(base / "config.json")) {
    const SimRunConfig cfg = parse_sim_config(read_file((base / "config.json").string()));
    out.optics = cfg.optics;
    out.stack.n_train = cfg.dataset.train_count();
  } else {
    out.optics.pixel_size = images.pixel_size;
    out.stack.n_train = out.stack.count();
  }
  if (fs::exists(base / "ground_truth.mrc")) {
    MrcData gt = read_mrc((base / "ground_truth.mrc").string());
    out.ground_truth = Volume{gt.data, gt.pixel_size};
  }
  return out;
}

namespace {

constexpr char kWeightsMagic[8] = {'C', 'P', 'W', 'T', '0', '0', '0', '1'};

void check_little_endian() {
  const std::uint32_t probe = 1;
  CP_CHECK(*reinterpret_cast<const unsigned char*>(&probe) == 1, Error,
           "weight checkpoints require a little-endian host");
}

}  // namespace

void write_encoder_weights(const std::string& path, const EncoderWeights& weights,
                           const EncoderConfig& cfg) {
  check_little_endian();
  json manifest;
  manifest["version"] = 1;
  manifest["dtype"] = "float64-le";
  json enc;
  enc["input_size"] = cfg.input_size;
  enc["filters"] = {cfg.filters[0], cfg.filters[1], cfg.filters[2]};
  enc["mlp"] = {cfg.mlp[0], cfg.mlp[1]};
  enc["head"] = so3::head_name(cfg.head);
  manifest["encoder"] = enc;
  json tensors = json::array();
  for (const auto& e : weights.entries) {
    json t;
    t["name"] = e.name;
    t["shape"] = e.tensor.shape();
    tensors.push_back(t);
  }
  manifest["tensors"] = tensors;
  const std::string m = manifest.dump();

  std::string bytes(kWeightsMagic, sizeof(kWeightsMagic));
  const std::uint32_t version = 1;
  bytes.append(reinterpret_cast<const char*>(&version), 4);
  const std::uint64_t mlen = m.size();
  bytes.append(reinterpret_cast<const char*>(&mlen), 8);
  bytes.append(m);
  for (const auto& e : weights.entries) {
    bytes.append(reinterpret_cast<const char*>(e.tensor.real_data()),
                 static_cast<std::size_t>(e.tensor.numel()) * sizeof(double));
  }
  atomic_write_file(path, bytes);
}

std::pair<EncoderWeights, EncoderConfig> read_encoder_weights(const std::string& path) {
  check_little_endian();
  const std::string bytes = read_file(path);
  CP_CHECK(bytes.size() >= 20 && std::memcmp(bytes.data(), kWeightsMagic, 8) == 0,
           DataError, "not an encoder weight file: " + path);
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 8, 4);
  CP_CHECK(version == 1, DataError, "unsupported weight file version");
  std::uint64_t mlen;
  std::memcpy(&mlen, bytes.data() + 12, 8);
  CP_CHECK(bytes.size() >= 20 + mlen, DataError, "truncated weight file manifest");
  json manifest;
  try {
    manifest = json::parse(bytes.substr(20, mlen));
  } catch (const json::exception& e) {
    throw DataError(std::string("weight file manifest: ") + e.what());
  }

  EncoderConfig cfg;
  const json& enc = manifest.at("encoder");
  cfg.input_size = enc.at("input_size").get<int>();
  const auto filters = enc.at("filters").get<std::vector<int>>();
  const auto mlp = enc.at("mlp").get<std::vector<int>>();
  CP_CHECK(filters.size() == 3 && mlp.size() == 2, DataError, "bad encoder manifest");
  cfg.filters = {filters[0], filters[1], filters[2]};
  cfg.mlp = {mlp[0], mlp[1]};
  cfg.head = so3::head_from_name(enc.at("head").get<std::string>());

  EncoderWeights weights;
  std::size_t offset = 20 + mlen;
  for (const auto& t : manifest.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    const Shape shape = t.at("shape").get<Shape>();
    const std::int64_t count = shape_numel(shape);
    const std::size_t nbytes = static_cast<std::size_t>(count) * sizeof(double);
    CP_CHECK(offset + nbytes <= bytes.size(), DataError, "truncated weight payload");
    std::vector<double> values(static_cast<std::size_t>(count));
    std::memcpy(values.data(), bytes.data() + offset, nbytes);
    offset += nbytes;
    weights.entries.push_back({name, Tensor::from_real(shape, std::move(values))});
  }
  CP_CHECK(offset == bytes.size(), DataError, "trailing bytes in weight file");
  return {std::move(weights), cfg};
}

void write_poses_csv(const std::string& path, const std::vector<so3::Quaternion>& poses) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    rows.push_back({std::to_string(i), fmt_double(poses[i][0]), fmt_double(poses[i][1]),
                    fmt_double(poses[i][2]), fmt_double(poses[i][3])});
  }
  write_csv(path, {"index", "q1", "q2", "q3", "q4"}, rows);
}

std::vector<so3::Quaternion> read_poses_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int c1 = table.require_column("q1");
  const int c2 = table.require_column("q2");
  const int c3 = table.require_column("q3");
  const int c4 = table.require_column("q4");
  std::vector<so3::Quaternion> poses;
  poses.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    so3::Quaternion q;
    q << parse_double(row[static_cast<std::size_t>(c1)]),
        parse_double(row[static_cast<std::size_t>(c2)]),
        parse_double(row[static_cast<std::size_t>(c3)]),
        parse_double(row[static_cast<std::size_t>(c4)]);
    CP_CHECK(std::abs(q.norm() - 1.0) < 1e-6, DataError,
             "pose quaternion is not unit-norm in " + path);
    poses.push_back(q);
  }
  return poses;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back({std::to_string(r.step), fmt_double(r.loss),
                   fmt_double(r.pose_mae_raw_deg), fmt_double(r.pose_mae_aligned_deg),
                   std::isnan(r.fsc_resolution_A) ? std::string()
                                                  : fmt_double(r.fsc_resolution_A)});
  }
  write_csv(path,
            {"step", "loss", "pose_mae_raw_deg", "pose_mae_aligned_deg", "fsc_resolution"},
            out);
}

void write_fsc_csv(const std::string& path, const FscCurve& curve) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < curve.fsc.size(); ++i) {
    rows.push_back({fmt_double(curve.shell_freq[i]), fmt_double(curve.resolution_A[i]),
                    fmt_double(curve.fsc[i])});
  }
  write_csv(path, {"shell_freq_cyc_per_px", "resolution_A", "fsc"}, rows);
}

void write_manifest(const std::string& path, const std::string& tool,
                    std::uint64_t seed, const std::string& canonical_config) {
  json m;
  m["tool"] = tool;
  m["version"] = kToolVersion;
  m["seed"] = seed;
  m["config_fnv1a64"] = hex64(fnv1a64(canonical_config));
  atomic_write_file(path, m.dump(2) + "\n");
}

}  // namespace cryopose
