#include "sfgmkl/data_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "sfgmkl/error.hpp"

namespace sfgmkl {

namespace {

std::vector<std::string_view> split_fields(std::string_view line, const std::string& delimiter) {
  std::vector<std::string_view> out;
  if (delimiter == "whitespace") {
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      if (pos >= line.size()) break;
      std::size_t end = pos;
      while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
      out.push_back(line.substr(pos, end - pos));
      pos = end;
    }
    return out;
  }
  const char sep = delimiter.front();
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(sep, start);
    out.push_back(line.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_cell(std::string_view cell, std::size_t line_no, std::size_t col,
                  const std::string& name) {
  cell = trim(cell);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() || !std::isfinite(value)) {
    throw DataError(name + ": line " + std::to_string(line_no) + ", column " +
                    std::to_string(col + 1) + ": non-numeric cell '" + std::string(cell) + "'");
  }
  return value;
}

std::string to_hex(const unsigned char* bytes, unsigned len) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned k = 0; k < len; ++k) {
    out.push_back(kDigits[bytes[k] >> 4]);
    out.push_back(kDigits[bytes[k] & 0xf]);
  }
  return out;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw IoError("sha256: digest initialisation failed");
    }
  }
  void update(const void* data, std::size_t len) { EVP_DigestUpdate(ctx_.get(), data, len); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    return to_hex(md, len);
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

double Normalization::denormalize_target(double y) const {
  return target_min + y * (target_max - target_min);
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("manifest: cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest manifest;
  const auto base = path.parent_path();
  try {
    for (const auto& rec : doc.at("datasets")) {
      DatasetEntry e;
      e.name = rec.at("name").get<std::string>();
      e.file = rec.at("file").get<std::string>();
      if (e.file.is_relative()) e.file = base / e.file;
      e.delimiter = rec.value("delimiter", std::string(","));
      e.header = rec.value("header", false);
      e.target_column = rec.at("target_column").get<std::size_t>();
      e.drop_columns = rec.value("drop_columns", std::vector<std::size_t>{});
      e.expected_rows = rec.at("rows").get<std::size_t>();
      e.expected_features = rec.at("features").get<std::size_t>();
      e.sha256 = rec.value("sha256", std::string());
      e.source_url = rec.value("url", std::string());
      if (e.delimiter.empty() || (e.delimiter.size() > 1 && e.delimiter != "whitespace")) {
        throw DataError("manifest: dataset '" + e.name + "' has an invalid delimiter");
      }
      manifest[e.name] = std::move(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  return manifest;
}

Dataset load_dataset(const DatasetEntry& entry) {
  if (!std::filesystem::exists(entry.file)) {
    throw IoError("dataset '" + entry.name + "': file not found: " + entry.file.string());
  }
  if (!entry.sha256.empty()) {
    const std::string actual = sha256_file(entry.file);
    if (actual != entry.sha256) {
      throw DataError("dataset '" + entry.name + "': checksum mismatch (expected " + entry.sha256 +
                      ", got " + actual + ")");
    }
  }
  std::ifstream in(entry.file);
  if (!in) throw IoError("dataset '" + entry.name + "': cannot open " + entry.file.string());

  const std::size_t columns = entry.expected_features + 1 + entry.drop_columns.size();
  std::vector<char> role(columns, 'f');  // f = feature, t = target, d = dropped
  if (entry.target_column >= columns) throw DataError("dataset '" + entry.name + "': target column out of range");
  role[entry.target_column] = 't';
  for (std::size_t c : entry.drop_columns) {
    if (c >= columns || c == entry.target_column) {
      throw DataError("dataset '" + entry.name + "': invalid drop column");
    }
    role[c] = 'd';
  }

  Dataset data;
  data.name = entry.name;
  data.dim = entry.expected_features;
  data.provenance = entry.source_url.empty() ? entry.file.string() : entry.source_url;
  data.features.reserve(entry.expected_rows * data.dim);
  data.targets.reserve(entry.expected_rows);

  std::string line;
  std::size_t line_no = 0;
  bool skipped_header = !entry.header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    const auto fields = split_fields(line, entry.delimiter);
    if (fields.size() != columns) {
      throw DataError(entry.name + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " columns, expected " + std::to_string(columns));
    }
    for (std::size_t c = 0; c < columns; ++c) {
      if (role[c] == 'd') continue;
      const double v = parse_cell(fields[c], line_no, c, entry.name);
      if (role[c] == 't') {
        data.targets.push_back(v);
      } else {
        data.features.push_back(v);
      }
    }
  }
  if (data.targets.size() != entry.expected_rows) {
    throw DataError("dataset '" + entry.name + "': expected " + std::to_string(entry.expected_rows) +
                    " rows, found " + std::to_string(data.targets.size()));
  }
  return data;
}

Dataset load_dataset(const std::string& name, const std::filesystem::path& manifest_path) {
  const auto manifest = load_manifest(manifest_path);
  const auto it = manifest.find(name);
  if (it == manifest.end()) throw ValidationError("dataset '" + name + "' is not in " + manifest_path.string());
  return load_dataset(it->second);
}

Dataset normalize(const Dataset& raw) {
  const std::size_t rows = raw.size();
  const std::size_t d = raw.dim;
  if (rows == 0 || d == 0) throw DataError("normalize: empty dataset");
  Normalization norm;
  norm.feature_min.assign(d, 0.0);
  norm.feature_max.assign(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    double lo = raw.features[c];
    double hi = lo;
    for (std::size_t t = 1; t < rows; ++t) {
      lo = std::min(lo, raw.features[t * d + c]);
      hi = std::max(hi, raw.features[t * d + c]);
    }
    norm.feature_min[c] = lo;
    norm.feature_max[c] = hi;
  }
  norm.row_scale = 1.0 / std::sqrt(static_cast<double>(d));
  const auto [tmin, tmax] = std::minmax_element(raw.targets.begin(), raw.targets.end());
  norm.target_min = *tmin;
  norm.target_max = *tmax;

  Dataset out = raw;
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t c = 0; c < d; ++c) {
      const double range = norm.feature_max[c] - norm.feature_min[c];
      const double unit = range > 0.0 ? (raw.features[t * d + c] - norm.feature_min[c]) / range : 0.0;
      out.features[t * d + c] = std::clamp(unit, 0.0, 1.0) * norm.row_scale;
    }
    const double trange = norm.target_max - norm.target_min;
    out.targets[t] = trange > 0.0 ? std::clamp((raw.targets[t] - norm.target_min) / trange, 0.0, 1.0) : 0.0;
  }
  out.normalization = std::move(norm);
  return out;
}

Dataset apply_stream_config(const Dataset& data, const StreamConfig& config) {
  const std::size_t rows = data.size();
  std::size_t horizon = rows;
  if (config.horizon) {
    if (*config.horizon == 0 || *config.horizon > rows) {
      throw ValidationError("stream: horizon must lie in [1, " + std::to_string(rows) + "]");
    }
    horizon = *config.horizon;
  }
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.shuffle_seed) {
    Rng rng(*config.shuffle_seed);
    // Fisher-Yates with an explicit bound draw so the order is library-independent.
    for (std::size_t k = rows; k > 1; --k) {
      const std::size_t j = static_cast<std::size_t>(rng() % k);
      std::swap(order[k - 1], order[j]);
    }
  }
  Dataset out;
  out.name = data.name;
  out.dim = data.dim;
  out.provenance = data.provenance;
  out.normalization = data.normalization;
  out.features.reserve(horizon * data.dim);
  out.targets.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t src = order[t];
    out.features.insert(out.features.end(), data.features.begin() + static_cast<std::ptrdiff_t>(src * data.dim),
                        data.features.begin() + static_cast<std::ptrdiff_t>((src + 1) * data.dim));
    out.targets.push_back(data.targets[src]);
  }
  return out;
}

SyntheticStream synthetic_stream(const SyntheticSpec& spec, const KernelDictionary& dict,
                                 std::uint64_t seed, std::size_t horizon) {
  if (spec.kernel_index < 1 || spec.kernel_index > dict.size()) {
    throw ValidationError("synthetic: kernel index out of range");
  }
  if (spec.input_dim == 0 || spec.num_rf == 0 || spec.anchors == 0 || horizon == 0) {
    throw ValidationError("synthetic: dimensions, anchors and horizon must be >= 1");
  }
  if (!(spec.noise_std >= 0.0)) throw ValidationError("synthetic: noise must be >= 0");
  const std::size_t d = spec.input_dim;
  const FeatureMap map =
      sample_dictionary(dict, spec.num_rf, d, seed).at(spec.kernel_index - 1);

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x53594eu};
  Rng rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto unit_ball_point = [&]() {
    std::vector<double> x(d);
    double sq = 0.0;
    for (double& v : x) {
      v = normal(rng);
      sq += v * v;
    }
    const double radius = std::pow(uniform(rng), 1.0 / static_cast<double>(d));
    const double scale = sq > 0.0 ? radius / std::sqrt(sq) : 0.0;
    for (double& v : x) v *= scale;
    return x;
  };

  SyntheticStream out;
  out.theta0.assign(map.feature_dim(), 0.0);
  std::vector<double> weights(spec.anchors);
  for (double& c : weights) c = uniform(rng) + 1e-3;
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (std::size_t m = 0; m < spec.anchors; ++m) {
    const auto z = map.features(unit_ball_point());
    const double c = 0.9 * weights[m] / wsum;
    for (std::size_t k = 0; k < z.size(); ++k) out.theta0[k] += c * z[k];
  }

  Dataset& data = out.data;
  data.name = "synthetic";
  data.dim = d;
  data.features.reserve(horizon * d);
  data.targets.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto x = unit_ball_point();
    const auto z = map.features(x);
    double y = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) y += out.theta0[k] * z[k];
    if (spec.noise_std > 0.0) y += spec.noise_std * normal(rng);
    if (y < 0.0 || y > 1.0) {
      ++out.clipped_targets;
      y = std::clamp(y, 0.0, 1.0);
    }
    data.features.insert(data.features.end(), x.begin(), x.end());
    data.targets.push_back(y);
  }
  std::ostringstream prov;
  prov << "synthetic kernel=" << spec.kernel_index << " noise=" << spec.noise_std
       << " seed=" << seed;
  data.provenance = prov.str();
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("sha256: cannot open " + path.string());
  Sha256 hash;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    if (got > 0) hash.update(buf.data(), static_cast<std::size_t>(got));
  }
  return hash.hex();
}

std::string content_hash(const Dataset& data) {
  Sha256 hash;
  const std::uint64_t dims[2] = {data.size(), data.dim};
  hash.update(dims, sizeof(dims));
  hash.update(data.features.data(), data.features.size() * sizeof(double));
  hash.update(data.targets.data(), data.targets.size() * sizeof(double));
  return hash.hex();
}

}  // namespace sfgmkl
