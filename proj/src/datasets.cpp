#include "mcsample/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "json.hpp"
#include "mcsample/error.hpp"
#include "mcsample/io_util.hpp"
#include "mcsample/rng.hpp"

namespace mcs {
namespace {

constexpr std::uint8_t kMagic[4] = {0x4D, 0x43, 0x4D, 0x52};  // "MCMR"
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 16;
constexpr int kTissueLabels = 6;

struct Ellipse {
  double cx, cy, a, b, theta;
  int label;

  bool contains(double u, double v) const {
    const double c = std::cos(theta), s = std::sin(theta);
    const double du = u - cx, dv = v - cy;
    const double p = (c * du + s * dv) / a;
    const double q = (-s * du + c * dv) / b;
    return p * p + q * q <= 1.0;
  }
};

// Quadratic polynomial in normalized coordinates, scaled so its peak
// magnitude over the image equals `amplitude`.
std::vector<double> bias_field(int h, int w, Rng& rng, double amplitude) {
  std::array<double, 6> coef{};
  for (auto& c : coef) c = rng.uniform(-1.0, 1.0);
  std::vector<double> field(static_cast<std::size_t>(h) * w);
  double peak = 0.0;
  for (int y = 0; y < h; ++y) {
    const double v = (2.0 * y + 1.0) / h - 1.0;
    for (int x = 0; x < w; ++x) {
      const double u = (2.0 * x + 1.0) / w - 1.0;
      const double f = coef[0] + coef[1] * u + coef[2] * v + coef[3] * u * u + coef[4] * u * v + coef[5] * v * v;
      field[static_cast<std::size_t>(y) * w + x] = f;
      peak = std::max(peak, std::abs(f));
    }
  }
  if (peak > 0.0)
    for (auto& f : field) f *= amplitude / peak;
  return field;
}

ImageSlice render(const std::vector<int>& labels, int h, int w, const std::array<double, kTissueLabels + 1>& lookup,
                  Rng& rng) {
  const auto bias = bias_field(h, w, rng, rng.uniform(0.0, 0.05));
  ImageSlice img(h, w);
  for (std::size_t i = 0; i < img.size(); ++i)
    img.pixels[i] = lookup[labels[i]] * (1.0 + bias[i]) + 0.01 * rng.normal();
  img = normalize(img);
  for (auto& p : img.pixels) p = static_cast<double>(static_cast<float>(p));
  return img;
}

std::vector<std::string> json_strings(const nlohmann::json& j, const char* key) {
  return j.at(key).get<std::vector<std::string>>();
}

}  // namespace

ImageSlice normalize(const ImageSlice& image) {
  ImageSlice out = image;
  double peak = 0.0;
  for (auto& p : out.pixels) {
    if (!std::isfinite(p)) throw Error(ErrorKind::InvalidInput, "non-finite pixel");
    p = std::max(p, 0.0);
    peak = std::max(peak, p);
  }
  if (peak > 0.0)
    for (auto& p : out.pixels) p /= peak;
  return out;
}

SlicePair generate_phantom_pair(int height, int width, std::uint64_t seed) {
  if (height < 32 || width < 32 || height % 8 != 0 || width % 8 != 0)
    throw Error(ErrorKind::InvalidInput, "phantom size must be >= 32 and divisible by 8");

  Rng rng(seed);
  const int count = 5 + static_cast<int>(rng.below(8));
  std::vector<Ellipse> ellipses;
  // Outer head outline and brain parenchyma, then inner structures.
  const double head_a = rng.uniform(0.70, 0.90), head_b = rng.uniform(0.80, 0.95);
  const double head_theta = rng.uniform(-0.15, 0.15);
  const double cx = rng.uniform(-0.05, 0.05), cy = rng.uniform(-0.05, 0.05);
  ellipses.push_back({cx, cy, head_a, head_b, head_theta, 1});
  const double shrink = rng.uniform(0.85, 0.92);
  ellipses.push_back({cx, cy, head_a * shrink, head_b * shrink, head_theta, 2});
  for (int i = 2; i < count; ++i) {
    const double r = 0.6 * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Ellipse e{cx + r * head_a * std::cos(phi), cy + r * head_b * std::sin(phi), rng.uniform(0.08, 0.35),
              rng.uniform(0.08, 0.35), rng.uniform(0.0, std::numbers::pi), 3 + static_cast<int>(rng.below(4))};
    ellipses.push_back(e);
  }

  std::vector<int> labels(static_cast<std::size_t>(height) * width, 0);
  for (int y = 0; y < height; ++y) {
    const double v = (2.0 * y + 1.0) / height - 1.0;
    for (int x = 0; x < width; ++x) {
      const double u = (2.0 * x + 1.0) / width - 1.0;
      for (const auto& e : ellipses)
        if (e.contains(u, v)) labels[static_cast<std::size_t>(y) * width + x] = e.label;
    }
  }

  std::array<double, kTissueLabels + 1> t1_lookup{}, t2_lookup{};
  for (int l = 1; l <= kTissueLabels; ++l) t1_lookup[l] = rng.uniform(0.2, 1.0);
  for (int l = 1; l <= kTissueLabels; ++l) t2_lookup[l] = rng.uniform(0.2, 1.0);

  SlicePair pair;
  pair.t1 = render(labels, height, width, t1_lookup, rng);
  pair.t2 = render(labels, height, width, t2_lookup, rng);
  return pair;
}

std::uint64_t pair_seed(std::uint64_t dataset_seed, std::uint64_t index) {
  return Rng({dataset_seed, index}).next();
}

std::vector<SlicePair> synth_pairs(int count, int size, std::uint64_t seed) {
  std::vector<SlicePair> pairs;
  pairs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    auto p = generate_phantom_pair(size, size, pair_seed(seed, static_cast<std::uint64_t>(i)));
    char id[32];
    std::snprintf(id, sizeof(id), "pair_%05d", i);
    p.id = id;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<std::uint8_t> encode_pair(const SlicePair& pair) {
  if (!pair.t1.same_shape(pair.t2)) throw Error(ErrorKind::Shape, "pair contrasts differ in shape");
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  append_u16_le(out, kVersion);
  append_u32_le(out, static_cast<std::uint32_t>(pair.t1.height));
  append_u32_le(out, static_cast<std::uint32_t>(pair.t1.width));
  append_u16_le(out, 2);
  for (double v : pair.t1.pixels) append_f32_le(out, static_cast<float>(v));
  for (double v : pair.t2.pixels) append_f32_le(out, static_cast<float>(v));
  return out;
}

SlicePair decode_pair(std::span<const std::uint8_t> bytes, std::string id) {
  if (bytes.size() < kHeaderBytes) throw Error(ErrorKind::CorruptFile, "pair file shorter than header");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
    throw Error(ErrorKind::CorruptFile, "bad magic");
  if (load_u16_le(bytes.data() + 4) != kVersion) throw Error(ErrorKind::CorruptFile, "unsupported version");
  const std::uint32_t h = load_u32_le(bytes.data() + 6);
  const std::uint32_t w = load_u32_le(bytes.data() + 10);
  if (load_u16_le(bytes.data() + 14) != 2) throw Error(ErrorKind::CorruptFile, "expected 2 contrasts");
  if (h == 0 || w == 0 || h > 65536 || w > 65536) throw Error(ErrorKind::CorruptFile, "bad shape");
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  if (bytes.size() != kHeaderBytes + 2 * plane * 4)
    throw Error(ErrorKind::CorruptFile, "payload size does not match header shape");

  SlicePair pair{ImageSlice(static_cast<int>(h), static_cast<int>(w)),
                 ImageSlice(static_cast<int>(h), static_cast<int>(w)), std::move(id)};
  const std::uint8_t* p = bytes.data() + kHeaderBytes;
  for (std::size_t i = 0; i < plane; ++i, p += 4) pair.t1.pixels[i] = load_f32_le(p);
  for (std::size_t i = 0; i < plane; ++i, p += 4) pair.t2.pixels[i] = load_f32_le(p);
  for (std::size_t i = 0; i < plane; ++i)
    if (!std::isfinite(pair.t1.pixels[i]) || !std::isfinite(pair.t2.pixels[i]))
      throw Error(ErrorKind::CorruptFile, "non-finite pixel");
  return pair;
}

void write_pair(const std::filesystem::path& path, const SlicePair& pair) {
  write_file_bytes(path, encode_pair(pair));
}

SlicePair read_pair(const std::filesystem::path& path) {
  return decode_pair(read_file_bytes(path), path.stem().string());
}

DatasetManifest split(std::span<const std::string> ids, std::array<double, 3> fractions, std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw Error(ErrorKind::InvalidInput, "split fractions must be nonnegative");
    total += f;
  }
  if (total > 1.0 + 1e-12) throw Error(ErrorKind::InvalidInput, "split fractions sum above 1");
  std::set<std::string> unique(ids.begin(), ids.end());
  if (unique.size() != ids.size()) throw Error(ErrorKind::InvalidInput, "duplicate ids");

  std::vector<std::string> order(ids.begin(), ids.end());
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  const auto n = static_cast<double>(order.size());
  std::array<std::size_t, 4> cut{0, 0, 0, 0};
  double cumulative = 0.0;
  for (int k = 0; k < 3; ++k) {
    cumulative += fractions[k];
    cut[k + 1] = std::min(order.size(), static_cast<std::size_t>(std::llround(n * std::min(cumulative, 1.0))));
    cut[k + 1] = std::max(cut[k + 1], cut[k]);
  }
  DatasetManifest m;
  m.seed = seed;
  m.train.assign(order.begin() + cut[0], order.begin() + cut[1]);
  m.val.assign(order.begin() + cut[1], order.begin() + cut[2]);
  m.test.assign(order.begin() + cut[2], order.begin() + cut[3]);
  return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["version"] = m.version;
  j["height"] = m.height;
  j["width"] = m.width;
  j["train"] = m.train;
  j["val"] = m.val;
  j["test"] = m.test;
  j["generator"] = {{"kind", "phantom"}, {"seed", m.seed}, {"pairs", m.pairs}};
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.version = j.at("version").get<int>();
    m.height = j.at("height").get<int>();
    m.width = j.at("width").get<int>();
    m.train = json_strings(j, "train");
    m.val = json_strings(j, "val");
    m.test = json_strings(j, "test");
    if (j.contains("generator")) {
      m.seed = j["generator"].value("seed", std::uint64_t{0});
      m.pairs = j["generator"].value("pairs", 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptFile, std::string("manifest: ") + e.what());
  }
  if (m.version != 1) throw Error(ErrorKind::CorruptFile, "unsupported manifest version");
  if (m.height < 1 || m.width < 1) throw Error(ErrorKind::CorruptFile, "manifest shape must be positive");
  std::set<std::string> seen;
  for (const auto* list : {&m.train, &m.val, &m.test})
    for (const auto& p : *list)
      if (!seen.insert(p).second) throw Error(ErrorKind::CorruptFile, "split lists overlap at " + p);
  return m;
}

PairDataset load_dataset(const std::filesystem::path& manifest_path) {
  PairDataset ds;
  ds.manifest = manifest_from_json(read_text_file(manifest_path));
  const auto root = manifest_path.parent_path();
  auto load = [&](const std::vector<std::string>& paths, std::vector<SlicePair>& out) {
    for (const auto& rel : paths) {
      auto pair = read_pair(root / rel);
      if (pair.t1.height != ds.manifest.height || pair.t1.width != ds.manifest.width)
        throw Error(ErrorKind::Shape, rel + " does not match the manifest shape");
      out.push_back(std::move(pair));
    }
  };
  load(ds.manifest.train, ds.train);
  load(ds.manifest.val, ds.val);
  load(ds.manifest.test, ds.test);
  return ds;
}

DatasetManifest synth_dataset(const std::filesystem::path& out_dir, int pairs, int size, std::uint64_t seed,
                              std::array<double, 3> fractions) {
  if (pairs < 1) throw Error(ErrorKind::InvalidInput, "need at least one pair");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "pairs", ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + (out_dir / "pairs").string());

  std::vector<std::string> rel;
  for (const auto& p : synth_pairs(pairs, size, seed)) {
    const std::string name = "pairs/" + p.id + ".mcmr";
    write_pair(out_dir / name, p);
    rel.push_back(name);
  }
  DatasetManifest m = split(rel, fractions, seed);
  m.height = size;
  m.width = size;
  m.pairs = pairs;
  write_text_file(out_dir / "manifest.json", manifest_to_json(m));
  return m;
}

}  // namespace mcs
