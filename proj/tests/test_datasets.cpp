#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "json.hpp"
#include "mcsample/datasets.hpp"
#include "mcsample/error.hpp"
#include "mcsample/io_util.hpp"

using namespace mcs;

namespace {

double support_overlap(const ImageSlice& a, const ImageSlice& b) {
  std::size_t both = 0, either = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a.pixels[i] > 0.05, pb = b.pixels[i] > 0.05;
    both += pa && pb;
    either += pa || pb;
  }
  return either ? double(both) / double(either) : 1.0;
}

double correlation(const ImageSlice& a, const ImageSlice& b) {
  const double n = double(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a.pixels[i];
    mb += b.pixels[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a.pixels[i] - ma, db = b.pixels[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return sab / std::sqrt(saa * sbb);
}

ErrorKind error_kind(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error");
  return ErrorKind::InvalidInput;
}

std::filesystem::path scratch(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("normalize") {
  ImageSlice img(1, 4, 0.0);
  img.pixels = {-1.0, 0.0, 2.0, 4.0};
  CHECK(normalize(img).pixels == std::vector<double>{0.0, 0.0, 0.5, 1.0});
  CHECK(normalize(ImageSlice(2, 2, 0.0)).pixels == std::vector<double>(4, 0.0));
  CHECK(normalize(ImageSlice(2, 2, -3.0)).pixels == std::vector<double>(4, 0.0));
  CHECK(normalize(ImageSlice(2, 2, 7.0)).pixels == std::vector<double>(4, 1.0));
}

TEST_CASE("phantom pairs") {
  const auto a = generate_phantom_pair(64, 64, 3);
  CHECK(a == generate_phantom_pair(64, 64, 3));
  CHECK(a.t2 != generate_phantom_pair(64, 64, 4).t2);
  CHECK(a.t1.height == 64);
  CHECK(a.t2.width == 64);

  double worst_overlap = 1.0, lo_corr = 1.0, hi_corr = -1.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto p = generate_phantom_pair(64, 64, seed);
    for (const auto* img : {&p.t1, &p.t2}) {
      const auto [mn, mx] = std::minmax_element(img->pixels.begin(), img->pixels.end());
      CHECK(*mn >= 0.0);
      CHECK(*mx == 1.0);
      CHECK(std::all_of(img->pixels.begin(), img->pixels.end(), [](double v) { return double(float(v)) == v; }));
    }
    worst_overlap = std::min(worst_overlap, support_overlap(p.t1, p.t2));
    const double c = correlation(p.t1, p.t2);
    lo_corr = std::min(lo_corr, c);
    hi_corr = std::max(hi_corr, c);
  }
  MESSAGE("support IoU min " << worst_overlap << ", correlation range [" << lo_corr << ", " << hi_corr << "]");
  CHECK(worst_overlap >= 0.9);
  CHECK(lo_corr > 0.2);
  CHECK(hi_corr < 0.999);

  CHECK(error_kind([] { generate_phantom_pair(30, 64, 0); }) == ErrorKind::InvalidInput);
  CHECK(error_kind([] { generate_phantom_pair(64, 36, 0); }) == ErrorKind::InvalidInput);
}

TEST_CASE("synthetic sets") {
  const auto pairs = synth_pairs(5, 32, 9);
  REQUIRE(pairs.size() == 5);
  CHECK(pairs[0].id == "pair_00000");
  CHECK(pairs[4].id == "pair_00004");
  CHECK(pairs[2] == synth_pairs(5, 32, 9)[2]);
  // Each pair depends only on (seed, index).
  CHECK(synth_pairs(3, 32, 9)[2].t2 == pairs[2].t2);
  CHECK(pair_seed(9, 0) != pair_seed(9, 1));
  CHECK(pair_seed(9, 1) != pair_seed(10, 1));
}

TEST_CASE("pair file format") {
  const auto pair = generate_phantom_pair(32, 40, 1);
  const auto bytes = encode_pair(pair);
  REQUIRE(bytes.size() == 4 + 2 + 4 + 4 + 2 + 2 * 4 * 32 * 40);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "MCMR");
  CHECK(load_u16_le(bytes.data() + 4) == 1);
  CHECK(load_u32_le(bytes.data() + 6) == 32);
  CHECK(load_u32_le(bytes.data() + 10) == 40);
  CHECK(load_u16_le(bytes.data() + 14) == 2);
  CHECK(double(load_f32_le(bytes.data() + 16)) == pair.t1.pixels[0]);
  CHECK(double(load_f32_le(bytes.data() + 16 + 4 * 32 * 40)) == pair.t2.pixels[0]);

  auto decoded = decode_pair(bytes, pair.id);
  CHECK(decoded == pair);

  const auto dir = scratch("mcsample_pair_test");
  write_pair(dir / "slice_7.mcmr", pair);
  const auto read = read_pair(dir / "slice_7.mcmr");
  CHECK(read.id == "slice_7");
  CHECK(read.t2 == pair.t2);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK(error_kind([&] { decode_pair(bad); }) == ErrorKind::CorruptFile);
  bad = bytes;
  bad[4] = 2;
  CHECK(error_kind([&] { decode_pair(bad); }) == ErrorKind::CorruptFile);
  bad = bytes;
  bad.pop_back();
  CHECK(error_kind([&] { decode_pair(bad); }) == ErrorKind::CorruptFile);
  bad = bytes;
  bad.push_back(0);
  CHECK(error_kind([&] { decode_pair(bad); }) == ErrorKind::CorruptFile);
  CHECK(error_kind([&] { decode_pair(std::span<const std::uint8_t>(bytes.data(), 10)); }) == ErrorKind::CorruptFile);
  CHECK(error_kind([&] { read_pair(dir / "missing.mcmr"); }) == ErrorKind::Io);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pair files round-trip losslessly") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto pair = generate_phantom_pair(32, 32, seed);
    if (!(decode_pair(encode_pair(pair), pair.id) == pair)) FAIL("seed " << seed);
  }
}

TEST_CASE("split") {
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("id" + std::to_string(i));
  const auto m = split(ids, {0.4, 0.23, 0.37}, 5);
  CHECK(m.train.size() == 40);
  CHECK(m.val.size() == 23);
  CHECK(m.test.size() == 37);

  std::set<std::string> all;
  for (const auto* part : {&m.train, &m.val, &m.test}) all.insert(part->begin(), part->end());
  CHECK(all.size() == 100);
  CHECK(all == std::set<std::string>(ids.begin(), ids.end()));

  const auto again = split(ids, {0.4, 0.23, 0.37}, 5);
  CHECK(again.train == m.train);
  CHECK(again.test == m.test);
  CHECK(split(ids, {0.4, 0.23, 0.37}, 6).train != m.train);

  const auto partial = split(ids, {0.5, 0.1, 0.1}, 1);
  CHECK(partial.train.size() + partial.val.size() + partial.test.size() == 70);

  for (int n : {1, 7, 300}) {
    std::vector<std::string> v;
    for (int i = 0; i < n; ++i) v.push_back(std::to_string(i));
    const auto s = split(v, {2.0 / 3.0, 2.0 / 15.0, 1.0 / 5.0}, 0);
    CHECK(s.train.size() + s.val.size() + s.test.size() == std::size_t(n));
  }
  const auto desk = split(std::vector<std::string>(ids.begin(), ids.end()), {2.0 / 3.0, 2.0 / 15.0, 1.0 / 5.0}, 0);
  CHECK(desk.train.size() == 67);

  CHECK_THROWS_AS(split(ids, {0.6, 0.3, 0.2}, 0), Error);
  CHECK_THROWS_AS(split(ids, {-0.1, 0.3, 0.2}, 0), Error);
}

TEST_CASE("manifest json") {
  DatasetManifest m;
  m.height = 64;
  m.width = 64;
  m.train = {"pairs/a.mcmr", "pairs/b.mcmr"};
  m.val = {"pairs/c.mcmr"};
  m.test = {"pairs/d.mcmr"};
  m.seed = 3;
  m.pairs = 4;
  const auto text = manifest_to_json(m);
  const auto back = manifest_from_json(text);
  CHECK(back.train == m.train);
  CHECK(back.val == m.val);
  CHECK(back.test == m.test);
  CHECK(back.seed == 3);
  CHECK(back.pairs == 4);
  CHECK(manifest_to_json(back) == text);

  auto j = nlohmann::json::parse(text);
  j["test"] = {"pairs/a.mcmr"};
  CHECK(error_kind([&] { manifest_from_json(j.dump()); }) == ErrorKind::CorruptFile);
  CHECK(error_kind([] { manifest_from_json("{"); }) == ErrorKind::CorruptFile);
  CHECK(error_kind([] { manifest_from_json("{\"version\":1}"); }) == ErrorKind::CorruptFile);
}

TEST_CASE("synth_dataset writes a loadable set") {
  const auto dir = scratch("mcsample_synth_test");
  const auto m = synth_dataset(dir, 15, 32, 2);
  CHECK(m.train.size() == 10);
  CHECK(m.val.size() == 2);
  CHECK(m.test.size() == 3);
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  CHECK(std::distance(std::filesystem::directory_iterator(dir / "pairs"), {}) == 15);

  const auto ds = load_dataset(dir / "manifest.json");
  CHECK(ds.train.size() == 10);
  const auto mem = synth_pairs(15, 32, 2);
  for (const auto& p : ds.test) {
    const auto it = std::find_if(mem.begin(), mem.end(), [&](const SlicePair& q) { return q.id == p.id; });
    REQUIRE(it != mem.end());
    CHECK(it->t2 == p.t2);
    CHECK(it->t1 == p.t1);
  }

  const auto again = scratch("mcsample_synth_test2");
  synth_dataset(again, 15, 32, 2);
  CHECK(read_file_bytes(again / "manifest.json") == read_file_bytes(dir / "manifest.json"));
  CHECK(read_file_bytes(again / "pairs" / "pair_00004.mcmr") == read_file_bytes(dir / "pairs" / "pair_00004.mcmr"));

  std::filesystem::remove(dir / "pairs" / "pair_00004.mcmr");
  CHECK(error_kind([&] { load_dataset(dir / "manifest.json"); }) == ErrorKind::Io);
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(again);
}
