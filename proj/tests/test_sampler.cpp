#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "mcsample/error.hpp"
#include "mcsample/io_util.hpp"
#include "mcsample/sampler.hpp"
#include "grad_checks.hpp"
#include "oracles.hpp"

using namespace mcs;

namespace {

SamplerParams params_from(std::vector<float> logits, double slope, double lambda = 0.0) {
  SamplerParams p;
  p.logits = std::move(logits);
  p.slope = slope;
  p.sparsity = lambda;
  return p;
}

}  // namespace

TEST_CASE("soft mask") {
  for (double p : soft_mask(params_from(std::vector<float>(6, 0.0f), 10.0)).probs) CHECK(p == 0.5);

  const auto saturated = soft_mask(params_from({0.1f, -0.1f, 0.1f}, 1000.0));
  CHECK(std::abs(saturated.probs[0] - 1.0) < 1e-8);
  CHECK(std::abs(saturated.probs[1]) < 1e-8);

  CHECK(soft_mask(params_from({0.2f}, 5.0)).probs[0] == doctest::Approx(0.7310585786).epsilon(1e-7));

  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto p = soft_mask(params_from({static_cast<float>(rng.uniform(-2, 2))}, rng.uniform(0.1, 10))).probs[0];
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("sigmoid derivative") {
  const auto params = params_from({0.03f, -0.2f, 0.5f}, 7.0);
  const auto soft = soft_mask(params);
  const auto g = logit_gradient(params, soft, std::vector<double>(3, 1.0));
  for (int i = 0; i < 3; ++i) {
    const double w = params.logits[i], h = 1e-6;
    const double fd = (1.0 / (1.0 + std::exp(-7.0 * (w + h))) - 1.0 / (1.0 + std::exp(-7.0 * (w - h)))) / (2 * h);
    CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("sparsity penalty") {
  CHECK(sparsity_penalty({std::vector<double>(10, 0.5)}, 0.02) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(sparsity_penalty({std::vector<double>(10, 0.5)}, 0.0) == 0.0);
  CHECK(sparsity_penalty({{0.1, 0.2, 0.3, 0.4}}, 1.0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(sparsity_gradient({{0.1, 0.2, 0.3, 0.4}}, 1.0) == std::vector<double>(4, 0.25));
}

TEST_CASE("acquire_soft") {
  Rng rng(4);
  const auto img = oracle::random_image(8, 8, rng);

  SUBCASE("near-one mask is near identity") {
    const auto out = acquire_soft(img, {std::vector<double>(8, 1.0 - 1e-9)});
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(out.pixels[i] - img.pixels[i]) < 1e-6);
  }
  SUBCASE("uniform one-half halves the image") {
    const auto out = acquire_soft(img, {std::vector<double>(8, 0.5)});
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(out.pixels[i] - 0.5 * img.pixels[i]) < 1e-6);
  }
  SUBCASE("shape mismatch") {
    try {
      acquire_soft(img, {std::vector<double>(7, 0.5)});
      FAIL("expected shape error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Shape);
    }
  }
}

TEST_CASE("logit gradient through the forward model matches central differences") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    INFO("trial " << trial);
    CHECK(gradcheck::sampler_case(trial, rng) < 1e-3);
  }
}

TEST_CASE("extract mask") {
  SUBCASE("saturated positives are the support") {
    const auto params = params_from({-1, 2, -1, 3, -2, 1, -1, -3}, 100.0);
    CHECK(extract_mask(params, 3).indices == std::vector<int>{1, 3, 5});
  }
  SUBCASE("invariant to slope and monotone reparameterization") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<float> w(24), w3(24);
      for (int i = 0; i < 24; ++i) {
        w[i] = static_cast<float>(rng.uniform(-1, 1));
        w3[i] = 2.0f * w[i] + 0.5f;
      }
      const auto base = extract_mask(params_from(w, 10.0), 6);
      CHECK(extract_mask(params_from(w, 1000.0), 6) == base);
      CHECK(extract_mask(params_from(w, 0.01), 6) == base);
      CHECK(extract_mask(params_from(w3, 10.0), 6) == base);
    }
  }
  SUBCASE("matches the exhaustive best support") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<float> w(12);
      for (auto& v : w) v = static_cast<float>(rng.uniform(-0.5, 0.5));
      const auto params = params_from(w, 10.0);
      CHECK(extract_mask(params, 4).indices == oracle::best_support(soft_mask(params).probs, 4));
    }
  }
  CHECK_THROWS_AS(extract_mask(params_from({0, 0}, 1.0), 3), Error);
}

TEST_CASE("effective rate") {
  CHECK(effective_rate({std::vector<double>(5, 0.9)}) == 1.0);
  CHECK(effective_rate({std::vector<double>(5, 0.1)}) == 0.0);
  CHECK(effective_rate({{0.9, 0.4, 0.6, 0.2}}) == 0.5);
  CHECK_THROWS_AS(effective_rate({{0.5}}, 1.0), Error);
}

TEST_CASE("sampler init and checkpoint") {
  const auto a = init_sampler(64, 3);
  CHECK(a.logits == init_sampler(64, 3).logits);
  CHECK(a.logits != init_sampler(64, 4).logits);
  for (float w : a.logits) CHECK(std::abs(w) <= 0.01f);
  CHECK(a.slope == 10.0);
  CHECK(a.sparsity == 0.01);

  CHECK_THROWS_AS(validate(params_from({0.0f}, 0.0)), Error);
  CHECK_THROWS_AS(validate(params_from({0.0f}, 1.0, -0.1)), Error);

  const auto dir = std::filesystem::temp_directory_path() / "mcsample_sampler_test";
  std::filesystem::create_directories(dir);
  const auto header = dir / "sampler.json";
  auto params = params_from({0.25f, -0.5f, 0.125f}, 12.5, 0.03);
  save_sampler(header, params);
  CHECK(read_text_file(header) == "{\"n\":3,\"slope\":12.5,\"lambda\":0.03}\n");
  CHECK(read_file_bytes(dir / "sampler.bin").size() == 12);
  const auto loaded = load_sampler(header);
  CHECK(loaded.logits == params.logits);
  CHECK(loaded.slope == params.slope);
  CHECK(loaded.sparsity == params.sparsity);

  auto bytes = read_file_bytes(dir / "sampler.bin");
  bytes.pop_back();
  write_file_bytes(dir / "sampler.bin", bytes);
  try {
    load_sampler(header);
    FAIL("expected corrupt checkpoint");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CorruptCheckpoint);
  }
  std::filesystem::remove_all(dir);
}
