#include "mcsample/mask_zoo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "json.hpp"
#include "mcsample/error.hpp"
#include "mcsample/io_util.hpp"
#include "mcsample/rng.hpp"

namespace mcs {
namespace {

void check_budget(int n, int budget) {
  if (n < 1 || budget < 1 || budget > n)
    throw Error(ErrorKind::InvalidBudget,
                "need 1 <= budget <= n, got budget=" + std::to_string(budget) + " n=" + std::to_string(n));
}

// round(num / den) for num >= 0, den > 0, halves rounded up.
long round_ratio(long num, long den) { return (2 * num + den) / (2 * den); }

std::vector<int> centered_block(int n, int count) {
  std::vector<int> out(static_cast<std::size_t>(count));
  std::iota(out.begin(), out.end(), dc_line(n) - count / 2);
  return out;
}

}  // namespace

std::vector<double> LineMask::to_vector() const {
  std::vector<double> v(static_cast<std::size_t>(n_lines), 0.0);
  for (int i : indices) v[static_cast<std::size_t>(i)] = 1.0;
  return v;
}

bool LineMask::contains(int line) const { return std::binary_search(indices.begin(), indices.end(), line); }

LineMask lowres_mask(int n, int budget) {
  check_budget(n, budget);
  return {n, centered_block(n, budget)};
}

LineMask equidistant_mask(int n, int budget, double center_fraction) {
  check_budget(n, budget);
  if (!(center_fraction > 0.0 && center_fraction <= 1.0))
    throw Error(ErrorKind::InvalidInput, "center_fraction must lie in (0, 1]");

  const int center = static_cast<int>(std::lround(center_fraction * budget));
  std::vector<int> lines = centered_block(n, center);

  const int peripheral = budget - center;
  if (peripheral > 0) {
    std::vector<int> complement;
    complement.reserve(static_cast<std::size_t>(n - center));
    for (int i = 0; i < n; ++i)
      if (!std::binary_search(lines.begin(), lines.end(), i)) complement.push_back(i);
    const long last = static_cast<long>(complement.size()) - 1;
    if (peripheral == 1) {
      lines.push_back(complement[static_cast<std::size_t>(last / 2)]);
    } else {
      for (long j = 0; j < peripheral; ++j)
        lines.push_back(complement[static_cast<std::size_t>(round_ratio(j * last, peripheral - 1))]);
    }
    std::sort(lines.begin(), lines.end());
  }
  return {n, std::move(lines)};
}

LineMask gaussian_mask(int n, int budget, std::optional<double> sigma, std::uint64_t seed) {
  check_budget(n, budget);
  const double s = sigma.value_or(n / 6.0);
  if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorKind::InvalidSigma, "sigma must be positive");

  const int dc = dc_line(n);
  std::vector<double> weight(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) weight[i] = std::exp(-double(i - dc) * (i - dc) / (2.0 * s * s));

  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  taken[dc] = true;
  std::vector<int> lines{dc};
  Rng rng(seed);
  while (static_cast<int>(lines.size()) < budget) {
    double total = 0.0;
    for (int i = 0; i < n; ++i)
      if (!taken[i]) total += weight[i];

    int pick = -1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        if (taken[i] || weight[i] == 0.0) continue;
        acc += weight[i];
        pick = i;
        if (target < acc) break;
      }
    } else {
      // All remaining weights underflowed: take the free line nearest DC.
      for (int d = 0; pick < 0; ++d) {
        if (dc - d >= 0 && !taken[dc - d]) pick = dc - d;
        else if (dc + d < n && !taken[dc + d]) pick = dc + d;
      }
    }
    taken[pick] = true;
    lines.push_back(pick);
  }
  std::sort(lines.begin(), lines.end());
  return {n, std::move(lines)};
}

LineMask top_lines(std::span<const double> scores, int budget) {
  const int n = static_cast<int>(scores.size());
  check_budget(n, budget);
  for (double s : scores)
    if (!std::isfinite(s)) throw Error(ErrorKind::InvalidInput, "non-finite line score");

  const int dc = dc_line(n);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    const int da = std::abs(a - dc);
    const int db = std::abs(b - dc);
    if (da != db) return da < db;
    return a < b;
  });
  order.resize(static_cast<std::size_t>(budget));
  std::sort(order.begin(), order.end());
  return {n, std::move(order)};
}

LineMask mask_from_probabilities(std::span<const double> probs, int budget) {
  for (double p : probs)
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidInput, "probabilities must lie in [0, 1]");
  return top_lines(probs, budget);
}

double acceleration(int n, int budget) {
  if (budget <= 0) throw Error(ErrorKind::InvalidBudget, "acceleration undefined for budget <= 0");
  return static_cast<double>(n) / budget;
}

void validate(const LineMask& mask) {
  if (mask.n_lines < 1) throw Error(ErrorKind::InvalidMask, "n_lines must be positive");
  if (mask.indices.empty()) throw Error(ErrorKind::InvalidMask, "mask has no lines");
  for (std::size_t i = 0; i < mask.indices.size(); ++i) {
    const int v = mask.indices[i];
    if (v < 0 || v >= mask.n_lines) throw Error(ErrorKind::InvalidMask, "line index out of range");
    if (i > 0 && v <= mask.indices[i - 1])
      throw Error(ErrorKind::InvalidMask, "line indices must be strictly increasing (no duplicates)");
  }
}

std::string mask_to_json(const LineMask& mask) {
  nlohmann::ordered_json j;
  j["n_lines"] = mask.n_lines;
  j["budget"] = mask.budget();
  j["indices"] = mask.indices;
  return j.dump() + "\n";
}

LineMask mask_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptFile, std::string("mask file is not JSON: ") + e.what());
  }
  LineMask mask;
  int budget = 0;
  try {
    mask.n_lines = j.at("n_lines").get<int>();
    budget = j.at("budget").get<int>();
    mask.indices = j.at("indices").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidMask, std::string("malformed mask file: ") + e.what());
  }
  if (budget != mask.budget())
    throw Error(ErrorKind::InvalidMask, "budget " + std::to_string(budget) + " does not match " +
                                            std::to_string(mask.budget()) + " indices");
  validate(mask);
  return mask;
}

void write_mask(const std::filesystem::path& path, const LineMask& mask) {
  validate(mask);
  write_text_file(path, mask_to_json(mask));
}

LineMask read_mask(const std::filesystem::path& path) { return mask_from_json(read_text_file(path)); }

}  // namespace mcs
