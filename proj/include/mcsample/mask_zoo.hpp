#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mcs {

/// Binary 1D Cartesian sampling pattern: the set of acquired phase-encode
/// lines out of n_lines.
struct LineMask {
  int n_lines = 0;
  std::vector<int> indices;  // strictly increasing, in [0, n_lines)

  int budget() const { return static_cast<int>(indices.size()); }
  /// Indicator vector of length n_lines (1 for acquired lines).
  std::vector<double> to_vector() const;
  bool contains(int line) const;

  friend bool operator==(const LineMask&, const LineMask&) = default;
};

/// Index of the DC phase-encode line for n lines.
constexpr int dc_line(int n) { return n / 2; }

/// `budget` contiguous lines centered on the DC line; an even budget puts the
/// extra line on the low-index side.
LineMask lowres_mask(int n, int budget);

/// round(center_fraction * budget) centered lines (as lowres_mask), the rest
/// equally spaced over the sorted complement, first and last complement line
/// included.
LineMask equidistant_mask(int n, int budget, double center_fraction = 2.0 / 3.0);

/// DC line plus budget-1 lines drawn without replacement with weights
/// exp(-(i - n/2)^2 / (2 sigma^2)). sigma defaults to n/6.
LineMask gaussian_mask(int n, int budget, std::optional<double> sigma, std::uint64_t seed);

/// The `budget` lines with the largest score; ties go to the line closer to
/// DC, then to the lower index. Scores must lie in [0, 1].
LineMask mask_from_probabilities(std::span<const double> probs, int budget);

/// Same selection rule as mask_from_probabilities for arbitrary finite scores.
LineMask top_lines(std::span<const double> scores, int budget);

/// n / budget.
double acceleration(int n, int budget);

/// Checks the LineMask invariants; throws InvalidMask.
void validate(const LineMask& mask);

std::string mask_to_json(const LineMask& mask);
LineMask mask_from_json(const std::string& text);
void write_mask(const std::filesystem::path& path, const LineMask& mask);
LineMask read_mask(const std::filesystem::path& path);

}  // namespace mcs
