#include "mcsample/sampler.hpp"

#include <cmath>
#include <string>

#include "json.hpp"
#include "mcsample/error.hpp"
#include "mcsample/io_util.hpp"
#include "mcsample/rng.hpp"

namespace mcs {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::filesystem::path blob_path(const std::filesystem::path& header) {
  auto p = header;
  p.replace_extension(".bin");
  return p;
}

}  // namespace

SamplerParams init_sampler(int n, std::uint64_t seed, double slope, double sparsity) {
  if (n < 1) throw Error(ErrorKind::InvalidInput, "sampler needs at least one line");
  SamplerParams params;
  params.slope = slope;
  params.sparsity = sparsity;
  params.logits.resize(static_cast<std::size_t>(n));
  Rng rng(seed);
  for (auto& w : params.logits) w = static_cast<float>(rng.uniform(-0.01, 0.01));
  validate(params);
  return params;
}

void validate(const SamplerParams& params) {
  if (params.logits.empty()) throw Error(ErrorKind::InvalidInput, "sampler has no logits");
  if (!(params.slope > 0.0) || !std::isfinite(params.slope))
    throw Error(ErrorKind::InvalidInput, "sigmoid slope must be positive");
  if (!(params.sparsity >= 0.0) || !std::isfinite(params.sparsity))
    throw Error(ErrorKind::InvalidInput, "sparsity coefficient must be nonnegative");
  for (float w : params.logits)
    if (!std::isfinite(w)) throw Error(ErrorKind::InvalidInput, "non-finite logit");
}

SoftMask soft_mask(const SamplerParams& params) {
  SoftMask out;
  out.probs.reserve(params.logits.size());
  for (float w : params.logits) out.probs.push_back(sigmoid(params.slope * static_cast<double>(w)));
  return out;
}

double sparsity_penalty(const SoftMask& mask, double lambda) {
  if (mask.probs.empty()) return 0.0;
  double sum = 0.0;
  for (double p : mask.probs) sum += p;
  return lambda * sum / static_cast<double>(mask.probs.size());
}

ImageSlice acquire_soft(const ImageSlice& image, const SoftMask& mask) {
  if (mask.probs.size() != static_cast<std::size_t>(image.height))
    throw Error(ErrorKind::Shape, "soft mask length does not match image height");
  return acquire_soft_traced(fft2_centered(image), mask).magnitude;
}

SoftAcquisition acquire_soft_traced(KSpaceSlice full_kspace, const SoftMask& mask) {
  SoftAcquisition trace;
  trace.weighted = ifft2_centered(apply_line_mask(full_kspace, mask.probs));
  trace.magnitude = magnitude_image(trace.weighted);
  trace.full_kspace = std::move(full_kspace);
  return trace;
}

std::vector<double> acquire_soft_backward(const SoftAcquisition& trace, const ImageSlice& grad_magnitude) {
  const auto& z = trace.weighted;
  if (grad_magnitude.height != z.height || grad_magnitude.width != z.width)
    throw Error(ErrorKind::Shape, "gradient shape does not match acquisition");

  // d|z|/dz = z/|z| (zero where |z| = 0).
  ComplexImage grad_z(z.height, z.width);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double mag = trace.magnitude.pixels[i];
    if (mag > 0.0) {
      grad_z.real[i] = grad_magnitude.pixels[i] * z.real[i] / mag;
      grad_z.imag[i] = grad_magnitude.pixels[i] * z.imag[i] / mag;
    }
  }
  // The adjoint of the unitary inverse transform is the forward transform.
  const KSpaceSlice grad_k = fft2_centered(grad_z);

  const auto& k = trace.full_kspace;
  std::vector<double> grad_p(static_cast<std::size_t>(k.height), 0.0);
  for (int row = 0; row < k.height; ++row) {
    double acc = 0.0;
    const std::size_t base = static_cast<std::size_t>(row) * k.width;
    for (int col = 0; col < k.width; ++col)
      acc += grad_k.real[base + col] * k.real[base + col] + grad_k.imag[base + col] * k.imag[base + col];
    grad_p[row] = acc;
  }
  return grad_p;
}

std::vector<double> logit_gradient(const SamplerParams& params, const SoftMask& mask,
                                   std::span<const double> grad_probs) {
  if (grad_probs.size() != mask.probs.size() || mask.probs.size() != params.logits.size())
    throw Error(ErrorKind::Shape, "logit gradient size mismatch");
  std::vector<double> out(grad_probs.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double p = mask.probs[i];
    out[i] = grad_probs[i] * params.slope * p * (1.0 - p);
  }
  return out;
}

std::vector<double> sparsity_gradient(const SoftMask& mask, double lambda) {
  return std::vector<double>(mask.probs.size(), lambda / static_cast<double>(mask.probs.size()));
}

LineMask extract_mask(const SamplerParams& params, int budget) {
  validate(params);
  // sigmoid(slope * w) is strictly increasing in w, so ranking logits is the
  // exact-arithmetic ranking of probabilities and does not collapse ties
  // where the sigmoid saturates in floating point.
  std::vector<double> scores(params.logits.begin(), params.logits.end());
  return top_lines(scores, budget);
}

double effective_rate(const SoftMask& mask, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorKind::InvalidInput, "threshold must lie in (0, 1)");
  if (mask.probs.empty()) return 0.0;
  std::size_t count = 0;
  for (double p : mask.probs)
    if (p > threshold) ++count;
  return static_cast<double>(count) / static_cast<double>(mask.probs.size());
}

void save_sampler(const std::filesystem::path& header, const SamplerParams& params) {
  validate(params);
  nlohmann::ordered_json j;
  j["n"] = params.lines();
  j["slope"] = params.slope;
  j["lambda"] = params.sparsity;
  write_text_file(header, j.dump() + "\n");
  write_file_bytes(blob_path(header), encode_f32_blob(params.logits));
}

SamplerParams load_sampler(const std::filesystem::path& header) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(header));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptCheckpoint, std::string("sampler header: ") + e.what());
  }
  SamplerParams params;
  int n = 0;
  try {
    n = j.at("n").get<int>();
    params.slope = j.at("slope").get<double>();
    params.sparsity = j.at("lambda").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptCheckpoint, std::string("sampler header: ") + e.what());
  }
  const auto bytes = read_file_bytes(blob_path(header));
  if (n < 1 || bytes.size() != static_cast<std::size_t>(n) * 4)
    throw Error(ErrorKind::CorruptCheckpoint, "sampler blob holds " + std::to_string(bytes.size()) +
                                                  " bytes, header expects " + std::to_string(n) + " floats");
  params.logits = decode_f32_blob(bytes);
  try {
    validate(params);
  } catch (const Error& e) {
    throw Error(ErrorKind::CorruptCheckpoint, e.what());
  }
  return params;
}

}  // namespace mcs
