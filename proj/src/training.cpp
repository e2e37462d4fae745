#include "mcsample/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mcsample/error.hpp"
#include "mcsample/forward_model.hpp"
#include "mcsample/io_util.hpp"
#include "mcsample/rng.hpp"

namespace mcs {
namespace {

// Stream tags for seeds derived from TrainConfig::seed.
constexpr std::uint64_t kSamplerStream = 1;
constexpr std::uint64_t kShuffleStream = 2;

void check_pairs(std::span<const SlicePair> pairs, const char* what) {
  if (pairs.empty()) throw Error(ErrorKind::InvalidInput, std::string(what) + " set is empty");
  const int h = pairs.front().t2.height, w = pairs.front().t2.width;
  for (const auto& p : pairs)
    if (p.t1.height != h || p.t1.width != w || p.t2.height != h || p.t2.width != w)
      throw Error(ErrorKind::Shape, std::string(what) + " slices do not share one shape");
}

NetConfig net_config_for(const TrainConfig& config) {
  NetConfig net = config.net;
  net.in_channels = config.multi_contrast ? 2 : 1;
  return net;
}

FeatureMap<float> stack(const ImageSlice& aliased, const SlicePair& pair, bool multi_contrast) {
  if (multi_contrast) {
    const ImageSlice* ch[] = {&aliased, &pair.t1};
    return stack_channels(ch);
  }
  const ImageSlice* ch[] = {&aliased};
  return stack_channels(ch);
}

// Forward + MAE; fills grad_out with d(mean |pred - target|)/d(pred) scaled by `scale`.
double mae_and_grad(const FeatureMap<float>& pred, const ImageSlice& target, double scale, FeatureMap<float>& grad_out) {
  grad_out = FeatureMap<float>(1, pred.height, pred.width);
  const auto n = static_cast<double>(target.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - target.pixels[i];
    acc += std::abs(d);
    grad_out.data[i] = static_cast<float>(d > 0 ? scale / n : d < 0 ? -scale / n : 0.0);
  }
  return acc / n;
}

std::vector<ParamGroup> net_groups(NetWeights& net, const NetWeights& grads) {
  std::vector<ParamGroup> groups;
  for (std::size_t i = 0; i < net.tensors.size(); ++i)
    groups.push_back({net.tensors[i].values, grads.tensors[i].values});
  return groups;
}

struct BatchPlanner {
  BatchPlanner(std::size_t n, int batch, std::uint64_t s) : count(n), batch_size(batch), seed(s) {}

  std::size_t count;
  int batch_size;
  std::uint64_t seed;
  std::uint64_t epoch = 0;
  std::size_t cursor = 0;
  std::vector<std::size_t> order;

  // Next batch; `epoch_done` is set when this batch finishes an epoch.
  std::vector<std::size_t> next(bool& epoch_done) {
    if (order.empty()) order = epoch_order(count, seed, epoch);
    const std::size_t end = std::min(order.size(), cursor + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> batch(order.begin() + cursor, order.begin() + end);
    cursor = end;
    epoch_done = cursor == order.size();
    if (epoch_done) {
      ++epoch;
      cursor = 0;
      order.clear();
    }
    return batch;
  }
};

ValidationRecord validate_with(const std::vector<FeatureMap<float>>& inputs, std::span<const SlicePair> val,
                               const NetWeights& net, int step, int epoch) {
  ValidationRecord rec{step, epoch, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < val.size(); ++i) {
    const ImageSlice pred = to_image(forward(net, inputs[i]));
    rec.mae += mae(pred, val[i].t2);
    rec.psnr_db += psnr(pred, val[i].t2);
    rec.ssim += ssim(pred, val[i].t2);
  }
  const auto n = static_cast<double>(val.size());
  rec.mae /= n;
  rec.psnr_db /= n;
  rec.ssim /= n;
  return rec;
}

void check_loss(double loss, const TrainLog& log) {
  if (std::isfinite(loss)) return;
  const int last = log.steps.empty() ? 0 : log.steps.back().step;
  throw Error(ErrorKind::DivergedTraining, "non-finite loss; last finite step " + std::to_string(last));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void adam_step(std::span<const ParamGroup> groups, AdamState& state, const AdamConfig& config) {
  for (const auto& g : groups) {
    if (g.values.size() != g.grads.size()) throw Error(ErrorKind::Shape, "parameter/gradient size mismatch");
    for (float v : g.grads)
      if (!std::isfinite(v)) throw Error(ErrorKind::DivergedTraining, "non-finite gradient");
  }
  if (state.m.empty()) {
    for (const auto& g : groups) {
      state.m.emplace_back(g.values.size(), 0.0);
      state.v.emplace_back(g.values.size(), 0.0);
    }
  }
  if (state.m.size() != groups.size()) throw Error(ErrorKind::Shape, "optimizer state does not match groups");

  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < groups.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != groups[k].values.size()) throw Error(ErrorKind::Shape, "optimizer state does not match groups");
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = groups[k].grads[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      groups[k].values[i] = static_cast<float>(groups[k].values[i] - config.learning_rate * m_hat /
                                                                         (std::sqrt(v_hat) + config.eps));
    }
  }
}

void validate(const TrainConfig& c) {
  if (!(c.adam.learning_rate > 0.0)) throw Error(ErrorKind::Config, "learning_rate must be positive");
  if (!(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0) || !(c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0))
    throw Error(ErrorKind::Config, "adam betas must lie in [0, 1)");
  if (!(c.adam.eps > 0.0)) throw Error(ErrorKind::Config, "adam_eps must be positive");
  if (c.batch_size < 1) throw Error(ErrorKind::Config, "batch_size must be >= 1");
  if (c.steps < 1) throw Error(ErrorKind::Config, "steps must be >= 1");
  if (c.budget < 1) throw Error(ErrorKind::Config, "budget must be >= 1");
  if (!(c.sparsity >= 0.0)) throw Error(ErrorKind::Config, "lambda must be nonnegative");
  if (!(c.slope > 0.0)) throw Error(ErrorKind::Config, "slope must be positive");
  validate(net_config_for(c));
}

std::string train_log_csv(const TrainLog& log) {
  std::ostringstream out;
  out << "step,phase,loss_total,loss_mae,loss_sparsity,val_psnr,val_ssim\n";
  std::size_t v = 0;
  auto emit_val = [&](const ValidationRecord& r) {
    out << r.step << ",val,," << format_real(r.mae) << ",," << format_real(r.psnr_db) << ','
        << format_real(r.ssim) << '\n';
  };
  for (const auto& s : log.steps) {
    out << s.step << ",train," << format_real(s.loss_total) << ',' << format_real(s.loss_mae) << ','
        << (s.loss_sparsity ? format_real(*s.loss_sparsity) : "") << ",,\n";
    while (v < log.validation.size() && log.validation[v].step == s.step) emit_val(log.validation[v++]);
  }
  while (v < log.validation.size()) emit_val(log.validation[v++]);
  return out.str();
}

void write_train_log(const std::filesystem::path& path, const TrainLog& log) {
  write_text_file(path, train_log_csv(log));
}

double mae_loss(const ImageSlice& pred, const ImageSlice& target) { return mae(pred, target); }

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng({seed, kShuffleStream, epoch});
  for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

Stage1Result train_stage1(std::span<const SlicePair> train, std::span<const SlicePair> val,
                          const TrainConfig& config, const TrainHooks& hooks) {
  validate(config);
  check_pairs(train, "training");
  check_pairs(val, "validation");
  const int h = train.front().t2.height;
  if (config.budget > h) throw Error(ErrorKind::InvalidBudget, "budget exceeds the number of lines");
  const auto start = std::chrono::steady_clock::now();

  Stage1Result result;
  result.net = init_weights(net_config_for(config));
  result.sampler = init_sampler(h, Rng({config.seed, kSamplerStream}).next(), config.slope, config.sparsity);

  std::vector<KSpaceSlice> spectra;
  spectra.reserve(train.size());
  for (const auto& p : train) spectra.push_back(fft2_centered(p.t2));
  std::vector<KSpaceSlice> val_spectra;
  for (const auto& p : val) val_spectra.push_back(fft2_centered(p.t2));

  AdamState adam;
  BatchPlanner planner{train.size(), config.batch_size, config.seed};
  NetWeights grads = result.net.zeros_like();
  std::vector<float> logit_grads(static_cast<std::size_t>(h));
  ForwardTrace<float> trace;
  FeatureMap<float> grad_out, grad_in;

  for (int step = 1; step <= config.steps; ++step) {
    bool epoch_done = false;
    const auto batch = planner.next(epoch_done);
    const SoftMask soft = soft_mask(result.sampler);
    grads = result.net.zeros_like();
    std::vector<double> grad_probs(static_cast<std::size_t>(h), 0.0);
    const double scale = 1.0 / static_cast<double>(batch.size());

    double loss_mae = 0.0;
    for (std::size_t idx : batch) {
      const auto& pair = train[idx];
      const SoftAcquisition acq = acquire_soft_traced(spectra[idx], soft);
      const FeatureMap<float> pred = forward(result.net, stack(acq.magnitude, pair, config.multi_contrast), &trace);
      loss_mae += scale * mae_and_grad(pred, pair.t2, scale, grad_out);
      backward(result.net, trace, grad_out, grads, &grad_in);
      const auto gp = acquire_soft_backward(acq, to_image(grad_in, 0));
      for (int i = 0; i < h; ++i) grad_probs[i] += gp[i];
    }
    const double loss_sparsity = sparsity_penalty(soft, config.sparsity);
    const double loss_total = loss_mae + loss_sparsity;
    check_loss(loss_total, result.log);

    const auto sg = sparsity_gradient(soft, config.sparsity);
    for (int i = 0; i < h; ++i) grad_probs[i] += sg[i];
    const auto gw = logit_gradient(result.sampler, soft, grad_probs);
    std::transform(gw.begin(), gw.end(), logit_grads.begin(), [](double g) { return static_cast<float>(g); });

    auto groups = net_groups(result.net, grads);
    groups.push_back({result.sampler.logits, logit_grads});
    adam_step(groups, adam, config.adam);
    result.log.steps.push_back({step, loss_total, loss_mae, loss_sparsity});
    if (hooks.on_step) hooks.on_step(result.log.steps.back());

    if (epoch_done || step == config.steps) {
      const SoftMask current = soft_mask(result.sampler);
      std::vector<FeatureMap<float>> inputs;
      for (std::size_t i = 0; i < val.size(); ++i)
        inputs.push_back(stack(acquire_soft_traced(val_spectra[i], current).magnitude, val[i], config.multi_contrast));
      result.log.validation.push_back(
          validate_with(inputs, val, result.net, step, static_cast<int>(planner.epoch) - (epoch_done ? 1 : 0)));
      if (hooks.on_validation) hooks.on_validation(result.log.validation.back());
    }
  }

  result.mask = extract_mask(result.sampler, config.budget);
  result.log.final_mask = result.mask;
  result.log.wall_clock_s = seconds_since(start);
  return result;
}

FeatureMap<float> recon_input(const SlicePair& pair, const LineMask& mask, bool multi_contrast) {
  if (mask.n_lines != pair.t2.height) throw Error(ErrorKind::Shape, "mask lines do not match image height");
  const ImageSlice aliased = zero_filled_recon(pair.t2, mask.to_vector());
  return stack(aliased, pair, multi_contrast);
}

Stage2Result train_stage2(std::span<const SlicePair> train, std::span<const SlicePair> val, const LineMask& mask,
                          const TrainConfig& config, const TrainHooks& hooks) {
  validate(config);
  validate(mask);
  check_pairs(train, "training");
  check_pairs(val, "validation");
  if (mask.n_lines != train.front().t2.height)
    throw Error(ErrorKind::Shape, "mask lines do not match image height");
  const auto start = std::chrono::steady_clock::now();

  Stage2Result result;
  result.net = init_weights(net_config_for(config));

  std::vector<FeatureMap<float>> inputs, val_inputs;
  for (const auto& p : train) inputs.push_back(recon_input(p, mask, config.multi_contrast));
  for (const auto& p : val) val_inputs.push_back(recon_input(p, mask, config.multi_contrast));

  AdamState adam;
  BatchPlanner planner{train.size(), config.batch_size, config.seed};
  NetWeights grads = result.net.zeros_like();
  ForwardTrace<float> trace;
  FeatureMap<float> grad_out;

  for (int step = 1; step <= config.steps; ++step) {
    bool epoch_done = false;
    const auto batch = planner.next(epoch_done);
    grads = result.net.zeros_like();
    const double scale = 1.0 / static_cast<double>(batch.size());

    double loss = 0.0;
    for (std::size_t idx : batch) {
      const FeatureMap<float> pred = forward(result.net, inputs[idx], &trace);
      loss += scale * mae_and_grad(pred, train[idx].t2, scale, grad_out);
      backward(result.net, trace, grad_out, grads);
    }
    check_loss(loss, result.log);
    const auto groups = net_groups(result.net, grads);
    adam_step(groups, adam, config.adam);
    result.log.steps.push_back({step, loss, loss, std::nullopt});
    if (hooks.on_step) hooks.on_step(result.log.steps.back());

    if (epoch_done || step == config.steps) {
      result.log.validation.push_back(
          validate_with(val_inputs, val, result.net, step, static_cast<int>(planner.epoch) - (epoch_done ? 1 : 0)));
      if (hooks.on_validation) hooks.on_validation(result.log.validation.back());
    }
  }
  result.log.final_mask = mask;
  result.log.wall_clock_s = seconds_since(start);
  return result;
}

EvalReport evaluate(const NetWeights& weights, const LineMask& mask, std::span<const SlicePair> test,
                    bool multi_contrast) {
  if (test.empty()) throw Error(ErrorKind::InvalidInput, "empty test set");
  validate(mask);
  if (weights.config.in_channels != (multi_contrast ? 2 : 1))
    throw Error(ErrorKind::Shape, "network input channels do not match the contrast setting");

  EvalReport report;
  report.mask = mask;
  report.acceleration = acceleration(mask.n_lines, mask.budget());
  for (const auto& pair : test) {
    const ImageSlice pred = to_image(forward(weights, recon_input(pair, mask, multi_contrast)));
    report.per_slice.push_back({pair.id, mae(pred, pair.t2), psnr(pred, pair.t2), ssim(pred, pair.t2)});
  }
  summarize(report);
  return report;
}

}  // namespace mcs
