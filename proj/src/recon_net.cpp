#include "mcsample/recon_net.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "mcsample/error.hpp"
#include "mcsample/io_util.hpp"
#include "mcsample/rng.hpp"

namespace mcs {
namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;

// Unfolds a same-padded k×k neighbourhood: row (c*k + ky)*k + kx, column y*W + x.
template <typename T>
std::vector<T> im2col(const FeatureMap<T>& in, int k) {
  if (k == 1) return in.data;
  const int h = in.height, w = in.width, pad = k / 2;
  const std::size_t plane = in.plane();
  std::vector<T> col(static_cast<std::size_t>(in.channels) * k * k * plane, T(0));
  T* dst = col.data();
  for (int c = 0; c < in.channels; ++c) {
    const T* src = in.channel(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, dst += plane) {
        const int dx = kx - pad;
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          const T* srow = src + static_cast<std::size_t>(sy) * w;
          T* drow = dst + static_cast<std::size_t>(y) * w;
          for (int x = x0; x < x1; ++x) drow[x] = srow[x + dx];
        }
      }
    }
  }
  return col;
}

template <typename T>
void col2im(const Mat<T>& col, int k, FeatureMap<T>& out) {
  if (k == 1) {
    std::copy(col.data(), col.data() + col.size(), out.data.begin());
    return;
  }
  const int h = out.height, w = out.width, pad = k / 2;
  const std::size_t plane = out.plane();
  std::fill(out.data.begin(), out.data.end(), T(0));
  const T* src = col.data();
  for (int c = 0; c < out.channels; ++c) {
    T* dst = out.channel(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, src += plane) {
        const int dx = kx - pad;
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          T* drow = dst + static_cast<std::size_t>(sy) * w;
          const T* srow = src + static_cast<std::size_t>(y) * w;
          for (int x = x0; x < x1; ++x) drow[x + dx] += srow[x];
        }
      }
    }
  }
}

template <typename T>
class UNetPass {
 public:
  UNetPass(const BasicNetWeights<T>& weights)
      : weights_(weights), layers_(layer_table(weights.config)) {
    if (weights.tensors.size() != 2 * layers_.size())
      throw Error(ErrorKind::Shape, "weights do not match the layer table");
  }

  FeatureMap<T> forward(const FeatureMap<T>& input, ForwardTrace<T>* trace) {
    const auto& cfg = weights_.config;
    check_input(input);
    trace_ = trace;
    if (trace_) {
      *trace_ = ForwardTrace<T>{};
      trace_->input = input;
    }
    layer_ = 0;

    std::vector<FeatureMap<T>> skips;
    FeatureMap<T> x = input;
    for (int level = 0; level < cfg.depth; ++level) {
      x = conv(x);
      x = conv(x);
      skips.push_back(x);
      x = maxpool(x);
    }
    x = conv(x);
    x = conv(x);
    for (int level = cfg.depth - 1; level >= 0; --level) {
      x = conv(upsample(x));
      x = conv(concat(skips[level], x));
      x = conv(x);
    }
    FeatureMap<T> y = conv(x);
    if (cfg.residual) {
      const T* in0 = input.channel(0);
      T* out = y.channel(0);
      for (std::size_t i = 0; i < y.plane(); ++i) out[i] += in0[i];
    }
    return y;
  }

  void backward(const ForwardTrace<T>& trace, const FeatureMap<T>& grad_output, BasicNetWeights<T>& grads,
                FeatureMap<T>* grad_input) {
    const auto& cfg = weights_.config;
    if (trace.activations.size() != layers_.size())
      throw Error(ErrorKind::Shape, "trace does not belong to this network");
    const auto& out_act = trace.activations.back();
    if (grad_output.channels != 1 || grad_output.height != out_act.height || grad_output.width != out_act.width)
      throw Error(ErrorKind::Shape, "output gradient shape mismatch");
    if (grads.tensors.size() != weights_.tensors.size())
      throw Error(ErrorKind::Shape, "gradient buffer does not match weights");

    int layer = static_cast<int>(layers_.size()) - 1;
    FeatureMap<T> g = conv_backward(trace, layer--, grad_output, grads, true);

    std::vector<FeatureMap<T>> skip_grads(static_cast<std::size_t>(cfg.depth));
    for (int level = 0; level < cfg.depth; ++level) {
      g = conv_backward(trace, layer--, g, grads, true);
      g = conv_backward(trace, layer--, g, grads, true);
      // g is now w.r.t. [skip, up]; split it.
      const int skip_ch = layers_[layer + 1].in_channels / 2;
      FeatureMap<T> gs(skip_ch, g.height, g.width);
      FeatureMap<T> gu(g.channels - skip_ch, g.height, g.width);
      std::copy(g.data.begin(), g.data.begin() + gs.data.size(), gs.data.begin());
      std::copy(g.data.begin() + gs.data.size(), g.data.end(), gu.data.begin());
      skip_grads[level] = std::move(gs);
      g = conv_backward(trace, layer--, gu, grads, true);
      g = upsample_backward(g);
    }
    g = conv_backward(trace, layer--, g, grads, true);
    g = conv_backward(trace, layer--, g, grads, true);
    for (int level = cfg.depth - 1; level >= 0; --level) {
      g = maxpool_backward(g, trace.pool_argmax[level], skip_grads[level]);
      g = conv_backward(trace, layer--, g, grads, true);
      g = conv_backward(trace, layer--, g, grads, level > 0 || grad_input != nullptr);
    }

    if (grad_input) {
      if (cfg.residual) {
        T* g0 = g.channel(0);
        const T* go = grad_output.channel(0);
        for (std::size_t i = 0; i < g.plane(); ++i) g0[i] += go[i];
      }
      *grad_input = std::move(g);
    }
  }

 private:
  void check_input(const FeatureMap<T>& input) const {
    const auto& cfg = weights_.config;
    const int div = 1 << cfg.depth;
    if (input.channels != cfg.in_channels)
      throw Error(ErrorKind::Shape, "network expects " + std::to_string(cfg.in_channels) + " input channels, got " +
                                        std::to_string(input.channels));
    if (input.height < div || input.width < div || input.height % div != 0 || input.width % div != 0)
      throw Error(ErrorKind::Shape, "input " + std::to_string(input.height) + "x" + std::to_string(input.width) +
                                        " not divisible by " + std::to_string(div));
  }

  FeatureMap<T> conv(const FeatureMap<T>& in) {
    const auto& spec = layers_[layer_];
    const auto& wt = weights_.tensors[2 * layer_].values;
    const auto& bias = weights_.tensors[2 * layer_ + 1].values;
    const int kk = spec.kernel * spec.kernel;
    std::vector<T> col = im2col(in, spec.kernel);

    FeatureMap<T> out(spec.out_channels, in.height, in.width);
    const auto hw = static_cast<Eigen::Index>(in.plane());
    ConstMatMap<T> w(wt.data(), spec.out_channels, spec.in_channels * kk);
    ConstMatMap<T> c(col.data(), spec.in_channels * kk, hw);
    MatMap<T> o(out.data.data(), spec.out_channels, hw);
    o.noalias() = w * c;
    for (int ch = 0; ch < spec.out_channels; ++ch) {
      auto row = o.row(ch).array();
      row += bias[ch];
      if (spec.relu) row = row.max(T(0));
    }
    if (trace_) {
      trace_->columns.push_back(std::move(col));
      trace_->activations.push_back(out);
    }
    ++layer_;
    return out;
  }

  // grad is w.r.t. the layer's activation output. Returns grad w.r.t. its input
  // (empty when want_input is false).
  FeatureMap<T> conv_backward(const ForwardTrace<T>& trace, int layer, const FeatureMap<T>& grad, BasicNetWeights<T>& grads,
                              bool want_input) {
    const auto& spec = layers_[layer];
    const auto& act = trace.activations[layer];
    const int kk = spec.kernel * spec.kernel;
    const auto hw = static_cast<Eigen::Index>(act.plane());

    Mat<T> g = ConstMatMap<T>(grad.data.data(), spec.out_channels, hw);
    if (spec.relu) {
      ConstMatMap<T> a(act.data.data(), spec.out_channels, hw);
      g = (a.array() > T(0)).select(g, T(0));
    }
    ConstMatMap<T> col(trace.columns[layer].data(), spec.in_channels * kk, hw);
    MatMap<T> dw(grads.tensors[2 * layer].values.data(), spec.out_channels, spec.in_channels * kk);
    dw.noalias() += g * col.transpose();
    auto& db = grads.tensors[2 * layer + 1].values;
    for (int ch = 0; ch < spec.out_channels; ++ch) db[ch] += g.row(ch).sum();

    if (!want_input) return {};
    ConstMatMap<T> w(weights_.tensors[2 * layer].values.data(), spec.out_channels, spec.in_channels * kk);
    Mat<T> dcol = w.transpose() * g;
    FeatureMap<T> out(spec.in_channels, act.height, act.width);
    col2im(dcol, spec.kernel, out);
    return out;
  }

  FeatureMap<T> maxpool(const FeatureMap<T>& in) {
    FeatureMap<T> out(in.channels, in.height / 2, in.width / 2);
    std::vector<std::uint32_t> argmax(out.data.size());
    std::size_t o = 0;
    for (int c = 0; c < in.channels; ++c) {
      const std::size_t base = c * in.plane();
      for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x, ++o) {
          std::size_t best = base + static_cast<std::size_t>(2 * y) * in.width + 2 * x;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t idx = base + static_cast<std::size_t>(2 * y + dy) * in.width + 2 * x + dx;
              if (in.data[idx] > in.data[best]) best = idx;
            }
          out.data[o] = in.data[best];
          argmax[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
    if (trace_) trace_->pool_argmax.push_back(std::move(argmax));
    return out;
  }

  // Routes pooled gradients back to the argmax positions and adds the skip gradient.
  static FeatureMap<T> maxpool_backward(const FeatureMap<T>& grad, const std::vector<std::uint32_t>& argmax,
                                        const FeatureMap<T>& skip_grad) {
    FeatureMap<T> out = skip_grad;
    for (std::size_t i = 0; i < argmax.size(); ++i) out.data[argmax[i]] += grad.data[i];
    return out;
  }

  static FeatureMap<T> upsample(const FeatureMap<T>& in) {
    FeatureMap<T> out(in.channels, in.height * 2, in.width * 2);
    for (int c = 0; c < in.channels; ++c) {
      const T* src = in.channel(c);
      T* dst = out.channel(c);
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
          dst[static_cast<std::size_t>(y) * out.width + x] = src[static_cast<std::size_t>(y / 2) * in.width + x / 2];
    }
    return out;
  }

  static FeatureMap<T> upsample_backward(const FeatureMap<T>& grad) {
    FeatureMap<T> out(grad.channels, grad.height / 2, grad.width / 2);
    for (int c = 0; c < grad.channels; ++c) {
      const T* src = grad.channel(c);
      T* dst = out.channel(c);
      for (int y = 0; y < grad.height; ++y)
        for (int x = 0; x < grad.width; ++x)
          dst[static_cast<std::size_t>(y / 2) * out.width + x / 2] += src[static_cast<std::size_t>(y) * grad.width + x];
    }
    return out;
  }

  static FeatureMap<T> concat(const FeatureMap<T>& a, const FeatureMap<T>& b) {
    FeatureMap<T> out(a.channels + b.channels, a.height, a.width);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
  }

  const BasicNetWeights<T>& weights_;
  std::vector<ConvLayerSpec> layers_;
  ForwardTrace<T>* trace_ = nullptr;
  int layer_ = 0;
};

std::filesystem::path blob_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

nlohmann::ordered_json config_to_json(const NetConfig& c) {
  nlohmann::ordered_json j;
  j["depth"] = c.depth;
  j["base_channels"] = c.base_channels;
  j["in_channels"] = c.in_channels;
  j["seed"] = c.seed;
  j["residual"] = c.residual;
  return j;
}

}  // namespace

void validate(const NetConfig& config) {
  if (config.depth < 1 || config.depth > 8) throw Error(ErrorKind::InvalidInput, "depth must lie in [1, 8]");
  if (config.base_channels < 1) throw Error(ErrorKind::InvalidInput, "base_channels must be >= 1");
  if (config.in_channels != 1 && config.in_channels != 2)
    throw Error(ErrorKind::InvalidInput, "in_channels must be 1 or 2");
}

std::vector<ConvLayerSpec> layer_table(const NetConfig& config) {
  validate(config);
  std::vector<ConvLayerSpec> layers;
  auto width = [&](int level) { return config.base_channels << level; };
  int prev = config.in_channels;
  for (int l = 0; l < config.depth; ++l) {
    const std::string p = "enc" + std::to_string(l);
    layers.push_back({p + ".conv1", prev, width(l)});
    layers.push_back({p + ".conv2", width(l), width(l)});
    prev = width(l);
  }
  layers.push_back({"bottleneck.conv1", prev, width(config.depth)});
  layers.push_back({"bottleneck.conv2", width(config.depth), width(config.depth)});
  for (int l = config.depth - 1; l >= 0; --l) {
    const std::string p = "dec" + std::to_string(l);
    layers.push_back({p + ".up", width(l + 1), width(l)});
    layers.push_back({p + ".conv1", 2 * width(l), width(l)});
    layers.push_back({p + ".conv2", width(l), width(l)});
  }
  layers.push_back({"out", config.base_channels, 1, 1, false});
  return layers;
}

std::size_t parameter_count(const NetConfig& config) {
  std::size_t n = 0;
  for (const auto& l : layer_table(config))
    n += static_cast<std::size_t>(l.kernel) * l.kernel * l.in_channels * l.out_channels + l.out_channels;
  return n;
}

NetWeights init_weights(const NetConfig& config) {
  NetWeights w;
  w.config = config;
  Rng rng(config.seed);
  for (const auto& l : layer_table(config)) {
    const int fan_in = l.in_channels * l.kernel * l.kernel;
    const double stddev = std::sqrt(2.0 / fan_in);
    ParamTensor<float> kernel{l.name + ".weight", {l.out_channels, l.in_channels, l.kernel, l.kernel}, {}};
    kernel.values.resize(static_cast<std::size_t>(fan_in) * l.out_channels);
    for (auto& v : kernel.values) v = static_cast<float>(rng.normal() * stddev);
    w.tensors.push_back(std::move(kernel));
    w.tensors.push_back({l.name + ".bias", {l.out_channels}, std::vector<float>(l.out_channels, 0.0f)});
  }
  return w;
}

template <typename T>
FeatureMap<T> forward(const BasicNetWeights<T>& weights, const FeatureMap<T>& input, ForwardTrace<T>* trace) {
  return UNetPass<T>(weights).forward(input, trace);
}

template <typename T>
void backward(const BasicNetWeights<T>& weights, const ForwardTrace<T>& trace, const FeatureMap<T>& grad_output,
              BasicNetWeights<T>& grads, FeatureMap<T>* grad_input) {
  UNetPass<T>(weights).backward(trace, grad_output, grads, grad_input);
}

template FeatureMap<float> forward(const BasicNetWeights<float>&, const FeatureMap<float>&, ForwardTrace<float>*);
template FeatureMap<double> forward(const BasicNetWeights<double>&, const FeatureMap<double>&, ForwardTrace<double>*);
template void backward(const BasicNetWeights<float>&, const ForwardTrace<float>&, const FeatureMap<float>&,
                       BasicNetWeights<float>&, FeatureMap<float>*);
template void backward(const BasicNetWeights<double>&, const ForwardTrace<double>&, const FeatureMap<double>&,
                       BasicNetWeights<double>&, FeatureMap<double>*);

FeatureMap<float> stack_channels(std::span<const ImageSlice* const> images) {
  if (images.empty()) throw Error(ErrorKind::Shape, "no channels to stack");
  const int h = images.front()->height, w = images.front()->width;
  FeatureMap<float> out(static_cast<int>(images.size()), h, w);
  for (std::size_t c = 0; c < images.size(); ++c) {
    if (images[c]->height != h || images[c]->width != w)
      throw Error(ErrorKind::Shape, "channels differ in shape");
    std::transform(images[c]->pixels.begin(), images[c]->pixels.end(), out.channel(static_cast<int>(c)),
                   [](double v) { return static_cast<float>(v); });
  }
  return out;
}

ImageSlice to_image(const FeatureMap<float>& map, int channel) {
  ImageSlice out(map.height, map.width);
  std::copy(map.channel(channel), map.channel(channel) + map.plane(), out.pixels.begin());
  return out;
}

ImageSlice reconstruct(const NetWeights& weights, std::span<const ImageSlice* const> channels) {
  return to_image(forward(weights, stack_channels(channels)));
}

void save_weights(const std::filesystem::path& manifest, const NetWeights& weights) {
  validate(weights.config);
  nlohmann::ordered_json j;
  j["config"] = config_to_json(weights.config);
  j["tensors"] = nlohmann::ordered_json::array();
  std::vector<float> blob;
  blob.reserve(weights.parameter_count());
  for (const auto& t : weights.tensors) {
    nlohmann::ordered_json e;
    e["name"] = t.name;
    e["shape"] = t.shape;
    e["offset"] = blob.size();
    e["len"] = t.values.size();
    j["tensors"].push_back(e);
    blob.insert(blob.end(), t.values.begin(), t.values.end());
  }
  write_text_file(manifest, j.dump() + "\n");
  write_file_bytes(blob_path(manifest), encode_f32_blob(blob));
}

NetWeights load_weights(const std::filesystem::path& manifest) {
  auto corrupt = [&](const std::string& why) {
    return Error(ErrorKind::CorruptCheckpoint, manifest.string() + ": " + why);
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(e.what());
  }

  NetWeights w;
  std::vector<std::uint8_t> bytes;
  try {
    const auto& c = j.at("config");
    w.config.depth = c.at("depth").get<int>();
    w.config.base_channels = c.at("base_channels").get<int>();
    w.config.in_channels = c.at("in_channels").get<int>();
    w.config.seed = c.at("seed").get<std::uint64_t>();
    w.config.residual = c.at("residual").get<bool>();
    validate(w.config);

    const auto layers = layer_table(w.config);
    const auto& entries = j.at("tensors");
    if (entries.size() != 2 * layers.size()) throw corrupt("tensor count does not match config");

    bytes = read_file_bytes(blob_path(manifest));
    if (bytes.size() % 4 != 0) throw corrupt("blob length not a multiple of 4");
    const std::size_t total = bytes.size() / 4;

    std::size_t expected_offset = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& spec = layers[i / 2];
      const bool is_kernel = i % 2 == 0;
      const std::string name = spec.name + (is_kernel ? ".weight" : ".bias");
      const std::vector<int> shape = is_kernel
                                         ? std::vector<int>{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel}
                                         : std::vector<int>{spec.out_channels};
      const auto& e = entries[i];
      ParamTensor<float> t{e.at("name").get<std::string>(), e.at("shape").get<std::vector<int>>(), {}};
      if (t.name != name) throw corrupt("expected tensor " + name + ", found " + t.name);
      if (t.shape != shape) throw corrupt("shape mismatch for " + name);
      const auto offset = e.at("offset").get<std::size_t>();
      const auto len = e.at("len").get<std::size_t>();
      const auto numel = static_cast<std::size_t>(
          std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>()));
      if (len != numel) throw corrupt("length mismatch for " + name);
      if (offset != expected_offset) throw corrupt("non-contiguous offset for " + name);
      if (offset + len > total) throw corrupt("blob truncated at " + name);
      t.values.resize(len);
      for (std::size_t k = 0; k < len; ++k) {
        t.values[k] = load_f32_le(bytes.data() + 4 * (offset + k));
        if (!std::isfinite(t.values[k])) throw corrupt("non-finite value in " + name);
      }
      expected_offset += len;
      w.tensors.push_back(std::move(t));
    }
    if (expected_offset != total) throw corrupt("blob has trailing data");
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw;
    if (e.kind() == ErrorKind::CorruptCheckpoint) throw;
    throw corrupt(e.what());
  }
  return w;
}

}  // namespace mcs
