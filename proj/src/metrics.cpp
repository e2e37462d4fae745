#include "mcsample/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "mcsample/error.hpp"
#include "mcsample/io_util.hpp"

namespace mcs {
namespace {

constexpr int kWindow = 11;
constexpr int kRadius = kWindow / 2;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

void check_same_shape(const ImageSlice& x, const ImageSlice& y) {
  if (!x.same_shape(y) || x.size() != y.size())
    throw Error(ErrorKind::Shape, "images differ in shape: " + std::to_string(x.height) + "x" +
                                      std::to_string(x.width) + " vs " + std::to_string(y.height) + "x" +
                                      std::to_string(y.width));
  if (x.size() == 0) throw Error(ErrorKind::InvalidInput, "empty image");
}

std::vector<double> gaussian_1d() {
  std::vector<double> g(kWindow);
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kRadius;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Separable valid-mode filtering: output is (H-10)×(W-10).
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w, const std::vector<double>& g) {
  const int oh = h - 2 * kRadius, ow = w - 2 * kRadius;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * img[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace

double mae(const ImageSlice& x, const ImageSlice& y) {
  check_same_shape(x, y);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x.pixels[i] - y.pixels[i]);
  return acc / static_cast<double>(x.size());
}

double mse(const ImageSlice& x, const ImageSlice& y) {
  check_same_shape(x, y);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.pixels[i] - y.pixels[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

double psnr(const ImageSlice& x, const ImageSlice& y, double data_range) {
  if (!(data_range > 0.0)) throw Error(ErrorKind::InvalidInput, "data_range must be positive");
  const double m = mse(x, y);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / m);
}

std::vector<double> ssim_window() {
  const auto g = gaussian_1d();
  std::vector<double> w(kWindow * kWindow);
  for (int i = 0; i < kWindow; ++i)
    for (int j = 0; j < kWindow; ++j) w[i * kWindow + j] = g[i] * g[j];
  return w;
}

double ssim(const ImageSlice& x, const ImageSlice& y, double data_range) {
  check_same_shape(x, y);
  if (x.height < kWindow || x.width < kWindow)
    throw Error(ErrorKind::InvalidInput, "ssim needs images of at least 11x11");
  if (!(data_range > 0.0)) throw Error(ErrorKind::InvalidInput, "data_range must be positive");

  const int h = x.height, w = x.width;
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x.pixels[i] * x.pixels[i];
    yy[i] = y.pixels[i] * y.pixels[i];
    xy[i] = x.pixels[i] * y.pixels[i];
  }
  const auto g = gaussian_1d();
  const auto mx = filter_valid(x.pixels, h, w, g);
  const auto my = filter_valid(y.pixels, h, w, g);
  const auto sxx = filter_valid(xx, h, w, g);
  const auto syy = filter_valid(yy, h, w, g);
  const auto sxy = filter_valid(xy, h, w, g);

  const double c1 = (kK1 * data_range) * (kK1 * data_range);
  const double c2 = (kK2 * data_range) * (kK2 * data_range);
  double acc = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
           ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return acc / static_cast<double>(mx.size());
}

ImageSlice error_map(const ImageSlice& x, const ImageSlice& y) {
  check_same_shape(x, y);
  ImageSlice out(x.height, x.width);
  for (std::size_t i = 0; i < x.size(); ++i) out.pixels[i] = std::abs(x.pixels[i] - y.pixels[i]);
  return out;
}

void summarize(EvalReport& report) {
  if (report.per_slice.empty()) throw Error(ErrorKind::InvalidInput, "empty evaluation");
  double m = 0.0, p = 0.0, s = 0.0;
  for (const auto& r : report.per_slice) {
    m += r.mae;
    p += r.psnr_db;
    s += r.ssim;
  }
  const auto n = static_cast<double>(report.per_slice.size());
  report.mean_mae = m / n;
  report.mean_psnr_db = p / n;
  report.mean_ssim = s / n;
}

std::string eval_report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "slice_id,mae,psnr_db,ssim\n";
  for (const auto& r : report.per_slice)
    out << r.slice_id << ',' << format_real(r.mae) << ',' << format_real(r.psnr_db) << ',' << format_real(r.ssim)
        << '\n';
  out << "MEAN," << format_real(report.mean_mae) << ',' << format_real(report.mean_psnr_db) << ','
      << format_real(report.mean_ssim) << '\n';
  return out.str();
}

void write_eval_report(const std::filesystem::path& path, const EvalReport& report) {
  write_text_file(path, eval_report_csv(report));
}

std::vector<std::uint8_t> encode_pgm16(const ImageSlice& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n65535\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + 2 * image.size());
  for (double v : image.pixels) {
    const double c = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    const auto s = static_cast<std::uint16_t>(std::lround(c * 65535.0));
    out.push_back(static_cast<std::uint8_t>(s >> 8));
    out.push_back(static_cast<std::uint8_t>(s & 0xff));
  }
  return out;
}

void write_pgm16(const std::filesystem::path& path, const ImageSlice& image) {
  write_file_bytes(path, encode_pgm16(image));
}

}  // namespace mcs
