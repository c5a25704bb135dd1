#include "alm_audit/phase_vocoder.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>

namespace alm_audit {

namespace {

// FFTW's planner is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return std::unique_ptr<T[], FftwFree>(p);
}

class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n), time_(fftw_buffer<double>(n)), freq_(fftw_buffer<fftw_complex>(n / 2 + 1)) {
    std::lock_guard lock(planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), time_.get(), freq_.get(), FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), freq_.get(), time_.get(), FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* time() { return time_.get(); }
  std::complex<double>* freq() { return reinterpret_cast<std::complex<double>*>(freq_.get()); }
  std::size_t bins() const { return n_ / 2 + 1; }

  void forward() { fftw_execute(forward_); }
  // Unnormalized: result is n times the true inverse.
  void inverse() { fftw_execute(inverse_); }

 private:
  std::size_t n_;
  std::unique_ptr<double[], FftwFree> time_;
  std::unique_ptr<fftw_complex[], FftwFree> freq_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

double wrap_phase(double phi) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  return phi - kTwoPi * std::round(phi / kTwoPi);
}

}  // namespace

std::vector<double> phase_vocoder_stretch(std::span<const double> input, double ratio, const VocoderConfig& config) {
  const std::size_t n_fft = config.window;
  const std::size_t hop = config.hop;
  if (!(ratio > 0.0) || !std::isfinite(ratio)) throw std::invalid_argument("stretch ratio must be positive");
  if (n_fft == 0 || hop == 0 || hop > n_fft) throw std::invalid_argument("invalid vocoder configuration");
  if (input.size() < n_fft) throw std::invalid_argument("clip shorter than one analysis window");

  const std::size_t target = static_cast<std::size_t>(std::llround(static_cast<double>(input.size()) * ratio));
  const std::size_t pad = n_fft / 2;

  std::vector<double> padded(input.size() + 2 * pad, 0.0);
  std::copy(input.begin(), input.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad));

  std::vector<double> window(n_fft);
  for (std::size_t i = 0; i < n_fft; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_fft));
  }

  RealFft fft(n_fft);
  const std::size_t bins = fft.bins();
  const std::size_t frames = 1 + (padded.size() - n_fft) / hop;

  std::vector<std::complex<double>> spec(frames * bins);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = padded.data() + f * hop;
    for (std::size_t i = 0; i < n_fft; ++i) fft.time()[i] = src[i] * window[i];
    fft.forward();
    std::copy(fft.freq(), fft.freq() + bins, spec.begin() + static_cast<std::ptrdiff_t>(f * bins));
  }
  auto frame = [&](std::size_t f) { return spec.data() + std::min(f, frames - 1) * bins; };

  // Expected phase advance per hop for each bin centre.
  std::vector<double> advance(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    advance[k] = 2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(hop) / static_cast<double>(n_fft);
  }

  const double rate = 1.0 / ratio;
  const std::size_t out_frames = static_cast<std::size_t>(std::ceil(static_cast<double>(frames) / rate));

  std::vector<double> phase(bins);
  for (std::size_t k = 0; k < bins; ++k) phase[k] = std::arg(frame(0)[k]);

  std::vector<double> output(n_fft + hop * (out_frames - 1), 0.0);
  std::vector<double> weight(output.size(), 0.0);

  for (std::size_t m = 0; m < out_frames; ++m) {
    const double t = static_cast<double>(m) * rate;
    const auto left = static_cast<std::size_t>(t);
    const double alpha = t - static_cast<double>(left);
    const std::complex<double>* a = frame(left);
    const std::complex<double>* b = frame(left + 1);

    for (std::size_t k = 0; k < bins; ++k) {
      const double mag = (1.0 - alpha) * std::abs(a[k]) + alpha * std::abs(b[k]);
      fft.freq()[k] = std::polar(mag, phase[k]);
      const double deviation = wrap_phase(std::arg(b[k]) - std::arg(a[k]) - advance[k]);
      phase[k] += advance[k] + deviation;
    }
    fft.inverse();

    double* dst = output.data() + m * hop;
    double* wdst = weight.data() + m * hop;
    for (std::size_t i = 0; i < n_fft; ++i) {
      dst[i] += fft.time()[i] / static_cast<double>(n_fft) * window[i];
      wdst[i] += window[i] * window[i];
    }
  }

  std::vector<double> result(target, 0.0);
  for (std::size_t i = 0; i < target && i + pad < output.size(); ++i) {
    const double w = weight[i + pad];
    result[i] = w > 1e-10 ? output[i + pad] / w : 0.0;
  }
  return result;
}

}  // namespace alm_audit
