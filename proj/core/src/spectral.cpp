#include "duogesture/spectral.hpp"

#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "duogesture/errors.hpp"

namespace duogesture {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

Spectrum welch_psd(const std::vector<double>& x, double fs, const WelchOptions& opts) {
  if (x.size() < 2) throw DataError("welch_psd needs at least two samples");
  if (!(fs > 0)) throw ConfigError("sampling rate must be positive");
  const std::size_t seg = std::min<std::size_t>(static_cast<std::size_t>(std::max(2, opts.max_segment)), x.size());
  const std::size_t step = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(seg * (1.0 - opts.overlap))));
  const std::size_t nfft = std::max(next_pow2(seg), static_cast<std::size_t>(std::max(1, opts.min_nfft)));

  std::vector<double> window(seg);
  double wss = 0.0;
  for (std::size_t n = 0; n < seg; ++n) {
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(seg));
    wss += window[n] * window[n];
  }

  const std::size_t bins = nfft / 2 + 1;
  Spectrum out;
  out.freq.resize(bins);
  out.power.assign(bins, 0.0);
  for (std::size_t k = 0; k < bins; ++k) out.freq[k] = fs * static_cast<double>(k) / static_cast<double>(nfft);

  Eigen::FFT<double> fft;
  std::vector<double> buf(nfft);
  std::vector<std::complex<double>> spec;
  int segments = 0;
  for (std::size_t begin = 0; begin + seg <= x.size(); begin += step) {
    double mean = 0.0;
    for (std::size_t n = 0; n < seg; ++n) mean += x[begin + n];
    mean /= static_cast<double>(seg);
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t n = 0; n < seg; ++n) buf[n] = (x[begin + n] - mean) * window[n];
    fft.fwd(spec, buf);
    for (std::size_t k = 0; k < bins; ++k) {
      double p = std::norm(spec[k]) / (fs * wss);
      if (k != 0 && !(nfft % 2 == 0 && k == nfft / 2)) p *= 2.0;
      out.power[k] += p;
    }
    ++segments;
  }
  for (auto& p : out.power) p /= segments;
  return out;
}

std::vector<std::complex<double>> bandpassed_analytic_signal(const std::vector<double>& x, double fs,
                                                             double lo_hz, double hi_hz) {
  if (x.empty()) throw DataError("empty signal");
  const std::size_t n = x.size();
  const std::size_t nfft = next_pow2(std::max<std::size_t>(4 * n, 64));
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  std::vector<std::complex<double>> buf(nfft, 0.0);
  for (std::size_t i = 0; i < n; ++i) buf[i] = x[i] - mean;

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, buf);
  for (std::size_t k = 0; k < nfft; ++k) {
    const double f = fs * static_cast<double>(k) / static_cast<double>(nfft);
    const bool positive = k > 0 && k < nfft / 2;
    if (positive && f >= lo_hz && f <= hi_hz) {
      spec[k] *= 2.0;
    } else {
      spec[k] = 0.0;
    }
  }
  std::vector<std::complex<double>> time;
  fft.inv(time, spec);
  time.resize(n);
  return time;
}

}  // namespace duogesture
