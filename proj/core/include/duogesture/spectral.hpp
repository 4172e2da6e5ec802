#pragma once

#include <complex>
#include <vector>

namespace duogesture {

struct WelchOptions {
  int max_segment = 64;  // segment length is min(max_segment, signal length)
  double overlap = 0.5;
  int min_nfft = 256;    // zero-padded transform length floor
};

struct Spectrum {
  std::vector<double> freq;   // Hz
  std::vector<double> power;  // one-sided density
};

/// Welch power spectral density with a periodic Hann window and per-segment mean removal.
Spectrum welch_psd(const std::vector<double>& x, double fs, const WelchOptions& opts = {});

/// Analytic signal of `x` restricted to [lo_hz, hi_hz]: mean removal, zero padding to a
/// power of two >= 4 * size, frequency-domain band selection with doubled positive
/// frequencies, inverse transform, truncation back to the input length.
std::vector<std::complex<double>> bandpassed_analytic_signal(const std::vector<double>& x, double fs,
                                                             double lo_hz, double hi_hz);

std::size_t next_pow2(std::size_t n);

}  // namespace duogesture
