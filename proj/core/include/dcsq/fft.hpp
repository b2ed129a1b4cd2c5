#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

// Thin wrapper over FFTW3 (double precision). Plans are cached per length and
// created under a lock with FFTW_ESTIMATE, so transform output is a pure
// function of the input for a given build — a requirement for the project-wide
// byte-reproducibility guarantee.

namespace dcsq::fft {

using cplx = std::complex<double>;

/// Unnormalized forward DFT.
std::vector<cplx> forward(std::span<const cplx> in);

/// Inverse DFT normalized by 1/N.
std::vector<cplx> inverse(std::span<const cplx> in);

/// Analytic signal of a real sequence: negative frequencies zeroed, positive
/// doubled, DC and Nyquist kept. Input length must be >= 2 (odd lengths are
/// zero-padded internally and truncated back).
std::vector<cplx> analytic(std::span<const double> in);

/// Zero-phase brick-wall filters. Bin conventions chosen so a
/// lowpass/highpass pair at the same cutoff is an exact partition:
/// lowpass keeps |f| <= cutoff, highpass keeps |f| > cutoff,
/// bandpass keeps lo < |f| <= hi.
std::vector<double> lowpass(std::span<const double> x, double cutoff_hz, double sample_rate);
std::vector<double> highpass(std::span<const double> x, double cutoff_hz, double sample_rate);
std::vector<double> bandpass(std::span<const double> x, double lo_hz, double hi_hz,
                             double sample_rate);

/// Fraction of DFT bins a highpass at `cutoff_hz` keeps; the variance of white
/// noise scales by exactly this factor through the filter.
double kept_fraction_highpass(std::size_t n, double cutoff_hz, double sample_rate);

} // namespace dcsq::fft
