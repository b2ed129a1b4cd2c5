#include "dcsq/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

#include "dcsq/errors.hpp"

namespace dcsq::fft {

namespace {

// FFTW planning is not thread-safe; execution via the new-array interface is.
// Plans are created once per (size, direction) with FFTW_ESTIMATE|FFTW_UNALIGNED
// so they can run on arbitrary caller buffers.
class plan_cache {
public:
    fftw_plan get(std::size_t n, int sign) {
        std::lock_guard lock(mutex_);
        auto key = std::pair{n, sign};
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::vector<cplx> tmp(n);
        fftw_plan p = fftw_plan_dft_1d(
            static_cast<int>(n), reinterpret_cast<fftw_complex*>(tmp.data()),
            reinterpret_cast<fftw_complex*>(tmp.data()), sign,
            FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!p) throw numerical_error("fftw planning failed");
        plans_.emplace(key, p);
        return p;
    }

private:
    std::mutex mutex_;
    std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

plan_cache& cache() {
    static plan_cache c;
    return c;
}

std::vector<cplx> transform(std::span<const cplx> in, int sign) {
    if (in.empty()) return {};
    std::vector<cplx> out(in.begin(), in.end());
    fftw_plan p = cache().get(in.size(), sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(out.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

/// |f| of DFT bin k for an n-point transform at `fs`.
double bin_abs_freq(std::size_t k, std::size_t n, double fs) {
    const double kk = (k <= n / 2) ? static_cast<double>(k)
                                   : static_cast<double>(k) - static_cast<double>(n);
    return std::abs(kk) * fs / static_cast<double>(n);
}

std::vector<double> band_filter(std::span<const double> x, double lo, double hi, double fs) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    std::vector<cplx> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = x[i];
    auto spec = transform(buf, FFTW_FORWARD);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = bin_abs_freq(k, n, fs);
        if (!(f > lo && f <= hi)) spec[k] = 0.0;
    }
    auto back = transform(spec, FFTW_BACKWARD);
    std::vector<double> out(n);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = back[i].real() * inv;
    return out;
}

} // namespace

std::vector<cplx> forward(std::span<const cplx> in) { return transform(in, FFTW_FORWARD); }

std::vector<cplx> inverse(std::span<const cplx> in) {
    auto out = transform(in, FFTW_BACKWARD);
    const double inv = 1.0 / static_cast<double>(in.size());
    for (cplx& c : out) c *= inv;
    return out;
}

std::vector<cplx> analytic(std::span<const double> in) {
    const std::size_t n_in = in.size();
    if (n_in < 2) throw data_error("analytic: input too short");
    const bool pad = (n_in % 2) != 0;
    const std::size_t n = n_in + (pad ? 1 : 0);
    std::vector<cplx> buf(n, cplx{0.0, 0.0});
    for (std::size_t i = 0; i < n_in; ++i) buf[i] = in[i];
    auto spec = transform(buf, FFTW_FORWARD);
    // keep DC and Nyquist, double positive, zero negative frequencies
    for (std::size_t k = 1; k < n / 2; ++k) spec[k] *= 2.0;
    for (std::size_t k = n / 2 + 1; k < n; ++k) spec[k] = 0.0;
    auto out = transform(spec, FFTW_BACKWARD);
    const double inv = 1.0 / static_cast<double>(n);
    for (cplx& c : out) c *= inv;
    out.resize(n_in);
    return out;
}

std::vector<double> lowpass(std::span<const double> x, double cutoff_hz, double fs) {
    return band_filter(x, -1.0, cutoff_hz, fs);
}

std::vector<double> highpass(std::span<const double> x, double cutoff_hz, double fs) {
    return band_filter(x, cutoff_hz, fs, fs);
}

std::vector<double> bandpass(std::span<const double> x, double lo_hz, double hi_hz, double fs) {
    return band_filter(x, lo_hz, hi_hz, fs);
}

double kept_fraction_highpass(std::size_t n, double cutoff_hz, double fs) {
    std::size_t kept = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (bin_abs_freq(k, n, fs) > cutoff_hz) ++kept;
    return static_cast<double>(kept) / static_cast<double>(n);
}

} // namespace dcsq::fft
