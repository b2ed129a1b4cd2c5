#include "dcsq/fock.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "dcsq/errors.hpp"
#include "dcsq/parallel.hpp"
#include "dcsq/rng.hpp"

namespace dcsq {

namespace {

constexpr double tail_tolerance = 1e-8;

// w <- exp(A) w for anti-Hermitian A given as a matvec, via `substeps`
// applications of a plain Taylor series. substeps is chosen so ||A|| per
// substep is O(1) and the series converges in a handful of terms.
template <typename MatVec>
void exp_action(const MatVec& apply, std::vector<cplx>& w, double norm_bound) {
    const int substeps = std::max(1, static_cast<int>(std::ceil(norm_bound)));
    const std::size_t n = w.size();
    std::vector<cplx> term(n), next(n);
    for (int s = 0; s < substeps; ++s) {
        term = w;
        double acc_sq = 0.0;
        for (const cplx& c : w) acc_sq += std::norm(c);
        for (int k = 1; k <= 400; ++k) {
            apply(term, next);
            const double scale = 1.0 / (static_cast<double>(substeps) * k);
            double term_sq = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                term[i] = next[i] * scale;
                w[i] += term[i];
                term_sq += std::norm(term[i]);
            }
            if (term_sq <= 1e-32 * acc_sq) break;
        }
    }
}

void check_truncation(const fock_state& s, const char* what) {
    if (s.tail_mass() > tail_tolerance)
        throw numerical_error(std::string(what) +
                              ": truncation inadequate, tail mass above 0.9N exceeds 1e-8 "
                              "(N = " + std::to_string(s.truncation) + ")");
}

} // namespace

double fock_state::norm_sq() const {
    double s = 0.0;
    for (const cplx& c : coeffs) s += std::norm(c);
    return s;
}

double fock_state::tail_mass() const {
    const std::size_t start = static_cast<std::size_t>(0.9 * truncation);
    double s = 0.0;
    for (std::size_t n = start; n < coeffs.size(); ++n) s += std::norm(coeffs[n]);
    return s;
}

int default_truncation(cplx nu, double r) {
    const double sh = std::sinh(r);
    const double need = 8.0 * (std::norm(nu) + sh * sh) + 32.0;
    return std::max(512, static_cast<int>(std::ceil(need)));
}

fock_state build_displaced_squeezed(cplx nu, squeeze_spec s, int truncation) {
    if (truncation < 8)
        throw config_error("build_displaced_squeezed: truncation too small");
    const int N = truncation;
    fock_state st;
    st.truncation = N;
    st.coeffs.assign(static_cast<std::size_t>(N), cplx(0.0, 0.0));
    st.coeffs[0] = 1.0;

    // precomputed sqrt(n)
    std::vector<double> rt(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) rt[static_cast<std::size_t>(n)] = std::sqrt(double(n));

    if (s.r > 0.0) {
        const cplx em = 0.5 * s.r * std::polar(1.0, -2.0 * s.phi);
        const cplx ep = 0.5 * s.r * std::polar(1.0, 2.0 * s.phi);
        auto squeeze_mv = [&](const std::vector<cplx>& v, std::vector<cplx>& out) {
            // A v = r/2 (e^{-2i phi} b^2 - e^{2i phi} b†^2) v
            for (int n = 0; n < N; ++n) {
                cplx acc = 0.0;
                if (n + 2 < N) acc += em * (rt[n + 1] * rt[n + 2]) * v[n + 2];
                if (n >= 2) acc -= ep * (rt[n] * rt[n - 1]) * v[n - 2];
                out[static_cast<std::size_t>(n)] = acc;
            }
        };
        exp_action(squeeze_mv, st.coeffs, s.r * N);
    }
    if (std::abs(nu) > 0.0) {
        const cplx nconj = std::conj(nu);
        auto disp_mv = [&](const std::vector<cplx>& v, std::vector<cplx>& out) {
            // A v = (nu b† - nu* b) v
            for (int n = 0; n < N; ++n) {
                cplx acc = 0.0;
                if (n >= 1) acc += nu * rt[n] * v[n - 1];
                if (n + 1 < N) acc -= nconj * rt[n + 1] * v[n + 1];
                out[static_cast<std::size_t>(n)] = acc;
            }
        };
        exp_action(disp_mv, st.coeffs, 2.0 * std::abs(nu) * std::sqrt(double(N)));
    }

    // unitary generators preserve the norm up to truncation loss; renormalize
    const double ns = st.norm_sq();
    if (ns < 0.5)
        throw numerical_error("build_displaced_squeezed: truncation inadequate (norm collapsed)");
    const double inv = 1.0 / std::sqrt(ns);
    for (cplx& c : st.coeffs) c *= inv;
    check_truncation(st, "build_displaced_squeezed");
    return st;
}

oracle_moments number_moments(const fock_state& s) {
    double norm = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t n = 0; n < s.coeffs.size(); ++n) {
        const double p = std::norm(s.coeffs[n]);
        norm += p;
        m1 += double(n) * p;
        m2 += double(n) * double(n) * p;
    }
    m1 /= norm;
    m2 /= norm;
    return {m1, m2 - m1 * m1, s.tail_mass()};
}

fock_state apply_kerr_exact(cplx beta, double g, int truncation) {
    if (truncation < 8)
        throw config_error("apply_kerr_exact: truncation too small");
    const int N = truncation;
    fock_state st;
    st.truncation = N;
    st.coeffs.resize(static_cast<std::size_t>(N));
    // coherent coefficients c_n = e^{-|b|^2/2} beta^n / sqrt(n!), recursively
    cplx c = std::exp(-0.5 * std::norm(beta));
    for (int n = 0; n < N; ++n) {
        st.coeffs[static_cast<std::size_t>(n)] =
            c * std::polar(1.0, g * double(n) * double(n));
        c *= beta / std::sqrt(double(n + 1));
    }
    check_truncation(st, "apply_kerr_exact");
    return st;
}

oracle_moments apply_loss(const oracle_moments& m, double eta) {
    if (eta < 0.0 || eta > 1.0)
        throw config_error("apply_loss: eta must be in [0, 1]");
    return {eta * m.mean, eta * eta * m.variance + eta * (1.0 - eta) * m.mean,
            m.truncation_error};
}

oracle_moments apply_loss(const fock_state& s, double eta) {
    return apply_loss(number_moments(s), eta);
}

double quadrature_variance(const fock_state& s, double theta) {
    // <b>, <b^2>, <n> from the coefficients
    cplx b_ev = 0.0, b2_ev = 0.0;
    double n_ev = 0.0, norm = 0.0;
    const std::size_t N = s.coeffs.size();
    for (std::size_t n = 0; n < N; ++n) {
        const double p = std::norm(s.coeffs[n]);
        norm += p;
        n_ev += double(n) * p;
        if (n + 1 < N)
            b_ev += std::conj(s.coeffs[n]) * std::sqrt(double(n + 1)) * s.coeffs[n + 1];
        if (n + 2 < N)
            b2_ev += std::conj(s.coeffs[n]) *
                     std::sqrt(double(n + 1) * double(n + 2)) * s.coeffs[n + 2];
    }
    b_ev /= norm;
    b2_ev /= norm;
    n_ev /= norm;
    const cplx rot = std::polar(1.0, -theta);
    const double x2 = std::real(rot * rot * b2_ev) + n_ev + 0.5;
    const double x1 = std::numbers::sqrt2 * std::real(b_ev * rot);
    return x2 - x1 * x1;
}

quad_sweep min_quadrature_variance(const fock_state& s, int n_angles) {
    quad_sweep best{std::numeric_limits<double>::infinity(), 0.0};
    for (int i = 0; i < n_angles; ++i) {
        const double th = std::numbers::pi * i / n_angles;
        const double v = quadrature_variance(s, th);
        if (v < best.min_variance) best = {v, th};
    }
    return best;
}

mc_result wigner_mc_detail(const quantum_params& p, std::uint64_t n_samples,
                           std::uint64_t seed, int jobs) {
    if (n_samples < 100000)
        throw config_error("wigner_mc_moments: n_samples must be >= 1e5");
    const cplx nu = displaced_amplitude(p);
    const double mean_x = std::numbers::sqrt2 * nu.real();
    const double mean_p = std::numbers::sqrt2 * nu.imag();
    // covariance factor L with L L^T = R(phi) diag(e^{-2r}, e^{2r}) R(phi)^T / 2
    const double c = std::cos(p.squeeze.phi), s = std::sin(p.squeeze.phi);
    const double lm = std::exp(-p.squeeze.r) / std::numbers::sqrt2;
    const double lp = std::exp(p.squeeze.r) / std::numbers::sqrt2;

    constexpr std::uint64_t n_batches = 64;
    struct batch_acc {
        double s1 = 0.0, s2 = 0.0;
        std::uint64_t count = 0;
    };
    std::vector<batch_acc> batches(n_batches);
    parallel_for(jobs, n_batches, [&](std::size_t b) {
        const std::uint64_t lo = n_samples * b / n_batches;
        const std::uint64_t hi = n_samples * (b + 1) / n_batches;
        normal_sampler rng(derive_seed(seed, b, /*stream=*/0x57a7));
        batch_acc acc;
        for (std::uint64_t i = lo; i < hi; ++i) {
            const double g1 = rng(), g2 = rng();
            const double x = mean_x + c * lm * g1 - s * lp * g2;
            const double q = mean_p + s * lm * g1 + c * lp * g2;
            const double sym = 0.5 * (x * x + q * q);
            acc.s1 += sym;
            acc.s2 += sym * sym;
            ++acc.count;
        }
        batches[b] = acc;
    });

    // merge in batch order (worker-count independent)
    double s1 = 0.0, s2 = 0.0;
    for (const auto& b : batches) { s1 += b.s1; s2 += b.s2; }
    const double K = static_cast<double>(n_samples);
    const double m1 = s1 / K, m2 = s2 / K;
    // ordering corrections: <n> = E[s]-1/2, <n^2> = E[s^2]-E[s]
    auto to_number = [](double e1, double e2) {
        const double mean = e1 - 0.5;
        const double var = (e2 - e1) - mean * mean;
        return std::pair{mean, var};
    };
    auto [mean_n, var_n] = to_number(m1, m2);

    // batch scatter -> standard errors of the merged estimates
    double se_mean = 0.0, se_var = 0.0;
    {
        double sm = 0.0, sv = 0.0, smm = 0.0, svv = 0.0;
        for (const auto& b : batches) {
            const double bm1 = b.s1 / double(b.count), bm2 = b.s2 / double(b.count);
            auto [bm, bv] = to_number(bm1, bm2);
            sm += bm; sv += bv; smm += bm * bm; svv += bv * bv;
        }
        const double nb = double(n_batches);
        se_mean = std::sqrt(std::max(0.0, smm / nb - (sm / nb) * (sm / nb)) / (nb - 1.0));
        se_var = std::sqrt(std::max(0.0, svv / nb - (sv / nb) * (sv / nb)) / (nb - 1.0));
    }

    // loss map, then perpendicular-mode Poisson statistics
    oracle_moments out = apply_loss(oracle_moments{mean_n, var_n, 0.0}, p.eta);
    const double perp = p.eta * (1.0 - std::norm(p.gamma)) * std::norm(p.alpha);
    out.mean += perp;
    out.variance += perp;
    return {out, p.eta * se_mean, p.eta * p.eta * se_var};
}

oracle_moments wigner_mc_moments(const quantum_params& p, std::uint64_t n_samples,
                                 std::uint64_t seed, int jobs) {
    return wigner_mc_detail(p, n_samples, seed, jobs).moments;
}

} // namespace dcsq
