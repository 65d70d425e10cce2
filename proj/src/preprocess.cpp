#include "gaitnirs/preprocess.hpp"
#include "gaitnirs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gaitnirs {

namespace {

double mean_of(const Series& x) {
    double s = 0;
    for (double v : x) s += v;
    return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

double variance_of(const Series& x) {
    if (x.empty()) return 0;
    double m = mean_of(x);
    double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size());
}

double median_of(Series x) {
    if (x.empty()) return 0;
    size_t mid = x.size() / 2;
    std::nth_element(x.begin(), x.begin() + mid, x.end());
    double hi = x[mid];
    if (x.size() % 2 == 1) return hi;
    std::nth_element(x.begin(), x.begin() + mid - 1, x.end());
    return 0.5 * (x[mid - 1] + hi);
}

// Half-sample symmetric extension index (period 2n): ... x1 x0 | x0 x1 ... x_{n-1} | x_{n-1} ...
int reflect(long long k, long long n) {
    if (n == 1) return 0;
    long long period = 2 * n;
    k %= period;
    if (k < 0) k += period;
    return static_cast<int>(k < n ? k : period - 1 - k);
}

} // namespace

// --- config loading ---

void QcConfig::validate() const {
    if (!(saturation_level > dark_level) || dark_level < 0)
        throw ConfigError("qc: require saturation_level > dark_level >= 0");
    if (max_abs_z <= 0) throw ConfigError("qc: max_abs_z must be positive");
    if (min_variance < 0) throw ConfigError("qc: min_variance must be >= 0");
}

QcConfig QcConfig::from_config(const ConfigFile& cfg) {
    cfg.check_keys("qc", {"saturation_level", "dark_level", "max_abs_z", "min_variance"});
    QcConfig q;
    q.saturation_level = cfg.get_double("qc", "saturation_level", q.saturation_level);
    q.dark_level = cfg.get_double("qc", "dark_level", q.dark_level);
    q.max_abs_z = cfg.get_double("qc", "max_abs_z", q.max_abs_z);
    q.min_variance = cfg.get_double("qc", "min_variance", q.min_variance);
    q.validate();
    return q;
}

void QcConfig::to_kv(std::vector<std::pair<std::string, std::string>>& kv) const {
    kv.emplace_back("qc.saturation_level", fmt_double(saturation_level));
    kv.emplace_back("qc.dark_level", fmt_double(dark_level));
    kv.emplace_back("qc.max_abs_z", fmt_double(max_abs_z));
    kv.emplace_back("qc.min_variance", fmt_double(min_variance));
}

void WaveletConfig::validate() const {
    if (levels < 1) throw ConfigError("wavelet: levels must be >= 1");
    if (alpha < 0 || alpha > 1) throw ConfigError("wavelet: alpha must be in [0,1]");
}

WaveletConfig WaveletConfig::from_config(const ConfigFile& cfg) {
    cfg.check_keys("wavelet", {"levels", "alpha", "enabled"});
    WaveletConfig w;
    w.levels = static_cast<int>(cfg.get_int("wavelet", "levels", w.levels));
    w.alpha = cfg.get_double("wavelet", "alpha", w.alpha);
    w.enabled = cfg.get_bool("wavelet", "enabled", w.enabled);
    w.validate();
    return w;
}

void WaveletConfig::to_kv(std::vector<std::pair<std::string, std::string>>& kv) const {
    kv.emplace_back("wavelet.levels", fmt_int(levels));
    kv.emplace_back("wavelet.alpha", fmt_double(alpha));
    kv.emplace_back("wavelet.enabled", enabled ? "true" : "false");
}

void MbllParams::validate() const {
    for (double e : {eps_hbo2_730, eps_hb_730, eps_hbo2_850, eps_hb_850})
        if (!(e > 0) || !std::isfinite(e))
            throw ConfigError("mbll: extinction coefficients must be positive and finite");
    double det = eps_hbo2_730 * eps_hb_850 - eps_hb_730 * eps_hbo2_850;
    if (det == 0 || !std::isfinite(det))
        throw ConfigError("mbll: extinction matrix is singular");
    if (!(separation_d > 0)) throw ConfigError("mbll: separation_d must be positive");
    if (partial_volume_correction && !(partial_volume_factor > 0))
        throw ConfigError("mbll: partial_volume_factor must be positive");
}

MbllParams MbllParams::from_config(const ConfigFile& cfg) {
    cfg.check_keys("mbll", {"eps_hbo2_730", "eps_hb_730", "eps_hbo2_850", "eps_hb_850",
                            "separation_d", "dpf_a", "dpf_b", "dpf_c", "dpf_d", "dpf_e", "dpf_f",
                            "partial_volume_correction", "partial_volume_factor"});
    MbllParams m;
    m.eps_hbo2_730 = cfg.get_double("mbll", "eps_hbo2_730", m.eps_hbo2_730);
    m.eps_hb_730 = cfg.get_double("mbll", "eps_hb_730", m.eps_hb_730);
    m.eps_hbo2_850 = cfg.get_double("mbll", "eps_hbo2_850", m.eps_hbo2_850);
    m.eps_hb_850 = cfg.get_double("mbll", "eps_hb_850", m.eps_hb_850);
    m.separation_d = cfg.get_double("mbll", "separation_d", m.separation_d);
    m.dpf_coeffs.a = cfg.get_double("mbll", "dpf_a", m.dpf_coeffs.a);
    m.dpf_coeffs.b = cfg.get_double("mbll", "dpf_b", m.dpf_coeffs.b);
    m.dpf_coeffs.c = cfg.get_double("mbll", "dpf_c", m.dpf_coeffs.c);
    m.dpf_coeffs.d = cfg.get_double("mbll", "dpf_d", m.dpf_coeffs.d);
    m.dpf_coeffs.e = cfg.get_double("mbll", "dpf_e", m.dpf_coeffs.e);
    m.dpf_coeffs.f = cfg.get_double("mbll", "dpf_f", m.dpf_coeffs.f);
    m.partial_volume_correction = cfg.get_bool("mbll", "partial_volume_correction", m.partial_volume_correction);
    m.partial_volume_factor = cfg.get_double("mbll", "partial_volume_factor", m.partial_volume_factor);
    m.validate();
    return m;
}

void MbllParams::to_kv(std::vector<std::pair<std::string, std::string>>& kv) const {
    kv.emplace_back("mbll.eps_hbo2_730", fmt_double(eps_hbo2_730));
    kv.emplace_back("mbll.eps_hb_730", fmt_double(eps_hb_730));
    kv.emplace_back("mbll.eps_hbo2_850", fmt_double(eps_hbo2_850));
    kv.emplace_back("mbll.eps_hb_850", fmt_double(eps_hb_850));
    kv.emplace_back("mbll.separation_d", fmt_double(separation_d));
    kv.emplace_back("mbll.dpf_a", fmt_double(dpf_coeffs.a));
    kv.emplace_back("mbll.dpf_b", fmt_double(dpf_coeffs.b));
    kv.emplace_back("mbll.dpf_c", fmt_double(dpf_coeffs.c));
    kv.emplace_back("mbll.dpf_d", fmt_double(dpf_coeffs.d));
    kv.emplace_back("mbll.dpf_e", fmt_double(dpf_coeffs.e));
    kv.emplace_back("mbll.dpf_f", fmt_double(dpf_coeffs.f));
    kv.emplace_back("mbll.partial_volume_correction", partial_volume_correction ? "true" : "false");
    kv.emplace_back("mbll.partial_volume_factor", fmt_double(partial_volume_factor));
}

void MaraConfig::validate() const {
    if (!(window_s > 0)) throw ConfigError("mara: window must be positive");
    if (!(threshold_k > 0)) throw ConfigError("mara: threshold_k must be positive");
    if (spline_smoothing < 0 || spline_smoothing > 1)
        throw ConfigError("mara: spline_smoothing must be in [0,1]");
}

MaraConfig MaraConfig::from_config(const ConfigFile& cfg) {
    cfg.check_keys("mara", {"window", "threshold_k", "spline_smoothing", "enabled"});
    MaraConfig m;
    m.window_s = cfg.get_double("mara", "window", m.window_s);
    m.threshold_k = cfg.get_double("mara", "threshold_k", m.threshold_k);
    m.spline_smoothing = cfg.get_double("mara", "spline_smoothing", m.spline_smoothing);
    m.enabled = cfg.get_bool("mara", "enabled", m.enabled);
    m.validate();
    return m;
}

void MaraConfig::to_kv(std::vector<std::pair<std::string, std::string>>& kv) const {
    kv.emplace_back("mara.window", fmt_double(window_s));
    kv.emplace_back("mara.threshold_k", fmt_double(threshold_k));
    kv.emplace_back("mara.spline_smoothing", fmt_double(spline_smoothing));
    kv.emplace_back("mara.enabled", enabled ? "true" : "false");
}

void FilterSpec::validate() const {
    if (taps < 3 || taps % 2 == 0) throw ConfigError("fir: taps must be odd and >= 3");
    if (!(cutoff_hz > 0)) throw ConfigError("fir: cutoff must be positive");
}

FilterSpec FilterSpec::from_config(const ConfigFile& cfg) {
    cfg.check_keys("fir", {"taps", "cutoff", "enabled"});
    FilterSpec f;
    f.taps = static_cast<int>(cfg.get_int("fir", "taps", f.taps));
    f.cutoff_hz = cfg.get_double("fir", "cutoff", f.cutoff_hz);
    f.enabled = cfg.get_bool("fir", "enabled", f.enabled);
    f.validate();
    return f;
}

void FilterSpec::to_kv(std::vector<std::pair<std::string, std::string>>& kv) const {
    kv.emplace_back("fir.taps", fmt_int(taps));
    kv.emplace_back("fir.cutoff", fmt_double(cutoff_hz));
    kv.emplace_back("fir.enabled", enabled ? "true" : "false");
}

void PipelineConfig::validate() const {
    qc.validate();
    wavelet.validate();
    mbll.validate();
    mara.validate();
    fir.validate();
}

PipelineConfig PipelineConfig::from_config(const ConfigFile& cfg) {
    PipelineConfig p;
    p.qc = QcConfig::from_config(cfg);
    p.wavelet = WaveletConfig::from_config(cfg);
    p.mbll = MbllParams::from_config(cfg);
    p.mara = MaraConfig::from_config(cfg);
    p.fir = FilterSpec::from_config(cfg);
    return p;
}

void PipelineConfig::to_kv(std::vector<std::pair<std::string, std::string>>& kv) const {
    qc.to_kv(kv);
    wavelet.to_kv(kv);
    mbll.to_kv(kv);
    mara.to_kv(kv);
    fir.to_kv(kv);
}

// --- QC ---

std::array<bool, kNumChannels> qc_channels(const RawRecording& rec, const QcConfig& cfg) {
    cfg.validate();
    auto series_ok = [&](const Series& x) {
        for (double v : x)
            if (v >= cfg.saturation_level) return false;
        if (median_of(x) <= cfg.dark_level) return false;
        double var = variance_of(x);
        if (var < cfg.min_variance) return false;
        double sd = std::sqrt(var);
        double m = mean_of(x);
        size_t extreme = 0;
        for (double v : x)
            if (std::abs((v - m) / sd) > cfg.max_abs_z) ++extreme;
        if (static_cast<double>(extreme) > 0.01 * static_cast<double>(x.size())) return false;
        return true;
    };
    std::array<bool, kNumChannels> mask{};
    bool any = false;
    for (int c = 0; c < kNumChannels; ++c) {
        mask[c] = series_ok(rec.channels[c].i730) && series_ok(rec.channels[c].i850);
        any = any || mask[c];
    }
    if (!any)
        throw DataError("AllChannelsRejected: all 16 channels failed quality control for subject " +
                        rec.subject_id);
    return mask;
}

// --- db5 wavelet transform ---

// Analysis low-pass filter for Daubechies order 5, derived by spectral
// factorization of the product filter (50+ digit intermediate precision).
const std::array<double, 10> kDb5Lo = {
    0.0033357252854737713,
    -0.012580751999081999,
    -0.006241490212798274,
    0.07757149384004571,
    -0.03224486958463837,
    -0.24229488706638203,
    0.13842814590132073,
    0.7243085284377729,
    0.6038292697971897,
    0.16010239797419292,
};

namespace {

std::array<double, 10> db5_hi() {
    std::array<double, 10> hi{};
    const int F = 10;
    for (int j = 0; j < F; ++j) {
        double sign = ((F - 1 - j) % 2 == 0) ? 1.0 : -1.0;
        hi[j] = sign * kDb5Lo[F - 1 - j];
    }
    return hi;
}

} // namespace

void db5_dwt(const Series& x, Series& approx, Series& detail) {
    const int F = 10;
    static const std::array<double, 10> hi = db5_hi();
    long long n = static_cast<long long>(x.size());
    size_t nc = static_cast<size_t>((n + F - 1) / 2);
    approx.assign(nc, 0.0);
    detail.assign(nc, 0.0);
    for (size_t i = 0; i < nc; ++i) {
        double a = 0, d = 0;
        for (int j = 0; j < F; ++j) {
            double v = x[reflect(2 * static_cast<long long>(i) + 1 - j, n)];
            a += kDb5Lo[j] * v;
            d += hi[j] * v;
        }
        approx[i] = a;
        detail[i] = d;
    }
}

Series db5_idwt(const Series& approx, const Series& detail, size_t n) {
    const int F = 10;
    static const std::array<double, 10> hi = db5_hi();
    Series out(n, 0.0);
    long long nc = static_cast<long long>(approx.size());
    for (long long t = 0; t < static_cast<long long>(n); ++t) {
        double acc = 0;
        // contributions from coefficients i with j = 2i+1-t in [0, F)
        long long i_first = std::max<long long>(0, (t - 1) / 2);
        long long i_last = std::min<long long>(nc - 1, (t + F - 2) / 2);
        for (long long i = i_first; i <= i_last; ++i) {
            long long j = 2 * i + 1 - t;
            if (j < 0 || j >= F) continue;
            acc += approx[i] * kDb5Lo[j] + detail[i] * hi[j];
        }
        out[t] = acc;
    }
    return out;
}

double inv_norm_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("inv_norm_cdf: p must be in (0,1)");
    // Acklam's rational approximation with one Halley refinement.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= 1 - plow) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    // Halley step against the exact CDF via erfc.
    double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
    x = x - u / (1 + x * u / 2);
    return x;
}

Series wavelet_denoise(const Series& series, const WaveletConfig& cfg) {
    cfg.validate();
    size_t min_len = static_cast<size_t>(1) << (cfg.levels + 2);
    if (series.size() < min_len)
        throw DataError("TooShort: series length " + std::to_string(series.size()) +
                        " below 2^(levels+2) = " + std::to_string(min_len));

    std::vector<Series> details(cfg.levels);
    std::vector<size_t> lengths(cfg.levels);
    Series approx = series;
    for (int lv = 0; lv < cfg.levels; ++lv) {
        lengths[lv] = approx.size();
        Series next, det;
        db5_dwt(approx, next, det);
        details[lv] = std::move(det);
        approx = std::move(next);
    }

    if (cfg.alpha > 0.0) {
        double z = (cfg.alpha >= 1.0) ? 0.0 : inv_norm_cdf(1.0 - cfg.alpha / 2.0);
        for (auto& det : details) {
            Series mags(det.size());
            for (size_t i = 0; i < det.size(); ++i) mags[i] = std::abs(det[i]);
            double robust_sd = median_of(mags) / 0.6745;
            double thresh = z * robust_sd;
            for (double& v : det)
                if (std::abs(v) > thresh) v = 0.0;
        }
    }

    for (int lv = cfg.levels - 1; lv >= 0; --lv)
        approx = db5_idwt(approx, details[lv], lengths[lv]);
    return approx;
}

// --- DPF and MBLL ---

double dpf(double wavelength_nm, double age, const MbllParams& params) {
    if (wavelength_nm < 650 || wavelength_nm > 950)
        throw ConfigError("dpf: wavelength outside [650,950] nm");
    if (!(age > 0)) throw DataError("dpf: age must be positive");
    const DpfCoeffs& k = params.dpf_coeffs;
    double lam = wavelength_nm;
    return k.a + k.b * std::pow(age, k.c) - k.d * lam * lam * lam + k.e * lam * lam - k.f * lam;
}

std::pair<Series, Series> mbll_convert(const Series& i730, const Series& i850, double age,
                                       const MbllParams& params) {
    params.validate();
    if (i730.size() != i850.size()) throw DataError("mbll: wavelength series lengths differ");
    if (i730.empty()) throw DataError("mbll: empty series");
    for (size_t t = 0; t < i730.size(); ++t)
        if (!(i730[t] > 0) || !(i850[t] > 0))
            throw DataError("mbll: nonpositive intensity at sample " + std::to_string(t));

    size_t nref = std::min<size_t>(kBaselineSamples, i730.size());
    double ref730 = 0, ref850 = 0;
    for (size_t t = 0; t < nref; ++t) {
        ref730 += i730[t];
        ref850 += i850[t];
    }
    ref730 /= static_cast<double>(nref);
    ref850 /= static_cast<double>(nref);

    double k730 = params.separation_d * dpf(730.0, age, params) / 1000.0; // µM -> mM
    double k850 = params.separation_d * dpf(850.0, age, params) / 1000.0;
    double det = params.eps_hbo2_730 * params.eps_hb_850 - params.eps_hb_730 * params.eps_hbo2_850;

    Series hbo2(i730.size()), hb(i730.size());
    double pv = params.partial_volume_correction ? params.partial_volume_factor : 1.0;
    for (size_t t = 0; t < i730.size(); ++t) {
        double od730 = -std::log10(i730[t] / ref730) / k730;
        double od850 = -std::log10(i850[t] / ref850) / k850;
        // solve [eps_hbo2 eps_hb] [c_hbo2; c_hb] = od per wavelength (Cramer)
        hbo2[t] = (od730 * params.eps_hb_850 - params.eps_hb_730 * od850) / det / pv;
        hb[t] = (params.eps_hbo2_730 * od850 - od730 * params.eps_hbo2_850) / det / pv;
    }
    return {std::move(hbo2), std::move(hb)};
}

// --- smoothing spline (Reinsch) ---

Series smoothing_spline(const Series& y, double p) {
    size_t m = y.size();
    if (p < 0 || p > 1) throw ConfigError("smoothing_spline: p must be in [0,1]");
    if (m < 5 || p <= 1e-12) {
        // too short for a stable cubic fit, or maximal smoothing: use the mean level
        double mv = mean_of(y);
        return Series(m, mv);
    }
    if (p >= 1.0 - 1e-12) return y;

    double alpha = (1.0 - p) / p;
    size_t mm = m - 2;
    // Pentadiagonal SPD system (R + alpha*QtQ) gamma = Qt y  for unit spacing:
    // diag 2/3 + 6a, first off-diag 1/6 - 4a, second off-diag a.
    Series d0(mm, 2.0 / 3.0 + 6.0 * alpha);
    Series d1(mm > 1 ? mm - 1 : 0, 1.0 / 6.0 - 4.0 * alpha);
    Series d2(mm > 2 ? mm - 2 : 0, alpha);
    Series rhs(mm);
    for (size_t i = 0; i < mm; ++i) rhs[i] = y[i] - 2 * y[i + 1] + y[i + 2];

    // banded Cholesky (bandwidth 2): A = L D L^T
    Series diag(mm), e1(mm, 0.0), e2(mm, 0.0);
    for (size_t i = 0; i < mm; ++i) {
        double v = d0[i];
        if (i >= 1) v -= e1[i - 1] * e1[i - 1] * diag[i - 1];
        if (i >= 2) v -= e2[i - 2] * e2[i - 2] * diag[i - 2];
        diag[i] = v;
        if (i + 1 < mm) {
            double w = d1[i];
            if (i >= 1) w -= e1[i - 1] * e2[i - 1] * diag[i - 1];
            e1[i] = w / diag[i];
        }
        if (i + 2 < mm) e2[i] = d2[i] / diag[i];
    }
    // forward solve L z = rhs
    Series z(mm);
    for (size_t i = 0; i < mm; ++i) {
        double v = rhs[i];
        if (i >= 1) v -= e1[i - 1] * z[i - 1];
        if (i >= 2) v -= e2[i - 2] * z[i - 2];
        z[i] = v;
    }
    for (size_t i = 0; i < mm; ++i) z[i] /= diag[i];
    // back solve L^T gamma = z
    Series gamma(mm);
    for (size_t ii = mm; ii-- > 0;) {
        double v = z[ii];
        if (ii + 1 < mm) v -= e1[ii] * gamma[ii + 1];
        if (ii + 2 < mm) v -= e2[ii] * gamma[ii + 2];
        gamma[ii] = v;
    }

    // g = y - alpha * Q gamma, with gamma zero-padded at both ends
    Series g = y;
    auto gam = [&](long long i) -> double {
        return (i >= 0 && i < static_cast<long long>(mm)) ? gamma[i] : 0.0;
    };
    for (size_t i = 0; i < m; ++i) {
        long long ii = static_cast<long long>(i);
        double qg = gam(ii - 2) - 2 * gam(ii - 1) + gam(ii);
        // Note: (Q gamma)_i = gamma_{i-2} - 2 gamma_{i-1} + gamma_i in 0-based padded form
        g[i] = y[i] - alpha * qg;
    }
    return g;
}

Series mara_spline(const Series& series, const MaraConfig& cfg) {
    cfg.validate();
    size_t n = series.size();
    size_t window = static_cast<size_t>(std::lround(cfg.window_s * kSamplingRateHz));
    if (window < 1) window = 1;
    if (window >= n) throw DataError("mara: window must be shorter than the series");

    double gsd = std::sqrt(variance_of(series));
    std::vector<bool> flagged(n, false);
    if (gsd > 0) {
        size_t half = window / 2;
        for (size_t i = 0; i < n; ++i) {
            size_t a = i >= half ? i - half : 0;
            size_t b = std::min(n, i + half + 1);
            Series win(series.begin() + a, series.begin() + b);
            double msd = std::sqrt(variance_of(win));
            flagged[i] = msd > cfg.threshold_k * gsd;
        }
    }

    Series out = series;
    size_t i = 0;
    while (i < n) {
        if (!flagged[i]) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j < n && flagged[j]) ++j;

        Series seg(out.begin() + i, out.begin() + j);
        Series fit = smoothing_spline(seg, cfg.spline_smoothing);
        for (size_t t = 0; t < seg.size(); ++t) seg[t] -= fit[t];

        // re-level: corrected segment mean matches the preceding clean segment's mean
        double target;
        if (i > 0) {
            size_t a = i;
            while (a > 0 && !flagged[a - 1]) --a;
            Series clean(out.begin() + a, out.begin() + i);
            target = mean_of(clean);
        } else if (j < n) {
            size_t b = j;
            while (b < n && !flagged[b]) ++b;
            Series clean(series.begin() + j, series.begin() + b);
            target = clean.empty() ? mean_of(seg) : mean_of(clean);
        } else {
            target = mean_of(seg);
        }
        double adjust = target - mean_of(seg);
        for (size_t t = 0; t < seg.size(); ++t) out[i + t] = seg[t] + adjust;
        i = j;
    }
    return out;
}

// --- FIR ---

Series design_fir(const FilterSpec& spec, double fs_hz) {
    spec.validate();
    if (!(spec.cutoff_hz < fs_hz / 2)) throw ConfigError("fir: cutoff must be below Nyquist");
    int n = spec.taps;
    int mid = (n - 1) / 2;
    double fc = spec.cutoff_hz / fs_hz; // cycles per sample
    Series h(n);
    double sum = 0;
    for (int k = 0; k < n; ++k) {
        double x = 2.0 * fc * (k - mid);
        double sinc = (x == 0.0) ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
        double hamming = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * k / (n - 1));
        h[k] = 2.0 * fc * sinc * hamming;
        sum += h[k];
    }
    for (double& v : h) v /= sum; // exact unity DC gain
    // enforce exact symmetry against rounding asymmetries
    for (int k = 0; k < n / 2; ++k) {
        double avg = 0.5 * (h[k] + h[n - 1 - k]);
        h[k] = h[n - 1 - k] = avg;
    }
    return h;
}

double fir_response_mag(const Series& taps, double freq_hz, double fs_hz) {
    double re = 0, im = 0;
    for (size_t k = 0; k < taps.size(); ++k) {
        double phase = -2.0 * std::numbers::pi * freq_hz * static_cast<double>(k) / fs_hz;
        re += taps[k] * std::cos(phase);
        im += taps[k] * std::sin(phase);
    }
    return std::sqrt(re * re + im * im);
}

Series fir_lowpass(const Series& series, const FilterSpec& spec, double fs_hz) {
    Series h = design_fir(spec, fs_hz);
    long long n = static_cast<long long>(series.size());
    if (n < spec.taps)
        throw DataError("TooShort: series length " + std::to_string(n) + " below taps " +
                        std::to_string(spec.taps));
    int mid = spec.group_delay();
    Series out(series.size());
    for (long long t = 0; t < n; ++t) {
        double acc = 0;
        for (int j = 0; j < spec.taps; ++j)
            acc += h[j] * series[reflect(t + mid - j, n)];
        out[t] = acc;
    }
    return out;
}

// --- epoching ---

TaskEpoch extract_epoch(const HemoSeries& series, const EventMarker& marker) {
    size_t n = 0;
    for (int c = 0; c < kNumChannels; ++c)
        if (series.valid[c]) n = series.hbo2[c].size();
    long long start = std::llround(marker.task_start * kSamplingRateHz);
    long long count = static_cast<long long>(
        std::floor((marker.task_end - marker.task_start) * kSamplingRateHz + 1e-9));
    if (start < 0 || count <= 0 || start + count > static_cast<long long>(n))
        throw DataError("OutOfBounds: task window [" + fmt_double(marker.task_start) + "," +
                        fmt_double(marker.task_end) + ") outside recording");
    TaskEpoch epoch;
    epoch.subject_id = series.subject_id;
    if (marker.task == Task::Alpha) throw DataError("extract_epoch: Alpha epochs are not extracted");
    epoch.task = marker.task;
    epoch.valid = series.valid;
    for (int c = 0; c < kNumChannels; ++c) {
        if (!series.valid[c]) continue;
        epoch.hbo2[c].assign(series.hbo2[c].begin() + start, series.hbo2[c].begin() + start + count);
        epoch.hb[c].assign(series.hb[c].begin() + start, series.hb[c].begin() + start + count);
    }
    return epoch;
}

TaskEpoch baseline_correct(const TaskEpoch& epoch, const HemoSeries& series,
                           const EventMarker& marker) {
    size_t n = 0;
    for (int c = 0; c < kNumChannels; ++c)
        if (series.valid[c]) n = series.hbo2[c].size();
    long long b0 = std::llround(marker.baseline_start * kSamplingRateHz);
    if (b0 < 0 || b0 + kBaselineSamples > static_cast<long long>(n))
        throw DataError("OutOfBounds: baseline window outside recording");
    TaskEpoch out = epoch;
    for (int c = 0; c < kNumChannels; ++c) {
        if (!epoch.valid[c]) continue;
        double mo = 0, mh = 0;
        for (int t = 0; t < kBaselineSamples; ++t) {
            mo += series.hbo2[c][b0 + t];
            mh += series.hb[c][b0 + t];
        }
        mo /= kBaselineSamples;
        mh /= kBaselineSamples;
        for (double& v : out.hbo2[c]) v -= mo;
        for (double& v : out.hb[c]) v -= mh;
    }
    return out;
}

// --- full chain ---

PipelineResult run_pipeline(const RawRecording& rec, const SubjectMeta& subject,
                            const PipelineConfig& cfg) {
    cfg.validate();
    std::array<bool, kNumChannels> mask{};
    try {
        mask = qc_channels(rec, cfg.qc);
    } catch (const DataError& e) {
        throw StageError("qc", e.what());
    }

    HemoSeries hemo;
    hemo.subject_id = rec.subject_id;
    hemo.valid = mask;
    for (int c = 0; c < kNumChannels; ++c) {
        if (!mask[c]) continue;
        Series i730 = rec.channels[c].i730;
        Series i850 = rec.channels[c].i850;
        if (cfg.wavelet.enabled) {
            try {
                i730 = wavelet_denoise(i730, cfg.wavelet);
                i850 = wavelet_denoise(i850, cfg.wavelet);
            } catch (const DataError& e) {
                throw StageError("wavelet", e.what());
            }
        }
        try {
            auto [hbo2, hb] = mbll_convert(i730, i850, subject.age, cfg.mbll);
            hemo.hbo2[c] = std::move(hbo2);
            hemo.hb[c] = std::move(hb);
        } catch (const DataError& e) {
            throw StageError("mbll", e.what());
        }
        if (cfg.mara.enabled) {
            try {
                hemo.hbo2[c] = mara_spline(hemo.hbo2[c], cfg.mara);
                hemo.hb[c] = mara_spline(hemo.hb[c], cfg.mara);
            } catch (const DataError& e) {
                throw StageError("mara", e.what());
            }
        }
        if (cfg.fir.enabled) {
            try {
                hemo.hbo2[c] = fir_lowpass(hemo.hbo2[c], cfg.fir, rec.sampling_rate);
                hemo.hb[c] = fir_lowpass(hemo.hb[c], cfg.fir, rec.sampling_rate);
            } catch (const DataError& e) {
                throw StageError("fir", e.what());
            }
        }
        for (double v : hemo.hbo2[c])
            if (!std::isfinite(v)) throw StageError("mbll", "non-finite concentration on channel " +
                                                            std::to_string(c + 1));
    }

    const EventMarker* stw_marker = nullptr;
    const EventMarker* dtw_marker = nullptr;
    for (const auto& ev : rec.events) {
        if (ev.task == Task::STW && !stw_marker) stw_marker = &ev;
        if (ev.task == Task::DTW && !dtw_marker) dtw_marker = &ev;
    }
    if (!stw_marker) throw StageError("extract_epoch", "missing STW marker");
    if (!dtw_marker) throw StageError("extract_epoch", "missing DTW marker");

    PipelineResult result;
    try {
        result.stw = extract_epoch(hemo, *stw_marker);
        result.dtw = extract_epoch(hemo, *dtw_marker);
    } catch (const DataError& e) {
        throw StageError("extract_epoch", e.what());
    }
    try {
        result.stw = baseline_correct(result.stw, hemo, *stw_marker);
        result.dtw = baseline_correct(result.dtw, hemo, *dtw_marker);
    } catch (const DataError& e) {
        throw StageError("baseline_correct", e.what());
    }
    result.hemo = std::move(hemo);
    return result;
}

} // namespace gaitnirs
