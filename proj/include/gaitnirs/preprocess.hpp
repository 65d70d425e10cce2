#pragma once
#include "gaitnirs/core.hpp"
#include "gaitnirs/textio.hpp"

#include <utility>

namespace gaitnirs {

struct QcConfig {
    double saturation_level = 4.0; // device units
    double dark_level = 0.01;
    double max_abs_z = 6.0;
    double min_variance = 1e-12;

    void validate() const;
    static QcConfig from_config(const ConfigFile& cfg);
    void to_kv(std::vector<std::pair<std::string, std::string>>& kv) const;
};

struct WaveletConfig {
    int levels = 4;
    double alpha = 0.1; // outlier probability on detail coefficients; 0 disables thresholding
    bool enabled = true;

    void validate() const;
    static WaveletConfig from_config(const ConfigFile& cfg);
    void to_kv(std::vector<std::pair<std::string, std::string>>& kv) const;
};

struct DpfCoeffs {
    // DPF(lambda, age) = a + b*age^c - d*lambda^3 + e*lambda^2 - f*lambda
    double a = 223.3;
    double b = 0.05624;
    double c = 0.8493;
    double d = 5.723e-7;
    double e = 0.001245;
    double f = 0.9025;

    bool operator==(const DpfCoeffs&) const = default;
};

struct MbllParams {
    // Molar extinction coefficients in 1/(mM*cm) at the two working wavelengths.
    double eps_hbo2_730 = 0.39;
    double eps_hb_730 = 1.1022;
    double eps_hbo2_850 = 1.058;
    double eps_hb_850 = 0.69132;
    double separation_d = 2.5; // cm
    DpfCoeffs dpf_coeffs;
    bool partial_volume_correction = false;
    double partial_volume_factor = 1.0;

    void validate() const;
    static MbllParams from_config(const ConfigFile& cfg);
    void to_kv(std::vector<std::pair<std::string, std::string>>& kv) const;
};

struct MaraConfig {
    double window_s = 3.0;
    double threshold_k = 2.0;
    double spline_smoothing = 0.01; // p in [0,1]: 1 -> interpolation, 0 -> straight line
    bool enabled = true;

    void validate() const;
    static MaraConfig from_config(const ConfigFile& cfg);
    void to_kv(std::vector<std::pair<std::string, std::string>>& kv) const;
};

struct FilterSpec {
    int taps = 101;
    double cutoff_hz = 0.08;
    bool enabled = true;

    int group_delay() const { return (taps - 1) / 2; }
    void validate() const;
    static FilterSpec from_config(const ConfigFile& cfg);
    void to_kv(std::vector<std::pair<std::string, std::string>>& kv) const;
};

struct PipelineConfig {
    QcConfig qc;
    WaveletConfig wavelet;
    MbllParams mbll;
    MaraConfig mara;
    FilterSpec fir;

    void validate() const;
    static PipelineConfig from_config(const ConfigFile& cfg);
    void to_kv(std::vector<std::pair<std::string, std::string>>& kv) const;
};

// --- operations ---

// Channel invalid iff saturated, dark, flat, or >1% of |z| beyond max_abs_z on
// either wavelength. Throws AllChannelsRejected if nothing survives.
std::array<bool, kNumChannels> qc_channels(const RawRecording& rec, const QcConfig& cfg);

// Multilevel db5 DWT; detail coefficients beyond the (1 - alpha/2) Gaussian
// quantile times MAD/0.6745 are zeroed; inverse transform at original length.
Series wavelet_denoise(const Series& series, const WaveletConfig& cfg);

double dpf(double wavelength_nm, double age, const MbllParams& params);

// dOD(lambda,t) = -log10(I/I_ref), I_ref = mean of first 20 samples; 2x2 solve
// per timepoint yields concentration changes in µM.
std::pair<Series, Series> mbll_convert(const Series& i730, const Series& i850, double age,
                                       const MbllParams& params);

// Moving-SD segments above threshold_k * series SD get a smoothing spline
// subtracted and are re-leveled to the preceding clean segment's mean.
Series mara_spline(const Series& series, const MaraConfig& cfg);

Series design_fir(const FilterSpec& spec, double fs_hz);
Series fir_lowpass(const Series& series, const FilterSpec& spec, double fs_hz = kSamplingRateHz);

TaskEpoch extract_epoch(const HemoSeries& series, const EventMarker& marker);
TaskEpoch baseline_correct(const TaskEpoch& epoch, const HemoSeries& series, const EventMarker& marker);

struct PipelineResult {
    HemoSeries hemo; // post-filter series, retained for diagnostics
    TaskEpoch stw;
    TaskEpoch dtw;
};

// qc -> wavelet (per wavelength) -> MBLL -> spline -> FIR -> epoch -> baseline.
PipelineResult run_pipeline(const RawRecording& rec, const SubjectMeta& subject,
                            const PipelineConfig& cfg);

// --- numerics exposed for direct testing ---

extern const std::array<double, 10> kDb5Lo; // analysis low-pass, db5

// One analysis/synthesis level with half-sample symmetric extension.
void db5_dwt(const Series& x, Series& approx, Series& detail);
Series db5_idwt(const Series& approx, const Series& detail, size_t n);

double inv_norm_cdf(double p);

// Natural cubic smoothing spline on unit-spaced points (Reinsch scheme).
Series smoothing_spline(const Series& y, double p);

// Magnitude response of FIR coefficients at freq_hz given fs.
double fir_response_mag(const Series& taps, double freq_hz, double fs_hz);

} // namespace gaitnirs
