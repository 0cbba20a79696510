#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gnnpower/modular.hpp"
#include "gnnpower/netsim.hpp"

namespace gnnpower {

/// Fixed seeded evaluation set for comparing module responses: channel
/// realizations on one K-link topology plus a shared input signal.
struct ProbeBatch {
    std::vector<ChannelRealization> realizations;
    Vec x;
};

/// 64 fading realizations of one seeded drop at K = 10, all-ones input.
ProbeBatch make_probe_batch(std::uint64_t seed, int k = 10, int count = 64,
                            double pathloss_exponent = 2.2);

/// Single-layer response of each module over the probe: row r of z_i is
/// ReLU(graph_filter(module_i, g_r, x)).
std::vector<Mat> module_outputs(const ModuleSet& mods, const ProbeBatch& probe);

/// ||zj^T zi||_F^2 / (||zi^T zi||_F ||zj^T zj||_F); optionally column-centers
/// both inputs first. Throws DegenerateInput when a self-Gram norm is zero.
double linear_cka(const Mat& zi, const Mat& zj, bool center = false);

/// Pairwise module similarities, symmetric with unit diagonal.
Mat cka_matrix(const ModuleSet& mods, const ProbeBatch& probe);

/// Selection frequency of each module over all layers and runs; sums to 1.
Vec assignment_histogram(std::span<const HardAssignment> runs, int modules);

/// (c_ml - c_jl) / c_ml. Throws NonpositiveReference unless c_ml > 0.
double relative_rate_gain(double c_ml, double c_jl);

/// Distribution of direct-link SNR 10 log10(pmax g_kk / sigma2) in dB.
struct SinrStats {
    double mean_db = 0.0;
    double max_db = 0.0;
    double min_db = 0.0;
    long count = 0;
};
SinrStats empirical_sinr_stats(const PeriodDataset& dataset, double pmax, double sigma2);

// --- small statistics helpers -------------------------------------------

double mean(std::span<const double> xs);
double stderr_of_mean(std::span<const double> xs);

/// Exact one-sided sign-test p-value: P(X >= wins) for X ~ Binomial(n, 1/2).
double sign_test_pvalue(int wins, int n);

/// Pearson chi-square statistic for observed counts against probabilities.
double chi_square_stat(std::span<const long> observed, std::span<const double> probs);

// --- CSV emitters ---------------------------------------------------------

/// Floats are written with 9 significant digits.
std::string format_csv_double(double v);

void write_cka_csv(const std::filesystem::path& path, const Mat& cka);
void write_histogram_csv(const std::filesystem::path& path, const Vec& histogram);

struct GainRow {
    double x_value = 0.0;
    double mean = 0.0;
    double stderr_ = 0.0;
};
void write_gain_csv(const std::filesystem::path& path, std::span<const GainRow> rows);

void write_train_log_csv(const std::filesystem::path& path,
                         std::span<const TrainLogRow> rows);
void write_adapt_log_csv(const std::filesystem::path& path,
                         std::span<const AdaptLogRow> rows);

} // namespace gnnpower
