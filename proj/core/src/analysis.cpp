#include "gnnpower/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "gnnpower/errors.hpp"

namespace gnnpower {

ProbeBatch make_probe_batch(std::uint64_t seed, int k, int count, double pathloss_exponent) {
    SimConfig cfg;
    cfg.pathloss_exponent = pathloss_exponent;
    cfg.size_policy = SizePolicy::fixed(k);
    cfg.slots_per_period = count;
    cfg.train_slots = count;
    cfg.test_slots = 0;
    cfg.seed = seed;
    const PeriodDataset period = generate_period(cfg, 0, RngStream(seed).child("probe"));
    ProbeBatch probe;
    probe.realizations = period.realizations;
    probe.x = ones(k);
    return probe;
}

std::vector<Mat> module_outputs(const ModuleSet& mods, const ProbeBatch& probe) {
    mods.validate();
    if (probe.realizations.empty()) throw EmptyInput("module_outputs: empty probe");
    const int k = probe.realizations.front().k();
    if (static_cast<int>(probe.x.size()) != k)
        throw ShapeMismatch("module_outputs: probe input length does not match K");
    std::vector<Mat> out;
    out.reserve(static_cast<std::size_t>(mods.size()));
    for (const FilterTaps& mod : mods.modules) {
        Mat z(static_cast<int>(probe.realizations.size()), k);
        for (std::size_t r = 0; r < probe.realizations.size(); ++r) {
            if (probe.realizations[r].k() != k)
                throw ShapeMismatch("module_outputs: probe K is not fixed");
            const Vec v = graph_filter(mod, probe.realizations[r], probe.x);
            for (int q = 0; q < k; ++q) z(static_cast<int>(r), q) = v[q] > 0.0 ? v[q] : 0.0;
        }
        out.push_back(std::move(z));
    }
    return out;
}

namespace {

Mat column_centered(const Mat& z) {
    Mat out = z;
    for (int j = 0; j < z.cols; ++j) {
        double m = 0.0;
        for (int i = 0; i < z.rows; ++i) m += z(i, j);
        m /= static_cast<double>(z.rows);
        for (int i = 0; i < z.rows; ++i) out(i, j) -= m;
    }
    return out;
}

/// ||A^T B||_F^2 for same-shaped A, B without forming the Gram matrix rows
/// beyond one at a time.
double cross_gram_fro2(const Mat& a, const Mat& b) {
    double total = 0.0;
    for (int i = 0; i < a.cols; ++i) {
        for (int j = 0; j < b.cols; ++j) {
            double c = 0.0;
            for (int r = 0; r < a.rows; ++r) c += a(r, i) * b(r, j);
            total += c * c;
        }
    }
    return total;
}

} // namespace

double linear_cka(const Mat& zi, const Mat& zj, bool center) {
    if (!zi.same_shape(zj)) throw ShapeMismatch("linear_cka: shape mismatch");
    Mat ac, bc;
    const Mat* a = &zi;
    const Mat* b = &zj;
    if (center) {
        ac = column_centered(zi);
        bc = column_centered(zj);
        a = &ac;
        b = &bc;
    }
    const double self_i = cross_gram_fro2(*a, *a);
    const double self_j = cross_gram_fro2(*b, *b);
    if (self_i == 0.0 || self_j == 0.0)
        throw DegenerateInput("linear_cka: zero Gram norm");
    return cross_gram_fro2(*b, *a) / (std::sqrt(self_i) * std::sqrt(self_j));
}

Mat cka_matrix(const ModuleSet& mods, const ProbeBatch& probe) {
    if (mods.size() < 2) throw EmptyInput("cka_matrix: need at least two modules");
    const std::vector<Mat> z = module_outputs(mods, probe);
    Mat cka(mods.size(), mods.size());
    for (int i = 0; i < mods.size(); ++i) {
        cka(i, i) = linear_cka(z[i], z[i]);
        for (int j = i + 1; j < mods.size(); ++j) {
            const double v = linear_cka(z[i], z[j]);
            cka(i, j) = v;
            cka(j, i) = v;
        }
    }
    return cka;
}

Vec assignment_histogram(std::span<const HardAssignment> runs, int modules) {
    if (runs.empty()) throw EmptyInput("assignment_histogram: no runs");
    Vec counts(static_cast<std::size_t>(modules), 0.0);
    long total = 0;
    for (const HardAssignment& run : runs) {
        for (int idx : run.s) {
            if (idx < 0 || idx >= modules)
                throw IndexOutOfRange("assignment_histogram: module index out of range");
            counts[static_cast<std::size_t>(idx)] += 1.0;
            ++total;
        }
    }
    if (total == 0) throw EmptyInput("assignment_histogram: runs contain no layers");
    for (double& c : counts) c /= static_cast<double>(total);
    return counts;
}

double relative_rate_gain(double c_ml, double c_jl) {
    if (!(c_ml > 0.0)) throw NonpositiveReference("relative_rate_gain: c_ml must be > 0");
    return (c_ml - c_jl) / c_ml;
}

SinrStats empirical_sinr_stats(const PeriodDataset& dataset, double pmax, double sigma2) {
    if (dataset.realizations.empty()) throw EmptyInput("empirical_sinr_stats: no realizations");
    SinrStats st;
    st.max_db = -1e300;
    st.min_db = 1e300;
    double total = 0.0;
    for (const ChannelRealization& g : dataset.realizations) {
        for (int i = 0; i < g.k(); ++i) {
            const double gkk = g.gains(i, i);
            if (gkk <= 0.0) continue; // direct links are never masked
            const double snr_db = 10.0 * std::log10(pmax * gkk / sigma2);
            total += snr_db;
            st.max_db = std::max(st.max_db, snr_db);
            st.min_db = std::min(st.min_db, snr_db);
            ++st.count;
        }
    }
    if (st.count == 0) throw EmptyInput("empirical_sinr_stats: no direct links");
    st.mean_db = total / static_cast<double>(st.count);
    return st;
}

double mean(std::span<const double> xs) {
    if (xs.empty()) throw EmptyInput("mean: empty input");
    double total = 0.0;
    for (double x : xs) total += x;
    return total / static_cast<double>(xs.size());
}

double stderr_of_mean(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    const double n = static_cast<double>(xs.size());
    return std::sqrt(ss / (n - 1.0) / n);
}

double sign_test_pvalue(int wins, int n) {
    if (n <= 0) return 1.0;
    if (wins < 0) wins = 0;
    // sum_{k=wins..n} C(n,k) / 2^n via logs
    double p = 0.0;
    for (int k = wins; k <= n; ++k) {
        const double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                            std::lgamma(n - k + 1.0) - n * std::log(2.0);
        p += std::exp(logc);
    }
    return std::min(p, 1.0);
}

double chi_square_stat(std::span<const long> observed, std::span<const double> probs) {
    if (observed.size() != probs.size() || observed.empty())
        throw ShapeMismatch("chi_square_stat: size mismatch");
    long n = 0;
    for (long o : observed) n += o;
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double expect = static_cast<double>(n) * probs[i];
        const double d = static_cast<double>(observed[i]) - expect;
        stat += d * d / expect;
    }
    return stat;
}

std::string format_csv_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

} // namespace

void write_cka_csv(const std::filesystem::path& path, const Mat& cka) {
    std::ofstream out = open_out(path);
    for (int i = 0; i < cka.rows; ++i) {
        for (int j = 0; j < cka.cols; ++j) {
            if (j) out << ',';
            out << format_csv_double(cka(i, j));
        }
        out << '\n';
    }
}

void write_histogram_csv(const std::filesystem::path& path, const Vec& histogram) {
    std::ofstream out = open_out(path);
    out << "module_index,frequency\n";
    for (std::size_t i = 0; i < histogram.size(); ++i)
        out << i << ',' << format_csv_double(histogram[i]) << '\n';
}

void write_gain_csv(const std::filesystem::path& path, std::span<const GainRow> rows) {
    std::ofstream out = open_out(path);
    out << "x_value,mean,stderr\n";
    for (const GainRow& r : rows)
        out << format_csv_double(r.x_value) << ',' << format_csv_double(r.mean) << ','
            << format_csv_double(r.stderr_) << '\n';
}

void write_train_log_csv(const std::filesystem::path& path, std::span<const TrainLogRow> rows) {
    std::ofstream out = open_out(path);
    out << "meta_iter,mean_adapted_test_sum_rate,wall_ms\n";
    for (const TrainLogRow& r : rows)
        out << r.iter << ',' << format_csv_double(r.objective) << ',' << r.wall_ms << '\n';
}

void write_adapt_log_csv(const std::filesystem::path& path, std::span<const AdaptLogRow> rows) {
    std::ofstream out = open_out(path);
    out << "step,temperature,train_sum_rate,entropy_of_rows\n";
    for (const AdaptLogRow& r : rows)
        out << r.step << ',' << format_csv_double(r.temperature) << ','
            << format_csv_double(r.train_sum_rate) << ',' << format_csv_double(r.entropy)
            << '\n';
}

} // namespace gnnpower
