#include "gnnpower/dataset_io.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "gnnpower/checkpoint.hpp"
#include "gnnpower/errors.hpp"

namespace gnnpower {

namespace {

constexpr const char* kHeader = "gnnpower-dataset v1";

double read_double_tok(std::istringstream& in, const std::string& what) {
    std::string tok;
    if (!(in >> tok)) throw ParseError(what + ": missing value");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw ParseError(what + ": bad number: " + tok);
    return v;
}

long read_long_tok(std::istringstream& in, const std::string& what) {
    std::string tok;
    if (!(in >> tok)) throw ParseError(what + ": missing value");
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0') throw ParseError(what + ": bad integer: " + tok);
    return v;
}

std::string expect_line(std::istream& in, const std::string& what) {
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        return line;
    }
    throw ParseError(what + ": unexpected end of file");
}

std::pair<std::string, std::istringstream> split_kv(const std::string& line,
                                                    const std::string& what) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(what + ": malformed line: " + line);
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    return {trim(line.substr(0, eq)), std::istringstream(line.substr(eq + 1))};
}

} // namespace

void write_dataset(const std::filesystem::path& path, const SimConfig& cfg,
                   std::span<const PeriodDataset> periods) {
    cfg.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << kHeader << '\n';
    out << "pathloss_exponent = " << format_full(cfg.pathloss_exponent) << '\n';
    out << "sigma2_dbm = " << format_full(cfg.sigma2_dbm) << '\n';
    out << "pmax_dbm = " << format_full(cfg.pmax_dbm) << '\n';
    if (cfg.size_policy.is_fixed())
        out << "network_size = fixed " << cfg.size_policy.lo << '\n';
    else
        out << "network_size = uniform " << cfg.size_policy.lo << ' ' << cfg.size_policy.hi
            << '\n';
    out << "slots_per_period = " << cfg.slots_per_period << '\n';
    out << "train_slots = " << cfg.train_slots << '\n';
    out << "test_slots = " << cfg.test_slots << '\n';
    if (cfg.interference_radius)
        out << "interference_radius = " << format_full(*cfg.interference_radius) << '\n';
    else
        out << "interference_radius = none\n";
    out << "seed = " << cfg.seed << '\n';
    out << "periods = " << periods.size() << '\n';

    for (const PeriodDataset& p : periods) {
        const Topology& t = p.topology;
        out << "period = " << t.period_id << '\n';
        out << "k = " << t.k << '\n';
        for (int i = 0; i < t.k; ++i)
            out << "link" << i << " = " << format_full(t.tx[i][0]) << ' '
                << format_full(t.tx[i][1]) << ' ' << format_full(t.rx[i][0]) << ' '
                << format_full(t.rx[i][1]) << '\n';
        for (int j = 0; j < t.k; ++j) {
            out << "adjacency" << j << " =";
            for (int k2 = 0; k2 < t.k; ++k2) out << ' ' << (t.adjacent(j, k2) ? 1 : 0);
            out << '\n';
        }
        out << "train_idx =";
        for (int idx : p.train_idx) out << ' ' << idx;
        out << '\n';
        out << "test_idx =";
        for (int idx : p.test_idx) out << ' ' << idx;
        out << '\n';
        out << "slots = " << p.realizations.size() << '\n';
        for (const ChannelRealization& r : p.realizations) {
            out << "slot" << r.slot << " =";
            for (double g : r.gains.a) out << ' ' << format_full(g);
            out << '\n';
        }
    }
}

std::pair<SimConfig, std::vector<PeriodDataset>> read_dataset(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kHeader)
        throw ParseError("dataset: missing or unknown header");

    SimConfig cfg;
    long n_periods = -1;
    while (n_periods < 0) {
        auto [key, val] = split_kv(expect_line(in, "dataset header"), "dataset header");
        if (key == "pathloss_exponent") cfg.pathloss_exponent = read_double_tok(val, key);
        else if (key == "sigma2_dbm") cfg.sigma2_dbm = read_double_tok(val, key);
        else if (key == "pmax_dbm") cfg.pmax_dbm = read_double_tok(val, key);
        else if (key == "network_size") {
            std::string kind;
            val >> kind;
            if (kind == "fixed") {
                cfg.size_policy = SizePolicy::fixed(static_cast<int>(read_long_tok(val, key)));
            } else if (kind == "uniform") {
                const int lo = static_cast<int>(read_long_tok(val, key));
                const int hi = static_cast<int>(read_long_tok(val, key));
                cfg.size_policy = SizePolicy::uniform(lo, hi);
            } else {
                throw ParseError("dataset: bad network_size kind: " + kind);
            }
        } else if (key == "slots_per_period")
            cfg.slots_per_period = static_cast<int>(read_long_tok(val, key));
        else if (key == "train_slots") cfg.train_slots = static_cast<int>(read_long_tok(val, key));
        else if (key == "test_slots") cfg.test_slots = static_cast<int>(read_long_tok(val, key));
        else if (key == "interference_radius") {
            std::string tok;
            val >> tok;
            if (tok == "none") cfg.interference_radius.reset();
            else {
                char* end = nullptr;
                const double r = std::strtod(tok.c_str(), &end);
                if (end == tok.c_str() || *end != '\0')
                    throw ParseError("dataset: bad interference_radius: " + tok);
                cfg.interference_radius = r;
            }
        } else if (key == "seed")
            cfg.seed = static_cast<std::uint64_t>(read_long_tok(val, key));
        else if (key == "periods") n_periods = read_long_tok(val, key);
        else throw ParseError("dataset: unknown header key: " + key);
    }
    cfg.validate();

    std::vector<PeriodDataset> periods;
    periods.reserve(static_cast<std::size_t>(n_periods));
    for (long pi = 0; pi < n_periods; ++pi) {
        PeriodDataset p;
        Topology& t = p.topology;
        {
            auto [key, val] = split_kv(expect_line(in, "period"), "period");
            if (key != "period") throw ParseError("dataset: expected period block");
            t.period_id = static_cast<int>(read_long_tok(val, key));
        }
        {
            auto [key, val] = split_kv(expect_line(in, "k"), "k");
            if (key != "k") throw ParseError("dataset: expected k");
            t.k = static_cast<int>(read_long_tok(val, key));
        }
        t.tx.resize(static_cast<std::size_t>(t.k));
        t.rx.resize(static_cast<std::size_t>(t.k));
        for (int i = 0; i < t.k; ++i) {
            auto [key, val] = split_kv(expect_line(in, "link"), "link");
            if (key != "link" + std::to_string(i)) throw ParseError("dataset: links out of order");
            t.tx[i][0] = read_double_tok(val, key);
            t.tx[i][1] = read_double_tok(val, key);
            t.rx[i][0] = read_double_tok(val, key);
            t.rx[i][1] = read_double_tok(val, key);
        }
        t.adj.assign(static_cast<std::size_t>(t.k) * t.k, 0);
        for (int j = 0; j < t.k; ++j) {
            auto [key, val] = split_kv(expect_line(in, "adjacency"), "adjacency");
            if (key != "adjacency" + std::to_string(j))
                throw ParseError("dataset: adjacency rows out of order");
            for (int k2 = 0; k2 < t.k; ++k2)
                t.adj[static_cast<std::size_t>(j) * t.k + k2] =
                    read_long_tok(val, key) ? 1 : 0;
        }
        {
            auto [key, val] = split_kv(expect_line(in, "train_idx"), "train_idx");
            if (key != "train_idx") throw ParseError("dataset: expected train_idx");
            std::string tok;
            while (val >> tok) p.train_idx.push_back(std::atoi(tok.c_str()));
        }
        {
            auto [key, val] = split_kv(expect_line(in, "test_idx"), "test_idx");
            if (key != "test_idx") throw ParseError("dataset: expected test_idx");
            std::string tok;
            while (val >> tok) p.test_idx.push_back(std::atoi(tok.c_str()));
        }
        long n_slots = 0;
        {
            auto [key, val] = split_kv(expect_line(in, "slots"), "slots");
            if (key != "slots") throw ParseError("dataset: expected slots");
            n_slots = read_long_tok(val, key);
        }
        p.realizations.reserve(static_cast<std::size_t>(n_slots));
        for (long s = 0; s < n_slots; ++s) {
            auto [key, val] = split_kv(expect_line(in, "slot"), "slot");
            if (key != "slot" + std::to_string(s)) throw ParseError("dataset: slots out of order");
            ChannelRealization r;
            r.slot = static_cast<int>(s);
            r.period_id = t.period_id;
            r.gains = Mat(t.k, t.k);
            for (double& g : r.gains.a) g = read_double_tok(val, key);
            p.realizations.push_back(std::move(r));
        }
        periods.push_back(std::move(p));
    }
    return {cfg, std::move(periods)};
}

} // namespace gnnpower
