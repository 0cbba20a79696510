#include "gnnpower/netsim.hpp"

#include <cmath>
#include <string>

#include "gnnpower/errors.hpp"

namespace gnnpower {

double dbm_to_linear(double dbm) {
    return std::pow(10.0, dbm / 10.0);
}

void SimConfig::validate() const {
    if (!(pathloss_exponent > 0.0)) throw ValidationError("pathloss_exponent must be > 0");
    if (size_policy.lo < 1) throw ValidationError("network size lower bound must be >= 1");
    if (size_policy.lo > size_policy.hi)
        throw ValidationError("network size range is inverted");
    if (slots_per_period < 1) throw ValidationError("slots_per_period must be >= 1");
    if (train_slots < 0 || test_slots < 0)
        throw ValidationError("slot counts must be nonnegative");
    if (train_slots + test_slots > slots_per_period)
        throw ValidationError("train_slots + test_slots exceeds slots_per_period");
    if (interference_radius && !(*interference_radius >= 0.0))
        throw ValidationError("interference_radius must be >= 0");
}

namespace {

double distance(const std::array<double, 2>& a, const std::array<double, 2>& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return std::sqrt(dx * dx + dy * dy);
}

} // namespace

Topology draw_topology(const SimConfig& cfg, int period_id, RngStream& rng) {
    Topology t;
    t.period_id = period_id;
    t.k = cfg.size_policy.is_fixed() ? cfg.size_policy.lo
                                     : rng.uniform_int(cfg.size_policy.lo, cfg.size_policy.hi);
    const double half = static_cast<double>(t.k);
    const double pair_half = half / 4.0;
    t.tx.resize(static_cast<std::size_t>(t.k));
    t.rx.resize(static_cast<std::size_t>(t.k));
    for (int i = 0; i < t.k; ++i) {
        t.tx[i] = {rng.uniform_range(-half, half), rng.uniform_range(-half, half)};
        t.rx[i] = {rng.uniform_range(t.tx[i][0] - pair_half, t.tx[i][0] + pair_half),
                   rng.uniform_range(t.tx[i][1] - pair_half, t.tx[i][1] + pair_half)};
    }
    t.adj.assign(static_cast<std::size_t>(t.k) * t.k, 0);
    for (int j = 0; j < t.k; ++j) {
        for (int k2 = 0; k2 < t.k; ++k2) {
            bool on;
            if (j == k2) {
                on = true;
            } else if (!cfg.interference_radius) {
                on = true;
            } else {
                const double r = *cfg.interference_radius;
                // undirected interference: either cross direction within range
                on = distance(t.tx[j], t.rx[k2]) <= r || distance(t.tx[k2], t.rx[j]) <= r;
            }
            t.adj[static_cast<std::size_t>(j) * t.k + k2] = on ? 1 : 0;
        }
    }
    return t;
}

Mat pathloss_matrix(const Topology& t, double gamma) {
    Mat pl(t.k, t.k);
    for (int j = 0; j < t.k; ++j) {
        for (int k2 = 0; k2 < t.k; ++k2) {
            if (!t.adjacent(j, k2)) continue;
            const double d = distance(t.tx[j], t.rx[k2]);
            if (d == 0.0)
                throw DegenerateGeometry("transmitter " + std::to_string(j) +
                                         " coincides with receiver " + std::to_string(k2));
            pl(j, k2) = std::pow(d, -gamma);
        }
    }
    return pl;
}

Mat draw_fading(int k, RngStream& rng) {
    Mat f(k, k);
    for (double& v : f.a) v = rng.rayleigh(1.0);
    return f;
}

ChannelRealization realize_channel(const Topology& t, const Mat& pathloss, const Mat& fading,
                                   int slot) {
    if (pathloss.rows != t.k || pathloss.cols != t.k || !pathloss.same_shape(fading))
        throw ShapeMismatch("realize_channel: matrix shapes do not match topology");
    ChannelRealization r;
    r.gains = Mat(t.k, t.k);
    r.slot = slot;
    r.period_id = t.period_id;
    for (std::size_t i = 0; i < r.gains.a.size(); ++i) {
        const double h = pathloss.a[i] * fading.a[i];
        r.gains.a[i] = h * h;
    }
    return r;
}

PeriodDataset generate_period(const SimConfig& cfg, int period_id, RngStream rng) {
    PeriodDataset d;
    RngStream topo_rng = rng.child("topology");
    d.topology = draw_topology(cfg, period_id, topo_rng);
    const Mat pl = pathloss_matrix(d.topology, cfg.pathloss_exponent);
    const RngStream fading_root = rng.child("fading");
    d.realizations.reserve(static_cast<std::size_t>(cfg.slots_per_period));
    for (int s = 0; s < cfg.slots_per_period; ++s) {
        RngStream slot_rng = fading_root.child(static_cast<std::uint64_t>(s));
        d.realizations.push_back(
            realize_channel(d.topology, pl, draw_fading(d.topology.k, slot_rng), s));
    }
    for (int s = 0; s < cfg.train_slots; ++s) d.train_idx.push_back(s);
    for (int s = cfg.train_slots; s < cfg.train_slots + cfg.test_slots; ++s)
        d.test_idx.push_back(s);
    return d;
}

std::vector<PeriodDataset> generate_meta_dataset(const SimConfig& cfg, int n_periods,
                                                 const RngStream& root) {
    if (n_periods < 1) throw ValidationError("n_periods must be >= 1");
    std::vector<PeriodDataset> out;
    out.reserve(static_cast<std::size_t>(n_periods));
    for (int i = 0; i < n_periods; ++i)
        out.push_back(generate_period(cfg, i, root.child(static_cast<std::uint64_t>(i))));
    return out;
}

PeriodDataset::Batch PeriodDataset::train_batch(int budget) const {
    Batch b;
    const std::size_t n =
        budget < 0 ? train_idx.size()
                   : std::min(train_idx.size(), static_cast<std::size_t>(budget));
    b.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        b.push_back(&realizations[static_cast<std::size_t>(train_idx[i])]);
    return b;
}

PeriodDataset::Batch PeriodDataset::test_batch() const {
    Batch b;
    b.reserve(test_idx.size());
    for (int idx : test_idx) b.push_back(&realizations[static_cast<std::size_t>(idx)]);
    return b;
}

} // namespace gnnpower
