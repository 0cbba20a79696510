#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "gnnpower/linalg.hpp"
#include "gnnpower/rng.hpp"

namespace gnnpower {

/// 10^(x/10): dBm to linear milliwatts.
double dbm_to_linear(double dbm);

/// Link-count policy for a drawn topology: fixed K when lo == hi, otherwise
/// integer-uniform on [lo, hi].
struct SizePolicy {
    int lo = 1;
    int hi = 1;

    static SizePolicy fixed(int k) { return {k, k}; }
    static SizePolicy uniform(int lo, int hi) { return {lo, hi}; }
    bool is_fixed() const { return lo == hi; }
};

struct SimConfig {
    double pathloss_exponent = 2.2;
    double sigma2_dbm = -70.0;
    double pmax_dbm = -35.0;
    SizePolicy size_policy = SizePolicy::uniform(4, 20);
    int slots_per_period = 100;
    int train_slots = 50;
    int test_slots = 50;
    std::optional<double> interference_radius; // absent = fully connected
    std::uint64_t seed = 1;

    /// Throws ValidationError on any violated invariant.
    void validate() const;

    double sigma2_linear() const { return dbm_to_linear(sigma2_dbm); }
    double pmax_linear() const { return dbm_to_linear(pmax_dbm); }
};

/// Node placements and interference edge structure for one period.
/// Interference is undirected: links j and k are adjacent when either
/// cross distance Tx_j->Rx_k or Tx_k->Rx_j falls within the radius.
/// Diagonal entries are always set.
struct Topology {
    int period_id = 0;
    int k = 0;
    std::vector<std::array<double, 2>> tx;
    std::vector<std::array<double, 2>> rx;
    std::vector<std::uint8_t> adj; // row-major k*k mask

    bool adjacent(int j, int kk) const { return adj[static_cast<std::size_t>(j) * k + kk] != 0; }
};

/// K x K nonnegative linear power-gain matrix for one slot; entry (j,k) is
/// the gain from transmitter j to receiver k and doubles as the graph shift
/// operator of the policy network.
struct ChannelRealization {
    Mat gains;
    int slot = 0;
    int period_id = 0;

    int k() const { return gains.rows; }
};

/// One period's channel realizations with a train/test split by slot index.
struct PeriodDataset {
    Topology topology;
    std::vector<ChannelRealization> realizations;
    std::vector<int> train_idx;
    std::vector<int> test_idx;

    using Batch = std::vector<const ChannelRealization*>;

    /// First `budget` train slots (all of them when budget < 0).
    Batch train_batch(int budget = -1) const;
    Batch test_batch() const;
};

Topology draw_topology(const SimConfig& cfg, int period_id, RngStream& rng);

/// Entry (j,k) = ||Tx_j - Rx_k||^-gamma where adjacent, else 0.
/// Throws DegenerateGeometry when a required distance is exactly zero.
Mat pathloss_matrix(const Topology& t, double gamma);

/// i.i.d. |h_f| ~ Rayleigh(1) amplitudes, all strictly positive.
Mat draw_fading(int k, RngStream& rng);

/// gains(j,k) = (pathloss(j,k) * fading(j,k))^2
ChannelRealization realize_channel(const Topology& t, const Mat& pathloss, const Mat& fading,
                                   int slot);

PeriodDataset generate_period(const SimConfig& cfg, int period_id, RngStream rng);

/// n_periods independent periods, period i drawn from root.child(i).
std::vector<PeriodDataset> generate_meta_dataset(const SimConfig& cfg, int n_periods,
                                                 const RngStream& root);

} // namespace gnnpower
