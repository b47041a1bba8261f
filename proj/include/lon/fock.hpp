#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lon/core.hpp"
#include "lon/stats.hpp"

namespace lon::fock {

using CountVector = std::vector<int>;

// Exact Fock-space computations stay desk-scale; these caps keep permanent
// sizes and basis enumerations bounded.
inline constexpr int kMaxModes = 8;
inline constexpr int kMaxPhotons = 8;
inline constexpr std::size_t kMaxBasisStates = 200000;

int total_count(const CountVector& n);
double count_factorial(const CountVector& n);  // prod_j n_j!

/// All M-mode count vectors with total <= max_total, ordered by total and then
/// lexicographically; index lookup by state.
class FockBasis {
public:
    FockBasis(int modes, int max_total);

    int modes() const { return modes_; }
    int max_total() const { return max_total_; }
    std::size_t size() const { return states_.size(); }
    const CountVector& state(std::size_t index) const { return states_[index]; }
    std::size_t index(const CountVector& state) const;
    bool contains(const CountVector& state) const;

private:
    int modes_;
    int max_total_;
    std::vector<CountVector> states_;
    struct Hash {
        std::size_t operator()(const CountVector& v) const;
    };
    std::unordered_map<CountVector, std::size_t, Hash> index_;
};

struct FockDistribution {
    std::shared_ptr<const FockBasis> basis;
    std::vector<double> probs;
    double residual_mass = 0.0;

    double prob(const CountVector& state) const;
    std::string to_json_string() const;
};

/// Transition amplitude <out| U |in> of a lossless network: the permanent of
/// the row/column-repeated submatrix over sqrt of the occupation factorials.
/// Zero when the photon totals differ.
Complex unitary_amplitude(const UnitaryMatrix& u, const CountVector& in, const CountVector& out);

/// Photon-conserving Kraus element <out| K_0 |in> of the lossy network: the
/// same permanent formula evaluated directly on L.
Complex k0_amplitude(const TransferMatrix& l, const CountVector& in, const CountVector& out);

/// Exact output photocount distribution of the lossy network for Fock input
/// `in`, via the unitary dilation with vacuum auxiliary modes: probabilities
/// |<out, aux| U~ |in, 0>|^2 summed over auxiliary records that absorb the
/// lost photons.
FockDistribution lossy_conditional_distribution(const TransferMatrix& l, const CountVector& in);

/// Truncated joint distribution over (alice counts, bob counts) pairs.  Pairs
/// are enumerated for every alice state with total <= n_max and every bob
/// state with total <= the alice total, so tables for different networks of
/// the same size align entry by entry.
struct JointDistribution {
    std::shared_ptr<const FockBasis> basis;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (alice, bob) indices
    std::vector<double> probs;
    double residual_mass = 0.0;

    std::vector<double> alice_marginal() const;
    std::vector<double> bob_marginal() const;
};

JointDistribution joint_distribution(const SqueezeParam& sq, const TransferMatrix& l, int n_max);

/// Exact rising-factorial photocount moment of Alice's state conditioned on
/// no counts in the given output modes:
///   < prod_j (n_j + 1)(n_j + 2) ... (n_j + k_j) >,
/// computed from the truncated joint table with cutoff n_max.
double rising_factorial_moment(const SqueezeParam& sq, const TransferMatrix& l,
                               const std::vector<int>& zero_modes, const CountVector& orders,
                               int n_max);

}  // namespace lon::fock
