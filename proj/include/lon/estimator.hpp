#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lon/core.hpp"
#include "lon/simulator.hpp"
#include "lon/stats.hpp"

namespace lon {

/// Streaming second-moment sums for one conditioning mode: everything needed
/// to reconstruct one column of the transfer matrix.  Plain sums, so two
/// accumulators merge by addition.
struct ModeAccumulator {
    long long conditioned_runs = 0;
    ComplexVector sum_cross;  // sum over runs of alpha_j conj(alpha_i)
    RealVector sum_abs;       // sum over runs of |alpha_j|^2
    ComplexMatrix sum_outer;  // sum of alpha alpha^dag; only when tracked

    void init(int modes, bool full);
    void add(const ComplexVector& alpha, int target_mode, bool full);
    void add_scaled(const ModeAccumulator& other, double sign);
};

/// Per-target-mode accumulators over a characterization stream, split into a
/// fixed number of jackknife blocks routed by global run index.  Merging two
/// sets adds block sums pairwise, so shard-and-merge reproduces sequential
/// accumulation up to floating-point reassociation.
class AccumulatorSet {
public:
    static constexpr int kJackknifeBlocks = 20;

    explicit AccumulatorSet(int modes, bool track_full_covariance = true);

    int modes() const { return modes_; }
    bool tracks_full_covariance() const { return full_; }
    long long characterization_runs() const { return characterization_runs_; }
    long long ignored_rbs_runs() const { return ignored_rbs_runs_; }

    /// Absorbs one run.  For every output mode with a zero count, that mode's
    /// accumulator takes the run's amplitudes; photon-counting runs are
    /// ignored (counted separately).
    void add(const RunRecord& record, long long run_index);
    void merge(const AccumulatorSet& other);

    /// Block sums merged over all jackknife blocks.
    ModeAccumulator total(int mode) const;
    /// Total minus one block, for jackknife resampling.
    ModeAccumulator total_without_block(int mode, int block) const;
    long long runs_without_block(int block) const;
    long long block_runs(int block) const { return block_char_runs_[static_cast<std::size_t>(block)]; }

private:
    int modes_;
    bool full_;
    long long characterization_runs_ = 0;
    long long ignored_rbs_runs_ = 0;
    std::vector<long long> block_char_runs_;
    std::vector<std::vector<ModeAccumulator>> blocks_;  // [block][mode]
};

/// Fourth-moment sums conditioned on two no-count modes {reference, target};
/// feeds the intensity-correlation phase readout.
class PairAccumulator {
public:
    static constexpr int kJackknifeBlocks = AccumulatorSet::kJackknifeBlocks;

    PairAccumulator(int modes, int reference_mode, int target_mode);

    int modes() const { return modes_; }
    int reference_mode() const { return reference_; }
    int target_mode() const { return target_; }
    long long conditioned_runs() const { return conditioned_runs_; }

    void add(const RunRecord& record, long long run_index);
    void merge(const PairAccumulator& other);

    RealVector mean_abs() const;        // <|alpha_j|^2>
    RealMatrix mean_abs_pair() const;   // <|alpha_j|^2 |alpha_k|^2>

private:
    int modes_;
    int reference_;
    int target_;
    long long conditioned_runs_ = 0;
    std::vector<long long> block_runs_;
    std::vector<RealVector> block_sum_abs_;
    std::vector<RealMatrix> block_sum_pair_;
};

enum class FirstOrderForm {
    /// Weak-squeezing inversion of the conditional second moments.
    weak_squeezing,
    /// Same moments inverted through the exact conditional-Gaussian relation,
    /// using the observed no-count frequencies for the per-column loss.
    exact_relation,
};

struct ReconstructionOptions {
    long long min_conditioned_runs = 100;
    double diagonal_floor = 0.05;
    FirstOrderForm first_order_form = FirstOrderForm::weak_squeezing;
    bool jackknife = false;
};

struct ReconstructionResult {
    TransferMatrix estimate;
    RealMatrix per_entry_sigma;
    RealMatrix jackknife_sigma;  // empty unless requested
    std::vector<long long> conditioned_counts;
    std::vector<std::string> flags;
    std::string method;  // "first-order" | "exact-inversion"

    nlohmann::json sidecar_json() const;
};

/// Column-by-column estimate from the conditional second moments:
/// L_ii from <|alpha_i|^2>_i and L_ji from -<alpha_j alpha_i^*>_i / (chi^2 L_ii).
ReconstructionResult reconstruct_first_order(const AccumulatorSet& acc, const SqueezeParam& sq,
                                             const ReconstructionOptions& options = {});

/// Same estimate from externally supplied per-target-mode moments; the
/// no-count probabilities feed the exact-relation form.
ReconstructionResult reconstruct_first_order_from_moments(
    const std::vector<RealVector>& mean_abs, const std::vector<ComplexVector>& mean_cross,
    const std::vector<double>& no_count_probability, const std::vector<long long>& counts,
    const SqueezeParam& sq, const ReconstructionOptions& options = {});

/// Inverts each target mode's empirical covariance, strips the isotropic
/// part, and reads the column off the dominant rank-one direction.  Exact at
/// any squeezing on noiseless moments.
ReconstructionResult reconstruct_exact(const AccumulatorSet& acc, const SqueezeParam& sq,
                                       const ReconstructionOptions& options = {});

/// Same inversion on externally supplied per-mode covariance matrices.
ReconstructionResult reconstruct_exact_from_covariances(
    const std::vector<ComplexMatrix>& covariances, const std::vector<long long>& counts,
    const SqueezeParam& sq, const ReconstructionOptions& options = {});

/// Per-mode Bob-side count sums over any mix of run kinds.
struct CountMoments {
    long long runs = 0;
    RealVector sum_counts;

    explicit CountMoments(int modes) : sum_counts(RealVector::Zero(modes)) {}
    void add(const std::vector<int>& bob_counts);
    void merge(const CountMoments& other);
};

struct ModeLossEstimate {
    RealVector column_power;  // estimated |L_i|^2 per output mode
    double average_loss;      // 1 - mean(column_power)
    long long runs;
};

/// Per-mode transmissions from the unconditional mean counts,
/// mean(n_i) / n_bar, and the implied average loss.
ModeLossEstimate estimate_mode_losses(const CountMoments& counts, const SqueezeParam& sq);

struct CcMagnitudeResult {
    RealMatrix magnitudes;       // |L_ji| estimates
    RealMatrix sigma;            // formula error bars
    RealMatrix jackknife_sigma;  // empty unless requested
    std::vector<std::string> flags;
};

/// Magnitude-only readout available from phase-insensitive sources:
/// |L_ji|^2 = (1 + chi^2 - <|alpha_j|^2>_i) / chi^2, clamped at zero.
CcMagnitudeResult cc_magnitude_estimate(const AccumulatorSet& acc, const SqueezeParam& sq,
                                        const ReconstructionOptions& options = {});

CcMagnitudeResult cc_magnitude_from_moments(const std::vector<RealVector>& mean_abs,
                                            const std::vector<long long>& counts,
                                            const SqueezeParam& sq,
                                            const ReconstructionOptions& options = {});

struct CcPhaseResult {
    /// cos(theta_j - theta_k) estimates for the target column; row/column
    /// `reference_mode` holds cos(theta_j) when the reference row is real.
    RealMatrix cosines;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> resolved;
    RealVector column_magnitudes;  // |L_j,target| recovered along the way
};

/// Phase-difference readout for the target column from intensity covariances
/// <|alpha_j|^2 |alpha_k|^2> - <|alpha_j|^2><|alpha_k|^2> under two no-count
/// modes, given the (real, nonnegative) reference column.
CcPhaseResult cc_phase_difference_estimate(const PairAccumulator& acc, const SqueezeParam& sq,
                                           const RealVector& reference_column);

CcPhaseResult cc_phase_difference_from_moments(const RealVector& mean_abs,
                                               const RealMatrix& mean_abs_pair, long long runs,
                                               const SqueezeParam& sq,
                                               const RealVector& reference_column);

}  // namespace lon
