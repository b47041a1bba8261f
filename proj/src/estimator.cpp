#include "lon/estimator.hpp"

#include <cmath>
#include <functional>

namespace lon {

namespace {

std::string mode_flag(const char* tag, int mode) {
    return std::string(tag) + ":" + std::to_string(mode);
}

}  // namespace

void ModeAccumulator::init(int modes, bool full) {
    conditioned_runs = 0;
    sum_cross = ComplexVector::Zero(modes);
    sum_abs = RealVector::Zero(modes);
    if (full) sum_outer = ComplexMatrix::Zero(modes, modes);
}

void ModeAccumulator::add(const ComplexVector& alpha, int target_mode, bool full) {
    ++conditioned_runs;
    const Complex target_conj = std::conj(alpha(target_mode));
    sum_cross += alpha * target_conj;
    sum_abs += alpha.cwiseAbs2();
    if (full) sum_outer += alpha * alpha.adjoint();
}

void ModeAccumulator::add_scaled(const ModeAccumulator& other, double sign) {
    conditioned_runs += static_cast<long long>(sign) * other.conditioned_runs;
    sum_cross += sign * other.sum_cross;
    sum_abs += sign * other.sum_abs;
    if (sum_outer.size() > 0 && other.sum_outer.size() > 0) sum_outer += sign * other.sum_outer;
}

AccumulatorSet::AccumulatorSet(int modes, bool track_full_covariance)
    : modes_(modes), full_(track_full_covariance) {
    if (modes < 1) throw DimensionError("AccumulatorSet: modes must be >= 1");
    block_char_runs_.assign(kJackknifeBlocks, 0);
    blocks_.resize(kJackknifeBlocks);
    for (auto& block : blocks_) {
        block.resize(static_cast<std::size_t>(modes));
        for (auto& acc : block) acc.init(modes, full_);
    }
}

void AccumulatorSet::add(const RunRecord& record, long long run_index) {
    if (record.kind != RunKind::characterization) {
        ++ignored_rbs_runs_;
        return;
    }
    if (static_cast<int>(record.bob_counts.size()) != modes_ ||
        record.alice_amplitudes.size() != modes_)
        throw DataError("AccumulatorSet: run record size mismatch");
    const int block = static_cast<int>(((run_index % kJackknifeBlocks) + kJackknifeBlocks) %
                                       kJackknifeBlocks);
    ++characterization_runs_;
    ++block_char_runs_[static_cast<std::size_t>(block)];
    auto& accs = blocks_[static_cast<std::size_t>(block)];
    for (int i = 0; i < modes_; ++i)
        if (record.bob_counts[static_cast<std::size_t>(i)] == 0)
            accs[static_cast<std::size_t>(i)].add(record.alice_amplitudes, i, full_);
}

void AccumulatorSet::merge(const AccumulatorSet& other) {
    if (other.modes_ != modes_ || other.full_ != full_)
        throw DataError("AccumulatorSet: cannot merge mismatched accumulators");
    characterization_runs_ += other.characterization_runs_;
    ignored_rbs_runs_ += other.ignored_rbs_runs_;
    for (int b = 0; b < kJackknifeBlocks; ++b) {
        block_char_runs_[static_cast<std::size_t>(b)] +=
            other.block_char_runs_[static_cast<std::size_t>(b)];
        for (int i = 0; i < modes_; ++i)
            blocks_[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)].add_scaled(
                other.blocks_[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)], 1.0);
    }
}

ModeAccumulator AccumulatorSet::total(int mode) const {
    ModeAccumulator out;
    out.init(modes_, full_);
    for (int b = 0; b < kJackknifeBlocks; ++b)
        out.add_scaled(blocks_[static_cast<std::size_t>(b)][static_cast<std::size_t>(mode)], 1.0);
    return out;
}

ModeAccumulator AccumulatorSet::total_without_block(int mode, int block) const {
    ModeAccumulator out;
    out.init(modes_, full_);
    for (int b = 0; b < kJackknifeBlocks; ++b) {
        if (b == block) continue;
        out.add_scaled(blocks_[static_cast<std::size_t>(b)][static_cast<std::size_t>(mode)], 1.0);
    }
    return out;
}

long long AccumulatorSet::runs_without_block(int block) const {
    return characterization_runs_ - block_char_runs_[static_cast<std::size_t>(block)];
}

PairAccumulator::PairAccumulator(int modes, int reference_mode, int target_mode)
    : modes_(modes), reference_(reference_mode), target_(target_mode) {
    if (modes < 1) throw DimensionError("PairAccumulator: modes must be >= 1");
    if (reference_mode < 0 || reference_mode >= modes || target_mode < 0 || target_mode >= modes ||
        reference_mode == target_mode)
        throw DimensionError("PairAccumulator: invalid mode pair");
    block_runs_.assign(kJackknifeBlocks, 0);
    block_sum_abs_.assign(kJackknifeBlocks, RealVector::Zero(modes));
    block_sum_pair_.assign(kJackknifeBlocks, RealMatrix::Zero(modes, modes));
}

void PairAccumulator::add(const RunRecord& record, long long run_index) {
    if (record.kind != RunKind::characterization) return;
    if (static_cast<int>(record.bob_counts.size()) != modes_ ||
        record.alice_amplitudes.size() != modes_)
        throw DataError("PairAccumulator: run record size mismatch");
    if (record.bob_counts[static_cast<std::size_t>(reference_)] != 0 ||
        record.bob_counts[static_cast<std::size_t>(target_)] != 0)
        return;
    const int block = static_cast<int>(((run_index % kJackknifeBlocks) + kJackknifeBlocks) %
                                       kJackknifeBlocks);
    const RealVector intensity = record.alice_amplitudes.cwiseAbs2();
    ++conditioned_runs_;
    ++block_runs_[static_cast<std::size_t>(block)];
    block_sum_abs_[static_cast<std::size_t>(block)] += intensity;
    block_sum_pair_[static_cast<std::size_t>(block)] += intensity * intensity.transpose();
}

void PairAccumulator::merge(const PairAccumulator& other) {
    if (other.modes_ != modes_ || other.reference_ != reference_ || other.target_ != target_)
        throw DataError("PairAccumulator: cannot merge mismatched accumulators");
    conditioned_runs_ += other.conditioned_runs_;
    for (int b = 0; b < kJackknifeBlocks; ++b) {
        block_runs_[static_cast<std::size_t>(b)] += other.block_runs_[static_cast<std::size_t>(b)];
        block_sum_abs_[static_cast<std::size_t>(b)] +=
            other.block_sum_abs_[static_cast<std::size_t>(b)];
        block_sum_pair_[static_cast<std::size_t>(b)] +=
            other.block_sum_pair_[static_cast<std::size_t>(b)];
    }
}

RealVector PairAccumulator::mean_abs() const {
    RealVector sum = RealVector::Zero(modes_);
    for (const auto& block : block_sum_abs_) sum += block;
    if (conditioned_runs_ == 0) throw DataError("PairAccumulator: no conditioned runs");
    return sum / static_cast<double>(conditioned_runs_);
}

RealMatrix PairAccumulator::mean_abs_pair() const {
    RealMatrix sum = RealMatrix::Zero(modes_, modes_);
    for (const auto& block : block_sum_pair_) sum += block;
    if (conditioned_runs_ == 0) throw DataError("PairAccumulator: no conditioned runs");
    return sum / static_cast<double>(conditioned_runs_);
}

// --- reconstruction ----------------------------------------------------------

namespace {

struct ColumnEstimate {
    ComplexVector column;
    bool radicand_clamped = false;
    bool ill_conditioned = false;
    bool degenerate = false;
    bool phase_undefined = false;
};

/// Column from the conditional second moments, weak-squeezing or exact form.
ColumnEstimate first_order_column(int mode, const RealVector& mean_abs,
                                  const ComplexVector& mean_cross, double no_count_prob,
                                  const SqueezeParam& sq, const ReconstructionOptions& options) {
    const double chi_sq = sq.chi_sq();
    const double c = 1.0 - chi_sq;
    const int modes = static_cast<int>(mean_abs.size());
    ColumnEstimate out;
    out.column = ComplexVector::Zero(modes);

    double diag_sq;
    double off_scale;  // L_ji = -<alpha_j alpha_i^*> * off_scale / L_ii
    if (options.first_order_form == FirstOrderForm::weak_squeezing) {
        diag_sq = 1.0 - (mean_abs(mode) - 1.0) / chi_sq;
        off_scale = 1.0 / chi_sq;
    } else {
        const double d = c / no_count_prob;
        diag_sq = (1.0 - c * mean_abs(mode)) * d / chi_sq;
        off_scale = c * d / chi_sq;
    }
    if (diag_sq < 0.0) {
        diag_sq = 0.0;
        out.radicand_clamped = true;
    }
    const double diag = std::sqrt(diag_sq);
    if (diag < options.diagonal_floor) out.ill_conditioned = true;
    // Collapsed diagonals would blow up the off-diagonal division; cap the
    // inflation at the floor and let the flag carry the warning.
    const double denom = std::max(diag, options.diagonal_floor);
    for (int j = 0; j < modes; ++j) {
        if (j == mode) {
            out.column(j) = Complex(diag, 0.0);
        } else {
            out.column(j) = -mean_cross(j) * off_scale / denom;
        }
    }
    return out;
}

/// Column from the dominant rank-one direction of (C^-1 - cI)/chi^2.
ColumnEstimate exact_column(int mode, const ComplexMatrix& covariance, const SqueezeParam& sq) {
    const double chi_sq = sq.chi_sq();
    if (chi_sq <= 0.0)
        throw DimensionError("reconstruct_exact: chi^2 must be positive");
    const double c = 1.0 - chi_sq;
    const int modes = static_cast<int>(covariance.rows());
    ColumnEstimate out;

    ComplexMatrix cov = (covariance + covariance.adjoint()) / 2.0;
    ComplexMatrix precision = cov.partialPivLu().solve(ComplexMatrix::Identity(modes, modes));
    precision = ((precision + precision.adjoint()) / 2.0).eval();
    const ComplexMatrix rank_one =
        (precision - c * ComplexMatrix::Identity(modes, modes)) / chi_sq;

    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eigen(rank_one);
    const RealVector values = eigen.eigenvalues();  // ascending
    const double top = values(modes - 1);
    double noise = 0.0;
    for (int j = 0; j + 1 < modes; ++j) noise = std::max(noise, std::abs(values(j)));
    if (modes > 1 && top < 3.0 * noise) out.degenerate = true;

    const double length = std::sqrt(std::max(top, 0.0));
    ComplexVector column = length * eigen.eigenvectors().col(modes - 1);
    const Complex pivot = column(mode);
    const double pivot_mag = std::abs(pivot);
    if (pivot_mag > 1e-9 * std::max(1.0, column.norm())) {
        column *= std::conj(pivot) / pivot_mag;
        column(mode) = Complex(pivot_mag, 0.0);
    } else {
        out.phase_undefined = true;
    }
    out.column = std::move(column);
    return out;
}

ReconstructionResult assemble_result(std::vector<ColumnEstimate> columns,
                                     std::vector<long long> counts, const SqueezeParam& sq,
                                     std::string method, RealMatrix jackknife_sigma) {
    const int modes = static_cast<int>(columns.size());
    ComplexMatrix estimate(modes, modes);
    std::vector<std::string> flags;
    RealMatrix sigma(modes, modes);
    for (int i = 0; i < modes; ++i) {
        estimate.col(i) = columns[static_cast<std::size_t>(i)].column;
        const double base =
            counts[static_cast<std::size_t>(i)] > 0
                ? 1.0 / (sq.chi_sq() * std::sqrt(static_cast<double>(counts[static_cast<std::size_t>(i)])))
                : std::numeric_limits<double>::infinity();
        double column_sigma = base;
        const auto& col = columns[static_cast<std::size_t>(i)];
        if (col.radicand_clamped) flags.push_back(mode_flag("radicand_clamped", i));
        if (col.degenerate) flags.push_back(mode_flag("degenerate_direction", i));
        if (col.phase_undefined) flags.push_back(mode_flag("phase_undefined", i));
        if (col.ill_conditioned) {
            flags.push_back(mode_flag("ill_conditioned_column", i));
            const double diag = std::abs(estimate(i, i));
            column_sigma = base / std::max(diag, 1e-12);
        }
        sigma.col(i).setConstant(column_sigma);
    }

    bool clamped = false;
    TransferMatrix projected = TransferMatrix::project(estimate, &clamped);
    if (clamped) flags.emplace_back("projected_subunitary");
    PhaseNormalization normalized = normalize_phases(projected);
    for (int mode : normalized.undefined_columns)
        flags.push_back(mode_flag("phase_convention_undefined", mode));

    ReconstructionResult result{std::move(normalized.matrix), std::move(sigma),
                                std::move(jackknife_sigma), std::move(counts), std::move(flags),
                                std::move(method)};
    return result;
}

/// Jackknife sigma over leave-one-block-out reruns of a column estimator.
RealMatrix jackknife_over_blocks(
    const AccumulatorSet& acc,
    const std::function<ComplexVector(int, const ModeAccumulator&, long long)>& column_of) {
    const int modes = acc.modes();
    std::vector<ComplexMatrix> replicas;
    for (int b = 0; b < AccumulatorSet::kJackknifeBlocks; ++b) {
        if (acc.block_runs(b) == 0) continue;
        ComplexMatrix replica(modes, modes);
        const long long runs = acc.runs_without_block(b);
        bool usable = true;
        for (int i = 0; i < modes; ++i) {
            const ModeAccumulator reduced = acc.total_without_block(i, b);
            if (reduced.conditioned_runs <= 0) {
                usable = false;
                break;
            }
            replica.col(i) = column_of(i, reduced, runs);
        }
        if (usable) replicas.push_back(std::move(replica));
    }
    RealMatrix sigma = RealMatrix::Zero(modes, modes);
    const std::size_t b_eff = replicas.size();
    if (b_eff < 2) return sigma;
    ComplexMatrix mean = ComplexMatrix::Zero(modes, modes);
    for (const auto& r : replicas) mean += r;
    mean /= static_cast<double>(b_eff);
    for (const auto& r : replicas) sigma += (r - mean).cwiseAbs2();
    sigma *= (static_cast<double>(b_eff) - 1.0) / static_cast<double>(b_eff);
    return sigma.cwiseSqrt();
}

void check_counts_floor(const std::vector<long long>& counts, long long minimum) {
    for (std::size_t i = 0; i < counts.size(); ++i)
        if (counts[i] < minimum)
            throw DataError("reconstruction: mode " + std::to_string(i) + " has only " +
                            std::to_string(counts[i]) + " conditioned runs (need " +
                            std::to_string(minimum) + ")");
}

}  // namespace

ReconstructionResult reconstruct_first_order(const AccumulatorSet& acc, const SqueezeParam& sq,
                                             const ReconstructionOptions& options) {
    if (sq.chi_sq() <= 0.0)
        throw DimensionError("reconstruct_first_order: chi^2 must be positive");
    const int modes = acc.modes();
    const long long total = acc.characterization_runs();
    std::vector<ColumnEstimate> columns;
    std::vector<long long> counts;
    for (int i = 0; i < modes; ++i) {
        const ModeAccumulator sums = acc.total(i);
        counts.push_back(sums.conditioned_runs);
    }
    check_counts_floor(counts, options.min_conditioned_runs);
    for (int i = 0; i < modes; ++i) {
        const ModeAccumulator sums = acc.total(i);
        const double t = static_cast<double>(sums.conditioned_runs);
        const double p_hat = total > 0 ? t / static_cast<double>(total) : 1.0;
        columns.push_back(first_order_column(i, sums.sum_abs / t, sums.sum_cross / t, p_hat, sq,
                                             options));
    }

    RealMatrix jackknife;
    if (options.jackknife) {
        jackknife = jackknife_over_blocks(
            acc, [&](int mode, const ModeAccumulator& sums, long long runs) {
                const double t = static_cast<double>(sums.conditioned_runs);
                const double p_hat = runs > 0 ? t / static_cast<double>(runs) : 1.0;
                return first_order_column(mode, sums.sum_abs / t, sums.sum_cross / t, p_hat, sq,
                                          options)
                    .column;
            });
    }
    return assemble_result(std::move(columns), std::move(counts), sq, "first-order",
                           std::move(jackknife));
}

ReconstructionResult reconstruct_first_order_from_moments(
    const std::vector<RealVector>& mean_abs, const std::vector<ComplexVector>& mean_cross,
    const std::vector<double>& no_count_probability, const std::vector<long long>& counts,
    const SqueezeParam& sq, const ReconstructionOptions& options) {
    if (sq.chi_sq() <= 0.0)
        throw DimensionError("reconstruct_first_order: chi^2 must be positive");
    const int modes = static_cast<int>(mean_abs.size());
    if (mean_cross.size() != mean_abs.size() || no_count_probability.size() != mean_abs.size() ||
        counts.size() != mean_abs.size())
        throw ShapeError("reconstruct_first_order: moment list size mismatch");
    std::vector<ColumnEstimate> columns;
    for (int i = 0; i < modes; ++i)
        columns.push_back(first_order_column(i, mean_abs[static_cast<std::size_t>(i)],
                                             mean_cross[static_cast<std::size_t>(i)],
                                             no_count_probability[static_cast<std::size_t>(i)], sq,
                                             options));
    return assemble_result(std::move(columns), counts, sq, "first-order", {});
}

ReconstructionResult reconstruct_exact(const AccumulatorSet& acc, const SqueezeParam& sq,
                                       const ReconstructionOptions& options) {
    if (!acc.tracks_full_covariance())
        throw DataError("reconstruct_exact: accumulator does not track the full covariance");
    const int modes = acc.modes();
    std::vector<ComplexMatrix> covariances;
    std::vector<long long> counts;
    for (int i = 0; i < modes; ++i) {
        const ModeAccumulator sums = acc.total(i);
        counts.push_back(sums.conditioned_runs);
        if (sums.conditioned_runs > 0)
            covariances.push_back(sums.sum_outer / static_cast<double>(sums.conditioned_runs));
        else
            covariances.push_back(ComplexMatrix::Identity(modes, modes));
    }
    check_counts_floor(counts, options.min_conditioned_runs);

    ReconstructionOptions inner = options;
    inner.jackknife = false;
    ReconstructionResult result =
        reconstruct_exact_from_covariances(covariances, counts, sq, inner);

    if (options.jackknife) {
        result.jackknife_sigma =
            jackknife_over_blocks(acc, [&](int mode, const ModeAccumulator& sums, long long) {
                const ComplexMatrix cov =
                    sums.sum_outer / static_cast<double>(sums.conditioned_runs);
                return exact_column(mode, cov, sq).column;
            });
    }
    return result;
}

ReconstructionResult reconstruct_exact_from_covariances(
    const std::vector<ComplexMatrix>& covariances, const std::vector<long long>& counts,
    const SqueezeParam& sq, const ReconstructionOptions& options) {
    const int modes = static_cast<int>(covariances.size());
    if (modes == 0) throw DimensionError("reconstruct_exact: no covariances supplied");
    if (counts.size() != covariances.size())
        throw ShapeError("reconstruct_exact: counts/covariances size mismatch");
    check_counts_floor(counts, options.min_conditioned_runs);
    std::vector<ColumnEstimate> columns;
    for (int i = 0; i < modes; ++i) {
        if (covariances[static_cast<std::size_t>(i)].rows() != modes ||
            covariances[static_cast<std::size_t>(i)].cols() != modes)
            throw ShapeError("reconstruct_exact: covariance dimension mismatch");
        columns.push_back(exact_column(i, covariances[static_cast<std::size_t>(i)], sq));
    }
    return assemble_result(std::move(columns), counts, sq, "exact-inversion", {});
}

void CountMoments::add(const std::vector<int>& bob_counts) {
    if (static_cast<Eigen::Index>(bob_counts.size()) != sum_counts.size())
        throw DataError("CountMoments: count vector size mismatch");
    ++runs;
    for (std::size_t i = 0; i < bob_counts.size(); ++i)
        sum_counts(static_cast<Eigen::Index>(i)) += bob_counts[i];
}

void CountMoments::merge(const CountMoments& other) {
    if (other.sum_counts.size() != sum_counts.size())
        throw DataError("CountMoments: cannot merge mismatched moments");
    runs += other.runs;
    sum_counts += other.sum_counts;
}

ModeLossEstimate estimate_mode_losses(const CountMoments& counts, const SqueezeParam& sq) {
    if (counts.runs == 0) throw DataError("estimate_mode_losses: empty count stream");
    const double n_bar = sq.mean_photon();
    if (n_bar <= 0.0)
        throw DimensionError("estimate_mode_losses: chi^2 must be positive");
    ModeLossEstimate out{RealVector(counts.sum_counts.size()), 0.0, counts.runs};
    out.column_power = counts.sum_counts / (static_cast<double>(counts.runs) * n_bar);
    out.average_loss = 1.0 - out.column_power.mean();
    return out;
}

namespace {

RealVector cc_magnitude_column(const RealVector& mean_abs, const SqueezeParam& sq,
                               bool* clamped) {
    const double chi_sq = sq.chi_sq();
    RealVector out(mean_abs.size());
    bool any = false;
    for (Eigen::Index j = 0; j < mean_abs.size(); ++j) {
        double mag_sq = (1.0 + chi_sq - mean_abs(j)) / chi_sq;
        if (mag_sq < 0.0) {
            mag_sq = 0.0;
            any = true;
        }
        out(j) = std::sqrt(mag_sq);
    }
    if (clamped) *clamped = any;
    return out;
}

}  // namespace

CcMagnitudeResult cc_magnitude_from_moments(const std::vector<RealVector>& mean_abs,
                                            const std::vector<long long>& counts,
                                            const SqueezeParam& sq,
                                            const ReconstructionOptions& options) {
    if (sq.chi_sq() <= 0.0)
        throw DimensionError("cc_magnitude_estimate: chi^2 must be positive");
    const int modes = static_cast<int>(mean_abs.size());
    if (counts.size() != mean_abs.size())
        throw ShapeError("cc_magnitude_estimate: moment list size mismatch");
    check_counts_floor(counts, options.min_conditioned_runs);
    CcMagnitudeResult result;
    result.magnitudes.resize(modes, modes);
    result.sigma.resize(modes, modes);
    for (int i = 0; i < modes; ++i) {
        bool clamped = false;
        result.magnitudes.col(i) =
            cc_magnitude_column(mean_abs[static_cast<std::size_t>(i)], sq, &clamped);
        if (clamped) result.flags.push_back(mode_flag("magnitude_clamped", i));
        // Error on |L|^2 is ~1/(chi^2 sqrt(T)); propagate through the square
        // root with a floor so near-zero magnitudes get sane bars.
        const double var_scale =
            1.0 / (sq.chi_sq() * std::sqrt(static_cast<double>(counts[static_cast<std::size_t>(i)])));
        for (int j = 0; j < modes; ++j) {
            const double mag = result.magnitudes(j, i);
            result.sigma(j, i) = var_scale / (2.0 * std::max(mag, std::sqrt(var_scale)));
        }
    }
    return result;
}

CcMagnitudeResult cc_magnitude_estimate(const AccumulatorSet& acc, const SqueezeParam& sq,
                                        const ReconstructionOptions& options) {
    const int modes = acc.modes();
    std::vector<RealVector> mean_abs;
    std::vector<long long> counts;
    for (int i = 0; i < modes; ++i) {
        const ModeAccumulator sums = acc.total(i);
        counts.push_back(sums.conditioned_runs);
        mean_abs.push_back(sums.conditioned_runs > 0
                               ? RealVector(sums.sum_abs / static_cast<double>(sums.conditioned_runs))
                               : RealVector(RealVector::Zero(modes)));
    }
    CcMagnitudeResult result = cc_magnitude_from_moments(mean_abs, counts, sq, options);

    if (options.jackknife) {
        result.jackknife_sigma =
            jackknife_over_blocks(acc, [&](int, const ModeAccumulator& sums, long long) {
                const double t = static_cast<double>(sums.conditioned_runs);
                RealVector mags = cc_magnitude_column(sums.sum_abs / t, sq, nullptr);
                return ComplexVector(mags.cast<Complex>());
            });
    }
    return result;
}

CcPhaseResult cc_phase_difference_estimate(const PairAccumulator& acc, const SqueezeParam& sq,
                                           const RealVector& reference_column) {
    if (acc.conditioned_runs() == 0)
        throw DataError("cc_phase_difference_estimate: no conditioned runs");
    return cc_phase_difference_from_moments(acc.mean_abs(), acc.mean_abs_pair(),
                                            acc.conditioned_runs(), sq, reference_column);
}

CcPhaseResult cc_phase_difference_from_moments(const RealVector& m, const RealMatrix& f,
                                               long long runs, const SqueezeParam& sq,
                                               const RealVector& reference_column) {
    const int modes = static_cast<int>(m.size());
    if (reference_column.size() != modes || f.rows() != modes || f.cols() != modes)
        throw ShapeError("cc_phase_difference_estimate: moment size mismatch");
    if (sq.chi_sq() <= 0.0)
        throw DimensionError("cc_phase_difference_estimate: chi^2 must be positive");
    if (runs <= 0) throw DataError("cc_phase_difference_estimate: no conditioned runs");
    const double chi_sq = sq.chi_sq();
    const double c = 1.0 - chi_sq;
    const double t = static_cast<double>(runs);

    // Reference-column loss sets its exact denominator.
    const double ref_power = reference_column.squaredNorm();
    const double d_ref = 1.0 - chi_sq * (1.0 - ref_power);

    // Target-column magnitudes from the pair-conditioned second moments:
    // (1 - c m_j)/chi^2 = |L_jr|^2 / D_r + |L_ji|^2 / D_i.
    RealVector u(modes);
    for (int j = 0; j < modes; ++j) {
        const double total = (1.0 - c * m(j)) / chi_sq;
        u(j) = std::max(0.0, total - reference_column(j) * reference_column(j) / d_ref);
    }
    const double s = u.sum();
    double target_power = s * c / std::max(1.0 - s * chi_sq, 1e-12);
    target_power = std::clamp(target_power, 0.0, 1.0);
    const double d_target = 1.0 - chi_sq * (1.0 - target_power);

    CcPhaseResult result;
    result.column_magnitudes = (u * d_target).cwiseSqrt();
    result.cosines = RealMatrix::Zero(modes, modes);
    result.resolved =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(modes, modes, false);

    // Statistical floor for the intensity covariance at ~3 sigma; pairs whose
    // signal sits below it are reported unresolved.
    const double sigma_q = 3.0 * std::sqrt(3.0) / std::sqrt(t) * (c * c) / (chi_sq * chi_sq);

    for (int j = 0; j < modes; ++j) {
        for (int k = 0; k < modes; ++k) {
            if (j == k) continue;
            const double covariance = f(j, k) - m(j) * m(k);
            const double q = covariance * c * c / (chi_sq * chi_sq);
            const double ref_term = reference_column(j) * reference_column(k) / d_ref;
            const double target_term =
                result.column_magnitudes(j) * result.column_magnitudes(k) / d_target;
            const double denom = 2.0 * ref_term * target_term;
            if (denom <= sigma_q) continue;
            const double cosine =
                (q - ref_term * ref_term - target_term * target_term) / denom;
            result.cosines(j, k) = std::clamp(cosine, -1.0, 1.0);
            result.resolved(j, k) = true;
        }
    }
    return result;
}

nlohmann::json ReconstructionResult::sidecar_json() const {
    auto matrix_rows = [](const RealMatrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    nlohmann::json j{{"method", method},
                     {"sigma", matrix_rows(per_entry_sigma)},
                     {"flags", flags},
                     {"conditioned_counts", conditioned_counts}};
    if (jackknife_sigma.size() > 0) j["jackknife_sigma"] = matrix_rows(jackknife_sigma);
    return j;
}

}  // namespace lon
