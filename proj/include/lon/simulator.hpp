#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lon/core.hpp"
#include "lon/fock.hpp"
#include "lon/rng.hpp"
#include "lon/stats.hpp"

namespace lon {

enum class RunKind { rbs, characterization };
enum class InputKind { two_mode_squeezed, classical_classical };
enum class OverflowPolicy { resample, error };
enum class ChiRule { explicit_value, fig2, rbs_standard };

struct ExperimentConfig {
    int modes = 1;
    ChiRule chi_rule = ChiRule::explicit_value;
    double chi_sq = 0.0;  // resolved value, whatever the rule
    long long runs = 0;
    double run_mix = 1.0;  // fraction of characterization runs
    std::uint64_t seed = 0;
    int photon_cutoff = fock::kMaxPhotons;
    InputKind input_kind = InputKind::two_mode_squeezed;
    OverflowPolicy overflow = OverflowPolicy::resample;
    bool shuffle = false;

    SqueezeParam squeeze() const { return SqueezeParam(chi_sq); }

    /// Run kind for a given stream position.  Deterministic in the index:
    /// an evenly interleaved pattern by default, a seeded per-run coin when
    /// shuffle is set.
    RunKind kind_for_run(long long index) const;

    static ExperimentConfig from_json(const nlohmann::json& j);
    /// Resolved parameters (chi rule applied), echoed into outputs.
    nlohmann::json to_json() const;
};

struct RunRecord {
    RunKind kind = RunKind::characterization;
    std::vector<int> alice_counts;    // rbs runs only
    ComplexVector alice_amplitudes;   // characterization runs only
    std::vector<int> bob_counts;

    nlohmann::json to_json() const;
    static RunRecord from_json(const nlohmann::json& j);
};

struct SimulationSummary {
    long long total_runs = 0;
    long long rbs_runs = 0;
    long long characterization_runs = 0;
    long long overflow_resamples = 0;
    std::vector<double> mean_counts;         // per output mode, all runs
    std::vector<double> no_count_frequency;  // per output mode, all runs

    nlohmann::json to_json() const;
};

/// Generates protocol runs for one (config, network) pair.  Every run is a
/// pure function of (seed, run index), so generation is order-independent and
/// can be sharded across threads with one generator per shard.
class RunGenerator {
public:
    RunGenerator(ExperimentConfig config, TransferMatrix l);

    const ExperimentConfig& config() const { return config_; }
    const TransferMatrix& network() const { return network_; }

    struct Generated {
        RunRecord record;
        int overflow_resamples = 0;
    };
    Generated generate(long long run_index);

    /// Heterodyne run: Alice's amplitudes from the thermal Husimi law, Bob's
    /// counts Poisson with means chi^2 |(alpha^* L)_i|^2.
    RunRecord sample_characterization_run(RngStream& rng) const;

    /// Same, but with Bob's means phase-randomized per mode: the heterodyne
    /// statistics of the number-basis-decohered source.
    RunRecord sample_cc_characterization_run(RngStream& rng) const;

    /// Photon-counting run: Alice's counts geometric per mode, Bob's counts
    /// drawn exactly from the Fock-space conditional law (dilation-based for
    /// lossy networks).
    Generated sample_rbs_run(RngStream& rng);

    /// Bob's unconditional counts: Gaussian modal amplitudes with covariance
    /// n_bar L^dag L, then per-mode Poisson counts.  Efficient at any size.
    std::vector<int> sample_marginal_output_counts(RngStream& rng) const;

    /// Exact conditional output sample for a fixed Fock input.
    std::vector<int> sample_output_given_input(const std::vector<int>& n_in, RngStream& rng);

private:
    ExperimentConfig config_;
    TransferMatrix network_;
    double chi_;
    double alpha_sigma_;  // per-mode heterodyne scale 1/sqrt(1 - chi^2)

    // CDF cache for the exact conditional sampler, keyed by input pattern.
    struct VecHash {
        std::size_t operator()(const std::vector<int>& v) const;
    };
    std::unordered_map<std::vector<int>, std::shared_ptr<const fock::FockDistribution>, VecHash>
        conditional_cache_;
};

/// Renders one run as a single NDJSON line.
std::string run_to_ndjson(const RunRecord& record);

/// Generates `config.runs` records, sharded over `threads` workers (0 means
/// use LONSIM_THREADS or the hardware count), writes them in index order, and
/// returns the aggregate summary.  Output is byte-identical for any thread
/// count.
SimulationSummary generate_run_stream(const ExperimentConfig& config, const TransferMatrix& l,
                                      std::ostream& out, int threads = 0);

/// Reads an NDJSON run stream; throws DataError on malformed lines.
std::vector<RunRecord> read_run_stream(std::istream& in);

}  // namespace lon
