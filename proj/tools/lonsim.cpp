// lonsim: simulate two-party randomized boson sampling with lossy
// linear-optical networks, reconstruct the transfer matrix from heterodyne
// characterization runs, and score lossy networks against ideal ones.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lon/core.hpp"
#include "lon/estimator.hpp"
#include "lon/fock.hpp"
#include "lon/metrics.hpp"
#include "lon/rng.hpp"
#include "lon/simulator.hpp"
#include "lon/stats.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitScaleError = 3;
constexpr int kExitDataError = 4;

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw lon::DataError("cannot open file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw lon::DataError(path + ": " + e.what());
    }
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw lon::DataError("cannot open file for writing: " + path);
    out << text;
}

/// Builds the network named by the config's "matrix" object: an inline
/// matrix, a file path, or a seeded Haar matrix with optional uniform loss.
lon::TransferMatrix resolve_network(const nlohmann::json& config, int modes) {
    if (!config.contains("matrix"))
        throw lon::ConfigError("config: missing \"matrix\" entry");
    const auto& spec = config.at("matrix");
    if (spec.contains("path")) {
        try {
            lon::TransferMatrix l = lon::load_transfer_matrix(spec.at("path").get<std::string>());
            if (l.dim() != modes) throw lon::ConfigError("config: matrix dimension != modes");
            return l;
        } catch (const lon::DataError& e) {
            throw lon::ConfigError(e.what());
        }
    }
    if (spec.contains("haar")) {
        const auto seed = spec.at("haar").at("seed").get<std::uint64_t>();
        lon::UnitaryMatrix u = lon::haar_random_unitary(modes, seed);
        double t = spec.value("uniform_loss_t", 1.0);
        if (t < 0.0 || t > 1.0)
            throw lon::ConfigError("config: uniform_loss_t must lie in [0, 1]");
        return lon::TransferMatrix(lon::ComplexMatrix(t * u.matrix()));
    }
    if (spec.contains("entries")) {
        lon::ComplexMatrix m(modes, modes);
        const auto& entries = spec.at("entries");
        if (static_cast<int>(entries.size()) != modes)
            throw lon::ConfigError("config: inline matrix has wrong row count");
        for (int i = 0; i < modes; ++i)
            for (int j = 0; j < modes; ++j) {
                const auto& cell = entries.at(i).at(j);
                m(i, j) = lon::Complex(cell.at(0).get<double>(), cell.at(1).get<double>());
            }
        return lon::TransferMatrix(std::move(m));
    }
    throw lon::ConfigError("config: matrix must give \"path\", \"haar\", or \"entries\"");
}

struct CommonOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<long long> runs;
    std::optional<double> chi_sq;
    std::optional<double> run_mix;
};

lon::ExperimentConfig load_config(const std::string& path, const CommonOverrides& overrides,
                                  nlohmann::json* raw_out = nullptr) {
    nlohmann::json raw;
    try {
        raw = load_json_file(path);
    } catch (const lon::DataError& e) {
        throw lon::ConfigError(e.what());
    }
    // Flag overrides are last-wins on top of the file.
    if (overrides.seed) raw["seed"] = *overrides.seed;
    if (overrides.runs) raw["runs"] = *overrides.runs;
    if (overrides.chi_sq) raw["chi_sq"] = *overrides.chi_sq;
    if (overrides.run_mix) raw["run_mix"] = *overrides.run_mix;
    if (raw_out) *raw_out = raw;
    return lon::ExperimentConfig::from_json(raw);
}

int run_simulate(const std::string& config_path, const CommonOverrides& overrides,
                 const std::string& stream_path, const std::string& summary_path, int threads) {
    nlohmann::json raw;
    lon::ExperimentConfig config = load_config(config_path, overrides, &raw);
    lon::TransferMatrix network = resolve_network(raw, config.modes);

    std::ostringstream stream;
    lon::SimulationSummary summary = lon::generate_run_stream(config, network, stream, threads);

    if (!stream_path.empty()) write_text_file(stream_path, stream.str());
    nlohmann::json report = summary.to_json();
    report["config"] = config.to_json();
    const std::string report_text = report.dump(2) + "\n";
    if (!summary_path.empty())
        write_text_file(summary_path, report_text);
    else
        std::cout << report_text;
    return kExitOk;
}

int run_characterize(const std::string& stream_path, const std::string& config_path,
                     const CommonOverrides& overrides, const std::string& out_path,
                     const std::string& report_path, const std::string& method) {
    lon::ExperimentConfig config = load_config(config_path, overrides);
    std::ifstream stream_file(stream_path);
    if (!stream_file) throw lon::DataError("cannot open run stream: " + stream_path);
    const std::vector<lon::RunRecord> records = lon::read_run_stream(stream_file);

    lon::AccumulatorSet accumulators(config.modes, /*track_full_covariance=*/true);
    lon::CountMoments counts(config.modes);
    long long index = 0;
    for (const auto& record : records) {
        accumulators.add(record, index++);
        counts.add(record.bob_counts);
    }
    if (accumulators.characterization_runs() == 0)
        throw lon::DataError("run stream contains no characterization runs");

    const lon::SqueezeParam sq = config.squeeze();
    lon::ReconstructionOptions options;
    options.jackknife = true;
    if (method != "exact" && method != "first-order")
        throw lon::ConfigError("unknown method \"" + method + "\" (use exact or first-order)");
    const lon::ReconstructionResult result =
        method == "exact" ? lon::reconstruct_exact(accumulators, sq, options)
                          : lon::reconstruct_first_order(accumulators, sq, options);
    const lon::ModeLossEstimate losses = lon::estimate_mode_losses(counts, sq);

    if (!out_path.empty())
        lon::save_matrix_json(out_path, result.estimate.matrix());

    nlohmann::json report = result.sidecar_json();
    report["config"] = config.to_json();
    report["loss_estimate"] = losses.average_loss;
    report["per_mode_transmission"] =
        std::vector<double>(losses.column_power.data(),
                            losses.column_power.data() + losses.column_power.size());
    if (!report_path.empty()) write_text_file(report_path, report.dump(2) + "\n");

    std::cout << "characterization runs: " << accumulators.characterization_runs()
              << " (ignored photon-counting runs: " << accumulators.ignored_rbs_runs() << ")\n";
    std::cout << "conditioned runs per mode:";
    for (long long t : result.conditioned_counts) std::cout << ' ' << t;
    std::cout << "\naverage loss estimate: " << losses.average_loss << '\n';
    if (!result.flags.empty()) {
        std::cout << "flags:";
        for (const auto& flag : result.flags) std::cout << ' ' << flag;
        std::cout << '\n';
    }
    return kExitOk;
}

int run_metrics(const std::string& ideal_path, const std::string& actual_path, double chi_sq,
                int sectors, double epsilon, const std::string& out_path) {
    // Output-mode phases are a bookkeeping choice, and characterization fixes
    // them by making the diagonal real; put both matrices into that gauge so
    // matrices from different sources compare like for like.
    const lon::UnitaryMatrix ideal_raw = lon::load_unitary_matrix(ideal_path);
    const lon::TransferMatrix actual =
        lon::normalize_phases(lon::load_transfer_matrix(actual_path)).matrix;
    const lon::UnitaryMatrix ideal(
        lon::normalize_phases(lon::TransferMatrix(ideal_raw)).matrix.matrix());
    const lon::SqueezeParam sq(chi_sq);
    const lon::NetworkComparison cmp = lon::compare_networks(sq, ideal, actual, sectors);

    nlohmann::json report{
        {"modes", ideal.dim()},
        {"chi_sq", cmp.chi_sq},
        {"fidelity", cmp.fidelity},
        {"tvd_bound", cmp.tvd_bound},
        {"entanglement_fidelity", cmp.entanglement_fidelity},
        {"loss_actual", lon::loss_measure(actual)},
    };
    if (!cmp.sector_fidelities.empty()) {
        nlohmann::json sector_json = nlohmann::json::object();
        for (const auto& [n, value] : cmp.sector_fidelities)
            sector_json[std::to_string(n)] = value;
        report["sector_fidelities"] = std::move(sector_json);
    }
    if (epsilon >= 0.0) {
        report["epsilon"] = epsilon;
        report["acceptable"] = cmp.entanglement_fidelity >= 1.0 - epsilon * epsilon;
    }
    const std::string text = report.dump(2) + "\n";
    if (!out_path.empty())
        write_text_file(out_path, text);
    else
        std::cout << text;
    return kExitOk;
}

int run_sweep(const std::string& config_path, const std::string& out_path) {
    nlohmann::json spec;
    try {
        spec = load_json_file(config_path);
    } catch (const lon::DataError& e) {
        throw lon::ConfigError(e.what());
    }
    std::vector<long long> mode_grid;
    std::vector<double> t_sq_grid;
    std::string rule = spec.value("chi_rule", std::string("fig2"));
    try {
        mode_grid = spec.at("modes").get<std::vector<long long>>();
        t_sq_grid = spec.at("t_sq").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw lon::ConfigError(std::string("sweep config: ") + e.what());
    }

    std::ostringstream csv;
    csv << "# config: " << nlohmann::json{{"modes", mode_grid}, {"t_sq", t_sq_grid},
                                          {"chi_rule", rule}}
                               .dump()
        << '\n';
    csv << "M,chi_sq,t_sq,fidelity,tvd_bound,ent_fidelity\n";
    for (long long m : mode_grid) {
        if (m < 1) throw lon::ConfigError("sweep config: modes must be >= 1");
        double chi_sq;
        if (rule == "fig2")
            chi_sq = 1.0 / std::sqrt(static_cast<double>(m));
        else if (rule == "rbs-standard")
            chi_sq = 1.0 / (std::sqrt(static_cast<double>(m)) + 1.0);
        else
            throw lon::ConfigError("sweep config: unknown chi_rule \"" + rule + "\"");
        for (double t_sq : t_sq_grid) {
            if (t_sq < 0.0 || t_sq > 1.0)
                throw lon::ConfigError("sweep config: t_sq must lie in [0, 1]");
            const double f = lon::fidelity_bound_uniform_loss(static_cast<int>(m), chi_sq,
                                                              std::sqrt(t_sq));
            const double d = std::sqrt(std::max(0.0, 1.0 - f * f));
            csv << m << ',' << chi_sq << ',' << t_sq << ',' << f << ',' << d << ',' << f * f
                << '\n';
        }
    }
    if (!out_path.empty())
        write_text_file(out_path, csv.str());
    else
        std::cout << csv.str();
    return kExitOk;
}

int run_make_matrix(int dim, std::uint64_t haar_seed, double uniform_loss_t,
                    const std::string& out_path) {
    if (uniform_loss_t < 0.0 || uniform_loss_t > 1.0)
        throw lon::ConfigError("matrix: uniform-loss transmissivity must lie in [0, 1]");
    const lon::UnitaryMatrix u = lon::haar_random_unitary(dim, haar_seed);
    const lon::ComplexMatrix m = uniform_loss_t * u.matrix();
    if (!out_path.empty())
        lon::save_matrix_json(out_path, m);
    else
        std::cout << lon::matrix_to_json_string(m) << '\n';
    return kExitOk;
}

int run_oracle_check(int instances, std::uint64_t seed, int modes, double chi_sq, int n_max) {
    const lon::SqueezeParam sq(chi_sq);
    int failures = 0;
    for (int k = 0; k < instances; ++k) {
        const lon::UnitaryMatrix ideal = lon::haar_random_unitary(modes, seed + 2 * k);
        lon::RngStream loss_rng(seed + 2 * k + 1);
        const lon::UnitaryMatrix w = lon::haar_random_unitary(modes, seed ^ (k + 1));
        lon::RealVector t(modes);
        for (int i = 0; i < modes; ++i) t(i) = 0.6 + 0.35 * loss_rng.uniform();
        const lon::TransferMatrix lossy(
            lon::ComplexMatrix(w.matrix() * t.asDiagonal() * ideal.matrix()));

        const auto joint_ideal =
            lon::fock::joint_distribution(sq, lon::TransferMatrix(ideal), n_max);
        const auto joint_lossy = lon::fock::joint_distribution(sq, lossy, n_max);
        const double f_quantum = lon::fidelity_bound(sq, ideal, lossy);
        const auto report = lon::inequality_chain_check(
            joint_ideal.probs, joint_ideal.residual_mass, joint_lossy.probs,
            joint_lossy.residual_mass, f_quantum);
        std::cout << "instance " << k << ": D=" << report.tvd << " F=" << report.fidelity
                  << " F_bound=" << f_quantum << (report.ok ? "  ok" : "  VIOLATION") << '\n';
        if (!report.ok) ++failures;
    }
    if (failures > 0) {
        std::cerr << failures << " instance(s) violated the distance inequalities\n";
        return kExitDataError;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lossy linear-optical network simulation and in-situ characterization"};
    app.require_subcommand(1);

    CommonOverrides overrides;

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Generate a protocol run stream");
    std::string sim_config, sim_stream, sim_summary;
    int sim_threads = 0;
    simulate->add_option("--config", sim_config, "Experiment config JSON")->required();
    simulate->add_option("--out", sim_stream, "Run-stream NDJSON output path");
    simulate->add_option("--summary", sim_summary, "Summary JSON output path (default stdout)");
    simulate->add_option("--threads", sim_threads, "Worker threads (default LONSIM_THREADS)");

    // characterize
    auto* characterize =
        app.add_subcommand("characterize", "Reconstruct the transfer matrix from a run stream");
    std::string chr_stream, chr_config, chr_out, chr_report, chr_method = "exact";
    characterize->add_option("--stream", chr_stream, "Run-stream NDJSON path")->required();
    characterize->add_option("--config", chr_config, "Experiment config JSON")->required();
    characterize->add_option("--out", chr_out, "Estimated matrix JSON output path");
    characterize->add_option("--report", chr_report, "Sidecar report JSON output path");
    characterize->add_option("--method", chr_method, "exact (default) or first-order");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "Score a lossy network against an ideal one");
    std::string met_ideal, met_actual, met_out;
    double met_chi_sq = 0.0, met_epsilon = -1.0;
    int met_sectors = -1;
    metrics->add_option("--ideal", met_ideal, "Ideal unitary matrix JSON")->required();
    metrics->add_option("--actual", met_actual, "Actual transfer matrix JSON")->required();
    metrics->add_option("--chi-sq", met_chi_sq, "Squeezing strength chi^2")->required();
    metrics->add_option("--sectors", met_sectors, "Also report sector fidelities up to N");
    metrics->add_option("--epsilon", met_epsilon, "Acceptance threshold on the TVD bound");
    metrics->add_option("--out", met_out, "Report JSON output path (default stdout)");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Closed-form fidelity/TVD sweep CSV");
    std::string swp_config, swp_out;
    sweep->add_option("--config", swp_config, "Sweep grid config JSON")->required();
    sweep->add_option("--out", swp_out, "CSV output path (default stdout)");

    // matrix
    auto* matrix = app.add_subcommand("matrix", "Emit a seeded Haar matrix file");
    int mat_dim = 4;
    std::uint64_t mat_seed = 0;
    double mat_loss_t = 1.0;
    std::string mat_out;
    matrix->add_option("--dim", mat_dim, "Matrix dimension")->required();
    matrix->add_option("--haar-seed", mat_seed, "Seed of the Haar draw")->required();
    matrix->add_option("--uniform-loss-t", mat_loss_t, "Scale by a uniform transmissivity");
    matrix->add_option("--out", mat_out, "Matrix JSON output path (default stdout)");

    // oracle-check
    auto* oracle = app.add_subcommand("oracle-check",
                                      "Exhaustive small-instance distance-inequality check");
    int orc_instances = 20, orc_modes = 2, orc_nmax = 4;
    std::uint64_t orc_seed = 1;
    double orc_chi_sq = 0.3;
    oracle->add_option("--instances", orc_instances, "Number of random instances");
    oracle->add_option("--seed", orc_seed, "Base seed");
    oracle->add_option("--modes", orc_modes, "Mode count");
    oracle->add_option("--chi-sq", orc_chi_sq, "Squeezing strength chi^2");
    oracle->add_option("--n-max", orc_nmax, "Photon cutoff for the exact tables");

    // shared overrides
    std::uint64_t seed_override = 0;
    long long runs_override = 0;
    double chi_override = 0.0, mix_override = 0.0;
    auto* seed_opt = app.add_option("--seed", seed_override, "Override config seed");
    auto* runs_opt = app.add_option("--runs", runs_override, "Override config runs");
    auto* chi_opt = app.add_option("--chi-sq-override", chi_override, "Override config chi_sq");
    auto* mix_opt = app.add_option("--run-mix", mix_override, "Override config run_mix");

    CLI11_PARSE(app, argc, argv);
    if (*seed_opt) overrides.seed = seed_override;
    if (*runs_opt) overrides.runs = runs_override;
    if (*chi_opt) overrides.chi_sq = chi_override;
    if (*mix_opt) overrides.run_mix = mix_override;

    try {
        if (simulate->parsed())
            return run_simulate(sim_config, overrides, sim_stream, sim_summary, sim_threads);
        if (characterize->parsed())
            return run_characterize(chr_stream, chr_config, overrides, chr_out, chr_report,
                                    chr_method);
        if (metrics->parsed())
            return run_metrics(met_ideal, met_actual, met_chi_sq, met_sectors, met_epsilon,
                               met_out);
        if (sweep->parsed()) return run_sweep(swp_config, swp_out);
        if (matrix->parsed()) return run_make_matrix(mat_dim, mat_seed, mat_loss_t, mat_out);
        if (oracle->parsed())
            return run_oracle_check(orc_instances, orc_seed, orc_modes, orc_chi_sq, orc_nmax);
    } catch (const lon::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const lon::ScaleError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitScaleError;
    } catch (const lon::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfigError;
    }
    return kExitOk;
}
