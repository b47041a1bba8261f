#include "lon/simulator.hpp"

#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <thread>

namespace lon {

namespace {

std::string kind_name(RunKind kind) {
    return kind == RunKind::rbs ? "rbs" : "characterization";
}

}  // namespace

RunKind ExperimentConfig::kind_for_run(long long index) const {
    if (run_mix <= 0.0) return RunKind::rbs;
    if (run_mix >= 1.0) return RunKind::characterization;
    if (shuffle) {
        RngStream coin(seed ^ 0x5c5c5c5c5c5c5c5cull, static_cast<std::uint64_t>(index));
        return coin.uniform() < run_mix ? RunKind::characterization : RunKind::rbs;
    }
    // Evenly interleaved pattern: run i is a characterization run when the
    // running quota floor((i+1)*mix) advances.
    const auto quota_before = static_cast<long long>(std::floor(run_mix * static_cast<double>(index)));
    const auto quota_after =
        static_cast<long long>(std::floor(run_mix * static_cast<double>(index + 1)));
    return quota_after > quota_before ? RunKind::characterization : RunKind::rbs;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    try {
        cfg.modes = j.at("modes").get<int>();
        if (cfg.modes < 1) throw ConfigError("config: modes must be >= 1");

        const auto& chi = j.at("chi_sq");
        if (chi.is_number()) {
            cfg.chi_rule = ChiRule::explicit_value;
            cfg.chi_sq = chi.get<double>();
        } else if (chi.is_string()) {
            const std::string rule = chi.get<std::string>();
            if (rule == "fig2" || rule == "inv-sqrt-m") {
                cfg.chi_rule = ChiRule::fig2;
                cfg.chi_sq = 1.0 / std::sqrt(static_cast<double>(cfg.modes));
            } else if (rule == "rbs-standard") {
                cfg.chi_rule = ChiRule::rbs_standard;
                cfg.chi_sq = 1.0 / (std::sqrt(static_cast<double>(cfg.modes)) + 1.0);
            } else {
                throw ConfigError("config: unknown chi_sq rule \"" + rule + "\"");
            }
        } else {
            throw ConfigError("config: chi_sq must be a number or a rule name");
        }
        if (!(cfg.chi_sq >= 0.0) || !(cfg.chi_sq < 1.0))
            throw ConfigError("config: resolved chi_sq must lie in [0, 1)");

        cfg.runs = j.value("runs", 0ll);
        if (cfg.runs < 0) throw ConfigError("config: runs must be >= 0");
        cfg.run_mix = j.value("run_mix", 1.0);
        if (cfg.run_mix < 0.0 || cfg.run_mix > 1.0)
            throw ConfigError("config: run_mix must lie in [0, 1]");
        cfg.seed = j.value("seed", 0ull);
        cfg.photon_cutoff = j.value("photon_cutoff", fock::kMaxPhotons);
        if (cfg.photon_cutoff < 0) throw ConfigError("config: photon_cutoff must be >= 0");

        const std::string input = j.value("input_kind", std::string("two-mode-squeezed"));
        if (input == "two-mode-squeezed")
            cfg.input_kind = InputKind::two_mode_squeezed;
        else if (input == "classical-classical")
            cfg.input_kind = InputKind::classical_classical;
        else
            throw ConfigError("config: unknown input_kind \"" + input + "\"");

        const std::string overflow = j.value("overflow", std::string("resample"));
        if (overflow == "resample")
            cfg.overflow = OverflowPolicy::resample;
        else if (overflow == "error")
            cfg.overflow = OverflowPolicy::error;
        else
            throw ConfigError("config: unknown overflow policy \"" + overflow + "\"");

        cfg.shuffle = j.value("shuffle", false);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
    const char* rule = chi_rule == ChiRule::explicit_value ? "explicit"
                       : chi_rule == ChiRule::fig2         ? "fig2"
                                                           : "rbs-standard";
    return nlohmann::json{
        {"modes", modes},
        {"chi_sq", chi_sq},
        {"chi_rule", rule},
        {"runs", runs},
        {"run_mix", run_mix},
        {"seed", seed},
        {"photon_cutoff", photon_cutoff},
        {"input_kind", input_kind == InputKind::two_mode_squeezed ? "two-mode-squeezed"
                                                                  : "classical-classical"},
        {"overflow", overflow == OverflowPolicy::resample ? "resample" : "error"},
        {"shuffle", shuffle},
    };
}

nlohmann::json RunRecord::to_json() const {
    nlohmann::json j{{"kind", kind_name(kind)}, {"bob_counts", bob_counts}};
    if (kind == RunKind::rbs) {
        j["alice_counts"] = alice_counts;
    } else {
        std::vector<double> re(static_cast<std::size_t>(alice_amplitudes.size()));
        std::vector<double> im(static_cast<std::size_t>(alice_amplitudes.size()));
        for (Eigen::Index i = 0; i < alice_amplitudes.size(); ++i) {
            re[static_cast<std::size_t>(i)] = alice_amplitudes(i).real();
            im[static_cast<std::size_t>(i)] = alice_amplitudes(i).imag();
        }
        j["alice_re"] = std::move(re);
        j["alice_im"] = std::move(im);
    }
    return j;
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
    RunRecord record;
    try {
        const std::string kind = j.at("kind").get<std::string>();
        record.bob_counts = j.at("bob_counts").get<std::vector<int>>();
        if (kind == "rbs") {
            record.kind = RunKind::rbs;
            record.alice_counts = j.at("alice_counts").get<std::vector<int>>();
            if (record.alice_counts.size() != record.bob_counts.size())
                throw DataError("run record: alice/bob size mismatch");
        } else if (kind == "characterization") {
            record.kind = RunKind::characterization;
            const auto re = j.at("alice_re").get<std::vector<double>>();
            const auto im = j.at("alice_im").get<std::vector<double>>();
            if (re.size() != im.size() || re.size() != record.bob_counts.size())
                throw DataError("run record: amplitude size mismatch");
            record.alice_amplitudes.resize(static_cast<Eigen::Index>(re.size()));
            for (std::size_t i = 0; i < re.size(); ++i)
                record.alice_amplitudes(static_cast<Eigen::Index>(i)) = Complex(re[i], im[i]);
        } else {
            throw DataError("run record: unknown kind \"" + kind + "\"");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("run record: ") + e.what());
    }
    return record;
}

nlohmann::json SimulationSummary::to_json() const {
    return nlohmann::json{
        {"total_runs", total_runs},
        {"rbs_runs", rbs_runs},
        {"characterization_runs", characterization_runs},
        {"overflow_resamples", overflow_resamples},
        {"mean_counts", mean_counts},
        {"no_count_frequency", no_count_frequency},
    };
}

std::size_t RunGenerator::VecHash::operator()(const std::vector<int>& v) const {
    std::size_t h = 1469598103934665603ull;
    for (int x : v) {
        h ^= static_cast<std::size_t>(x) + 0x9e3779b9ull;
        h *= 1099511628211ull;
    }
    return h;
}

RunGenerator::RunGenerator(ExperimentConfig config, TransferMatrix l)
    : config_(std::move(config)), network_(std::move(l)) {
    if (network_.dim() != config_.modes)
        throw ShapeError("RunGenerator: network dimension does not match the config");
    chi_ = std::sqrt(config_.chi_sq);
    alpha_sigma_ = 1.0 / std::sqrt(1.0 - config_.chi_sq);
}

RunGenerator::Generated RunGenerator::generate(long long run_index) {
    RngStream rng(config_.seed, static_cast<std::uint64_t>(run_index));
    const RunKind kind = config_.kind_for_run(run_index);
    if (kind == RunKind::rbs) return sample_rbs_run(rng);
    Generated out;
    out.record = config_.input_kind == InputKind::classical_classical
                     ? sample_cc_characterization_run(rng)
                     : sample_characterization_run(rng);
    return out;
}

RunRecord RunGenerator::sample_characterization_run(RngStream& rng) const {
    const int modes = config_.modes;
    RunRecord record;
    record.kind = RunKind::characterization;
    record.alice_amplitudes.resize(modes);
    for (int j = 0; j < modes; ++j) record.alice_amplitudes(j) = alpha_sigma_ * rng.complex_normal();
    // Bob sees the coherent state chi * alpha^* L.
    const Eigen::RowVectorXcd projected =
        record.alice_amplitudes.conjugate().transpose() * network_.matrix();
    record.bob_counts.resize(static_cast<std::size_t>(modes));
    for (int i = 0; i < modes; ++i)
        record.bob_counts[static_cast<std::size_t>(i)] =
            rng.poisson(config_.chi_sq * std::norm(projected(i)));
    return record;
}

RunRecord RunGenerator::sample_cc_characterization_run(RngStream& rng) const {
    const int modes = config_.modes;
    RunRecord record;
    record.kind = RunKind::characterization;
    record.alice_amplitudes.resize(modes);
    for (int j = 0; j < modes; ++j) record.alice_amplitudes(j) = alpha_sigma_ * rng.complex_normal();
    // Per-mode phase randomization before the network; Alice's record keeps
    // the unrandomized amplitudes.
    ComplexVector randomized(modes);
    for (int j = 0; j < modes; ++j) {
        const double phi = rng.angle();
        randomized(j) = record.alice_amplitudes(j) * Complex(std::cos(phi), std::sin(phi));
    }
    const Eigen::RowVectorXcd projected = randomized.conjugate().transpose() * network_.matrix();
    record.bob_counts.resize(static_cast<std::size_t>(modes));
    for (int i = 0; i < modes; ++i)
        record.bob_counts[static_cast<std::size_t>(i)] =
            rng.poisson(config_.chi_sq * std::norm(projected(i)));
    return record;
}

std::vector<int> RunGenerator::sample_output_given_input(const std::vector<int>& n_in,
                                                         RngStream& rng) {
    auto it = conditional_cache_.find(n_in);
    if (it == conditional_cache_.end()) {
        auto dist = std::make_shared<const fock::FockDistribution>(
            fock::lossy_conditional_distribution(network_, n_in));
        it = conditional_cache_.emplace(n_in, std::move(dist)).first;
    }
    const fock::FockDistribution& dist = *it->second;
    const double u = rng.uniform();
    double cdf = 0.0;
    for (std::size_t i = 0; i < dist.probs.size(); ++i) {
        cdf += dist.probs[i];
        if (u < cdf) return dist.basis->state(i);
    }
    return dist.basis->state(dist.basis->size() - 1);
}

RunGenerator::Generated RunGenerator::sample_rbs_run(RngStream& rng) {
    const int modes = config_.modes;
    if (modes > fock::kMaxModes)
        throw ScaleError("sample_rbs_run: mode count exceeds the exact-sampling cap");
    Generated out;
    out.record.kind = RunKind::rbs;
    std::vector<int>& alice = out.record.alice_counts;
    alice.resize(static_cast<std::size_t>(modes));
    const int cutoff = std::min(config_.photon_cutoff, fock::kMaxPhotons);
    while (true) {
        int total = 0;
        for (int j = 0; j < modes; ++j) {
            alice[static_cast<std::size_t>(j)] = rng.geometric(config_.chi_sq);
            total += alice[static_cast<std::size_t>(j)];
        }
        if (total <= cutoff) break;
        if (config_.overflow == OverflowPolicy::error)
            throw ScaleError("sample_rbs_run: photon total exceeded the cutoff");
        ++out.overflow_resamples;
    }
    out.record.bob_counts = sample_output_given_input(alice, rng);
    return out;
}

std::vector<int> RunGenerator::sample_marginal_output_counts(RngStream& rng) const {
    const int modes = config_.modes;
    const double scale = std::sqrt(config_.squeeze().mean_photon());
    Eigen::RowVectorXcd beta(modes);
    for (int j = 0; j < modes; ++j) beta(j) = scale * rng.complex_normal();
    const Eigen::RowVectorXcd gamma = beta * network_.matrix();
    std::vector<int> counts(static_cast<std::size_t>(modes));
    for (int i = 0; i < modes; ++i)
        counts[static_cast<std::size_t>(i)] = rng.poisson(std::norm(gamma(i)));
    return counts;
}

std::string run_to_ndjson(const RunRecord& record) { return record.to_json().dump(); }

SimulationSummary generate_run_stream(const ExperimentConfig& config, const TransferMatrix& l,
                                      std::ostream& out, int threads) {
    if (threads <= 0) {
        if (const char* env = std::getenv("LONSIM_THREADS")) threads = std::atoi(env);
        if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
        if (threads <= 0) threads = 1;
    }
    const long long runs = config.runs;
    threads = static_cast<int>(std::min<long long>(threads, std::max<long long>(runs, 1)));

    struct Shard {
        std::string buffer;
        SimulationSummary summary;
    };
    std::vector<Shard> shards(static_cast<std::size_t>(threads));
    auto worker = [&](int shard_index) {
        Shard& shard = shards[static_cast<std::size_t>(shard_index)];
        shard.summary.mean_counts.assign(static_cast<std::size_t>(config.modes), 0.0);
        shard.summary.no_count_frequency.assign(static_cast<std::size_t>(config.modes), 0.0);
        RunGenerator generator(config, l);
        for (long long i = shard_index; i < runs; i += threads) {
            auto generated = generator.generate(i);
            shard.buffer += run_to_ndjson(generated.record);
            shard.buffer += '\n';
            auto& s = shard.summary;
            ++s.total_runs;
            if (generated.record.kind == RunKind::rbs)
                ++s.rbs_runs;
            else
                ++s.characterization_runs;
            s.overflow_resamples += generated.overflow_resamples;
            for (int m = 0; m < config.modes; ++m) {
                const int c = generated.record.bob_counts[static_cast<std::size_t>(m)];
                s.mean_counts[static_cast<std::size_t>(m)] += c;
                if (c == 0) s.no_count_frequency[static_cast<std::size_t>(m)] += 1.0;
            }
        }
    };

    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }

    // Interleaved shards hold every thread-th line; reassemble in run order.
    if (threads == 1) {
        out << shards[0].buffer;
    } else {
        std::vector<std::size_t> cursor(static_cast<std::size_t>(threads), 0);
        for (long long i = 0; i < runs; ++i) {
            auto& shard = shards[static_cast<std::size_t>(i % threads)];
            auto& pos = cursor[static_cast<std::size_t>(i % threads)];
            const std::size_t end = shard.buffer.find('\n', pos);
            out.write(shard.buffer.data() + pos, static_cast<std::streamsize>(end - pos + 1));
            pos = end + 1;
        }
    }

    SimulationSummary total;
    total.mean_counts.assign(static_cast<std::size_t>(config.modes), 0.0);
    total.no_count_frequency.assign(static_cast<std::size_t>(config.modes), 0.0);
    for (const auto& shard : shards) {
        total.total_runs += shard.summary.total_runs;
        total.rbs_runs += shard.summary.rbs_runs;
        total.characterization_runs += shard.summary.characterization_runs;
        total.overflow_resamples += shard.summary.overflow_resamples;
        for (int m = 0; m < config.modes; ++m) {
            total.mean_counts[static_cast<std::size_t>(m)] +=
                shard.summary.mean_counts[static_cast<std::size_t>(m)];
            total.no_count_frequency[static_cast<std::size_t>(m)] +=
                shard.summary.no_count_frequency[static_cast<std::size_t>(m)];
        }
    }
    if (total.total_runs > 0) {
        for (int m = 0; m < config.modes; ++m) {
            total.mean_counts[static_cast<std::size_t>(m)] /= static_cast<double>(total.total_runs);
            total.no_count_frequency[static_cast<std::size_t>(m)] /=
                static_cast<double>(total.total_runs);
        }
    }
    return total;
}

std::vector<RunRecord> read_run_stream(std::istream& in) {
    std::vector<RunRecord> records;
    std::string line;
    long long line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("run stream line " + std::to_string(line_number) + ": " + e.what());
        }
        records.push_back(RunRecord::from_json(j));
    }
    return records;
}

}  // namespace lon
