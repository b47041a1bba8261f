// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure.  Every tolerance is pinned in code; seeds are frozen so the
// statistical checks are reproducible.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "lon/core.hpp"
#include "lon/estimator.hpp"
#include "lon/fock.hpp"
#include "lon/metrics.hpp"
#include "lon/rng.hpp"
#include "lon/simulator.hpp"
#include "lon/stats.hpp"
#include "test_helpers.hpp"

using namespace lon;

namespace {

int failures = 0;

void report(int criterion, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion, name.c_str(),
                detail.c_str());
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buffer[256];
    std::snprintf(buffer, sizeof buffer, pattern, a, b, c);
    return buffer;
}

// 1. Closed-form loss-scaling reference points at chi^2 = 1/sqrt(M), 15% loss.
void criterion_1() {
    const auto start = std::chrono::steady_clock::now();
    const double t = std::sqrt(0.85);
    const struct {
        int modes;
        double expected;
    } points[] = {{50, 0.528}, {500, 0.162}, {1000, 0.079}};
    double max_dev = 0.0;
    bool ok = true;
    for (const auto& p : points) {
        const double chi_sq = 1.0 / std::sqrt(static_cast<double>(p.modes));
        const double f = fidelity_bound_uniform_loss(p.modes, chi_sq, t);
        max_dev = std::max(max_dev, std::abs(f - p.expected));
        ok = ok && std::abs(f - p.expected) <= 0.005;
    }
    const double tail = fidelity_bound_uniform_loss(1500, 1.0 / std::sqrt(1500.0), t);
    ok = ok && tail < 0.05;
    // the closed form and the determinant route agree
    UnitaryMatrix u = haar_random_unitary(50, 7);
    const double det_route =
        fidelity_bound(SqueezeParam(1.0 / std::sqrt(50.0)), u,
                       TransferMatrix(ComplexMatrix(t * u.matrix())));
    ok = ok && std::abs(det_route - fidelity_bound_uniform_loss(50, 1.0 / std::sqrt(50.0), t)) <
                   1e-12;
    const double elapsed = seconds_since(start);
    ok = ok && elapsed < 1.0;
    report(1, "loss-scaling reference fidelities",
           ok, fmt("max dev %.2e, M=1500 value %.3f, %.2f s", max_dev, tail, elapsed));
}

// 2. Exact-inversion round trip on analytic conditional covariances.
void criterion_2() {
    const auto start = std::chrono::steady_clock::now();
    const double chis[] = {0.05, 0.2, 0.4};
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const int modes = 2 + (k % 5);
        const SqueezeParam sq(chis[k % 3]);
        TransferMatrix l =
            test::random_lossy(modes, 300 + static_cast<std::uint64_t>(k), 0.4, 1.0);
        std::vector<long long> counts(static_cast<std::size_t>(modes), 1000000);
        const auto rec =
            reconstruct_exact_from_covariances(test::analytic_covariances(l, sq), counts, sq);
        worst = std::max(worst, test::max_abs_diff(rec.estimate.matrix(), l.matrix()));
    }
    const double elapsed = seconds_since(start);
    const bool ok = worst <= 1e-9 && elapsed < 10.0;
    report(2, "estimator round trip on exact moments", ok,
           fmt("max entry error %.2e, %.2f s", worst, elapsed));
}

// 3. Statistical characterization at M = 4, chi^2 = 0.25, T = 4e5, plus the
//    inverse-root-T scaling between T = 1e4 and T = 1e6.
void criterion_3() {
    const auto start = std::chrono::steady_clock::now();
    const double chi_sq = 0.25;
    const SqueezeParam sq(chi_sq);
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        // pivot-conditioned instances keep the diagonal phase gauge sound
        TransferMatrix l = test::random_lossy_pivoted(4, seed, 0.7, 0.9, 0.3);
        ExperimentConfig cfg;
        cfg.modes = 4;
        cfg.chi_sq = chi_sq;
        cfg.runs = 400000;
        cfg.seed = seed;
        AccumulatorSet acc = test::accumulate_stream(cfg, l);
        const auto rec = reconstruct_exact(acc, sq);
        worst = std::max(worst, test::max_abs_diff(rec.estimate.matrix(), l.matrix()));
    }

    double mean_small = 0.0, mean_large = 0.0;
    for (std::uint64_t seed = 101; seed <= 105; ++seed) {
        TransferMatrix l = test::random_lossy_pivoted(4, seed, 0.6, 0.85, 0.3);
        for (long long runs : {10000ll, 1000000ll}) {
            ExperimentConfig cfg;
            cfg.modes = 4;
            cfg.chi_sq = chi_sq;
            cfg.runs = runs;
            cfg.seed = seed;
            AccumulatorSet acc = test::accumulate_stream(cfg, l);
            const auto rec = reconstruct_exact(acc, sq);
            const double err = test::max_abs_diff(rec.estimate.matrix(), l.matrix());
            (runs == 10000 ? mean_small : mean_large) += err / 5.0;
        }
    }
    const double ratio = mean_small / mean_large;
    const double elapsed = seconds_since(start);
    const bool ok = worst <= 0.02 && ratio >= 5.0 && ratio <= 20.0 && elapsed < 60.0;
    report(3, "statistical characterization and run scaling", ok,
           fmt("max error %.4f (bound 0.02), T-scaling ratio %.1f, %.1f s", worst, ratio,
               elapsed));
}

// 4. Distance inequalities on exact truncated tables, plus tightness of the
//    fidelity bound under uniform loss.
void criterion_4() {
    const SqueezeParam sq(0.3);
    double min_slack = 1e9;
    bool ok = true;
    for (std::uint64_t k = 0; k < 20; ++k) {
        UnitaryMatrix ideal = haar_random_unitary(2, 100 + 2 * k);
        UnitaryMatrix w = haar_random_unitary(2, 101 + 2 * k);
        RngStream rng(500 + k);
        RealVector t(2);
        for (int i = 0; i < 2; ++i) t(i) = 0.6 + 0.35 * rng.uniform();
        TransferMatrix lossy(ComplexMatrix(w.matrix() * t.asDiagonal() * ideal.matrix()));
        const auto joint_ideal = fock::joint_distribution(sq, TransferMatrix(ideal), 4);
        const auto joint_lossy = fock::joint_distribution(sq, lossy, 4);
        const auto chain = inequality_chain_check(joint_ideal.probs, joint_ideal.residual_mass,
                                                  joint_lossy.probs, joint_lossy.residual_mass,
                                                  fidelity_bound(sq, ideal, lossy));
        min_slack = std::min({min_slack, chain.slack_lower, chain.slack_upper,
                              chain.slack_fidelity_bound, chain.slack_tvd_bound});
        ok = ok && chain.ok;
    }

    // Uniform-loss tightness: F_C equals the bound; evaluated through the
    // photon-conserving sum at depth 14 where the truncation tail sits below
    // the tolerance.  (At depth 4 the tail alone is ~7e-3.)
    double worst_tightness = 0.0;
    int idx = 0;
    for (double t_sq : {0.7, 0.85, 0.9}) {
        UnitaryMatrix u = haar_random_unitary(2, 777 + static_cast<std::uint64_t>(idx++));
        TransferMatrix l(ComplexMatrix(std::sqrt(t_sq) * u.matrix()));
        const auto joint_ideal = fock::joint_distribution(sq, TransferMatrix(u), 4);
        const auto joint_lossy = fock::joint_distribution(sq, l, 4);
        const auto chain = inequality_chain_check(joint_ideal.probs, joint_ideal.residual_mass,
                                                  joint_lossy.probs, joint_lossy.residual_mass,
                                                  fidelity_bound(sq, u, l));
        // tightness makes the truncated F_C dip below the bound, so only the
        // distance legs apply at depth 4
        ok = ok && chain.slack_lower >= -1e-9 && chain.slack_upper >= -1e-9 &&
             chain.slack_tvd_bound >= -1e-9;
        const double exact_f = classical_fidelity_exact(sq, u, l, 14);
        worst_tightness = std::max(worst_tightness, std::abs(exact_f - fidelity_bound(sq, u, l)));
    }
    ok = ok && worst_tightness <= 1e-6;
    report(4, "distance-inequality suite with uniform-loss tightness", ok,
           fmt("min slack %.2e, tightness gap %.2e", min_slack, worst_tightness));
}

// 5. Fixed-sector fidelities: recurrence vs Fock-shell enumeration.
void criterion_5() {
    double worst = 0.0;
    double worst_single = 0.0;
    for (int modes : {2, 3}) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            UnitaryMatrix u = haar_random_unitary(modes, 400 + seed);
            TransferMatrix l = test::random_lossy(modes, 410 + seed, 0.5, 0.95);
            const auto overlaps = sector_overlaps(u, l, 3);
            for (int n = 0; n <= 3; ++n) {
                fock::FockBasis shell(modes, n);
                Complex brute(0.0, 0.0);
                for (std::size_t ia = 0; ia < shell.size(); ++ia) {
                    if (fock::total_count(shell.state(ia)) != n) continue;
                    for (std::size_t ib = 0; ib < shell.size(); ++ib) {
                        if (fock::total_count(shell.state(ib)) != n) continue;
                        brute += std::conj(fock::unitary_amplitude(u, shell.state(ia),
                                                                   shell.state(ib))) *
                                 fock::k0_amplitude(l, shell.state(ia), shell.state(ib));
                    }
                }
                brute /= multiset_dim(n, modes);
                worst =
                    std::max(worst, std::abs(overlaps[static_cast<std::size_t>(n)] - brute));
            }
            const double single = sector_fidelity(u, l, 1);
            const double trace = std::abs((l.matrix() * u.matrix().adjoint()).trace()) / modes;
            worst_single = std::max(worst_single, std::abs(single - trace));
        }
    }
    const bool ok = worst <= 1e-10 && worst_single <= 1e-13;
    report(5, "sector fidelities vs Fock-shell oracle", ok,
           fmt("max dev %.2e, single-photon identity dev %.2e", worst, worst_single));
}

// 6. Dilation unitarity, conditional-law normalization, and agreement of the
//    Gaussian output sampler with the exact output marginal.
void criterion_6() {
    double worst_defect = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        TransferMatrix l = test::random_lossy(3 + static_cast<int>(seed % 3), 600 + seed, 0.2,
                                              1.0);
        worst_defect = std::max(worst_defect, max_unitarity_defect(unitary_dilation(l).matrix()));
    }

    double worst_norm = 0.0;
    RngStream pattern_rng(4242);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        TransferMatrix l = test::random_lossy(3, 700 + seed, 0.4, 0.95);
        fock::CountVector n_in(3, 0);
        int total = 0;
        for (int m = 0; m < 3 && total < 4; ++m) {
            n_in[static_cast<std::size_t>(m)] = static_cast<int>(pattern_rng.next_u64() % 3);
            total += n_in[static_cast<std::size_t>(m)];
        }
        const auto dist = fock::lossy_conditional_distribution(l, n_in);
        double sum = 0.0;
        for (double p : dist.probs) sum += p;
        worst_norm = std::max(worst_norm, std::abs(sum - 1.0));
    }

    // Monte-Carlo output marginal vs the exact truncated table
    const SqueezeParam sq(0.1);
    TransferMatrix l = test::random_lossy(3, 31, 0.6, 0.95);
    const auto joint = fock::joint_distribution(sq, l, 6);
    const auto marginal = joint.bob_marginal();
    ExperimentConfig cfg;
    cfg.modes = 3;
    cfg.chi_sq = 0.1;
    cfg.seed = 5;
    RunGenerator gen(cfg, l);
    RngStream rng(777);
    const long long draws = 1000000;
    std::vector<long long> hits(joint.basis->size(), 0);
    long long overflow = 0;
    for (long long d = 0; d < draws; ++d) {
        const auto counts = gen.sample_marginal_output_counts(rng);
        if (joint.basis->contains(counts))
            ++hits[joint.basis->index(counts)];
        else
            ++overflow;
    }
    double worst_z = 0.0;
    int cells = 0;
    double small_mass = 0.0;
    long long small_hits = 0;
    for (std::size_t i = 0; i < marginal.size(); ++i) {
        const double expected = marginal[i] * draws;
        if (expected >= 25.0) {
            ++cells;
            const double sigma = std::sqrt(marginal[i] * (1 - marginal[i]) * draws);
            worst_z = std::max(worst_z, std::abs(hits[i] - expected) / sigma);
        } else {
            small_mass += marginal[i];
            small_hits += hits[i];
        }
    }
    // aggregate the sparse cells (plus the truncation remainder) into one bin
    const double rest_mass = small_mass + joint.residual_mass;
    const double rest_expected = rest_mass * draws;
    const double rest_sigma = std::sqrt(rest_mass * (1 - rest_mass) * draws);
    const double rest_z =
        std::abs(static_cast<double>(small_hits + overflow) - rest_expected) / rest_sigma;
    worst_z = std::max(worst_z, rest_z);

    const bool ok = worst_defect <= 1e-12 && worst_norm <= 1e-10 && worst_z <= 4.0;
    report(6, "dilation and channel correctness", ok,
           fmt("dilation defect %.2e, normalization %.2e, worst cell z %.2f", worst_defect,
               worst_norm, worst_z));
}

// 7. Phase-insensitive source: moments blind to conjugation, vanishing cross
//    moments, magnitude recovery inside jackknife bars.
void criterion_7() {
    // exact moments identical under conjugation
    double conj_gap = 0.0;
    {
        const SqueezeParam sq(0.05);
        TransferMatrix l = test::random_lossy(2, 11, 0.5, 0.95);
        TransferMatrix conj(ComplexMatrix(l.matrix().conjugate()));
        for (const fock::CountVector& orders :
             {fock::CountVector{1, 0}, fock::CountVector{1, 1}, fock::CountVector{2, 0}}) {
            conj_gap = std::max(
                conj_gap, std::abs(fock::rising_factorial_moment(sq, l, {1}, orders, 6) -
                                   fock::rising_factorial_moment(sq, conj, {1}, orders, 6)));
        }
        TransferMatrix l3 = test::random_lossy(3, 12, 0.5, 0.95);
        TransferMatrix conj3(ComplexMatrix(l3.matrix().conjugate()));
        const ComplexMatrix cov = conditional_covariance(sq, l3, {0}).covariance();
        const ComplexMatrix cov_conj = conditional_covariance(sq, conj3, {0}).covariance();
        for (int j = 0; j < 3; ++j)
            conj_gap = std::max(conj_gap, std::abs(cov(j, j) - cov_conj(j, j)));
    }

    // one million phase-randomized runs through a Fourier network
    const double chi_sq = 0.015;
    const SqueezeParam sq(chi_sq);
    TransferMatrix l = test::fourier_network(3, 0.9);
    ExperimentConfig cfg;
    cfg.modes = 3;
    cfg.chi_sq = chi_sq;
    cfg.runs = 1000000;
    cfg.seed = 2;
    cfg.input_kind = InputKind::classical_classical;
    AccumulatorSet acc = test::accumulate_stream(cfg, l);

    double worst_cross_z = 0.0;
    for (int i = 0; i < 3; ++i) {
        const ModeAccumulator tot = acc.total(i);
        const double t = static_cast<double>(tot.conditioned_runs);
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) {
                if (j == k) continue;
                const Complex mean = tot.sum_outer(j, k) / t;
                const double sigma =
                    std::sqrt((tot.sum_abs(j) / t) * (tot.sum_abs(k) / t) / (2.0 * t));
                worst_cross_z = std::max({worst_cross_z, std::abs(mean.real()) / sigma,
                                          std::abs(mean.imag()) / sigma});
            }
    }

    ReconstructionOptions options;
    options.jackknife = true;
    const auto estimate = cc_magnitude_estimate(acc, sq, options);
    double worst_pull = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double err = std::abs(estimate.magnitudes(j, i) - std::abs(l.matrix()(j, i)));
            worst_pull = std::max(worst_pull, err / estimate.jackknife_sigma(j, i));
        }

    const bool ok = conj_gap <= 1e-12 && worst_cross_z <= 4.0 && worst_pull <= 3.0;
    report(7, "phase-insensitive source properties", ok,
           fmt("conjugation gap %.2e, cross-moment z %.2f, magnitude pull %.2f", conj_gap,
               worst_cross_z, worst_pull));
}

// 8. Photocount rising-factorial moments equal the heterodyne moments.
void criterion_8() {
    const SqueezeParam sq(0.03);
    UnitaryMatrix w = haar_random_unitary(2, 41);
    UnitaryMatrix v = haar_random_unitary(2, 42);
    RealVector ts(2);
    ts << 0.9, 0.75;
    TransferMatrix l(ComplexMatrix(w.matrix() * ts.asDiagonal() * v.matrix()));
    double worst = 0.0;
    for (int mode = 0; mode < 2; ++mode) {
        const ComplexMatrix cov = conditional_covariance(sq, l, {mode}).covariance();
        for (int k1 = 0; k1 <= 2; ++k1)
            for (int k2 = 0; k2 <= 2; ++k2) {
                if (k1 + k2 == 0) continue;
                std::vector<int> indices;
                for (int r = 0; r < k1; ++r) indices.push_back(0);
                for (int r = 0; r < k2; ++r) indices.push_back(1);
                const double heterodyne = gaussian_moment(cov, indices, indices).real();
                const double photocount =
                    fock::rising_factorial_moment(sq, l, {mode}, {k1, k2}, 8);
                worst = std::max(worst, std::abs(heterodyne - photocount));
            }
    }
    const bool ok = worst <= 1e-8;
    report(8, "photocount and heterodyne moments agree", ok, fmt("max gap %.2e", worst));
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    if (failures == 0)
        std::printf("all criteria passed\n");
    else
        std::printf("%d criterion(s) failed\n", failures);
    return failures;
}
