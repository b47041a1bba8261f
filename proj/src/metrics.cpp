#include "lon/metrics.hpp"

#include <cmath>

#include "lon/fock.hpp"

namespace lon {

namespace {

double log_abs_det(const ComplexMatrix& m) {
    Eigen::PartialPivLU<ComplexMatrix> lu(m);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double pivot = std::abs(lu.matrixLU()(i, i));
        if (!(pivot > 0.0)) throw DataError("log_abs_det: singular factor");
        log_det += std::log(pivot);
    }
    return log_det;
}

}  // namespace

double fidelity_bound(const SqueezeParam& sq, const UnitaryMatrix& u, const TransferMatrix& l) {
    if (u.dim() != l.dim()) throw ShapeError("fidelity_bound: dimension mismatch");
    const int modes = u.dim();
    const double chi_sq = sq.chi_sq();
    const ComplexMatrix factor = ComplexMatrix::Identity(modes, modes) -
                                 chi_sq * (l.matrix() * u.matrix().adjoint());
    const double log_f = modes * std::log1p(-chi_sq) - log_abs_det(factor);
    return std::exp(std::min(log_f, 0.0));
}

double fidelity_bound_uniform_loss(int modes, double chi_sq, double transmissivity) {
    if (modes < 1) throw DimensionError("fidelity_bound_uniform_loss: modes must be >= 1");
    if (!(chi_sq >= 0.0) || !(chi_sq < 1.0))
        throw DimensionError("fidelity_bound_uniform_loss: chi^2 must lie in [0, 1)");
    if (!(transmissivity >= 0.0) || !(transmissivity <= 1.0))
        throw DimensionError("fidelity_bound_uniform_loss: transmissivity must lie in [0, 1]");
    const double log_f =
        modes * (std::log1p(-chi_sq) - std::log1p(-chi_sq * transmissivity));
    return std::exp(std::min(log_f, 0.0));
}

double tvd_bound(const SqueezeParam& sq, const UnitaryMatrix& u, const TransferMatrix& l) {
    const double f = fidelity_bound(sq, u, l);
    return std::sqrt(std::max(0.0, 1.0 - f * f));
}

std::vector<Complex> sector_overlaps(const UnitaryMatrix& u, const TransferMatrix& l, int n_max) {
    if (u.dim() != l.dim()) throw ShapeError("sector_overlaps: dimension mismatch");
    if (n_max < 0) throw DimensionError("sector_overlaps: n_max must be >= 0");
    const int modes = u.dim();
    const ComplexMatrix a = l.matrix() * u.matrix().adjoint();

    std::vector<Complex> power_sums(static_cast<std::size_t>(n_max) + 1);
    ComplexMatrix a_power = ComplexMatrix::Identity(modes, modes);
    for (int k = 1; k <= n_max; ++k) {
        a_power = (a_power * a).eval();
        power_sums[static_cast<std::size_t>(k)] = a_power.trace();
    }

    std::vector<Complex> h(static_cast<std::size_t>(n_max) + 1);
    h[0] = Complex(1.0, 0.0);
    for (int n = 1; n <= n_max; ++n) {
        Complex acc(0.0, 0.0);
        for (int k = 1; k <= n; ++k)
            acc += power_sums[static_cast<std::size_t>(k)] * h[static_cast<std::size_t>(n - k)];
        h[static_cast<std::size_t>(n)] = acc / static_cast<double>(n);
    }

    std::vector<Complex> overlaps(h.size());
    for (int n = 0; n <= n_max; ++n)
        overlaps[static_cast<std::size_t>(n)] = h[static_cast<std::size_t>(n)] / multiset_dim(n, modes);
    return overlaps;
}

double sector_fidelity(const UnitaryMatrix& u, const TransferMatrix& l, int photons) {
    return std::abs(sector_overlaps(u, l, photons).back());
}

DistanceResult distribution_distance(const std::vector<double>& p, double p_residual,
                                     const std::vector<double>& q, double q_residual) {
    if (p.size() != q.size())
        throw ShapeError("distribution_distance: tables must share an outcome set");
    double p_total = p_residual;
    double q_total = q_residual;
    double l1 = 0.0;
    double overlap = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0)
            throw DataError("distribution_distance: negative probability entry");
        p_total += p[i];
        q_total += q[i];
        l1 += std::abs(p[i] - q[i]);
        overlap += std::sqrt(p[i] * q[i]);
    }
    if (p_residual < 0.0 || q_residual < 0.0)
        throw DataError("distribution_distance: negative residual mass");
    if (std::abs(p_total - 1.0) > 1e-6 || std::abs(q_total - 1.0) > 1e-6)
        throw DataError("distribution_distance: table does not sum to 1");
    const double tvd = 0.5 * l1 + 0.5 * std::abs(p_residual - q_residual);
    return DistanceResult{tvd, overlap};
}

ChainReport inequality_chain_check(const std::vector<double>& p, double p_residual,
                                   const std::vector<double>& q, double q_residual,
                                   double quantum_fidelity) {
    const DistanceResult d = distribution_distance(p, p_residual, q, q_residual);
    ChainReport report{};
    report.tvd = d.tvd;
    report.fidelity = d.fidelity;
    report.slack_lower = d.tvd - (1.0 - d.fidelity);
    report.slack_upper = std::sqrt(std::max(0.0, 1.0 - d.fidelity * d.fidelity)) - d.tvd;
    report.slack_fidelity_bound = d.fidelity - quantum_fidelity;
    report.slack_tvd_bound =
        std::sqrt(std::max(0.0, 1.0 - quantum_fidelity * quantum_fidelity)) - d.tvd;
    constexpr double kTol = 1e-9;
    report.ok = report.slack_lower >= -kTol && report.slack_upper >= -kTol &&
                report.slack_fidelity_bound >= -kTol && report.slack_tvd_bound >= -kTol;
    return report;
}

NetworkComparison compare_networks(const SqueezeParam& sq, const UnitaryMatrix& u,
                                   const TransferMatrix& l, int sector_n_max) {
    NetworkComparison cmp{};
    cmp.chi_sq = sq.chi_sq();
    cmp.fidelity = fidelity_bound(sq, u, l);
    cmp.tvd_bound = std::sqrt(std::max(0.0, 1.0 - cmp.fidelity * cmp.fidelity));
    cmp.entanglement_fidelity = cmp.fidelity * cmp.fidelity;
    if (sector_n_max >= 0) {
        const auto overlaps = sector_overlaps(u, l, sector_n_max);
        for (int n = 0; n <= sector_n_max; ++n)
            cmp.sector_fidelities[n] = std::abs(overlaps[static_cast<std::size_t>(n)]);
    }
    return cmp;
}

double classical_fidelity_exact(const SqueezeParam& sq, const UnitaryMatrix& u,
                                const TransferMatrix& l, int n_max) {
    if (u.dim() != l.dim()) throw ShapeError("classical_fidelity_exact: dimension mismatch");
    const int modes = u.dim();
    if (modes > fock::kMaxModes)
        throw ScaleError("classical_fidelity_exact: mode count exceeds the oracle cap");
    if (n_max < 0 || n_max > 2 * fock::kMaxPhotons)
        throw ScaleError("classical_fidelity_exact: depth exceeds the oracle cap");

    double fidelity = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        const double prefactor = count_record_probability(sq, modes, n);
        if (prefactor == 0.0) continue;
        fock::FockBasis shell(modes, n);
        double shell_sum = 0.0;
        for (std::size_t ia = 0; ia < shell.size(); ++ia) {
            const auto& alice = shell.state(ia);
            if (fock::total_count(alice) != n) continue;
            for (std::size_t ib = 0; ib < shell.size(); ++ib) {
                const auto& bob = shell.state(ib);
                if (fock::total_count(bob) != n) continue;
                const Complex ideal = fock::unitary_amplitude(u, alice, bob);
                const Complex k0 = fock::k0_amplitude(l, alice, bob);
                shell_sum += std::abs(ideal) * std::abs(k0);
            }
        }
        fidelity += prefactor * shell_sum;
    }
    return fidelity;
}

}  // namespace lon
