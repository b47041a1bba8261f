#pragma once

#include <map>
#include <vector>

#include "lon/core.hpp"
#include "lon/stats.hpp"

namespace lon {

/// Quantum-fidelity lower bound between the joint states after the ideal and
/// lossy networks: (1 - chi^2)^M / |det(I - chi^2 L U^dag)|, evaluated in log
/// space through an LU factorization.
double fidelity_bound(const SqueezeParam& sq, const UnitaryMatrix& u, const TransferMatrix& l);

/// Closed form of the bound for L = t U: ((1 - chi^2) / (1 - chi^2 t))^M.
double fidelity_bound_uniform_loss(int modes, double chi_sq, double transmissivity);

/// Upper bound sqrt(1 - F^2) on the total variation distance between the
/// ideal and lossy joint photocount distributions.
double tvd_bound(const SqueezeParam& sq, const UnitaryMatrix& u, const TransferMatrix& l);

/// Complex fixed-photon-sector overlaps h_N(L U^dag) / G(N, M) for
/// N = 0..n_max, where h_N are the complete homogeneous symmetric functions
/// of the eigenvalues, built from power sums tr[(L U^dag)^k] via the Newton
/// recurrence N h_N = sum_k p_k h_{N-k}.
std::vector<Complex> sector_overlaps(const UnitaryMatrix& u, const TransferMatrix& l, int n_max);

/// |h_N(L U^dag)| / G(N, M): fidelity bound for the N-photon input sector.
double sector_fidelity(const UnitaryMatrix& u, const TransferMatrix& l, int photons);

struct DistanceResult {
    double tvd;
    double fidelity;
};

/// Total variation distance and Bhattacharyya fidelity between two aligned
/// probability tables.  Residual (un-enumerated) mass contributes
/// |p_res - q_res| / 2 to the distance and nothing to the fidelity.
DistanceResult distribution_distance(const std::vector<double>& p, double p_residual,
                                     const std::vector<double>& q, double q_residual);

struct ChainReport {
    double tvd;
    double fidelity;
    double slack_lower;           // D - (1 - F)
    double slack_upper;           // sqrt(1 - F^2) - D
    double slack_fidelity_bound;  // F - F_quantum
    double slack_tvd_bound;       // sqrt(1 - F_quantum^2) - D
    bool ok;                      // all slacks >= -1e-9
};

/// Checks the classical/quantum distance inequalities for a pair of tables
/// against a quantum-fidelity value.
ChainReport inequality_chain_check(const std::vector<double>& p, double p_residual,
                                   const std::vector<double>& q, double q_residual,
                                   double quantum_fidelity);

struct NetworkComparison {
    double fidelity;
    double tvd_bound;
    double entanglement_fidelity;
    double chi_sq;
    std::map<int, double> sector_fidelities;
};

/// Scores a lossy network against the ideal one; sector fidelities are filled
/// for N = 0..sector_n_max when sector_n_max >= 0.
NetworkComparison compare_networks(const SqueezeParam& sq, const UnitaryMatrix& u,
                                   const TransferMatrix& l, int sector_n_max = -1);

/// Exact classical fidelity between the ideal and lossy joint photocount
/// distributions, summed over totals <= n_max.  Only photon-conserving
/// outcomes contribute (the ideal side vanishes elsewhere), so this stays
/// cheap at depths well beyond the full joint-table cap.
double classical_fidelity_exact(const SqueezeParam& sq, const UnitaryMatrix& u,
                                const TransferMatrix& l, int n_max);

}  // namespace lon
