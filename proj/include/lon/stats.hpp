#pragma once

#include <vector>

#include "lon/core.hpp"

namespace lon {

/// Squeezing strength of the two-mode sources, parameterized by chi^2 in [0, 1).
class SqueezeParam {
public:
    explicit SqueezeParam(double chi_sq);

    double chi_sq() const { return chi_sq_; }
    double chi() const;
    /// Thermal mean photon number per mode, chi^2 / (1 - chi^2).
    double mean_photon() const;

private:
    double chi_sq_;
};

/// log C(n, k) for nonnegative integers via lgamma.
double log_binomial(long long n, long long k);

/// Number of M-mode count vectors with total N: C(N + M - 1, N).
double multiset_dim(int total, int modes);

/// P(N) for the M-mode thermal source marginal, N = 0..n_max:
/// G(N, M) (1 - chi^2)^M chi^(2N).  Computed in log space.
std::vector<double> thermal_count_distribution(const SqueezeParam& sq, int modes, int n_max);

/// Probability of one specific count vector with the given total:
/// (1 - chi^2)^M chi^(2 total).
double count_record_probability(const SqueezeParam& sq, int modes, int total);
double log_count_record_probability(const SqueezeParam& sq, int modes, int total);

/// Probability that output mode i of the lossy network reports no counts.
double no_count_probability(const SqueezeParam& sq, const TransferMatrix& l, int mode);

/// Thermal counting law of output mode i (mean n_bar * l_i^2) at count n.
double per_mode_count_distribution(const SqueezeParam& sq, const TransferMatrix& l,
                                   int mode, int n);

/// Gaussian conditional law of the heterodyne outcomes given that every mode
/// in `condition_set` reported no counts.  Precision
/// S = (1 - chi^2) I + chi^2 sum_s L_s L_s^dag and its exact inverse
/// (Woodbury on the low-rank update).
class ConditionalGaussian {
public:
    ConditionalGaussian(int dim, std::vector<int> condition_set, ComplexMatrix precision,
                        ComplexMatrix covariance);

    int dim() const { return dim_; }
    const std::vector<int>& condition_set() const { return condition_set_; }
    const ComplexMatrix& precision() const { return precision_; }
    const ComplexMatrix& covariance() const { return covariance_; }

private:
    int dim_;
    std::vector<int> condition_set_;
    ComplexMatrix precision_;
    ComplexMatrix covariance_;
};

ConditionalGaussian conditional_covariance(const SqueezeParam& sq, const TransferMatrix& l,
                                           const std::vector<int>& condition_set);

inline constexpr int kGaussianMomentCap = 6;

/// Zero-mean complex-Gaussian moment
///   < a_{j1} ... a_{jn} conj(a_{k1}) ... conj(a_{kn}) >
/// for covariance A_jk = <a_j conj(a_k)>: the permutation sum
/// sum_pi prod_s A_{j_s, pi(k_s)}, evaluated as a permanent.  n is capped at
/// kGaussianMomentCap (the sum has n! terms).
Complex gaussian_moment(const ComplexMatrix& covariance, const std::vector<int>& upper,
                        const std::vector<int>& lower);

}  // namespace lon
