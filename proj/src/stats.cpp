#include "lon/stats.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace lon {

SqueezeParam::SqueezeParam(double chi_sq) : chi_sq_(chi_sq) {
    if (!(chi_sq >= 0.0) || !(chi_sq < 1.0))
        throw DimensionError("SqueezeParam: chi^2 must lie in [0, 1)");
}

double SqueezeParam::chi() const { return std::sqrt(chi_sq_); }

double SqueezeParam::mean_photon() const { return chi_sq_ / (1.0 - chi_sq_); }

double log_binomial(long long n, long long k) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    return std::lgamma(static_cast<double>(n + 1)) - std::lgamma(static_cast<double>(k + 1)) -
           std::lgamma(static_cast<double>(n - k + 1));
}

double multiset_dim(int total, int modes) {
    if (total < 0) return 0.0;
    if (total == 0) return 1.0;
    return std::exp(log_binomial(static_cast<long long>(total) + modes - 1, total));
}

std::vector<double> thermal_count_distribution(const SqueezeParam& sq, int modes, int n_max) {
    if (modes < 1) throw DimensionError("thermal_count_distribution: modes must be >= 1");
    if (n_max < 0) throw DimensionError("thermal_count_distribution: n_max must be >= 0");
    std::vector<double> probs(static_cast<std::size_t>(n_max) + 1, 0.0);
    const double chi_sq = sq.chi_sq();
    if (chi_sq == 0.0) {
        probs[0] = 1.0;
        return probs;
    }
    const double log_vac = modes * std::log1p(-chi_sq);
    const double log_ratio = std::log(chi_sq);
    for (int n = 0; n <= n_max; ++n) {
        const double log_g = log_binomial(static_cast<long long>(n) + modes - 1, n);
        probs[static_cast<std::size_t>(n)] = std::exp(log_g + log_vac + n * log_ratio);
    }
    return probs;
}

double log_count_record_probability(const SqueezeParam& sq, int modes, int total) {
    if (total < 0) throw DimensionError("count_record_probability: total must be >= 0");
    const double chi_sq = sq.chi_sq();
    if (chi_sq == 0.0)
        return total == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return modes * std::log1p(-chi_sq) + total * std::log(chi_sq);
}

double count_record_probability(const SqueezeParam& sq, int modes, int total) {
    return std::exp(log_count_record_probability(sq, modes, total));
}

double no_count_probability(const SqueezeParam& sq, const TransferMatrix& l, int mode) {
    const double column_power = l.column_power(mode);
    const double chi_sq = sq.chi_sq();
    return (1.0 - chi_sq) / (1.0 - chi_sq * (1.0 - column_power));
}

double per_mode_count_distribution(const SqueezeParam& sq, const TransferMatrix& l, int mode,
                                   int n) {
    if (n < 0) throw DimensionError("per_mode_count_distribution: n must be >= 0");
    const double mean = sq.mean_photon() * l.column_power(mode);
    if (mean == 0.0) return n == 0 ? 1.0 : 0.0;
    return std::exp(-std::log1p(mean) + n * (std::log(mean) - std::log1p(mean)));
}

ConditionalGaussian::ConditionalGaussian(int dim, std::vector<int> condition_set,
                                         ComplexMatrix precision, ComplexMatrix covariance)
    : dim_(dim),
      condition_set_(std::move(condition_set)),
      precision_(std::move(precision)),
      covariance_(std::move(covariance)) {
    const ComplexMatrix prod = precision_ * covariance_;
    const double defect =
        (prod - ComplexMatrix::Identity(dim_, dim_)).cwiseAbs().maxCoeff();
    if (defect > 1e-10)
        throw DataError("ConditionalGaussian: precision * covariance deviates from identity");
}

ConditionalGaussian conditional_covariance(const SqueezeParam& sq, const TransferMatrix& l,
                                           const std::vector<int>& condition_set) {
    const int dim = l.dim();
    if (condition_set.empty())
        throw DimensionError("conditional_covariance: condition set must be nonempty");
    std::set<int> unique(condition_set.begin(), condition_set.end());
    if (unique.size() != condition_set.size())
        throw DimensionError("conditional_covariance: duplicate mode indices");
    for (int mode : condition_set)
        if (mode < 0 || mode >= dim)
            throw DimensionError("conditional_covariance: mode index out of range");

    const double chi_sq = sq.chi_sq();
    const double c = 1.0 - chi_sq;
    const int r = static_cast<int>(condition_set.size());
    ComplexMatrix columns(dim, r);
    for (int s = 0; s < r; ++s) columns.col(s) = l.matrix().col(condition_set[s]);

    ComplexMatrix precision = c * ComplexMatrix::Identity(dim, dim) +
                              chi_sq * (columns * columns.adjoint());

    // Woodbury inverse of cI + chi^2 B B^dag via the r x r capacitance matrix.
    ComplexMatrix covariance;
    if (chi_sq == 0.0) {
        covariance = ComplexMatrix::Identity(dim, dim);
    } else {
        const ComplexMatrix capacitance =
            ComplexMatrix::Identity(r, r) + (chi_sq / c) * (columns.adjoint() * columns);
        const ComplexMatrix solved = capacitance.ldlt().solve(columns.adjoint());
        covariance = (ComplexMatrix::Identity(dim, dim) - (chi_sq / c) * columns * solved) / c;
    }
    // Hermitize away the last-bit asymmetry before validating.
    covariance = ((covariance + covariance.adjoint()) / 2.0).eval();
    return ConditionalGaussian(dim, condition_set, std::move(precision), std::move(covariance));
}

Complex gaussian_moment(const ComplexMatrix& covariance, const std::vector<int>& upper,
                        const std::vector<int>& lower) {
    if (upper.size() != lower.size())
        throw ShapeError("gaussian_moment: index lists must have equal length");
    const int n = static_cast<int>(upper.size());
    if (n > kGaussianMomentCap)
        throw ScaleError("gaussian_moment: order exceeds the permutation-sum cap");
    for (int idx : upper)
        if (idx < 0 || idx >= covariance.rows())
            throw DimensionError("gaussian_moment: index out of range");
    for (int idx : lower)
        if (idx < 0 || idx >= covariance.rows())
            throw DimensionError("gaussian_moment: index out of range");
    if (n == 0) return Complex(1.0, 0.0);
    ComplexMatrix sub(n, n);
    for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t) sub(s, t) = covariance(upper[s], lower[t]);
    return permanent(sub);
}

}  // namespace lon
