#include "lon/fock.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

namespace lon::fock {

namespace {

const double* factorial_table() {
    static const std::vector<double> table = [] {
        std::vector<double> t(171);
        t[0] = 1.0;
        for (std::size_t i = 1; i < t.size(); ++i) t[i] = t[i - 1] * static_cast<double>(i);
        return t;
    }();
    return table.data();
}

void check_counts(const CountVector& n, const char* what) {
    for (int v : n)
        if (v < 0) throw DimensionError(std::string(what) + ": negative photon count");
}

/// Indices repeated by occupation: (2, 0, 1) -> [0, 0, 2].
std::vector<int> repeated_indices(const CountVector& n) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(total_count(n)));
    for (int j = 0; j < static_cast<int>(n.size()); ++j)
        for (int r = 0; r < n[j]; ++r) out.push_back(j);
    return out;
}

/// per(A[rows, cols]) / sqrt(prod in! prod out!) for any rectangular source
/// whose rows are indexed by input modes and columns by output modes.
Complex repeated_permanent_amplitude(const Eigen::Ref<const ComplexMatrix>& source,
                                     const CountVector& in, const CountVector& out_rows,
                                     const CountVector& out_cols_extra, int col_offset) {
    // Builds the photon-level matrix with rows repeated per `in` and columns
    // repeated per `out_rows` (source columns [0, M)) followed by
    // `out_cols_extra` (source columns [col_offset, ...)).
    const std::vector<int> rows = repeated_indices(in);
    std::vector<int> cols = repeated_indices(out_rows);
    for (int j = 0; j < static_cast<int>(out_cols_extra.size()); ++j)
        for (int r = 0; r < out_cols_extra[j]; ++r) cols.push_back(col_offset + j);
    if (rows.size() != cols.size()) return Complex(0.0, 0.0);
    const int n = static_cast<int>(rows.size());
    ComplexMatrix sub(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) sub(a, b) = source(rows[a], cols[b]);
    const double norm = std::sqrt(count_factorial(in) * count_factorial(out_rows) *
                                  count_factorial(out_cols_extra));
    return permanent(sub) / norm;
}

void enumerate_states(int modes, int total, CountVector& scratch, int mode,
                      std::vector<CountVector>& out) {
    if (mode == modes - 1) {
        scratch[static_cast<std::size_t>(mode)] = total;
        out.push_back(scratch);
        return;
    }
    for (int k = total; k >= 0; --k) {
        scratch[static_cast<std::size_t>(mode)] = k;
        enumerate_states(modes, total - k, scratch, mode + 1, out);
    }
}

std::vector<CountVector> states_with_total(int modes, int total) {
    std::vector<CountVector> out;
    CountVector scratch(static_cast<std::size_t>(modes), 0);
    enumerate_states(modes, total, scratch, 0, out);
    return out;
}

}  // namespace

int total_count(const CountVector& n) {
    int total = 0;
    for (int v : n) total += v;
    return total;
}

double count_factorial(const CountVector& n) {
    double prod = 1.0;
    for (int v : n) {
        if (v < 0 || v > 170) throw ScaleError("count_factorial: occupation out of range");
        prod *= factorial_table()[v];
    }
    return prod;
}

std::size_t FockBasis::Hash::operator()(const CountVector& v) const {
    std::size_t h = 1469598103934665603ull;
    for (int x : v) {
        h ^= static_cast<std::size_t>(x) + 0x9e3779b9ull;
        h *= 1099511628211ull;
    }
    return h;
}

FockBasis::FockBasis(int modes, int max_total) : modes_(modes), max_total_(max_total) {
    if (modes < 1) throw DimensionError("FockBasis: modes must be >= 1");
    if (max_total < 0) throw DimensionError("FockBasis: max_total must be >= 0");
    double size_estimate = 0.0;
    for (int n = 0; n <= max_total; ++n) size_estimate += multiset_dim(n, modes);
    if (size_estimate > static_cast<double>(kMaxBasisStates))
        throw ScaleError("FockBasis: basis would exceed the state cap");
    for (int n = 0; n <= max_total; ++n) {
        auto shell = states_with_total(modes, n);
        for (auto& s : shell) {
            index_.emplace(s, states_.size());
            states_.push_back(std::move(s));
        }
    }
}

std::size_t FockBasis::index(const CountVector& state) const {
    auto it = index_.find(state);
    if (it == index_.end()) throw DimensionError("FockBasis: state not in basis");
    return it->second;
}

bool FockBasis::contains(const CountVector& state) const {
    return index_.find(state) != index_.end();
}

double FockDistribution::prob(const CountVector& state) const {
    return probs[basis->index(state)];
}

std::string FockDistribution::to_json_string() const {
    nlohmann::json states = nlohmann::json::array();
    for (std::size_t i = 0; i < basis->size(); ++i) states.push_back(basis->state(i));
    return nlohmann::json{{"basis", std::move(states)}, {"probs", probs},
                          {"residual", residual_mass}}
        .dump();
}

Complex unitary_amplitude(const UnitaryMatrix& u, const CountVector& in, const CountVector& out) {
    check_counts(in, "unitary_amplitude");
    check_counts(out, "unitary_amplitude");
    if (static_cast<int>(in.size()) != u.dim() || static_cast<int>(out.size()) != u.dim())
        throw ShapeError("unitary_amplitude: count vectors must match the matrix dimension");
    if (total_count(in) != total_count(out)) return Complex(0.0, 0.0);
    if (total_count(in) > 2 * kMaxPhotons)
        throw ScaleError("unitary_amplitude: photon total exceeds the oracle cap");
    return repeated_permanent_amplitude(u.matrix(), in, out, {}, 0);
}

Complex k0_amplitude(const TransferMatrix& l, const CountVector& in, const CountVector& out) {
    check_counts(in, "k0_amplitude");
    check_counts(out, "k0_amplitude");
    if (static_cast<int>(in.size()) != l.dim() || static_cast<int>(out.size()) != l.dim())
        throw ShapeError("k0_amplitude: count vectors must match the matrix dimension");
    if (total_count(in) != total_count(out)) return Complex(0.0, 0.0);
    if (total_count(in) > 2 * kMaxPhotons)
        throw ScaleError("k0_amplitude: photon total exceeds the oracle cap");
    return repeated_permanent_amplitude(l.matrix(), in, out, {}, 0);
}

FockDistribution lossy_conditional_distribution(const TransferMatrix& l, const CountVector& in) {
    const int modes = l.dim();
    check_counts(in, "lossy_conditional_distribution");
    if (static_cast<int>(in.size()) != modes)
        throw ShapeError("lossy_conditional_distribution: input size mismatch");
    if (modes > kMaxModes)
        throw ScaleError("lossy_conditional_distribution: mode count exceeds the oracle cap");
    const int n_in = total_count(in);
    if (n_in > kMaxPhotons)
        throw ScaleError("lossy_conditional_distribution: photon total exceeds the oracle cap");

    const DilationMatrix dilation = unitary_dilation(l);
    // Input rows live in the system block only (auxiliary modes start in
    // vacuum), so the relevant source is the top half [L | R].
    const auto source = dilation.matrix().topRows(modes);

    auto basis = std::make_shared<FockBasis>(modes, n_in);
    std::vector<double> probs(basis->size(), 0.0);
    double total = 0.0;
    for (std::size_t ib = 0; ib < basis->size(); ++ib) {
        const CountVector& out = basis->state(ib);
        const int lost = n_in - total_count(out);
        double p = 0.0;
        for (const CountVector& aux : states_with_total(modes, lost)) {
            const Complex amp = repeated_permanent_amplitude(source, in, out, aux, modes);
            p += std::norm(amp);
        }
        probs[ib] = p;
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw DataError("lossy_conditional_distribution: probabilities do not sum to 1");
    return FockDistribution{std::move(basis), std::move(probs), 0.0};
}

JointDistribution joint_distribution(const SqueezeParam& sq, const TransferMatrix& l, int n_max) {
    const int modes = l.dim();
    if (modes > kMaxModes) throw ScaleError("joint_distribution: mode count exceeds the cap");
    if (n_max < 0 || n_max > kMaxPhotons)
        throw ScaleError("joint_distribution: photon cutoff outside the oracle cap");

    auto basis = std::make_shared<FockBasis>(modes, n_max);
    JointDistribution joint;
    joint.basis = basis;
    double enumerated = 0.0;
    for (std::size_t ia = 0; ia < basis->size(); ++ia) {
        const CountVector& alice = basis->state(ia);
        const double p_alice =
            count_record_probability(sq, modes, total_count(alice));
        const FockDistribution conditional = lossy_conditional_distribution(l, alice);
        for (std::size_t ic = 0; ic < conditional.basis->size(); ++ic) {
            const double p = p_alice * conditional.probs[ic];
            joint.pairs.emplace_back(ia, basis->index(conditional.basis->state(ic)));
            joint.probs.push_back(p);
            enumerated += p;
        }
    }
    joint.residual_mass = std::max(0.0, 1.0 - enumerated);
    return joint;
}

std::vector<double> JointDistribution::alice_marginal() const {
    std::vector<double> marginal(basis->size(), 0.0);
    for (std::size_t k = 0; k < pairs.size(); ++k) marginal[pairs[k].first] += probs[k];
    return marginal;
}

std::vector<double> JointDistribution::bob_marginal() const {
    std::vector<double> marginal(basis->size(), 0.0);
    for (std::size_t k = 0; k < pairs.size(); ++k) marginal[pairs[k].second] += probs[k];
    return marginal;
}

double rising_factorial_moment(const SqueezeParam& sq, const TransferMatrix& l,
                               const std::vector<int>& zero_modes, const CountVector& orders,
                               int n_max) {
    const int modes = l.dim();
    if (static_cast<int>(orders.size()) != modes)
        throw ShapeError("rising_factorial_moment: order vector size mismatch");
    check_counts(orders, "rising_factorial_moment");
    std::set<int> zeros(zero_modes.begin(), zero_modes.end());
    if (zeros.size() != zero_modes.size())
        throw DimensionError("rising_factorial_moment: duplicate conditioning modes");
    for (int mode : zeros)
        if (mode < 0 || mode >= modes)
            throw DimensionError("rising_factorial_moment: mode index out of range");

    const JointDistribution joint = joint_distribution(sq, l, n_max);
    double weight_sum = 0.0;
    double mass = 0.0;
    for (std::size_t k = 0; k < joint.pairs.size(); ++k) {
        const CountVector& bob = joint.basis->state(joint.pairs[k].second);
        bool accepted = true;
        for (int mode : zeros)
            if (bob[static_cast<std::size_t>(mode)] != 0) {
                accepted = false;
                break;
            }
        if (!accepted) continue;
        const CountVector& alice = joint.basis->state(joint.pairs[k].first);
        double w = 1.0;
        for (int j = 0; j < modes; ++j)
            for (int step = 1; step <= orders[static_cast<std::size_t>(j)]; ++step)
                w *= static_cast<double>(alice[static_cast<std::size_t>(j)] + step);
        weight_sum += w * joint.probs[k];
        mass += joint.probs[k];
    }
    if (mass <= 0.0) throw DataError("rising_factorial_moment: conditioning event has no mass");
    return weight_sum / mass;
}

}  // namespace lon::fock
