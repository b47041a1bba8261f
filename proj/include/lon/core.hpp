#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lon {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NotSubunitaryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
/// Problem size exceeds what the exact Fock-space machinery can handle.
struct ScaleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
/// Input data is malformed or insufficient for the requested computation.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
/// An experiment configuration is malformed or inconsistent.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kUnitaryTol = 1e-12;
inline constexpr double kSubunitaryTol = 1e-12;
// Singular values within this window above 1 are clamped; beyond it we refuse.
inline constexpr double kSingularValueClampTol = 1e-9;

/// Square complex matrix verified unitary on construction.
class UnitaryMatrix {
public:
    explicit UnitaryMatrix(ComplexMatrix entries);

    int dim() const { return static_cast<int>(entries_.rows()); }
    const ComplexMatrix& matrix() const { return entries_; }

private:
    ComplexMatrix entries_;
};

/// Transfer matrix of a (possibly lossy) linear-optical network: a square
/// contraction, i.e. all singular values in [0, 1].  Values within
/// kSingularValueClampTol above 1 are clamped on construction; larger
/// violations raise NotSubunitaryError.
class TransferMatrix {
public:
    explicit TransferMatrix(ComplexMatrix entries);
    explicit TransferMatrix(const UnitaryMatrix& u) : entries_(u.matrix()) {}

    /// Nearest contraction to `entries` (singular values clamped to [0,1]);
    /// use for noisy estimates that may overshoot the unit ball.
    static TransferMatrix project(const ComplexMatrix& entries, bool* clamped = nullptr);

    int dim() const { return static_cast<int>(entries_.rows()); }
    const ComplexMatrix& matrix() const { return entries_; }

    /// Squared length of column i, the transmission seen by output mode i.
    double column_power(int i) const;

private:
    struct Unchecked {};
    TransferMatrix(ComplexMatrix entries, Unchecked) : entries_(std::move(entries)) {}

    ComplexMatrix entries_;
};

/// L = loss_in * lossless = lossless * loss_out, with
/// loss_in = W diag(t) W^dag and singular values t sorted descending.
struct PolarParts {
    UnitaryMatrix lossless;       // V
    ComplexMatrix loss_in;        // sqrt(L L^dag)
    ComplexMatrix loss_out;       // sqrt(L^dag L)
    RealVector singular_values;   // t, descending, in [0, 1]
    UnitaryMatrix loss_basis;     // W
};

/// Unitary embedding of a contraction: the 2M x 2M lossless network whose
/// upper-left block is L and whose auxiliary modes absorb the lost photons.
class DilationMatrix {
public:
    DilationMatrix(ComplexMatrix entries, int system_dim);

    int system_dim() const { return system_dim_; }
    int dim() const { return 2 * system_dim_; }
    const ComplexMatrix& matrix() const { return entries_; }

    Eigen::Block<const ComplexMatrix> system_block() const;     // L
    Eigen::Block<const ComplexMatrix> loss_block() const;       // R = sqrt(I - L L^dag)
    Eigen::Block<const ComplexMatrix> feed_block() const;       // S
    Eigen::Block<const ComplexMatrix> auxiliary_block() const;  // L~

private:
    ComplexMatrix entries_;
    int system_dim_;
};

/// Haar-distributed random unitary; deterministic for a fixed seed.
UnitaryMatrix haar_random_unitary(int dim, std::uint64_t seed);

/// Permanent of a square complex matrix, Ryser's formula with Gray-code
/// updates, O(2^n n).  per(empty) = 1.
Complex permanent(const ComplexMatrix& a);

PolarParts polar_decompose(const TransferMatrix& l);

DilationMatrix unitary_dilation(const TransferMatrix& l);

/// Average loss per mode, 1 - tr(L^dag L)/M, in [0, 1].
double loss_measure(const TransferMatrix& l);

struct PhaseNormalization {
    TransferMatrix matrix;
    /// Columns whose diagonal entry was too small to define a phase and were
    /// left untouched.
    std::vector<int> undefined_columns;
};

/// Multiplies each column by a unit phase so every diagonal entry is real and
/// nonnegative.  Idempotent.
PhaseNormalization normalize_phases(const TransferMatrix& l);

double max_unitarity_defect(const ComplexMatrix& u);

// --- matrix file format -----------------------------------------------------
//
// JSON object {"dim": M, "entries": [[[re, im], ...], ...]} row-major.

std::string matrix_to_json_string(const ComplexMatrix& m);
void save_matrix_json(const std::string& path, const ComplexMatrix& m);
ComplexMatrix load_matrix_json(const std::string& path);
/// Loads and validates subunitarity.
TransferMatrix load_transfer_matrix(const std::string& path);
/// Loads and validates unitarity.
UnitaryMatrix load_unitary_matrix(const std::string& path);

}  // namespace lon
