#include "lon/core.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "lon/rng.hpp"

namespace lon {

namespace {

RealVector singular_values_of(const ComplexMatrix& m) {
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    return svd.singularValues();
}

}  // namespace

double max_unitarity_defect(const ComplexMatrix& u) {
    const ComplexMatrix gram = u.adjoint() * u;
    const ComplexMatrix defect =
        gram - ComplexMatrix::Identity(u.rows(), u.cols());
    return defect.cwiseAbs().maxCoeff();
}

UnitaryMatrix::UnitaryMatrix(ComplexMatrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() == 0 || entries_.rows() != entries_.cols())
        throw ShapeError("UnitaryMatrix: entries must be square and nonempty");
    const double defect = max_unitarity_defect(entries_);
    if (defect > kUnitaryTol)
        throw ShapeError("UnitaryMatrix: unitarity defect " + std::to_string(defect) +
                         " exceeds tolerance");
}

TransferMatrix::TransferMatrix(ComplexMatrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() == 0 || entries_.rows() != entries_.cols())
        throw ShapeError("TransferMatrix: entries must be square and nonempty");
    const RealVector sv = singular_values_of(entries_);
    const double top = sv(0);
    if (top > 1.0 + kSingularValueClampTol)
        throw NotSubunitaryError("TransferMatrix: largest singular value " +
                                 std::to_string(top) + " exceeds 1");
    if (top > 1.0) {
        // Numerical overshoot within the clamp window: rebuild with clamped
        // singular values.
        bool clamped = false;
        entries_ = project(entries_, &clamped).entries_;
    }
}

TransferMatrix TransferMatrix::project(const ComplexMatrix& entries, bool* clamped) {
    if (entries.rows() == 0 || entries.rows() != entries.cols())
        throw ShapeError("TransferMatrix::project: entries must be square and nonempty");
    Eigen::JacobiSVD<ComplexMatrix> svd(entries, Eigen::ComputeFullU | Eigen::ComputeFullV);
    RealVector sv = svd.singularValues();
    bool any = false;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > 1.0) {
            sv(i) = 1.0;
            any = true;
        }
    }
    if (clamped) *clamped = any;
    if (!any) return TransferMatrix(entries, Unchecked{});
    ComplexMatrix rebuilt =
        svd.matrixU() * sv.asDiagonal() * svd.matrixV().adjoint();
    return TransferMatrix(std::move(rebuilt), Unchecked{});
}

double TransferMatrix::column_power(int i) const {
    if (i < 0 || i >= dim()) throw DimensionError("column_power: mode index out of range");
    return entries_.col(i).squaredNorm();
}

DilationMatrix::DilationMatrix(ComplexMatrix entries, int system_dim)
    : entries_(std::move(entries)), system_dim_(system_dim) {
    if (entries_.rows() != 2 * system_dim_ || entries_.cols() != 2 * system_dim_)
        throw ShapeError("DilationMatrix: entries must be 2M x 2M");
}

Eigen::Block<const ComplexMatrix> DilationMatrix::system_block() const {
    return entries_.block(0, 0, system_dim_, system_dim_);
}
Eigen::Block<const ComplexMatrix> DilationMatrix::loss_block() const {
    return entries_.block(0, system_dim_, system_dim_, system_dim_);
}
Eigen::Block<const ComplexMatrix> DilationMatrix::feed_block() const {
    return entries_.block(system_dim_, 0, system_dim_, system_dim_);
}
Eigen::Block<const ComplexMatrix> DilationMatrix::auxiliary_block() const {
    return entries_.block(system_dim_, system_dim_, system_dim_, system_dim_);
}

UnitaryMatrix haar_random_unitary(int dim, std::uint64_t seed) {
    if (dim < 1) throw DimensionError("haar_random_unitary: dim must be >= 1");
    RngStream rng(seed);
    ComplexMatrix ginibre(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) ginibre(i, j) = rng.complex_normal();
    Eigen::HouseholderQR<ComplexMatrix> qr(ginibre);
    ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(dim, dim);
    const ComplexMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Fix the factorization's phase freedom so the R diagonal is positive;
    // this is what makes QR of a Ginibre matrix Haar-distributed.
    for (int j = 0; j < dim; ++j) {
        const Complex d = r(j, j);
        const double mag = std::abs(d);
        if (mag > 0.0) q.col(j) *= d / mag;
    }
    return UnitaryMatrix(std::move(q));
}

Complex permanent(const ComplexMatrix& a) {
    if (a.rows() != a.cols()) throw ShapeError("permanent: matrix must be square");
    const int n = static_cast<int>(a.rows());
    if (n == 0) return Complex(1.0, 0.0);
    if (n > 30) throw ScaleError("permanent: dimension too large for exact evaluation");

    // Ryser with Gray-code subset updates:
    // per(A) = (-1)^n sum_{S != 0} (-1)^|S| prod_i sum_{j in S} A_ij.
    std::vector<Complex> row_sum(static_cast<std::size_t>(n), Complex(0.0, 0.0));
    Complex total(0.0, 0.0);
    std::uint64_t prev_gray = 0;
    const std::uint64_t subsets = std::uint64_t(1) << n;
    for (std::uint64_t k = 1; k < subsets; ++k) {
        const std::uint64_t gray = k ^ (k >> 1);
        const std::uint64_t changed = gray ^ prev_gray;
        const int j = std::countr_zero(changed);
        const double direction = (gray & changed) ? 1.0 : -1.0;
        for (int i = 0; i < n; ++i) row_sum[static_cast<std::size_t>(i)] += direction * a(i, j);
        Complex prod(1.0, 0.0);
        for (int i = 0; i < n; ++i) prod *= row_sum[static_cast<std::size_t>(i)];
        const int sign = ((n - std::popcount(gray)) % 2 == 0) ? 1 : -1;
        total += static_cast<double>(sign) * prod;
        prev_gray = gray;
    }
    return total;
}

PolarParts polar_decompose(const TransferMatrix& l) {
    const ComplexMatrix& m = l.matrix();
    Eigen::JacobiSVD<ComplexMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    RealVector t = svd.singularValues();
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (t(i) > 1.0 + kSingularValueClampTol)
            throw NotSubunitaryError("polar_decompose: singular value exceeds 1");
        t(i) = std::clamp(t(i), 0.0, 1.0);
    }
    const ComplexMatrix& w = svd.matrixU();
    const ComplexMatrix& v_right = svd.matrixV();
    UnitaryMatrix lossless(ComplexMatrix(w * v_right.adjoint()));
    ComplexMatrix loss_in = w * t.asDiagonal() * w.adjoint();
    ComplexMatrix loss_out = v_right * t.asDiagonal() * v_right.adjoint();
    return PolarParts{std::move(lossless), std::move(loss_in), std::move(loss_out),
                      std::move(t), UnitaryMatrix(ComplexMatrix(w))};
}

DilationMatrix unitary_dilation(const TransferMatrix& l) {
    const int m = l.dim();
    const ComplexMatrix& mat = l.matrix();
    Eigen::JacobiSVD<ComplexMatrix> svd(mat, Eigen::ComputeFullU | Eigen::ComputeFullV);
    RealVector t = svd.singularValues();
    RealVector c(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (t(i) > 1.0 + kSingularValueClampTol)
            throw NotSubunitaryError("unitary_dilation: input is not subunitary");
        double ti = std::clamp(t(i), 0.0, 1.0);
        // Snap to the endpoints so lossless inputs get an exactly zero loss
        // block instead of sqrt(eps) leakage.
        if (ti > 1.0 - 1e-12) ti = 1.0;
        if (ti < 1e-12) ti = 0.0;
        t(i) = ti;
        c(i) = std::sqrt(1.0 - ti * ti);
    }
    const ComplexMatrix& p = svd.matrixU();
    const ComplexMatrix& q = svd.matrixV();

    // [ L            P c P^dag ]
    // [ -Q c Q^dag   Q t P^dag ]  is unitary because the 2x2 blocks of
    // diag(t) and diag(c) commute and t^2 + c^2 = 1.
    ComplexMatrix full(2 * m, 2 * m);
    full.block(0, 0, m, m) = mat;
    full.block(0, m, m, m) = p * c.asDiagonal() * p.adjoint();
    full.block(m, 0, m, m) = -(q * c.asDiagonal() * q.adjoint());
    full.block(m, m, m, m) = q * t.asDiagonal() * p.adjoint();
    return DilationMatrix(std::move(full), m);
}

double loss_measure(const TransferMatrix& l) {
    const double trace = (l.matrix().adjoint() * l.matrix()).trace().real();
    const double value = 1.0 - trace / l.dim();
    return std::clamp(value, 0.0, 1.0);
}

PhaseNormalization normalize_phases(const TransferMatrix& l) {
    constexpr double kPhaseTol = 1e-9;
    ComplexMatrix m = l.matrix();
    std::vector<int> undefined;
    for (int i = 0; i < l.dim(); ++i) {
        const Complex d = m(i, i);
        const double mag = std::abs(d);
        if (mag < kPhaseTol) {
            undefined.push_back(i);
            continue;
        }
        m.col(i) *= std::conj(d) / mag;
        m(i, i) = Complex(mag, 0.0);  // kill the residual imaginary part
    }
    return PhaseNormalization{TransferMatrix(std::move(m)), std::move(undefined)};
}

// --- matrix file format -----------------------------------------------------

namespace {

nlohmann::json matrix_to_json(const ComplexMatrix& m) {
    nlohmann::json entries = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back({m(i, j).real(), m(i, j).imag()});
        entries.push_back(std::move(row));
    }
    return nlohmann::json{{"dim", m.rows()}, {"entries", std::move(entries)}};
}

ComplexMatrix matrix_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("dim") || !j.contains("entries"))
        throw DataError("matrix file: expected object with \"dim\" and \"entries\"");
    const int dim = j.at("dim").get<int>();
    if (dim < 1) throw DataError("matrix file: dim must be >= 1");
    const auto& entries = j.at("entries");
    if (!entries.is_array() || static_cast<int>(entries.size()) != dim)
        throw DataError("matrix file: entries must have dim rows");
    ComplexMatrix m(dim, dim);
    for (int i = 0; i < dim; ++i) {
        const auto& row = entries.at(i);
        if (!row.is_array() || static_cast<int>(row.size()) != dim)
            throw DataError("matrix file: row has wrong length");
        for (int jcol = 0; jcol < dim; ++jcol) {
            const auto& cell = row.at(jcol);
            if (!cell.is_array() || cell.size() != 2)
                throw DataError("matrix file: entry must be [re, im]");
            m(i, jcol) = Complex(cell.at(0).get<double>(), cell.at(1).get<double>());
        }
    }
    return m;
}

}  // namespace

std::string matrix_to_json_string(const ComplexMatrix& m) {
    return matrix_to_json(m).dump();
}

void save_matrix_json(const std::string& path, const ComplexMatrix& m) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open matrix file for writing: " + path);
    out << matrix_to_json(m).dump() << '\n';
}

ComplexMatrix load_matrix_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open matrix file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("matrix file " + path + ": " + e.what());
    }
    return matrix_from_json(j);
}

TransferMatrix load_transfer_matrix(const std::string& path) {
    return TransferMatrix(load_matrix_json(path));
}

UnitaryMatrix load_unitary_matrix(const std::string& path) {
    return UnitaryMatrix(load_matrix_json(path));
}

}  // namespace lon
