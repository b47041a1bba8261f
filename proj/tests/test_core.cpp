#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "lon/core.hpp"
#include "lon/rng.hpp"
#include "test_helpers.hpp"

using namespace lon;

namespace {

/// Brute-force permanent by full permutation expansion; the independent
/// oracle for the Ryser implementation.
Complex permanent_naive(const ComplexMatrix& a) {
    const int n = static_cast<int>(a.rows());
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Complex total(0.0, 0.0);
    do {
        Complex prod(1.0, 0.0);
        for (int i = 0; i < n; ++i) prod *= a(i, perm[static_cast<std::size_t>(i)]);
        total += prod;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return total;
}

ComplexMatrix random_complex(int n, std::uint64_t seed) {
    RngStream rng(seed);
    ComplexMatrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = rng.complex_normal();
    return a;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("haar unitary: dimension one has unit modulus") {
    for (std::uint64_t seed : {0ull, 1ull, 42ull}) {
        UnitaryMatrix u = haar_random_unitary(1, seed);
        CHECK(std::abs(std::abs(u.matrix()(0, 0)) - 1.0) < 1e-14);
    }
}

TEST_CASE("haar unitary: unitarity within tolerance") {
    UnitaryMatrix u = haar_random_unitary(4, 7);
    CHECK(max_unitarity_defect(u.matrix()) < 1e-12);
}

TEST_CASE("haar unitary: reproducible and seed sensitive") {
    UnitaryMatrix a = haar_random_unitary(5, 123);
    UnitaryMatrix b = haar_random_unitary(5, 123);
    UnitaryMatrix c = haar_random_unitary(5, 124);
    CHECK((a.matrix() - b.matrix()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.matrix() - c.matrix()).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("haar unitary: rejects zero dimension") {
    CHECK_THROWS_AS(haar_random_unitary(0, 1), DimensionError);
}

TEST_CASE("haar unitary: first-entry power matches the flat-measure mean") {
    const int modes = 4;
    const int samples = 10000;
    double sum = 0.0;
    for (int s = 0; s < samples; ++s)
        sum += std::norm(haar_random_unitary(modes, static_cast<std::uint64_t>(s)).matrix()(0, 0));
    const double mean = sum / samples;
    // |U_00|^2 is Beta(1, M-1): variance (M-1)/(M^2 (M+1)).
    const double sigma = std::sqrt((modes - 1.0) / (modes * modes * (modes + 1.0)) / samples);
    CHECK(std::abs(mean - 1.0 / modes) < 4.0 * sigma);
}

TEST_CASE("permanent: identity and 2x2 closed form") {
    CHECK(std::abs(permanent(ComplexMatrix::Identity(3, 3)) - Complex(1.0, 0.0)) < 1e-15);
    ComplexMatrix a(2, 2);
    a << Complex(1, 1), Complex(2, 0), Complex(0, 3), Complex(1, -1);
    const Complex expected = a(0, 0) * a(1, 1) + a(0, 1) * a(1, 0);
    CHECK(std::abs(permanent(a) - expected) < 1e-14);
}

TEST_CASE("permanent: empty matrix is one, non-square rejected") {
    CHECK(permanent(ComplexMatrix(0, 0)) == Complex(1.0, 0.0));
    CHECK_THROWS_AS(permanent(ComplexMatrix(2, 3)), ShapeError);
}

TEST_CASE("permanent: matches permutation expansion up to n = 6") {
    for (int n = 1; n <= 6; ++n) {
        const ComplexMatrix a = random_complex(n, 90 + static_cast<std::uint64_t>(n));
        const Complex ryser = permanent(a);
        const Complex naive = permanent_naive(a);
        CHECK(std::abs(ryser - naive) <= 1e-10 * std::max(1.0, std::abs(naive)));
    }
}

TEST_CASE("polar decomposition: unitary input") {
    UnitaryMatrix u = haar_random_unitary(3, 11);
    PolarParts parts = polar_decompose(TransferMatrix(u));
    CHECK((parts.singular_values.array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(test::max_abs_diff(parts.lossless.matrix(), u.matrix()) < 1e-12);
}

TEST_CASE("polar decomposition: uniform loss") {
    UnitaryMatrix u = haar_random_unitary(3, 12);
    const double t = 0.6;
    PolarParts parts = polar_decompose(TransferMatrix(ComplexMatrix(t * u.matrix())));
    CHECK((parts.singular_values.array() - t).abs().maxCoeff() < 1e-12);
    CHECK(test::max_abs_diff(parts.lossless.matrix(), u.matrix()) < 1e-10);
}

TEST_CASE("polar decomposition: constructed singular values recovered") {
    UnitaryMatrix w = haar_random_unitary(3, 13);
    UnitaryMatrix v = haar_random_unitary(3, 14);
    RealVector t(3);
    t << 0.9, 0.7, 0.5;
    TransferMatrix l(ComplexMatrix(w.matrix() * t.asDiagonal() * v.matrix()));
    PolarParts parts = polar_decompose(l);
    CHECK((parts.singular_values - t).cwiseAbs().maxCoeff() < 1e-10);
    const ComplexMatrix reassembled = parts.loss_basis.matrix() *
                                      parts.singular_values.asDiagonal() *
                                      parts.loss_basis.matrix().adjoint() *
                                      parts.lossless.matrix();
    CHECK(test::max_abs_diff(reassembled, l.matrix()) < 1e-10);
    CHECK(test::max_abs_diff(parts.loss_in * parts.lossless.matrix(), l.matrix()) < 1e-10);
    CHECK(test::max_abs_diff(parts.lossless.matrix() * parts.loss_out, l.matrix()) < 1e-10);
}

TEST_CASE("subunitarity is enforced") {
    UnitaryMatrix u = haar_random_unitary(2, 15);
    CHECK_THROWS_AS(TransferMatrix(ComplexMatrix(1.1 * u.matrix())), NotSubunitaryError);
    // within the clamp window: accepted and pulled back onto the unit ball
    TransferMatrix clamped(ComplexMatrix((1.0 + 1e-10) * u.matrix()));
    Eigen::JacobiSVD<ComplexMatrix> svd(clamped.matrix());
    CHECK(svd.singularValues().maxCoeff() <= 1.0 + 1e-12);
}

TEST_CASE("dilation: lossless input gives a zero loss block") {
    UnitaryMatrix u = haar_random_unitary(3, 16);
    DilationMatrix d = unitary_dilation(TransferMatrix(u));
    CHECK(d.loss_block().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(max_unitarity_defect(d.matrix()) < 1e-12);
}

TEST_CASE("dilation: scalar loss") {
    const double t = 0.8;
    TransferMatrix l(ComplexMatrix(t * ComplexMatrix::Identity(2, 2)));
    DilationMatrix d = unitary_dilation(l);
    const ComplexMatrix expected = std::sqrt(1 - t * t) * ComplexMatrix::Identity(2, 2);
    CHECK(test::max_abs_diff(ComplexMatrix(d.loss_block()), expected) < 1e-12);
}

TEST_CASE("dilation: random subunitary is unitary with exact corner") {
    TransferMatrix l = test::random_lossy(3, 17, 0.3, 1.0);
    DilationMatrix d = unitary_dilation(l);
    CHECK(max_unitarity_defect(d.matrix()) < 1e-12);
    CHECK(test::max_abs_diff(ComplexMatrix(d.system_block()), l.matrix()) == 0.0);
}

TEST_CASE("loss measure") {
    UnitaryMatrix u = haar_random_unitary(4, 18);
    CHECK(loss_measure(TransferMatrix(u)) < 1e-12);
    const double t = 0.85;
    CHECK(loss_measure(TransferMatrix(ComplexMatrix(t * u.matrix()))) ==
          doctest::Approx(1 - t * t).epsilon(1e-12));
    ComplexMatrix two(2, 2);
    two << 1.0, 0.0, 0.0, std::sqrt(0.5);
    CHECK(loss_measure(TransferMatrix(std::move(two))) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("normalize phases: round trip and idempotence") {
    TransferMatrix l = test::random_lossy(3, 19, 0.5, 1.0);
    PhaseNormalization base = normalize_phases(l);
    CHECK(base.undefined_columns.empty());
    for (int i = 0; i < 3; ++i) {
        CHECK(base.matrix.matrix()(i, i).imag() == 0.0);
        CHECK(base.matrix.matrix()(i, i).real() >= 0.0);
    }
    // disturb one column with a unit phase; normalization restores it
    ComplexMatrix disturbed = base.matrix.matrix();
    disturbed.col(1) *= std::polar(1.0, 3.141592653589793 / 3.0);
    PhaseNormalization restored = normalize_phases(TransferMatrix(std::move(disturbed)));
    CHECK(test::max_abs_diff(restored.matrix.matrix(), base.matrix.matrix()) < 1e-12);
    // idempotent
    PhaseNormalization again = normalize_phases(base.matrix);
    CHECK(test::max_abs_diff(again.matrix.matrix(), base.matrix.matrix()) == 0.0);
}

TEST_CASE("normalize phases: zero diagonal is flagged and left alone") {
    ComplexMatrix m(2, 2);
    m << 0.0, 1.0, Complex(0.0, 1.0), 0.0;
    PhaseNormalization result = normalize_phases(TransferMatrix(std::move(m)));
    REQUIRE(result.undefined_columns.size() == 2);
    CHECK(result.matrix.matrix()(1, 0) == Complex(0.0, 1.0));
}

TEST_CASE("matrix json: round trip and validation") {
    TransferMatrix l = test::random_lossy(3, 20, 0.4, 1.0);
    const std::string path = "core_roundtrip_matrix.json";
    save_matrix_json(path, l.matrix());
    TransferMatrix back = load_transfer_matrix(path);
    CHECK(test::max_abs_diff(back.matrix(), l.matrix()) < 1e-15);

    save_matrix_json(path, ComplexMatrix(1.5 * haar_random_unitary(3, 21).matrix()));
    CHECK_THROWS_AS(load_transfer_matrix(path), NotSubunitaryError);
    std::remove(path.c_str());
}

TEST_CASE("matrix json: malformed input rejected") {
    const std::string path = "core_bad_matrix.json";
    {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fputs("{\"dim\": 2, \"entries\": [[[1,0]]]}", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_matrix_json(path), DataError);
    std::remove(path.c_str());
}

}  // TEST_SUITE("core")
