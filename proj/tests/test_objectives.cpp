#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "aar/objectives.hpp"
#include "oracles.hpp"

using aar::DenseMatrix;
using aar::Vector;

namespace {

aar::Dataset one_sample(double u0, double u1, double label) {
    aar::Dataset d;
    d.features.resize(1, 2);
    d.features << u0, u1;
    d.labels = Vector::Constant(1, label);
    return d;
}

double rel_err(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1e-12, b.norm()); }

}  // namespace

TEST(Quadratic, HandValues) {
    const auto q = aar::make_quadratic(DenseMatrix::Identity(2, 2), Vector::Zero(2), Vector::Zero(2));
    const Vector x = Vector::Ones(2);
    EXPECT_DOUBLE_EQ(q.value(x), 1.0);
    EXPECT_EQ(q.gradient(x), x);

    const auto d = aar::make_quadratic(Eigen::Vector2d(1, 4).asDiagonal().toDenseMatrix(), Vector::Zero(2),
                                       Vector::Zero(2));
    EXPECT_DOUBLE_EQ(d.lipschitz, 4.0);
}

TEST(Quadratic, MinimizerFromDirectSolve) {
    oracle::Rng rng(4);
    const DenseMatrix B = rng.spd(5, 0.5, 3.0);
    const Vector b = rng.vec(5), s = rng.vec(5);
    const auto q = aar::make_quadratic(B, b, s);
    const Vector xstar = s + B.partialPivLu().solve(b);
    EXPECT_LE(q.gradient(xstar).norm(), 1e-10);
    const Vector x = rng.vec(5);
    EXPECT_LE((q.gradient(x) - (B * (x - s) - b)).norm(), 1e-14 * (1.0 + x.norm()));
}

TEST(Quadratic, RejectsNonSymmetricOrIndefinite) {
    DenseMatrix a(2, 2);
    a << 1, 2, 0, 1;
    EXPECT_THROW(aar::make_quadratic(a, Vector::Zero(2), Vector::Zero(2)), aar::InputError);
    EXPECT_THROW(aar::make_quadratic(Eigen::Vector2d(1, -1).asDiagonal().toDenseMatrix(), Vector::Zero(2),
                                     Vector::Zero(2)),
                 aar::InputError);
    EXPECT_THROW(aar::make_quadratic(DenseMatrix::Identity(2, 2), Vector::Zero(3), Vector::Zero(2)), aar::InputError);
}

TEST(StudentT, HandValues) {
    const auto zero = aar::make_student_t(one_sample(1, 0, 0), 20.0, 0.0);
    EXPECT_DOUBLE_EQ(zero.value(Vector::Zero(2)), 0.0);
    EXPECT_EQ(zero.gradient(Vector::Zero(2)), Vector::Zero(2));

    const auto st = aar::make_student_t(one_sample(3, 4, 0), 20.0, 0.01);
    EXPECT_NEAR(st.lipschitz, 2.51, 1e-12);
}

TEST(Nls, HandValues) {
    const auto nls = aar::make_nls(one_sample(1, 2, 1), 0.0);
    EXPECT_DOUBLE_EQ(nls.value(Vector::Zero(2)), 0.25);
    const auto l = aar::make_nls(one_sample(3, 4, 0), 0.1);
    EXPECT_NEAR(l.lipschitz, 25.0 / 6.0 + 0.1, 1e-12);
}

TEST(Objectives, GradientsMatchFiniteDifferences) {
    oracle::Rng rng(8);
    const aar::Dataset data = oracle::dataset(rng, 20, 6);
    for (const auto& obj : {aar::make_student_t(data), aar::make_nls(data)}) {
        for (int trial = 0; trial < 5; ++trial) {
            const Vector x = rng.vec(6);
            EXPECT_LE(rel_err(obj.gradient(x), oracle::fd_gradient(obj, x)), 1e-5) << obj.name;
        }
    }
}

TEST(Objectives, HessiansMatchFiniteDifferences) {
    oracle::Rng rng(12);
    const aar::Dataset data = oracle::dataset(rng, 20, 5);
    for (const auto& obj : {aar::make_student_t(data), aar::make_nls(data)}) {
        const Vector x = 0.5 * rng.vec(5);
        const DenseMatrix fd = oracle::fd_hessian(obj, x);
        EXPECT_LE((obj.hessian(x) - fd).norm(), 1e-6 * std::max(1.0, fd.norm())) << obj.name;
    }
}

TEST(Objectives, DescentLemmaAndLowerBound) {
    oracle::Rng rng(21);
    const aar::Dataset data = oracle::dataset(rng, 30, 4);
    for (const auto& obj : {aar::make_student_t(data), aar::make_nls(data)}) {
        for (int pair = 0; pair < 100; ++pair) {
            const Vector x = 3.0 * rng.vec(4), y = 3.0 * rng.vec(4);
            const double upper = obj.value(x) + obj.gradient(x).dot(y - x) + 0.5 * obj.lipschitz * (y - x).squaredNorm();
            EXPECT_LE(obj.value(y), upper + 1e-9) << obj.name;
            EXPECT_GE(obj.value(x), 0.0);
        }
    }
}

TEST(Objectives, LipschitzBoundsSampledSecants) {
    oracle::Rng rng(31);
    const aar::Dataset data = oracle::dataset(rng, 25, 5);
    for (const auto& obj : {aar::make_student_t(data), aar::make_nls(data)}) {
        for (int pair = 0; pair < 100; ++pair) {
            const Vector x = 2.0 * rng.vec(5), y = x + 0.3 * rng.vec(5);
            const double ratio = (obj.gradient(x) - obj.gradient(y)).norm() / (x - y).norm();
            EXPECT_LE(ratio, obj.lipschitz * (1.0 + 1e-12)) << obj.name;
        }
    }
}

TEST(Objectives, SigmoidStableForLargeArguments) {
    const auto nls = aar::make_nls(one_sample(1, 0, 1), 0.0);
    for (double t : {-800.0, -40.0, 40.0, 800.0}) {
        const Vector x = Eigen::Vector2d(t, 0.0);
        EXPECT_TRUE(std::isfinite(nls.value(x)));
        EXPECT_TRUE(nls.gradient(x).allFinite());
    }
}

TEST(Objectives, EmptyDatasetRejected) {
    aar::Dataset empty;
    EXPECT_THROW(aar::make_student_t(empty), aar::InputError);
    EXPECT_THROW(aar::make_nls(empty), aar::InputError);
}

TEST(SynthDataset, Deterministic) {
    const auto a = aar::synth_dataset(4, 3, 7);
    const auto b = aar::synth_dataset(4, 3, 7);
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_NE(aar::synth_dataset(4, 3, 8).features, a.features);
}

TEST(SynthDataset, RoughlyBalanced) {
    const auto d = aar::synth_dataset(100, 10, 1);
    const double ones = d.labels.sum();
    EXPECT_GE(ones, 20.0);
    EXPECT_LE(ones, 80.0);
}

TEST(SynthDataset, SingleSample) {
    const auto d = aar::synth_dataset(1, 1, 99);
    ASSERT_EQ(d.samples(), 1);
    EXPECT_TRUE(d.labels(0) == 0.0 || d.labels(0) == 1.0);
    EXPECT_THROW(aar::synth_dataset(0, 3, 1), aar::InputError);
}

TEST(Csv, ParsesRows) {
    std::istringstream in("1,0.5,2.0\n0,1.0,-1.0");
    const auto d = aar::parse_csv(in);
    ASSERT_EQ(d.samples(), 2);
    ASSERT_EQ(d.dim(), 2);
    EXPECT_DOUBLE_EQ(d.features(1, 1), -1.0);
    EXPECT_DOUBLE_EQ(d.labels(0), 1.0);
}

TEST(Csv, AcceptsCrlfAndBlankLines) {
    std::istringstream in("0, 1.5 ,2\r\n\r\n1,3,4\r\n");
    const auto d = aar::parse_csv(in);
    EXPECT_EQ(d.samples(), 2);
    EXPECT_DOUBLE_EQ(d.features(0, 0), 1.5);
}

TEST(Csv, ErrorsNameTheLine) {
    auto line_of = [](const std::string& text) {
        std::istringstream in(text);
        try {
            aar::parse_csv(in);
        } catch (const aar::ParseError& e) {
            return e.line();
        }
        return std::size_t{0};
    };
    EXPECT_EQ(line_of(""), 1u);
    EXPECT_EQ(line_of("1,2\n2,3\n"), 2u);
    EXPECT_EQ(line_of("1,2,3\n0,4\n"), 2u);
    EXPECT_EQ(line_of("1,2\n0,abc\n"), 2u);
    EXPECT_EQ(line_of("1\n"), 1u);
}

TEST(Csv, LoadFromFile) {
    const std::string path = ::testing::TempDir() + "aar_dataset.csv";
    {
        std::ofstream out(path);
        out << "1,0.5,2.0\n0,1.0,-1.0\n";
    }
    EXPECT_EQ(aar::load_csv(path).samples(), 2);
    EXPECT_THROW(aar::load_csv(path + ".missing"), aar::InputError);
}
