#include <gtest/gtest.h>

#include <random>

#include "mfc/measures.hpp"
#include "mfc/sinkhorn.hpp"
#include "test_util.hpp"

using namespace mfc;

namespace {

EmpiricalMeasure make1d(std::initializer_list<double> xs) {
  Atoms a(1, static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) a(0, i++) = x;
  return EmpiricalMeasure(a);
}

}  // namespace

TEST(W1Exact1d, SingleAtoms) {
  EXPECT_DOUBLE_EQ(w1_exact_1d(make1d({0.0}), make1d({1.0})), 1.0);
}

TEST(W1Exact1d, IdenticalMeasures) {
  auto a = make1d({0.3, -1.2, 4.0, 0.3});
  EXPECT_DOUBLE_EQ(w1_exact_1d(a, a), 0.0);
}

TEST(W1Exact1d, SortedPairing) {
  // Both couplings of two atoms enumerated by hand; the sorted order wins.
  EXPECT_DOUBLE_EQ(w1_exact_1d(make1d({0.0, 2.0}), make1d({1.0, 3.0})), 1.0);
}

TEST(W1Exact1d, RejectsBadInput) {
  EXPECT_THROW(w1_exact_1d(make1d({0.0}), make1d({0.0, 1.0})), std::invalid_argument);
  Atoms two = Atoms::Zero(2, 1);
  EXPECT_THROW(w1_exact_1d(EmpiricalMeasure(two), EmpiricalMeasure(two)), std::invalid_argument);
}

TEST(W1Assignment, MatchesHandEnumerated2d) {
  Atoms a(2, 2), b(2, 2);
  a << 0, 1, 0, 0;
  b << 0, 1, 1, 1;
  // identity pairing costs (1+1)/2 = 1; the swap costs sqrt(2).
  EXPECT_NEAR(w1_exact_assignment(EmpiricalMeasure(a), EmpiricalMeasure(b)), 1.0, 1e-14);
}

TEST(W1Assignment, ShuffleInvariance) {
  Rng rng(7);
  Atoms a = mfc::testing::random_atoms(rng, 3, 17);
  Atoms shuffled = a;
  std::vector<int> perm(17);
  for (int i = 0; i < 17; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  for (int i = 0; i < 17; ++i) shuffled.col(i) = a.col(perm[i]);
  EXPECT_NEAR(w1_exact_assignment(EmpiricalMeasure(a), EmpiricalMeasure(shuffled)), 0.0, 1e-13);
}

TEST(W1Assignment, AgreesWith1dOnRandomInstances) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 64);
    EmpiricalMeasure a(mfc::testing::random_atoms(rng, 1, n, 3.0));
    EmpiricalMeasure b(mfc::testing::random_atoms(rng, 1, n, 3.0));
    EXPECT_NEAR(w1_exact_assignment(a, b), w1_exact_1d(a, b), 1e-10);
  }
}

TEST(W1Assignment, MetricProperties) {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 12);
    const int d = 1 + static_cast<int>(rng() % 3);
    EmpiricalMeasure a(mfc::testing::random_atoms(rng, d, n));
    EmpiricalMeasure b(mfc::testing::random_atoms(rng, d, n));
    EmpiricalMeasure c(mfc::testing::random_atoms(rng, d, n));
    const double ab = w1_exact_assignment(a, b);
    const double ba = w1_exact_assignment(b, a);
    const double ac = w1_exact_assignment(a, c);
    const double cb = w1_exact_assignment(c, b);
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_LE(ab, ac + cb + 1e-12);
    EXPECT_GE(ab, 0.0);
  }
}

TEST(W1Assignment, ZeroIffSameMultiset) {
  Atoms a(1, 3), b(1, 3);
  a << 0.0, 1.0, 1.0;
  b << 1.0, 0.0, 1.0;
  EXPECT_DOUBLE_EQ(w1_exact_assignment(EmpiricalMeasure(a), EmpiricalMeasure(b)), 0.0);
  b(0, 2) = 1.5;
  EXPECT_GT(w1_exact_assignment(EmpiricalMeasure(a), EmpiricalMeasure(b)), 0.0);
}

TEST(W1Assignment, RefusesAboveCap) {
  Atoms a = Atoms::Zero(1, 513);
  a.row(0).setLinSpaced(513, 0.0, 1.0);
  EmpiricalMeasure m(a);
  EXPECT_THROW(w1_exact_assignment(m, m), std::invalid_argument);
}

TEST(SupportRadius, Values) {
  EXPECT_DOUBLE_EQ(support_radius(make1d({0.0})), 0.0);
  Atoms a(2, 1);
  a << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(support_radius(EmpiricalMeasure(a)), 5.0);
}

TEST(PushX, DropsCostateBlock) {
  Atoms x(1, 1), r(1, 1);
  x << 1.0;
  r << 2.0;
  PhaseMeasure nu(x, r);
  EmpiricalMeasure proj = push_x(nu);
  EXPECT_EQ(proj.size(), 1);
  EXPECT_DOUBLE_EQ(proj.atoms()(0, 0), 1.0);
}

TEST(PushX, CommutesWithPermutation) {
  Rng rng(3);
  Atoms x = mfc::testing::random_atoms(rng, 2, 9);
  Atoms r = mfc::testing::random_atoms(rng, 2, 9);
  std::vector<int> perm(9);
  for (int i = 0; i < 9; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  Atoms xp(2, 9), rp(2, 9);
  for (int i = 0; i < 9; ++i) {
    xp.col(i) = x.col(perm[i]);
    rp.col(i) = r.col(perm[i]);
  }
  Atoms lhs = push_x(PhaseMeasure(xp, rp)).atoms();
  Atoms rhs = push_x(PhaseMeasure(x, r)).atoms();
  for (int i = 0; i < 9; ++i)
    EXPECT_EQ((lhs.col(i) - rhs.col(perm[i])).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Sinkhorn, SelfDistanceBoundedByEntropicBias) {
  Rng rng(17);
  EmpiricalMeasure a(mfc::testing::random_atoms(rng, 2, 32));
  const double eps = 1e-2;
  SinkhornResult res = w1_sinkhorn(a, a, eps);
  EXPECT_LE(res.value, eps * std::log(32.0));
  EXPECT_GE(res.value, 0.0);
}

TEST(Sinkhorn, TwoAtomsForcedPlan) {
  // With one atom each the plan is forced, so the value is exact for any eps.
  auto a = make1d({0.0});
  auto b = make1d({1.0});
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.3, 0.1, 0.03, 0.01}) {
    SinkhornResult res = w1_sinkhorn(a, b, eps);
    EXPECT_NEAR(res.value, 1.0, 1e-9);
    EXPECT_LE(res.value, prev + 1e-6);
    prev = res.value;
  }
}

TEST(Sinkhorn, ConvergesToExactAsEpsShrinks) {
  Rng rng(19);
  EmpiricalMeasure a(mfc::testing::random_atoms(rng, 1, 16));
  EmpiricalMeasure b(mfc::testing::random_atoms(rng, 1, 16));
  const double exact = w1_exact_1d(a, b);
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.3, 0.1, 0.03, 0.01, 3e-3}) {
    SinkhornResult res = w1_sinkhorn(a, b, eps);
    EXPECT_GE(res.value, exact - 1e-12);  // entropic value never undershoots
    EXPECT_LE(res.value, prev + 1e-6);    // monotone within noise
    prev = res.value;
  }
  EXPECT_NEAR(prev, exact, 0.05);
}

TEST(Sinkhorn, CloseToExactAssignmentAtSmallEps) {
  Rng rng(23);
  EmpiricalMeasure a(mfc::testing::random_atoms(rng, 2, 64));
  EmpiricalMeasure b(mfc::testing::random_atoms(rng, 2, 64));
  const double exact = w1_exact_assignment(a, b);
  SinkhornResult res = w1_sinkhorn(a, b, 1e-3);
  EXPECT_NEAR(res.value, exact, 1e-2);
}

TEST(Sinkhorn, DifferentAtomCountsAgainstDuplicationOracle) {
  // W1 between an N-atom measure and a 2N-atom measure equals the exact
  // assignment distance after duplicating each atom of the smaller one.
  Rng rng(29);
  const int n = 12;
  EmpiricalMeasure a(mfc::testing::random_atoms(rng, 2, n));
  EmpiricalMeasure b(mfc::testing::random_atoms(rng, 2, 2 * n));
  Atoms dup(2, 2 * n);
  for (int i = 0; i < n; ++i) {
    dup.col(2 * i) = a.atoms().col(i);
    dup.col(2 * i + 1) = a.atoms().col(i);
  }
  const double exact = w1_exact_assignment(EmpiricalMeasure(dup), b);
  SinkhornResult res = w1_sinkhorn(a, b, 1e-3);
  EXPECT_NEAR(res.value, exact, 2e-2);
}

TEST(Sinkhorn, RejectsNonPositiveEps) {
  auto a = make1d({0.0});
  EXPECT_THROW(w1_sinkhorn(a, a, 0.0), std::invalid_argument);
}

TEST(Measures, InvariantsEnforced) {
  EXPECT_THROW(EmpiricalMeasure(Atoms(1, 0)), std::invalid_argument);
  Atoms x(1, 2), r(1, 3);
  x.setZero();
  r.setZero();
  EXPECT_THROW(PhaseMeasure(x, r), std::invalid_argument);
  Mat payload(1, 3);
  payload.setZero();
  EXPECT_THROW(VectorMeasure(x, payload), std::invalid_argument);
}
