// Copyright 2026 The protomatch Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "protomatch/etf_bank.hpp"

#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace protomatch {
namespace {

Eigen::MatrixXd analytic_gram(int c) {
  const int k = 2 * c + 1;
  const double off = -1.0 / (2.0 * c);
  Eigen::MatrixXd g = Eigen::MatrixXd::Constant(k, k, off);
  g.diagonal().setOnes();
  return g;
}

class EtfGeometry : public ::testing::TestWithParam<std::tuple<int, int>> {};

TEST_P(EtfGeometry, GramMatchesSimplexFrame) {
  const auto [c, extra] = GetParam();
  const auto bank = build_etf(c, 2 * c + 1 + extra, 11);
  const Eigen::MatrixXd diff = bank.gram() - analytic_gram(c);
  EXPECT_LE(diff.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(bank.prototypes().rowwise().sum().norm(), 1e-6);
  for (int k = 0; k < bank.num_prototypes(); ++k) {
    EXPECT_NEAR(bank.column(k).norm(), 1.0, 1e-6);
  }
}

INSTANTIATE_TEST_SUITE_P(AllSmallC, EtfGeometry,
                         ::testing::Combine(::testing::Range(1, 9), ::testing::Values(0, 3)));

TEST(EtfBank, WorkedExamples) {
  const auto b5 = build_etf(2, 5, 0);
  EXPECT_EQ(b5.num_prototypes(), 5);
  const auto g5 = b5.gram();
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(g5(i, j), i == j ? 1.0 : -0.25, 1e-12);
  }
  const auto g3 = build_etf(1, 3, 7).gram();
  EXPECT_NEAR(g3(0, 1), -0.5, 1e-12);
  EXPECT_NEAR(g3(1, 2), -0.5, 1e-12);
  EXPECT_NEAR(g3(0, 2), -0.5, 1e-12);
}

TEST(EtfBank, RejectsBadShapes) {
  EXPECT_THROW(build_etf(3, 4, 0), DimensionError);
  EXPECT_THROW(build_etf(0, 5, 0), ArgumentError);
  EXPECT_THROW(build_etf(-1, 5, 0), ArgumentError);
}

TEST(EtfBank, SeedChangesCoordinatesNotGeometry) {
  const auto a = build_etf(2, 5, 0);
  const auto b = build_etf(2, 5, 1);
  EXPECT_GT((a.prototypes() - b.prototypes()).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LE((a.gram() - b.gram()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EtfBank, DeterministicBitwise) {
  EXPECT_TRUE(build_etf(5, 13, 42) == build_etf(5, 13, 42));
}

TEST(EtfBank, RotationInvariance) {
  std::mt19937_64 rng(3);
  const auto bank = build_etf(4, 12, 5);
  Eigen::MatrixXd g(12, 12);
  std::normal_distribution<double> n;
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = n(rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  const Eigen::MatrixXd rotated = q * bank.prototypes();
  EXPECT_LE((rotated.transpose() * rotated - bank.gram()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EtfBank, IndexMapIsBijection) {
  const int c = 4;
  const auto bank = build_etf(c, 9, 0);
  std::set<int> seen;
  for (int k = 0; k < c; ++k) {
    seen.insert(bank.index_of(k, Domain::kSource));
    seen.insert(bank.index_of(k, Domain::kTarget));
  }
  seen.insert(bank.index_of(c, Domain::kTarget));
  EXPECT_EQ(seen.size(), static_cast<std::size_t>(bank.num_prototypes()));
  EXPECT_EQ(*seen.begin(), 0);
  EXPECT_EQ(*seen.rbegin(), bank.num_prototypes() - 1);
}

TEST(EtfBank, PrototypeLookup) {
  const auto bank = build_etf(2, 5, 0);
  EXPECT_NEAR(bank.prototype_of(0, Domain::kSource).norm(), 1.0, 1e-12);
  EXPECT_EQ(bank.prototype_of(2, Domain::kTarget), Eigen::VectorXd(bank.column(4)));
  EXPECT_THROW(bank.prototype_of(2, Domain::kSource), LookupError);
  EXPECT_THROW(bank.prototype_of(3, Domain::kTarget), LookupError);
  EXPECT_THROW(bank.prototype_of(-1, Domain::kSource), LookupError);
}

TEST(EtfBank, CosinePair) {
  const int c = 3;
  const auto bank = build_etf(c, 7, 2);
  for (int k = 0; k < c; ++k) {
    const auto [ds, dt] = cosine_pair(bank, bank.prototype_of(k, Domain::kSource), k);
    EXPECT_NEAR(ds, 1.0, 1e-12);
    EXPECT_NEAR(dt, -1.0 / (2 * c), 1e-12);
    const Eigen::VectorXd mid =
        bank.prototype_of(k, Domain::kSource) + bank.prototype_of(k, Domain::kTarget);
    const auto [ms, mt] = cosine_pair(bank, 2.5 * mid, k);
    EXPECT_NEAR(ms, mt, 1e-12);
  }
  EXPECT_THROW(cosine_pair(bank, Eigen::VectorXd::Zero(7), 0), DegenerateInputError);
  EXPECT_THROW(cosine_pair(bank, Eigen::VectorXd::Ones(6), 0), DimensionError);
  EXPECT_THROW(cosine_pair(bank, Eigen::VectorXd::Ones(7), c), LookupError);
}

TEST(EtfBank, CosinePairStaysInRange) {
  std::mt19937_64 rng(9);
  const auto bank = build_etf(5, 11, 1);
  for (int t = 0; t < 200; ++t) {
    const auto [ds, dt] = cosine_pair(bank, testing::random_unit(11, rng) * 3.0, t % 5);
    EXPECT_GE(ds, -1.0);
    EXPECT_LE(ds, 1.0);
    EXPECT_GE(dt, -1.0);
    EXPECT_LE(dt, 1.0);
  }
}

TEST(EtfBank, JsonRoundTrip) {
  const auto bank = build_etf(3, 9, 17);
  EXPECT_TRUE(PrototypeBank::from_json(bank.to_json()) == bank);
}

}  // namespace
}  // namespace protomatch
