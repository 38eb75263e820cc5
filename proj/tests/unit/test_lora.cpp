// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/error.hpp"
#include "proteus/lora.hpp"
#include "proteus/taskgen.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace proteus {
namespace {

LoraUnit unit_from(std::vector<LowRankFactors> layers, int task = 0) { return LoraUnit{task, std::move(layers)}; }

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

TEST(ComposeUpdate, ZeroTransferLeavesOnlyFreshTerm) {
  const BackboneWeights w = init_backbone(std::vector<int>{4, 5, 3}, 1);
  Rng rng(2);
  std::vector<LoraUnit> past{testing::random_unit(w, 2, 0, rng), testing::random_unit(w, 3, 1, rng)};
  const LoraUnit fresh = testing::random_unit(w, 2, 2, rng);
  const LoraOverlay o = compose_update(past, make_transfer(past, 0.0), fresh);
  for (std::size_t l = 0; l < o.delta.size(); ++l) EXPECT_EQ(o.delta[l], fresh.layers[l].dense());
}

TEST(ComposeUpdate, SingleRankOnePastUnitScaledByTransfer) {
  LowRankFactors e1{Matrix(Vector::Unit(2, 0)), Matrix(Vector::Unit(2, 0))};
  std::vector<LoraUnit> past{unit_from({e1})};
  TransferCoefficients s;
  s.layers = {{vec({2.0})}};
  const LoraUnit zero = unit_from({{Matrix::Zero(2, 1), Matrix::Zero(2, 1)}}, 1);
  const LoraOverlay o = compose_update(past, s, zero);
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 2.0;
  EXPECT_EQ(o.delta[0], expected);
}

TEST(ComposeUpdate, MatchesRankOneSummation) {
  const BackboneWeights w = init_backbone(std::vector<int>{4, 5, 3}, 1);
  Rng rng(3);
  std::vector<LoraUnit> past{testing::random_unit(w, 2, 0, rng), testing::random_unit(w, 3, 1, rng)};
  const LoraUnit fresh = testing::random_unit(w, 2, 2, rng);
  for (const TransferCoefficients& s : {make_transfer(past, 1.0), testing::random_transfer(past, rng)}) {
    const LoraOverlay o = compose_update(past, s, fresh);
    for (std::size_t l = 0; l < w.num_layers(); ++l) {
      Matrix naive = Matrix::Zero(o.delta[l].rows(), o.delta[l].cols());
      for (std::size_t t = 0; t < past.size(); ++t)
        for (Eigen::Index i = 0; i < past[t].layers[l].rank(); ++i)
          naive += s.layers[l][t](i) * past[t].layers[l].b.col(i) * past[t].layers[l].a.col(i).transpose();
      for (Eigen::Index i = 0; i < fresh.layers[l].rank(); ++i)
        naive += fresh.layers[l].b.col(i) * fresh.layers[l].a.col(i).transpose();
      EXPECT_LT((naive - o.delta[l]).cwiseAbs().maxCoeff(), 1e-13);
    }
  }
}

TEST(ComposeUpdate, ZeroEverythingGivesZeroOverlay) {
  const BackboneWeights w = init_backbone(std::vector<int>{4, 5, 3}, 1);
  Rng rng(5);
  std::vector<LoraUnit> past{testing::random_unit(w, 2, 0, rng)};
  LoraUnit zero;
  for (const DenseLayer& l : w.layers) zero.layers.push_back({Matrix::Zero(l.weight.rows(), 2), Matrix::Zero(l.weight.cols(), 2)});
  const LoraOverlay o = compose_update(past, make_transfer(past, 0.0), zero);
  for (const Matrix& d : o.delta) EXPECT_TRUE(d.isZero(0.0));
}

TEST(ComposeUpdate, RejectsMismatchedTransfer) {
  const BackboneWeights w = init_backbone(std::vector<int>{4, 5, 3}, 1);
  Rng rng(6);
  std::vector<LoraUnit> past{testing::random_unit(w, 2, 0, rng)};
  const LoraUnit fresh = testing::random_unit(w, 2, 1, rng);
  TransferCoefficients s = make_transfer(past, 0.0);
  s.layers[0][0] = Vector::Zero(3);
  EXPECT_THROW(compose_update(past, s, fresh), ShapeError);
  s = make_transfer(past, 0.0);
  s.layers.pop_back();
  EXPECT_THROW(compose_update(past, s, fresh), ShapeError);
}

TEST(LoraInnerProduct, UnitRankOneSelfProductIsOne) {
  Rng rng(7);
  Vector b = gaussian_vector(3, 1.0, rng);
  Vector a = gaussian_vector(4, 1.0, rng);
  b.normalize();
  a.normalize();
  const LoraUnit u = unit_from({{Matrix(b), Matrix(a)}});
  EXPECT_NEAR(lora_inner_product(u, u)[0], 1.0, 1e-15);
  EXPECT_NEAR(lora_norm(u)[0], 1.0, 1e-15);
}

TEST(LoraInnerProduct, OrthogonalInputSidesGiveZero) {
  Rng rng(8);
  Matrix a1 = Matrix::Zero(4, 2), a2 = Matrix::Zero(4, 1);
  a1(0, 0) = 1.0;
  a1(1, 1) = 2.0;
  a2(3, 0) = -1.5;
  const LoraUnit u = unit_from({{gaussian_matrix(3, 2, 1.0, rng), a1}});
  const LoraUnit v = unit_from({{gaussian_matrix(3, 1, 5.0, rng), a2}});
  EXPECT_EQ(lora_inner_product(u, v)[0], 0.0);
}

TEST(LoraInnerProduct, MatchesDenseVectorizedDot) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const LoraUnit u = unit_from({{gaussian_matrix(3, 2, 1.0, rng), gaussian_matrix(3, 2, 1.0, rng)}});
    const LoraUnit v = unit_from({{gaussian_matrix(3, 2, 1.0, rng), gaussian_matrix(3, 2, 1.0, rng)}});
    const Matrix du = u.layers[0].dense();
    const Matrix dv = v.layers[0].dense();
    const double dense = Eigen::Map<const Vector>(du.data(), du.size()).dot(Eigen::Map<const Vector>(dv.data(), dv.size()));
    EXPECT_NEAR(lora_inner_product(u, v)[0], dense, 1e-12);
  }
}

TEST(LoraInnerProduct, RejectsShapeMismatch) {
  Rng rng(10);
  const LoraUnit u = unit_from({{gaussian_matrix(3, 2, 1.0, rng), gaussian_matrix(3, 2, 1.0, rng)}});
  const LoraUnit v = unit_from({{gaussian_matrix(4, 2, 1.0, rng), gaussian_matrix(3, 2, 1.0, rng)}});
  EXPECT_THROW(lora_inner_product(u, v), ShapeError);
}

TEST(ProjectNewDirections, RemovesBasisComponent) {
  Matrix a(2, 1);
  a << 1.0, 1.0;
  const Matrix basis = Matrix(Vector::Unit(2, 0));
  const Matrix p = project_new_directions(a, basis);
  EXPECT_EQ(p(0, 0), 0.0);
  EXPECT_EQ(p(1, 0), 1.0);
}

TEST(ProjectNewDirections, EmptyBasisIsIdentity) {
  Rng rng(11);
  const Matrix a = gaussian_matrix(5, 3, 1.0, rng);
  EXPECT_EQ(project_new_directions(a, Matrix(5, 0)), a);
}

TEST(ProjectNewDirections, ResidualAgainstQrBasisIsTiny) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(8, 3, 1.0, rng));
    const Matrix basis = qr.householderQ() * Matrix::Identity(8, 3);
    const Matrix p = project_new_directions(gaussian_matrix(8, 4, 1.0, rng), basis);
    EXPECT_LT((basis.transpose() * p).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ProjectNewDirections, FullSpanLeavesZeroColumns) {
  Rng rng(13);
  const Matrix p = project_new_directions(gaussian_matrix(3, 2, 1.0, rng), Matrix::Identity(3, 3));
  EXPECT_LT(p.cwiseAbs().maxCoeff(), 1e-15);
}

TransferCoefficients single_block(const Vector& v) {
  TransferCoefficients s;
  s.layers = {{v}};
  return s;
}

TEST(ElasticNet, ZeroAtOrigin) {
  const ElasticNet e = elastic_net(single_block(Vector::Zero(3)), 0.7, 0.4);
  EXPECT_EQ(e.penalty, 0.0);
  EXPECT_TRUE(e.subgradient.layers[0][0].isZero(0.0));
}

TEST(ElasticNet, PureL2IsEuclideanNorm) {
  EXPECT_DOUBLE_EQ(elastic_net(single_block(vec({3.0, 4.0})), 1.0, 0.0).penalty, 5.0);
}

TEST(ElasticNet, PureL1SumsMagnitudes) {
  EXPECT_DOUBLE_EQ(elastic_net(single_block(vec({3.0, 4.0})), 1.0, 1.0).penalty, 7.0);
  EXPECT_DOUBLE_EQ(elastic_net(single_block(vec({-3.0, 4.0})), 1.0, 1.0).penalty, 7.0);
}

TEST(ElasticNet, SubgradientUsesSignAndRadialTerm) {
  const ElasticNet e = elastic_net(single_block(vec({3.0, -4.0, 0.0})), 2.0, 0.25);
  const Vector& g = e.subgradient.layers[0][0];
  EXPECT_DOUBLE_EQ(g(0), 2.0 * (0.25 + 0.75 * 0.6));
  EXPECT_DOUBLE_EQ(g(1), 2.0 * (-0.25 - 0.75 * 0.8));
  EXPECT_DOUBLE_EQ(g(2), 0.0);
}

TEST(ElasticNet, SumsOverLayers) {
  TransferCoefficients s;
  s.layers = {{vec({3.0, 4.0})}, {vec({6.0, 8.0})}};
  EXPECT_DOUBLE_EQ(elastic_net(s, 1.0, 0.0).penalty, 15.0);
}

TEST(ElasticNet, MidpointConvexity) {
  Rng rng(14);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double lambda = 2.0 * unit(rng);
    const double alpha = unit(rng);
    const Vector x = gaussian_vector(6, 1.0, rng);
    const Vector y = gaussian_vector(6, 1.0, rng);
    const double mid = elastic_net(single_block(0.5 * (x + y)), lambda, alpha).penalty;
    const double avg = 0.5 * (elastic_net(single_block(x), lambda, alpha).penalty +
                              elastic_net(single_block(y), lambda, alpha).penalty);
    EXPECT_LE(mid, avg + 1e-12);
  }
}

TEST(RankSchedule, NoDecayKeepsRank) {
  for (int m = 1; m <= 30; ++m) EXPECT_EQ(rank_schedule(4, 0.0, m), 4);
}

TEST(RankSchedule, DecayedValues) {
  EXPECT_EQ(rank_schedule(10, 0.05, 1), 10);
  EXPECT_EQ(rank_schedule(10, 0.1, 24), 1);
  EXPECT_EQ(rank_schedule(10, 0.1, 8), 5);
  EXPECT_EQ(rank_schedule(1, 5.0, 50), 1);
}

TEST(TrainConfig, ValidatesRanges) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lambda0 = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.alpha = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.rank = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_transfer_mode("sometimes"), ConfigError);
}

TEST(TrainConfig, LambdaDecaysPerTask) {
  const TrainConfig c;
  EXPECT_DOUBLE_EQ(c.lambda_for(0), 0.006);
  EXPECT_DOUBLE_EQ(c.lambda_for(2), 0.006 * 0.8 * 0.8);
}

// ---------------------------------------------------------------------------

std::vector<LabeledSample> two_blobs(int per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledSample> out;
  for (int i = 0; i < per_class; ++i) {
    Vector x = gaussian_vector(2, 0.3, rng);
    x(0) += 1.0;
    out.push_back({x, 10});
    Vector y = gaussian_vector(2, 0.3, rng);
    y(0) -= 1.0;
    out.push_back({y, 11});
  }
  return out;
}

TEST(TrainTask, SeparableTwoClassProblemIsLearned) {
  const BackboneWeights w = init_backbone(std::vector<int>{2, 8, 2}, 3);
  const auto data = two_blobs(50, 4);
  const TrainedAdapter t = train_task(data, {}, w, TrainConfig{}, 0);
  EXPECT_GE(t.log.train_accuracy, 0.95);
  EXPECT_EQ(t.log.epoch_loss.size(), 50u);
  EXPECT_LT(t.log.epoch_loss.back(), t.log.epoch_loss.front());
  EXPECT_EQ(t.transfer.num_past(), 0u);
}

TEST(TrainTask, SecondTaskIsOrthogonalToFirst) {
  const BackboneWeights w = init_backbone(std::vector<int>{6, 12, 6}, 3);
  StreamSpec spec;
  spec.tasks = 2;
  spec.input_dim = 6;
  spec.train_per_class = 30;
  spec.test_per_class = 5;
  const auto stream = generate_stream(spec);
  TrainConfig cfg;
  cfg.epochs = 5;
  const TrainedAdapter first = train_task(stream[0].train, {}, w, cfg, 0);
  const std::vector<LoraUnit> past{first.unit};
  const TrainedAdapter second = train_task(stream[1].train, past, w, cfg, 1);
  const std::vector<double> ip = lora_inner_product(second.unit, first.unit);
  const std::vector<double> n1 = lora_norm(first.unit);
  const std::vector<double> n2 = lora_norm(second.unit);
  for (std::size_t l = 0; l < ip.size(); ++l) {
    EXPECT_LT(std::abs(ip[l]), 1e-10);
    EXPECT_LE(std::abs(ip[l]) / (n1[l] * n2[l]), 1e-8);
  }
  EXPECT_LE(second.log.max_ortho_cosine, 1e-8);
}

TEST(TrainTask, IsDeterministic) {
  const BackboneWeights w = init_backbone(std::vector<int>{2, 8, 2}, 3);
  const auto data = two_blobs(20, 5);
  TrainConfig cfg;
  cfg.epochs = 3;
  const TrainedAdapter a = train_task(data, {}, w, cfg, 0);
  const TrainedAdapter b = train_task(data, {}, w, cfg, 0);
  EXPECT_EQ(a.unit, b.unit);
  EXPECT_EQ(a.log.epoch_loss, b.log.epoch_loss);
}

TEST(TrainTask, TransferModesPinCoefficients) {
  const BackboneWeights w = init_backbone(std::vector<int>{2, 8, 2}, 3);
  TrainConfig cfg;
  cfg.epochs = 2;
  const TrainedAdapter first = train_task(two_blobs(20, 6), {}, w, cfg, 0);
  const std::vector<LoraUnit> past{first.unit};
  cfg.transfer = TransferMode::zero;
  const TrainedAdapter z = train_task(two_blobs(20, 7), past, w, cfg, 1);
  for (const auto& layer : z.transfer.layers) EXPECT_TRUE(layer[0].isZero(0.0));
  cfg.transfer = TransferMode::identity;
  const TrainedAdapter i = train_task(two_blobs(20, 7), past, w, cfg, 1);
  for (const auto& layer : i.transfer.layers) EXPECT_TRUE(layer[0].isOnes(0.0));
  cfg.transfer = TransferMode::learned;
  const TrainedAdapter l = train_task(two_blobs(20, 7), past, w, cfg, 1);
  double moved = 0.0;
  for (const auto& layer : l.transfer.layers) moved += layer[0].cwiseAbs().sum();
  EXPECT_GT(moved, 0.0);
}

TEST(TrainTask, ExhaustedInputSpaceIsReportedNotFatal) {
  // Two input dimensions and rank 2 leave nothing for a second task's first layer.
  const BackboneWeights w = init_backbone(std::vector<int>{2, 8, 2}, 3);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.rank = 2;
  const TrainedAdapter first = train_task(two_blobs(20, 6), {}, w, cfg, 0);
  const std::vector<LoraUnit> past{first.unit};
  const TrainedAdapter second = train_task(two_blobs(20, 8), past, w, cfg, 1);
  ASSERT_FALSE(second.log.degenerate_layers.empty());
  EXPECT_EQ(second.log.degenerate_layers.front(), 0u);
  EXPECT_TRUE(second.unit.layers[0].a.isZero(0.0));
  EXPECT_EQ(lora_inner_product(second.unit, first.unit)[0], 0.0);
}

TEST(TrainTask, ElasticNetIncreasesSparsity) {
  const BackboneWeights w = init_backbone(std::vector<int>{6, 12, 6}, 3);
  StreamSpec spec;
  spec.tasks = 3;
  spec.input_dim = 6;
  spec.train_per_class = 30;
  const auto stream = generate_stream(spec);
  auto sparsity_for = [&](double lambda) {
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.lambda0 = lambda;
    std::vector<LoraUnit> past;
    double total = 0.0;
    for (int k = 0; k < spec.tasks; ++k) {
      const TrainedAdapter t = train_task(stream[static_cast<std::size_t>(k)].train, past, w, cfg, k);
      total += t.log.sparsity;
      past.push_back(t.unit);
    }
    return total;
  };
  const double none = sparsity_for(0.0);
  const double standard = sparsity_for(0.006);
  const double strong = sparsity_for(0.06);
  EXPECT_GT(standard, none);
  EXPECT_GE(strong, standard);
}

TEST(TrainTask, RejectsEmptyData) {
  const BackboneWeights w = init_backbone(std::vector<int>{2, 8, 2}, 3);
  EXPECT_THROW(train_task({}, {}, w, TrainConfig{}, 0), DataError);
}

}  // namespace
}  // namespace proteus
