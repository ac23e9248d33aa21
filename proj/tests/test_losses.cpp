#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_support.hpp"

using namespace samnet;
using samnet::testing::desk_batch;
using samnet::testing::random_matrix;
using samnet::testing::random_simplex;

namespace {

ForwardTrace trace_from_logits(const std::vector<Vector>& logits) {
  ForwardTrace t;
  for (const auto& z : logits) {
    BranchTrace b;
    b.logits = z;
    b.probs = softmax(z);
    t.branches.push_back(b);
  }
  return t;
}

double subjectivity_value(std::vector<Matrix> mems) { return subjectivity_loss(mems).value; }

}  // namespace

TEST(NormalizePhi, HandValue) {
  const Matrix phi = normalize_phi(Matrix::from_rows({{0, 1}, {2, 6}}));
  EXPECT_EQ(phi(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(phi(0, 1), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(phi(1, 0), 1.0 / 3.0);
  EXPECT_EQ(phi(1, 1), 1.0);
}

TEST(NormalizePhi, ConstantMatrixGivesZeros) {
  EXPECT_EQ(normalize_phi(Matrix(3, 4, 2.5)), Matrix(3, 4, 0.0));
}

TEST(NormalizePhi, AffineRescaleInvariant) {
  SeededRng rng(1, Stream::Test);
  for (int t = 0; t < 50; ++t) {
    const Matrix m = random_matrix(rng, 4, 6);
    Matrix scaled = m;
    const double a = rng.uniform(0.1, 10), b = rng.uniform(-5, 5);
    for (double& x : scaled.flat()) x = a * x + b;
    const Matrix p = normalize_phi(m), q = normalize_phi(scaled);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p.flat()[i], q.flat()[i], 1e-12);
    for (double x : p.flat()) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
}

TEST(SubjectivityLoss, IdenticalMemoriesGiveOne) {
  SeededRng rng(2, Stream::Test);
  const Matrix m = random_matrix(rng, 8, 16);
  EXPECT_NEAR(subjectivity_value({m, m, m, m}), 1.0, 1e-12);
}

TEST(SubjectivityLoss, AntisymmetricPairGivesZero) {
  EXPECT_NEAR(subjectivity_value({Matrix::from_rows({{0, 1}}), Matrix::from_rows({{1, 0}})}), 0.0, 1e-12);
}

TEST(SubjectivityLoss, AffineRescaledMemoryGivesOne) {
  SeededRng rng(3, Stream::Test);
  const Matrix m = random_matrix(rng, 5, 7);
  Matrix r = m;
  for (double& x : r.flat()) x = 3.0 * x - 0.7;
  EXPECT_NEAR(subjectivity_value({m, r}), 1.0, 1e-12);
}

TEST(SubjectivityLoss, CanBeNegative) {
  // Three orthogonal one-hot memories: mean 1/3 everywhere, every branch's
  // deviation ratio is 2, so the loss is 1 - 2 = -1.
  const double v = subjectivity_value({Matrix::from_rows({{1, 0, 0}}), Matrix::from_rows({{0, 1, 0}}),
                                       Matrix::from_rows({{0, 0, 1}})});
  EXPECT_NEAR(v, -1.0, 1e-12);
}

TEST(SubjectivityLoss, AtMostOneAndOneOnlyWhenIdentical) {
  SeededRng rng(4, Stream::Test);
  for (int t = 0; t < 100; ++t) {
    std::vector<Matrix> mems;
    for (int n = 0; n < 4; ++n) mems.push_back(random_matrix(rng, 3, 5));
    EXPECT_LT(subjectivity_value(mems), 1.0);
  }
}

TEST(SubjectivityLoss, ConstantMemoriesGiveOne) {
  EXPECT_NEAR(subjectivity_value({Matrix(2, 3, 1.0), Matrix(2, 3, -4.0)}), 1.0, 1e-12);
}

TEST(SubjectivityLoss, ShapeMismatch) {
  EXPECT_THROW(subjectivity_value({Matrix(2, 3), Matrix(3, 2)}), DimensionError);
  EXPECT_THROW(subjectivity_value({}), DimensionError);
}

TEST(SubjectivityLoss, GradientMatchesFiniteDifferenceWithFrozenRanges) {
  SeededRng rng(5, Stream::Test);
  std::vector<Matrix> mems;
  for (int n = 0; n < 3; ++n) mems.push_back(random_matrix(rng, 3, 4));
  const SubjectivityResult base = subjectivity_loss(mems);
  const double h = 1e-6;
  for (std::size_t n = 0; n < mems.size(); ++n) {
    for (std::size_t i = 0; i < mems[n].size(); ++i) {
      auto up = mems, down = mems;
      up[n].flat()[i] += h;
      down[n].flat()[i] -= h;
      const double fd =
          (subjectivity_loss(up, &base.ranges).value - subjectivity_loss(down, &base.ranges).value) / (2 * h);
      EXPECT_NEAR(base.grads[n].flat()[i], fd, 1e-7);
    }
  }
}

TEST(MatchingLoss, SinglePairUniform) {
  const ForwardTrace t = trace_from_logits({{0, 0}});
  const MatchingResult r = matching_loss(std::vector<int>{0}, t, std::vector<std::size_t>{0});
  EXPECT_NEAR(r.value, std::log(2.0), 1e-12);
  EXPECT_NEAR(r.dlogits[0][0], -0.5, 1e-15);
  EXPECT_NEAR(r.dlogits[0][1], 0.5, 1e-15);
}

TEST(MatchingLoss, ConfidentPerfectMatchNearZero) {
  const ForwardTrace t = trace_from_logits({{20, -20}, {-20, 20}});
  const std::vector<int> labels{0, 1};
  const auto sigma = pair_labels(labels, t.probs(), LossMode::Match);
  EXPECT_EQ(sigma, (std::vector<std::size_t>{0, 1}));
  EXPECT_LT(matching_loss(labels, t, sigma).value, 1e-15);
  // Reversed labels are matched to the same branches.
  const std::vector<int> reversed{1, 0};
  EXPECT_EQ(pair_labels(reversed, t.probs(), LossMode::Match), (std::vector<std::size_t>{1, 0}));
}

TEST(MatchingLoss, NonNegativeAndMinimalCostLabelOrderInvariant) {
  SeededRng rng(6, Stream::Test);
  for (int t = 0; t < 200; ++t) {
    std::vector<Vector> logits;
    std::vector<int> labels;
    for (int n = 0; n < 4; ++n) {
      logits.push_back(samnet::testing::random_vector(rng, 5, 2.0));
      labels.push_back(static_cast<int>(rng.uniform_index(5)));
    }
    const ForwardTrace tr = trace_from_logits(logits);
    const auto sigma = pair_labels(labels, tr.probs(), LossMode::Match);
    EXPECT_GE(matching_loss(labels, tr, sigma).value, 0.0);
    std::vector<int> permuted = labels;
    rng.shuffle(permuted);
    EXPECT_EQ(hungarian(build_cost_matrix(labels, tr.probs())).total_cost,
              hungarian(build_cost_matrix(permuted, tr.probs())).total_cost);
  }
}

TEST(PairLabels, OrderedModeIsIdentity) {
  const std::vector<Vector> probs{{0.1, 0.9}, {0.9, 0.1}};
  EXPECT_EQ(pair_labels(std::vector<int>{0, 1}, probs, LossMode::Ordered), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(pair_labels(std::vector<int>{0, 1}, probs, LossMode::Match), (std::vector<std::size_t>{1, 0}));
}

TEST(PairLabels, DominantModeUsesArgmaxOfDistribution) {
  const VoteSample s = make_sample("a", {0.0}, {2, 1, 2, 0}, 4);
  EXPECT_EQ(pairing_labels(s, LossMode::Dominant), (std::vector<int>{2}));
  EXPECT_EQ(pairing_labels(s, LossMode::Match), (std::vector<int>{0, 1, 2, 2}));
}

TEST(PredictDistribution, Examples) {
  EXPECT_EQ(predict_distribution(std::vector<Vector>{{1, 0}, {0, 1}}), (Vector{0.5, 0.5}));
  const Vector p{0.2, 0.3, 0.5};
  const Vector d = predict_distribution(std::vector<Vector>{p, p, p, p});
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(d[c], p[c], 1e-15);
}

TEST(PredictDistribution, InvariantToSigma) {
  SeededRng rng(7, Stream::Test);
  std::vector<Vector> probs;
  for (int n = 0; n < 5; ++n) probs.push_back(random_simplex(rng, 4));
  const Vector base = predict_distribution(probs);
  std::vector<std::size_t> sigma(5);
  std::iota(sigma.begin(), sigma.end(), std::size_t{0});
  for (int t = 0; t < 20; ++t) {
    rng.shuffle(sigma);
    const Vector d = predict_distribution(probs, sigma);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(d[c], base[c], 1e-15);
  }
  EXPECT_THROW(predict_distribution(probs, std::vector<std::size_t>{0, 1}), DimensionError);
}

TEST(KlLoss, Examples) {
  EXPECT_EQ(kl_loss(Vector{0, 1, 0}, Vector{0, 1, 0}).value, 0.0);
  EXPECT_NEAR(kl_loss(Vector{1, 0}, Vector{0.5, 0.5}).value, std::log(2.0), 1e-12);
  EXPECT_NEAR(kl_loss(Vector{0.25, 0.75}, Vector{0.5, 0.5}).value, std::log(2.0), 1e-12);
  EXPECT_THROW(kl_loss(Vector{1, 0}, Vector{1, 0, 0}), DimensionError);
}

TEST(KlLoss, FloorAndZeroTerms) {
  const KlResult r = kl_loss(Vector{1, 0}, Vector{0, 1});
  EXPECT_NEAR(r.value, -std::log(1e-10), 1e-9);
  EXPECT_EQ(r.grad[1], 0.0);
  EXPECT_EQ(kl_loss(Vector{0, 1}, Vector{0, 1}).value, 0.0);
}

TEST(KlLoss, BoundedBelowByEntropy) {
  SeededRng rng(8, Stream::Test);
  for (int t = 0; t < 200; ++t) {
    const Vector d = random_simplex(rng, 5), dh = random_simplex(rng, 5);
    double entropy = 0.0;
    for (double x : d) entropy -= x * std::log(x);
    EXPECT_GE(kl_loss(d, dh).value, entropy - 1e-12);
    EXPECT_NEAR(kl_loss(d, d).value, entropy, 1e-12);
  }
}

TEST(TotalLoss, TotalIsSumOfTerms) {
  const auto batch = desk_batch(1, 6);
  const ModelParams p = init_params(kDeskDims, 1);
  const LossBundle b = total_loss(batch, p);
  EXPECT_EQ(b.total, b.l_sub + b.l_mat + b.l_kl);
  EXPECT_GE(b.l_mat, 0.0);
  EXPECT_GE(b.l_kl, 0.0);
  EXPECT_LE(b.l_sub, 1.0);
  EXPECT_EQ(b.assignments.size(), 6u);
  EXPECT_EQ(b.grads.dims, p.dims);
  for (const auto& s : b.assignments) EXPECT_TRUE(is_permutation_of_range(s));
}

TEST(TotalLoss, GradientIsSumOfComponentGradients) {
  const auto batch = desk_batch(2, 5);
  const ModelParams p = init_params(kDeskDims, 2);
  const LossBundle full = total_loss(batch, p);
  ModelParams sum = zeros_like(p);
  for (int term = 0; term < 3; ++term) {
    LossOptions opt;
    opt.terms = LossTerms{term == 0, term == 1, term == 2};
    opt.frozen_assignments = &full.assignments;
    add_scaled(sum, total_loss(batch, p, opt).grads);
  }
  for (std::size_t n = 0; n < p.branches.size(); ++n) {
    for (BlockKind k : kAllBlocks) {
      auto a = block(full.grads.branches[n], k);
      auto b = block(sum.branches[n], k);
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14 + 1e-12 * std::abs(a[i]));
    }
  }
}

TEST(TotalLoss, IdenticalSampleBatchEqualsSingleSample) {
  const auto one = desk_batch(3, 1);
  const std::vector<VoteSample> many(7, one[0]);
  const ModelParams p = init_params(kDeskDims, 3);
  const LossBundle a = total_loss(one, p), b = total_loss(many, p);
  EXPECT_NEAR(a.total, b.total, 1e-13);
  EXPECT_NEAR(a.l_mat, b.l_mat, 1e-13);
  EXPECT_NEAR(a.l_kl, b.l_kl, 1e-13);
  EXPECT_EQ(a.l_sub, b.l_sub);
}

TEST(TotalLoss, EmptyBatchAndDimensionErrors) {
  const ModelParams p = init_params(kDeskDims, 0);
  EXPECT_THROW(total_loss(std::vector<VoteSample>{}, p), InvalidArgument);
  VoteSample bad = desk_batch(0, 1)[0];
  bad.features.pop_back();
  EXPECT_THROW(total_loss(std::vector<VoteSample>{bad}, p), DimensionError);
}

TEST(TotalLoss, AssignmentRecomputedAfterParameterChange) {
  const auto batch = desk_batch(4, 10);
  ModelParams p = init_params(kDeskDims, 4);
  const LossBundle a = total_loss(batch, p);
  std::swap(p.branches[0], p.branches[1]);
  const LossBundle b = total_loss(batch, p);
  // Swapping two branches leaves the matched loss unchanged: sigma follows.
  EXPECT_NEAR(a.l_mat, b.l_mat, 1e-12);
  EXPECT_NEAR(a.l_kl, b.l_kl, 1e-12);
}
