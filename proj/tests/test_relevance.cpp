#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace ipcc;
using ipcc::testing::expect_error;

namespace {

Matrix random_matrix(Index r, Index c, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (Index k = 0; k < m.size(); ++k) m(k) = nd(gen);
  return m;
}

}  // namespace

TEST(RelevanceHead, FlattenRoundTrip) {
  const RelevanceHeadParams p = init_relevance_head(5, 3);
  EXPECT_EQ(p.parameter_count(), 5 * 5 * 5 + 2 * 5);
  const Vector flat = p.flatten();
  EXPECT_TRUE(RelevanceHeadParams::unflatten(flat, 5).flatten() == flat);
  expect_error([&] { RelevanceHeadParams::unflatten(flat.head(flat.size() - 1), 5); }, ErrorKind::Dimension);
}

TEST(RelevanceHead, InitIsSeededAndBounded) {
  const Vector a = init_relevance_head(8, 42).flatten();
  EXPECT_TRUE(a == init_relevance_head(8, 42).flatten());
  EXPECT_FALSE(a == init_relevance_head(8, 43).flatten());
  EXPECT_LE(a.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(8.0));
}

TEST(RelevanceHead, JsonRoundTripIsExact) {
  const RelevanceHeadParams p = init_relevance_head(4, 9);
  const RelevanceHeadParams back = head_from_json(json_io::Json::parse(head_to_json(p).dump()));
  EXPECT_TRUE(back.flatten() == p.flatten());
}

// With a single agent the softmax is exactly 1, so the head reduces to the
// feed-forward transform of the value row.
TEST(AttentionForward, SingleAgentIsTransformOfValue) {
  std::mt19937_64 gen(1);
  const RelevanceHeadParams p = init_relevance_head(6, 2);
  const Matrix x = random_matrix(1, 6, gen);
  const AttentionCache c = attention_forward_cached(LatentFeatures(x), p);
  EXPECT_EQ(c.attn(0, 0), 1.0);
  const Eigen::RowVectorXd v = x * p.w_v;
  const Eigen::RowVectorXd pre = v * p.w1 + p.b1.transpose();
  const Eigen::RowVectorXd want = pre.cwiseMax(0.0) * p.w2 + p.b2.transpose();
  EXPECT_LT((c.out - want).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(AttentionForward, IdenticalRowsGiveIdenticalOutputs) {
  std::mt19937_64 gen(3);
  const Eigen::RowVectorXd row = random_matrix(1, 5, gen);
  const Matrix x = row.replicate(4, 1);
  const Matrix out = attention_forward(LatentFeatures(x), init_relevance_head(5, 1)).matrix();
  for (Index i = 1; i < 4; ++i) EXPECT_LT((out.row(i) - out.row(0)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(AttentionForward, PermutationEquivariant) {
  std::mt19937_64 gen(4);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix x = random_matrix(5, 6, gen);
    const RelevanceHeadParams p = init_relevance_head(6, rep);
    std::vector<int> perm{0, 1, 2, 3, 4};
    std::shuffle(perm.begin(), perm.end(), gen);
    Eigen::PermutationMatrix<Eigen::Dynamic> pm(5);
    for (int i = 0; i < 5; ++i) pm.indices()(i) = perm[i];
    const Matrix out = attention_forward(LatentFeatures(x), p).matrix();
    const Matrix out_perm = attention_forward(LatentFeatures(pm * x), p).matrix();
    EXPECT_LT((out_perm - pm * out).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(AttentionForward, WidthMismatchIsRejected) {
  expect_error([] { attention_forward(LatentFeatures(Matrix::Ones(2, 3)), init_relevance_head(4, 0)); },
               ErrorKind::Dimension);
}

// Central differences of a random linear functional of the output.
TEST(AttentionBackward, MatchesFiniteDifferences) {
  std::mt19937_64 gen(5);
  const Index d = 5;
  const Matrix x = random_matrix(4, d, gen);
  const Matrix w = random_matrix(4, d, gen);
  const RelevanceHeadParams p = init_relevance_head(d, 8);
  auto loss = [&](const Vector& flat) {
    return attention_forward(LatentFeatures(x), RelevanceHeadParams::unflatten(flat, d)).matrix().cwiseProduct(w).sum();
  };
  const Vector analytic = attention_backward(attention_forward_cached(LatentFeatures(x), p), p, w).flatten();
  const GradientCheckResult r = gradient_check(loss, p.flatten(), analytic, 1e-6);
  EXPECT_LT(r.max_rel_error, 1e-7) << "worst component " << r.worst;
}

TEST(CosineRelevance, SpecialCases) {
  Matrix r(2, 3);
  r << 1, 2, 3, 1, 2, 3;
  EXPECT_EQ(cosine_relevance(LatentFeatures(r))(0, 1), 1.0);
  r.row(1) = -r.row(0);
  EXPECT_EQ(cosine_relevance(LatentFeatures(r))(0, 1), -1.0);
  r << 1, 0, 0, 0, 2, 0;
  EXPECT_EQ(cosine_relevance(LatentFeatures(r))(0, 1), 0.0);
}

TEST(CosineRelevance, InvariantToPositiveRowScaling) {
  std::mt19937_64 gen(6);
  const Matrix r = random_matrix(4, 6, gen);
  Vector scale(4);
  scale << 0.01, 3.0, 1.0, 250.0;
  const Matrix a = cosine_relevance(LatentFeatures(r)).matrix();
  const Matrix b = cosine_relevance(LatentFeatures(scale.asDiagonal() * r)).matrix();
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-14);
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(a(i, i), 1.0);
}

TEST(CosineRelevance, ZeroRowIsDegenerate) {
  Matrix r = Matrix::Ones(3, 2);
  r.row(1).setZero();
  expect_error([&] { cosine_relevance(LatentFeatures(r)); }, ErrorKind::DegenerateFeature);
}

TEST(CosineRelevance, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 gen(7);
  const Matrix r = random_matrix(4, 5, gen);
  Matrix pair_grad = Matrix::Zero(4, 4);
  for (Index i = 0; i < 4; ++i) {
    for (Index j = i + 1; j < 4; ++j) pair_grad(i, j) = static_cast<double>(i + 2 * j) - 3.0;
  }
  auto loss = [&](const Vector& flat) {
    const Matrix m = Eigen::Map<const Matrix>(flat.data(), 4, 5);
    return cosine_relevance(LatentFeatures(m)).matrix().triangularView<Eigen::StrictlyUpper>().toDenseMatrix()
        .cwiseProduct(pair_grad).sum();
  };
  const Matrix analytic = cosine_relevance_backward(LatentFeatures(r), pair_grad);
  const Vector flat = Eigen::Map<const Vector>(r.data(), r.size());
  const Vector a = Eigen::Map<const Vector>(analytic.data(), analytic.size());
  EXPECT_LT(gradient_check(loss, flat, a, 1e-6).max_rel_error, 1e-7);
}

TEST(LatentFeatures, RejectsNonFinite) {
  Matrix m = Matrix::Ones(2, 2);
  m(1, 1) = std::numeric_limits<double>::infinity();
  expect_error([&] { LatentFeatures{m}; }, ErrorKind::NonFinite);
}
