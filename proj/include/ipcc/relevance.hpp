#pragma once

// Relevance head: single-head self-attention over agents followed by a
// two-layer transform, then pairwise cosine similarity of the output rows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "ipcc/error.hpp"
#include "ipcc/gaussian.hpp"
#include "ipcc/json_io.hpp"
#include "ipcc/projection.hpp"
#include "ipcc/rng.hpp"

namespace ipcc {

/// N x d per-agent features at one step.
class LatentFeatures {
 public:
  explicit LatentFeatures(Matrix features) : features_(std::move(features)) {
    if (features_.rows() == 0 || features_.cols() == 0) {
      throw Error(ErrorKind::Dimension, "latent features must be nonempty");
    }
    if (!features_.allFinite()) throw Error(ErrorKind::NonFinite, "latent features");
  }

  Index agent_count() const noexcept { return features_.rows(); }
  Index width() const noexcept { return features_.cols(); }
  const Matrix& matrix() const noexcept { return features_; }

 private:
  Matrix features_;
};

/// Attention projections (row convention: Q = L w_q) and the transform
/// out = relu(Z w1 + b1) w2 + b2.
struct RelevanceHeadParams {
  Matrix w_q, w_k, w_v;
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;

  static RelevanceHeadParams zeros(Index d) {
    return {Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d),
            Vector::Zero(d),    Matrix::Zero(d, d), Vector::Zero(d)};
  }

  Index width() const noexcept { return w_q.rows(); }

  static constexpr Index matrix_count = 5;

  Index parameter_count() const noexcept {
    const Index d = width();
    return matrix_count * d * d + 2 * d;
  }

  void validate() const {
    const Index d = width();
    auto square = [d](const Matrix& m) { return m.rows() == d && m.cols() == d; };
    if (d == 0 || !square(w_q) || !square(w_k) || !square(w_v) || !square(w1) || !square(w2) ||
        b1.size() != d || b2.size() != d) {
      throw Error(ErrorKind::Dimension, "relevance head parameter shapes are inconsistent");
    }
  }

  /// Flattened as w_q, w_k, w_v, w1, b1, w2, b2; matrices row-major.
  Vector flatten() const {
    Vector out(parameter_count());
    Index k = 0;
    auto put_m = [&](const Matrix& m) {
      for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) out(k++) = m(r, c);
    };
    auto put_v = [&](const Vector& v) {
      for (Index r = 0; r < v.size(); ++r) out(k++) = v(r);
    };
    put_m(w_q); put_m(w_k); put_m(w_v); put_m(w1); put_v(b1); put_m(w2); put_v(b2);
    return out;
  }

  static RelevanceHeadParams unflatten(const Vector& flat, Index d) {
    RelevanceHeadParams p = zeros(d);
    if (flat.size() != p.parameter_count()) {
      throw Error(ErrorKind::Dimension, "flat parameter vector has the wrong length");
    }
    Index k = 0;
    auto get_m = [&](Matrix& m) {
      for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) m(r, c) = flat(k++);
    };
    auto get_v = [&](Vector& v) {
      for (Index r = 0; r < v.size(); ++r) v(r) = flat(k++);
    };
    get_m(p.w_q); get_m(p.w_k); get_m(p.w_v); get_m(p.w1); get_v(p.b1); get_m(p.w2); get_v(p.b2);
    return p;
  }
};

/// Seeded uniform init in [-1/sqrt(d), 1/sqrt(d)], drawn in flatten() order.
inline RelevanceHeadParams init_relevance_head(Index d, std::uint64_t seed) {
  if (d <= 0) throw Error(ErrorKind::Dimension, "feature width must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng(seed);
  Vector flat(RelevanceHeadParams::zeros(d).parameter_count());
  for (Index k = 0; k < flat.size(); ++k) flat(k) = rng.uniform(-bound, bound);
  return RelevanceHeadParams::unflatten(flat, d);
}

/// Intermediates kept for the backward pass.
struct AttentionCache {
  Matrix x, q, k, v, scores, attn, z, pre, h, out;
};

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline AttentionCache attention_forward_cached(const LatentFeatures& latent,
                                               const RelevanceHeadParams& params) {
  params.validate();
  if (latent.width() != params.width()) {
    throw Error(ErrorKind::Dimension, "latent width " + std::to_string(latent.width()) +
                                          " does not match head width " +
                                          std::to_string(params.width()));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.width()));
  AttentionCache c;
  c.x = latent.matrix();
  c.q = c.x * params.w_q;
  c.k = c.x * params.w_k;
  c.v = c.x * params.w_v;
  c.scores = scale * (c.q * c.k.transpose());
  c.attn.resize(c.scores.rows(), c.scores.cols());
  for (Index i = 0; i < c.scores.rows(); ++i) {
    const double top = c.scores.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (c.scores.row(i).array() - top).exp().matrix();
    c.attn.row(i) = e / e.sum();
  }
  c.z = c.attn * c.v;
  c.pre = (c.z * params.w1).rowwise() + params.b1.transpose();
  c.h = c.pre.unaryExpr([](double x) { return relu(x); });
  c.out = (c.h * params.w2).rowwise() + params.b2.transpose();
  return c;
}

/// Relevance-aware features for one step.
inline LatentFeatures attention_forward(const LatentFeatures& latent,
                                        const RelevanceHeadParams& params) {
  return LatentFeatures(attention_forward_cached(latent, params).out);
}

/// Gradient of a scalar loss with respect to the head parameters, given
/// d(loss)/d(out).
inline RelevanceHeadParams attention_backward(const AttentionCache& c,
                                              const RelevanceHeadParams& params,
                                              const Matrix& d_out) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.width()));
  RelevanceHeadParams g = RelevanceHeadParams::zeros(params.width());
  g.w2 = c.h.transpose() * d_out;
  g.b2 = d_out.colwise().sum().transpose();
  const Matrix d_h = d_out * params.w2.transpose();
  const Matrix d_pre = d_h.cwiseProduct(c.pre.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; }));
  g.w1 = c.z.transpose() * d_pre;
  g.b1 = d_pre.colwise().sum().transpose();
  const Matrix d_z = d_pre * params.w1.transpose();
  const Matrix d_attn = d_z * c.v.transpose();
  const Matrix d_v = c.attn.transpose() * d_z;
  Matrix d_scores(c.attn.rows(), c.attn.cols());
  for (Index i = 0; i < c.attn.rows(); ++i) {
    const double inner = c.attn.row(i).dot(d_attn.row(i));
    d_scores.row(i) = c.attn.row(i).cwiseProduct((d_attn.row(i).array() - inner).matrix());
  }
  const Matrix d_q = scale * (d_scores * c.k);
  const Matrix d_k = scale * (d_scores.transpose() * c.q);
  g.w_q = c.x.transpose() * d_q;
  g.w_k = c.x.transpose() * d_k;
  g.w_v = c.x.transpose() * d_v;
  return g;
}

/// Pairwise cosine similarity of feature rows; diagonal exactly 1.
inline IpccMatrix cosine_relevance(const LatentFeatures& rel) {
  const Matrix& r = rel.matrix();
  const Index n = r.rows();
  const Vector norms = r.rowwise().norm();
  for (Index i = 0; i < n; ++i) {
    if (!(norms(i) > 0.0)) {
      throw Error(ErrorKind::DegenerateFeature, "feature row " + std::to_string(i) + " has zero norm");
    }
  }
  Matrix p = Matrix::Identity(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double c = std::clamp(r.row(i).dot(r.row(j)) / (norms(i) * norms(j)), -1.0, 1.0);
      p(i, j) = c;
      p(j, i) = c;
    }
  }
  return IpccMatrix(std::move(p));
}

/// d(loss)/d(rows) given d(loss)/d(rho_ij) for each unordered pair, read
/// from the strict upper triangle of `pair_grad`.
inline Matrix cosine_relevance_backward(const LatentFeatures& rel, const Matrix& pair_grad) {
  const Matrix& r = rel.matrix();
  const Index n = r.rows();
  const Vector norms = r.rowwise().norm();
  Matrix d_r = Matrix::Zero(r.rows(), r.cols());
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double g = pair_grad(i, j);
      if (g == 0.0) continue;
      const double inv = 1.0 / (norms(i) * norms(j));
      const double c = r.row(i).dot(r.row(j)) * inv;
      d_r.row(i) += g * (r.row(j) * inv - c * r.row(i) / (norms(i) * norms(i)));
      d_r.row(j) += g * (r.row(i) * inv - c * r.row(j) / (norms(j) * norms(j)));
    }
  }
  return d_r;
}

namespace detail {

inline json_io::Json matrix_to_json(const Matrix& m) {
  json_io::Json out = json_io::Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json_io::Json row = json_io::Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

inline Matrix matrix_from_json(const json_io::Json& v, Index rows, Index cols, const char* what) {
  json_io::array(v, static_cast<std::size_t>(rows), what);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = json_io::array(v[static_cast<std::size_t>(r)], static_cast<std::size_t>(cols), what);
    for (Index c = 0; c < cols; ++c) m(r, c) = json_io::number(row[static_cast<std::size_t>(c)], what);
  }
  return m;
}

inline json_io::Json vector_to_json(const Vector& v) {
  return json_io::Json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Vector vector_from_json(const json_io::Json& v, Index size, const char* what) {
  json_io::array(v, static_cast<std::size_t>(size), what);
  Vector out(size);
  for (Index k = 0; k < size; ++k) out(k) = json_io::number(v[static_cast<std::size_t>(k)], what);
  return out;
}

}  // namespace detail

inline json_io::Json head_to_json(const RelevanceHeadParams& p) {
  return json_io::Json{{"d", p.width()},
                       {"w_q", detail::matrix_to_json(p.w_q)},
                       {"w_k", detail::matrix_to_json(p.w_k)},
                       {"w_v", detail::matrix_to_json(p.w_v)},
                       {"w1", detail::matrix_to_json(p.w1)},
                       {"b1", detail::vector_to_json(p.b1)},
                       {"w2", detail::matrix_to_json(p.w2)},
                       {"b2", detail::vector_to_json(p.b2)}};
}

inline RelevanceHeadParams head_from_json(const json_io::Json& doc) {
  const long long d = json_io::integer(json_io::field(doc, "d"), "d");
  if (d <= 0) throw Error(ErrorKind::Shape, "d must be positive");
  RelevanceHeadParams p;
  p.w_q = detail::matrix_from_json(json_io::field(doc, "w_q"), d, d, "w_q");
  p.w_k = detail::matrix_from_json(json_io::field(doc, "w_k"), d, d, "w_k");
  p.w_v = detail::matrix_from_json(json_io::field(doc, "w_v"), d, d, "w_v");
  p.w1 = detail::matrix_from_json(json_io::field(doc, "w1"), d, d, "w1");
  p.b1 = detail::vector_from_json(json_io::field(doc, "b1"), d, "b1");
  p.w2 = detail::matrix_from_json(json_io::field(doc, "w2"), d, d, "w2");
  p.b2 = detail::vector_from_json(json_io::field(doc, "b2"), d, "b2");
  return p;
}

}  // namespace ipcc
