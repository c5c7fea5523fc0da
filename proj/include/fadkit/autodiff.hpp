#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "fadkit/common.hpp"

namespace fadkit::autodiff {

using Mat = Eigen::MatrixXd;

// Reverse-mode tape over dense double matrices. Nodes are created in
// topological order by construction, so the backward pass is a single
// reverse sweep. A fresh Graph is built per training step or inference call;
// constants (frozen weights, features) skip gradient work entirely.
class Graph {
 public:
  int constant(Mat v) { return make(std::move(v), false, {}); }

  int input(Mat v) { return make(std::move(v), true, {}); }

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  // Gradient of the last backward() root with respect to node `id`; zero if
  // the node was never touched.
  Mat grad(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  // ---- arithmetic -------------------------------------------------------

  int matmul(int a, int b) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    if (A.cols() != B.rows()) throw ShapeError("matmul: inner dimensions differ");
    return make(A * B, needs(a) || needs(b), [a, b](Graph& g, const Mat& dC) {
      g.accum(a, dC * g.value(b).transpose());
      g.accum(b, g.value(a).transpose() * dC);
    });
  }

  // A * B^T
  int matmul_nt(int a, int b) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    if (A.cols() != B.cols()) throw ShapeError("matmul_nt: column counts differ");
    return make(A * B.transpose(), needs(a) || needs(b), [a, b](Graph& g, const Mat& dC) {
      g.accum(a, dC * g.value(b));
      g.accum(b, dC.transpose() * g.value(a));
    });
  }

  int add(int a, int b) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    if (A.rows() != B.rows() || A.cols() != B.cols())
      throw ShapeError("add: shape mismatch");
    return make(A + B, needs(a) || needs(b), [a, b](Graph& g, const Mat& dC) {
      g.accum(a, dC);
      g.accum(b, dC);
    });
  }

  int sub(int a, int b) {
    const Mat& A = value(a);
    const Mat& B = value(b);
    if (A.rows() != B.rows() || A.cols() != B.cols())
      throw ShapeError("sub: shape mismatch");
    return make(A - B, needs(a) || needs(b), [a, b](Graph& g, const Mat& dC) {
      g.accum(a, dC);
      g.accum(b, -dC);
    });
  }

  // Adds a 1 x n row vector to every row.
  int add_rowvec(int a, int bias) {
    const Mat& A = value(a);
    const Mat& B = value(bias);
    if (B.rows() != 1 || B.cols() != A.cols())
      throw ShapeError("add_rowvec: bias must be 1 x cols");
    return make(A.rowwise() + B.row(0), needs(a) || needs(bias),
                [a, bias](Graph& g, const Mat& dC) {
                  g.accum(a, dC);
                  g.accum(bias, dC.colwise().sum());
                });
  }

  int scale(int a, double s) {
    return make(value(a) * s, needs(a),
                [a, s](Graph& g, const Mat& dC) { g.accum(a, dC * s); });
  }

  // ---- structure --------------------------------------------------------

  int concat_rows(const std::vector<int>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: empty");
    Eigen::Index rows = 0;
    const Eigen::Index cols = value(parts[0]).cols();
    bool rg = false;
    for (int p : parts) {
      if (value(p).cols() != cols) throw ShapeError("concat_rows: column mismatch");
      rows += value(p).rows();
      rg = rg || needs(p);
    }
    Mat out(rows, cols);
    Eigen::Index off = 0;
    for (int p : parts) {
      out.middleRows(off, value(p).rows()) = value(p);
      off += value(p).rows();
    }
    return make(std::move(out), rg, [parts](Graph& g, const Mat& dC) {
      Eigen::Index off = 0;
      for (int p : parts) {
        const Eigen::Index n = g.value(p).rows();
        g.accum_block(p, dC.middleRows(off, n), 0, 0, true);
        off += n;
      }
    });
  }

  int concat_cols(const std::vector<int>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: empty");
    Eigen::Index cols = 0;
    const Eigen::Index rows = value(parts[0]).rows();
    bool rg = false;
    for (int p : parts) {
      if (value(p).rows() != rows) throw ShapeError("concat_cols: row mismatch");
      cols += value(p).cols();
      rg = rg || needs(p);
    }
    Mat out(rows, cols);
    Eigen::Index off = 0;
    for (int p : parts) {
      out.middleCols(off, value(p).cols()) = value(p);
      off += value(p).cols();
    }
    return make(std::move(out), rg, [parts](Graph& g, const Mat& dC) {
      Eigen::Index off = 0;
      for (int p : parts) {
        const Eigen::Index n = g.value(p).cols();
        g.accum_block(p, dC.middleCols(off, n), 0, 0, true);
        off += n;
      }
    });
  }

  int slice_rows(int a, int r0, int n) {
    const Mat& A = value(a);
    if (r0 < 0 || r0 + n > A.rows()) throw ShapeError("slice_rows: out of range");
    return make(A.middleRows(r0, n), needs(a), [a, r0](Graph& g, const Mat& dC) {
      g.accum_block(a, dC, r0, 0, false);
    });
  }

  int slice_cols(int a, int c0, int n) {
    const Mat& A = value(a);
    if (c0 < 0 || c0 + n > A.cols()) throw ShapeError("slice_cols: out of range");
    return make(A.middleCols(c0, n), needs(a), [a, c0](Graph& g, const Mat& dC) {
      g.accum_block(a, dC, 0, c0, false);
    });
  }

  // ---- nonlinearities ---------------------------------------------------

  // Row-wise layer normalization with learned gain/offset (each 1 x n).
  int layer_norm(int a, int gamma, int beta, double eps = 1e-5) {
    const Mat& X = value(a);
    const Mat& G = value(gamma);
    const Mat& B = value(beta);
    if (G.rows() != 1 || B.rows() != 1 || G.cols() != X.cols() || B.cols() != X.cols())
      throw ShapeError("layer_norm: gain/offset must be 1 x cols");
    const Eigen::Index n = X.cols();
    Mat xhat(X.rows(), n);
    Eigen::VectorXd inv_sigma(X.rows());
    Mat out(X.rows(), n);
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const double mu = X.row(r).mean();
      const double var = (X.row(r).array() - mu).square().mean();
      const double is = 1.0 / std::sqrt(var + eps);
      inv_sigma(r) = is;
      xhat.row(r) = (X.row(r).array() - mu) * is;
      out.row(r) = xhat.row(r).cwiseProduct(G.row(0)) + B.row(0);
    }
    return make(std::move(out), needs(a) || needs(gamma) || needs(beta),
                [a, gamma, beta, xhat, inv_sigma](Graph& g, const Mat& dC) {
                  const Mat& G = g.value(gamma);
                  if (g.needs(gamma))
                    g.accum(gamma, dC.cwiseProduct(xhat).colwise().sum());
                  if (g.needs(beta)) g.accum(beta, dC.colwise().sum());
                  if (!g.needs(a)) return;
                  Mat dx(dC.rows(), dC.cols());
                  for (Eigen::Index r = 0; r < dC.rows(); ++r) {
                    const Mat dxhat = dC.row(r).cwiseProduct(G.row(0));
                    const double m1 = dxhat.mean();
                    const double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
                    dx.row(r) = inv_sigma(r) *
                                (dxhat.array() - m1 - xhat.row(r).array() * m2).matrix();
                  }
                  g.accum(a, dx);
                });
  }

  int gelu(int a) {
    const Mat& X = value(a);
    const double inv_sqrt2 = 0.7071067811865475244;
    Mat out = X.unaryExpr([&](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); });
    return make(std::move(out), needs(a), [a](Graph& g, const Mat& dC) {
      const Mat& X = g.value(a);
      const double inv_sqrt2 = 0.7071067811865475244;
      const double inv_sqrt2pi = 0.3989422804014326779;
      Mat d = X.unaryExpr([&](double x) {
        return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) +
               x * inv_sqrt2pi * std::exp(-0.5 * x * x);
      });
      g.accum(a, dC.cwiseProduct(d));
    });
  }

  int sigmoid(int a) {
    Mat out = value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return make(std::move(out), needs(a), [a, id = next_id()](Graph& g, const Mat& dC) {
      const Mat& Y = g.value(id);
      g.accum(a, dC.cwiseProduct(Y.cwiseProduct((1.0 - Y.array()).matrix())));
    });
  }

  int one_minus(int a) {
    return make((1.0 - value(a).array()).matrix(), needs(a),
                [a](Graph& g, const Mat& dC) { g.accum(a, -dC); });
  }

  // Row softmax; with `causal` set, entry (i, j) is masked out for j > i.
  int softmax_rows(int a, bool causal = false) {
    const Mat& X = value(a);
    Mat out(X.rows(), X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const Eigen::Index limit = causal ? std::min<Eigen::Index>(r + 1, X.cols()) : X.cols();
      const auto row = X.row(r).head(limit);
      const double mx = row.maxCoeff();
      Eigen::ArrayXd e = (row.array() - mx).exp();
      out.row(r).setZero();
      out.row(r).head(limit) = (e / e.sum()).matrix();
    }
    return make(std::move(out), needs(a), [a, id = next_id()](Graph& g, const Mat& dC) {
      const Mat& Y = g.value(id);
      Mat dX(Y.rows(), Y.cols());
      for (Eigen::Index r = 0; r < Y.rows(); ++r) {
        const double dot = dC.row(r).cwiseProduct(Y.row(r)).sum();
        dX.row(r) = Y.row(r).cwiseProduct(dC.row(r).array() - dot);
      }
      g.accum(a, dX);
    });
  }

  int mean_rows(int a) {
    const Mat& A = value(a);
    Mat out = A.colwise().mean();
    return make(std::move(out), needs(a), [a](Graph& g, const Mat& dC) {
      const Eigen::Index n = g.value(a).rows();
      g.accum(a, (Mat::Ones(n, 1) * dC) / static_cast<double>(n));
    });
  }

  // Cosine similarity of every row of `rows` (N x C) against a single
  // feature vector (1 x C), with a norm floor that keeps zero vectors
  // well-defined. Output is N x 1.
  int cosine_rows(int rows_id, int feat_id, double norm_floor = 1e-12) {
    const Mat& G = value(rows_id);
    const Mat& F = value(feat_id);
    if (F.rows() != 1 || F.cols() != G.cols())
      throw ShapeError("cosine_rows: feature must be 1 x cols");
    const Eigen::Index n = G.rows();
    Eigen::VectorXd a(n);
    for (Eigen::Index i = 0; i < n; ++i) a(i) = std::max(G.row(i).norm(), norm_floor);
    const double b = std::max(F.row(0).norm(), norm_floor);
    Mat out(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) out(i, 0) = G.row(i).dot(F.row(0)) / (a(i) * b);
    return make(std::move(out), needs(rows_id) || needs(feat_id),
                [rows_id, feat_id, a, b, norm_floor, id = next_id()](Graph& g, const Mat& dC) {
                  const Mat& G = g.value(rows_id);
                  const Mat& F = g.value(feat_id);
                  const Mat& Y = g.value(id);
                  const bool b_free = b > norm_floor;
                  if (g.needs(rows_id)) {
                    Mat dG(G.rows(), G.cols());
                    for (Eigen::Index i = 0; i < G.rows(); ++i) {
                      const bool a_free = a(i) > norm_floor;
                      Mat row = F.row(0) / (a(i) * b);
                      if (a_free) row -= Y(i, 0) * G.row(i) / (a(i) * a(i));
                      dG.row(i) = dC(i, 0) * row;
                    }
                    g.accum(rows_id, dG);
                  }
                  if (g.needs(feat_id)) {
                    Mat dF = Mat::Zero(1, F.cols());
                    for (Eigen::Index i = 0; i < G.rows(); ++i) {
                      Mat row = G.row(i) / (a(i) * b);
                      if (b_free) row -= Y(i, 0) * F.row(0) / (b * b);
                      dF += dC(i, 0) * row;
                    }
                    g.accum(feat_id, dF);
                  }
                });
  }

  // ---- losses -----------------------------------------------------------

  // Focal loss over a two-channel per-pixel classification [S_n, S_a] vs a
  // binary mask: mean of -alpha_f (1 - p_t)^gamma_f log(p_t), where p_t is
  // S_a on positives and S_n on negatives. p_t is floored at 1e-7 inside the
  // log.
  int focal_loss(int sn, int sa, const std::vector<std::uint8_t>& mask,
                 double gamma_f, double alpha_f) {
    const Mat& N = value(sn);
    const Mat& A = value(sa);
    if (N.cols() != 1 || A.cols() != 1 || N.rows() != A.rows() ||
        static_cast<std::size_t>(N.rows()) != mask.size())
      throw ShapeError("focal_loss: expects N x 1 maps matching the mask");
    const double floor = 1e-7;
    const Eigen::Index n = N.rows();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = mask[static_cast<std::size_t>(i)] ? A(i, 0) : N(i, 0);
      const double q = std::max(p, floor);
      total += -alpha_f * std::pow(1.0 - p, gamma_f) * std::log(q);
    }
    Mat out(1, 1);
    out(0, 0) = total / static_cast<double>(n);
    return make(std::move(out), needs(sn) || needs(sa),
                [sn, sa, mask, gamma_f, alpha_f, floor](Graph& g, const Mat& dC) {
                  const Mat& N = g.value(sn);
                  const Mat& A = g.value(sa);
                  const Eigen::Index n = N.rows();
                  const double w = dC(0, 0) / static_cast<double>(n);
                  Mat dN = Mat::Zero(n, 1);
                  Mat dA = Mat::Zero(n, 1);
                  for (Eigen::Index i = 0; i < n; ++i) {
                    const bool pos = mask[static_cast<std::size_t>(i)] != 0;
                    const double p = pos ? A(i, 0) : N(i, 0);
                    const double q = std::max(p, floor);
                    double d = 0.0;
                    if (gamma_f != 0.0)
                      d += alpha_f * gamma_f * std::pow(1.0 - p, gamma_f - 1.0) * std::log(q);
                    if (p > floor) d -= alpha_f * std::pow(1.0 - p, gamma_f) / p;
                    (pos ? dA : dN)(i, 0) = w * d;
                  }
                  g.accum(sn, dN);
                  g.accum(sa, dA);
                });
  }

  // Dice loss 1 - (2 |S_a . Y| + eps) / (sum S_a + |Y| + eps).
  int dice_loss(int sa, const std::vector<std::uint8_t>& mask, double eps = 1.0) {
    const Mat& A = value(sa);
    if (A.cols() != 1 || static_cast<std::size_t>(A.rows()) != mask.size())
      throw ShapeError("dice_loss: expects N x 1 map matching the mask");
    double inter = 0.0, pred = 0.0, truth = 0.0;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      pred += A(i, 0);
      if (mask[static_cast<std::size_t>(i)]) {
        inter += A(i, 0);
        truth += 1.0;
      }
    }
    Mat out(1, 1);
    out(0, 0) = 1.0 - (2.0 * inter + eps) / (pred + truth + eps);
    return make(std::move(out), needs(sa),
                [sa, mask, eps, inter, pred, truth](Graph& g, const Mat& dC) {
                  const Mat& A = g.value(sa);
                  const double denom = pred + truth + eps;
                  const double numer = 2.0 * inter + eps;
                  Mat dA(A.rows(), 1);
                  for (Eigen::Index i = 0; i < A.rows(); ++i) {
                    const double y = mask[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
                    dA(i, 0) = dC(0, 0) * -(2.0 * y * denom - numer) / (denom * denom);
                  }
                  g.accum(sa, dA);
                });
  }

  // ---- backward ---------------------------------------------------------

  void backward(int root) {
    Node& r = nodes_[static_cast<std::size_t>(root)];
    if (r.value.rows() != 1 || r.value.cols() != 1)
      throw ShapeError("backward: root must be a scalar");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    r.grad = Mat::Ones(1, 1);
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, n.grad);
    }
  }

  bool needs(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    std::function<void(Graph&, const Mat&)> backward;
  };

  int next_id() const { return static_cast<int>(nodes_.size()); }

  int make(Mat value, bool requires_grad,
           std::function<void(Graph&, const Mat&)> backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  void accum(int id, const Mat& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad += g;
  }

  void accum_block(int id, const Mat& g, int r0, int c0, bool full) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    if (full)
      n.grad += g;
    else
      n.grad.block(r0, c0, g.rows(), g.cols()) += g;
  }

  std::vector<Node> nodes_;
};

}  // namespace fadkit::autodiff
