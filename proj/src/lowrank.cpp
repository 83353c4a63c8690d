/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#include "distsketch/lowrank.hpp"

#include <cmath>
#include <stdexcept>

namespace distsketch {

namespace {

Index ceil_div_pos(double x) {
  const double c = std::ceil(x);
  if (!(c >= 1.0)) throw std::invalid_argument("derived size must be positive");
  return static_cast<Index>(c);
}

struct ServerSlot {
  Matrix block;      // A^t, n x d
  Matrix projected;  // A^t U, n x c
};

// Default path. Round 1: sign-sketch seed out, sketched blocks back.
// Round 2: row basis U and embedding seed out, embedded projections back.
// Round 3: top singular directions V out. Servers end holding A^t U, U, V.
class CompressProtocol : public Protocol {
 public:
  CompressProtocol(Index n, Index d, Index k, double eps, const LowRankConfig& cfg)
      : n_(n), d_(d), k_(k), eps_(eps), cfg_(cfg) {
    m_s = ceil_div_pos(cfg.sketch_rows_factor * static_cast<double>(k) / eps);
    m_p = ceil_div_pos(cfg.embed_rows_factor * static_cast<double>(m_s) / (eps * eps));
  }

  int max_rounds() const override { return 4; }

  void coordinator_step(CoordinatorContext& ctx) override {
    switch (ctx.round()) {
      case 1: {
        seed_s_ = SketchSeed::make(m_s, n_, k_ + cfg_.sketch_indep_extra, ctx.rng().next_u64());
        Message m;
        m.put_seed(seed_s_);
        ctx.broadcast(m);
        break;
      }
      case 2: {
        Matrix sa = Matrix::Zero(m_s, d_);
        for (int t = 1; t <= ctx.server_count(); ++t) sa += ctx.reply_from(t).get_matrix();
        u_ = orthonormal_row_basis(sa).transpose();  // d x c
        const Index c = u_.cols();
        seed_p_ = SketchSeed::make(m_p, n_, std::max<Index>(c, 1), ctx.rng().next_u64());
        Message m;
        m.put_matrix(u_);
        m.put_seed(seed_p_);
        ctx.broadcast(m);
        break;
      }
      case 3: {
        const Index c = u_.cols();
        Matrix pau = Matrix::Zero(m_p, c);
        for (int t = 1; t <= ctx.server_count(); ++t) pau += ctx.reply_from(t).get_matrix();
        const Index kk = std::min(k_, c);
        v_ = (kk > 0) ? top_right_singular_vectors(pau, kk) : Matrix(c, 0);
        Message m;
        m.put_matrix(v_);
        ctx.broadcast(m);
        break;
      }
      default:
        ctx.halt();
    }
  }

  void server_step(ServerContext& ctx) override {
    auto& slot = ctx.state<ServerSlot>();
    switch (ctx.round()) {
      case 1: {
        const SketchSeed s = ctx.inbox().get_seed();
        Message m;
        m.put_matrix(s.apply_left(slot.block));
        ctx.reply(std::move(m));
        break;
      }
      case 2: {
        Matrix u = ctx.inbox().get_matrix();
        const SketchSeed p = ctx.inbox().get_seed();
        slot.projected = slot.block * u;
        Message m;
        m.put_matrix(p.apply_left(slot.projected));
        ctx.reply(std::move(m));
        break;
      }
      default:
        // Round 3 delivers V; the compressed factors now live server-side.
        ctx.inbox().get_matrix();
        break;
    }
  }

  Index n_, d_, k_;
  double eps_;
  LowRankConfig cfg_;
  Index m_s = 0, m_p = 0;
  SketchSeed seed_s_, seed_p_;
  Matrix u_, v_;
};

// Variant keeping every transmitted matrix a product of sketches. The summed
// sign sketch SA is redistributed; servers reply P A^t (SA)^T; the summed
// P A (SA)^T goes back out and each server locally rebuilds U (deterministic
// basis of SA's row space), removes the change of basis and computes V.
class BitBoundedProtocol : public Protocol {
 public:
  BitBoundedProtocol(Index n, Index d, Index k, double eps, const LowRankConfig& cfg)
      : n_(n), d_(d), k_(k), eps_(eps), cfg_(cfg) {
    m_s = ceil_div_pos(cfg.sketch_rows_factor * static_cast<double>(k) / eps);
    m_p = ceil_div_pos(cfg.embed_rows_factor * static_cast<double>(m_s) / (eps * eps));
  }

  int max_rounds() const override { return 4; }

  void coordinator_step(CoordinatorContext& ctx) override {
    switch (ctx.round()) {
      case 1: {
        seed_s_ = SketchSeed::make(m_s, n_, k_ + cfg_.sketch_indep_extra, ctx.rng().next_u64());
        Message m;
        m.put_seed(seed_s_);
        ctx.broadcast(m);
        break;
      }
      case 2: {
        sa_ = Matrix::Zero(m_s, d_);
        for (int t = 1; t <= ctx.server_count(); ++t) sa_ += ctx.reply_from(t).get_matrix();
        const Index c = orthonormal_row_basis(sa_).rows();
        seed_p_ = SketchSeed::make(m_p, n_, std::max<Index>(c, 1), ctx.rng().next_u64());
        Message m;
        m.put_matrix(sa_);
        m.put_seed(seed_p_);
        ctx.broadcast(m);
        break;
      }
      case 3: {
        g_ = Matrix::Zero(m_p, m_s);  // P A (SA)^T
        for (int t = 1; t <= ctx.server_count(); ++t) g_ += ctx.reply_from(t).get_matrix();
        Message m;
        m.put_matrix(g_);
        ctx.broadcast(m);
        break;
      }
      default:
        ctx.halt();
    }
  }

  void server_step(ServerContext& ctx) override {
    auto& slot = ctx.state<ServerSlot>();
    switch (ctx.round()) {
      case 1: {
        const SketchSeed s = ctx.inbox().get_seed();
        Message m;
        m.put_matrix(s.apply_left(slot.block));
        ctx.reply(std::move(m));
        break;
      }
      case 2: {
        const Matrix sa = ctx.inbox().get_matrix();
        const SketchSeed p = ctx.inbox().get_seed();
        const Matrix u = orthonormal_row_basis(sa).transpose();  // identical on all servers
        slot.projected = slot.block * u;
        Message m;
        m.put_matrix(p.apply_left(slot.block * sa.transpose()));
        ctx.reply(std::move(m));
        break;
      }
      default:
        ctx.inbox().get_matrix();
        break;
    }
  }

  // CP-side reconstruction of the factors from its own transcripts; no
  // additional communication.
  void finish() {
    u_ = orthonormal_row_basis(sa_).transpose();
    const Index c = u_.cols();
    if (c == 0) {
      v_ = Matrix(0, 0);
      return;
    }
    const Matrix r = sa_ * u_;                     // SA = R U^T
    const Matrix rtr = r.transpose() * r;          // c x c, positive definite
    const Matrix pau = g_ * (r * rtr.ldlt().solve(Matrix::Identity(c, c)));
    const Index kk = std::min(k_, c);
    v_ = (kk > 0) ? top_right_singular_vectors(pau, kk) : Matrix(c, 0);
  }

  Index n_, d_, k_;
  double eps_;
  LowRankConfig cfg_;
  Index m_s = 0, m_p = 0;
  SketchSeed seed_s_, seed_p_;
  Matrix sa_, g_, u_, v_;
};

}  // namespace

Matrix PartitionedMatrix::materialize() const {
  validate();
  Matrix a = blocks.front();
  for (std::size_t t = 1; t < blocks.size(); ++t) a += blocks[t];
  return a;
}

void PartitionedMatrix::validate() const {
  if (blocks.empty()) throw std::invalid_argument("PartitionedMatrix: no blocks");
  const Index rows = blocks.front().rows(), cols = blocks.front().cols();
  if (rows < 1 || cols < 1) throw std::invalid_argument("PartitionedMatrix: empty blocks");
  for (const auto& b : blocks) {
    if (b.rows() != rows || b.cols() != cols)
      throw std::invalid_argument("PartitionedMatrix: inconsistent block dims");
    if (!b.allFinite()) throw std::invalid_argument("PartitionedMatrix: non-finite entries");
  }
}

LowRankResult adaptive_compress(const PartitionedMatrix& input, Index k, double eps,
                                std::uint64_t master_seed, const LowRankConfig& config) {
  input.validate();
  const Index n = input.n(), d = input.d();
  if (k < 1 || k > std::min(n, d))
    throw std::invalid_argument("adaptive_compress: k must be in [1, min(n, d)]");
  if (!(eps > 0.0) || eps > 1.0)
    throw std::invalid_argument("adaptive_compress: eps must be in (0, 1]");

  Fabric fabric(input.servers(), master_seed, {.parallel = config.parallel});
  for (int t = 1; t <= input.servers(); ++t)
    fabric.install_state<ServerSlot>(t, ServerSlot{input.blocks[static_cast<std::size_t>(t) - 1], {}});

  LowRankResult result;
  if (config.bit_bounded) {
    BitBoundedProtocol proto(n, d, k, eps, config);
    result.ledger = fabric.run(proto);
    proto.finish();
    result.factors.u = proto.u_;
    result.factors.v = proto.v_;
    result.m_s = proto.m_s;
    result.m_p = proto.m_p;
  } else {
    CompressProtocol proto(n, d, k, eps, config);
    result.ledger = fabric.run(proto);
    result.factors.u = proto.u_;
    result.factors.v = proto.v_;
    result.m_s = proto.m_s;
    result.m_p = proto.m_p;
  }
  result.basis_cols = result.factors.u.cols();
  result.factors.projected_blocks.reserve(static_cast<std::size_t>(input.servers()));
  for (int t = 1; t <= input.servers(); ++t)
    result.factors.projected_blocks.push_back(fabric.state_after_run<ServerSlot>(t).projected);
  return result;
}

double implied_error(const PartitionedMatrix& input, const LowRankFactors& factors) {
  const Matrix a = input.materialize();
  if (static_cast<int>(factors.projected_blocks.size()) != input.servers())
    throw std::invalid_argument("implied_error: factor/server count mismatch");
  if (factors.u.cols() == 0) return a.norm();
  Matrix au = Matrix::Zero(a.rows(), factors.u.cols());
  for (const auto& p : factors.projected_blocks) au += p;
  const Matrix c = ((au * factors.v) * factors.v.transpose()) * factors.u.transpose();
  return (a - c).norm();
}

}  // namespace distsketch
