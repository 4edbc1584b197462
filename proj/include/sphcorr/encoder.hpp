#ifndef SPHCORR_ENCODER_HPP_
#define SPHCORR_ENCODER_HPP_

// Attention encoder over sphere anchors and the unit-normalized NOCS head.
//
// Per layer, with a single positional embedding E shared by all layers:
//   Q = (F + E) Wq,  K = (F + E) Wk,  V = F Wv
//   F^ = softmax(Q K^T / sqrt(C)) V + F
//   F  = MLP(F^) + F^,   MLP(x) = GeLU(x W1 + b1) W2 + b2
// Head: O = normalize(GeLU(F W1 + b1) W2 + b2).

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sphcorr/autodiff.hpp"
#include "sphcorr/errors.hpp"
#include "sphcorr/rng.hpp"
#include "sphcorr/types.hpp"

namespace sphcorr {

inline constexpr double kHeadEpsilon = 1e-12;

struct EncoderConfig {
  int layers = 2;   // L
  int width = 32;   // C
  int hidden = 64;  // H, MLP and head hidden width
  int cells = 192;  // M
  double epos_sigma = 0.02;
};

struct LayerParams {
  Matrix wq, wk, wv;  // C x C
  Matrix w1, b1;      // C x H, 1 x H
  Matrix w2, b2;      // H x C, 1 x C
};

struct HeadParams {
  Matrix w1, b1;  // C x H, 1 x H
  Matrix w2, b2;  // H x 3, 1 x 3
};

struct EncoderParams {
  EncoderConfig config;
  Matrix epos;  // M x C
  std::vector<LayerParams> layers;
  HeadParams head;

  // Every tensor in a fixed order: epos, then each layer, then the head.
  std::vector<std::pair<std::string, Matrix*>> tensors() {
    std::vector<std::pair<std::string, Matrix*>> out;
    out.emplace_back("epos", &epos);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      LayerParams& lp = layers[l];
      out.emplace_back(p + "wq", &lp.wq);
      out.emplace_back(p + "wk", &lp.wk);
      out.emplace_back(p + "wv", &lp.wv);
      out.emplace_back(p + "mlp.w1", &lp.w1);
      out.emplace_back(p + "mlp.b1", &lp.b1);
      out.emplace_back(p + "mlp.w2", &lp.w2);
      out.emplace_back(p + "mlp.b2", &lp.b2);
    }
    out.emplace_back("head.w1", &head.w1);
    out.emplace_back("head.b1", &head.b1);
    out.emplace_back("head.w2", &head.w2);
    out.emplace_back("head.b2", &head.b2);
    return out;
  }
  std::vector<std::pair<std::string, const Matrix*>> tensors() const {
    auto mut = const_cast<EncoderParams*>(this)->tensors();
    std::vector<std::pair<std::string, const Matrix*>> out;
    out.reserve(mut.size());
    for (auto& [name, m] : mut) out.emplace_back(name, m);
    return out;
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& t : tensors()) n += t.second->size();
    return n;
  }

  EncoderParams zeros_like() const {
    EncoderParams z = *this;
    for (auto& t : z.tensors()) t.second->setZero();
    return z;
  }

  bool all_finite() const {
    for (const auto& t : tensors()) {
      if (!t.second->allFinite()) return false;
    }
    return true;
  }
};

inline std::int64_t encoder_parameter_count(const EncoderConfig& c) {
  const std::int64_t m = c.cells, w = c.width, h = c.hidden;
  return m * w + c.layers * (3 * w * w + w * h + h + h * w + w) + (w * h + h + h * 3 + 3);
}

inline void validate(const EncoderConfig& c) {
  if (c.layers < 0 || c.width < 1 || c.hidden < 1 || c.cells < 1 || !(c.epos_sigma >= 0.0)) {
    throw InvalidArgument("encoder config needs layers >= 0 and positive width, hidden, cells");
  }
}

// Weights ~ N(0, 1/fan_in), biases zero, embeddings ~ N(0, epos_sigma^2).
inline EncoderParams init_encoder(const EncoderConfig& c, std::uint64_t seed) {
  validate(c);
  Rng rng(seed);
  auto gauss = [&rng](Eigen::Index r, Eigen::Index k, double sigma) {
    Matrix m(r, k);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) m(i, j) = sigma * rng.normal();
    }
    return m;
  };
  const double sc = 1.0 / std::sqrt(static_cast<double>(c.width));
  const double sh = 1.0 / std::sqrt(static_cast<double>(c.hidden));
  EncoderParams p;
  p.config = c;
  p.epos = gauss(c.cells, c.width, c.epos_sigma);
  for (int l = 0; l < c.layers; ++l) {
    LayerParams lp;
    lp.wq = gauss(c.width, c.width, sc);
    lp.wk = gauss(c.width, c.width, sc);
    lp.wv = gauss(c.width, c.width, sc);
    lp.w1 = gauss(c.width, c.hidden, sc);
    lp.b1 = Matrix::Zero(1, c.hidden);
    lp.w2 = gauss(c.hidden, c.width, sh);
    lp.b2 = Matrix::Zero(1, c.width);
    p.layers.push_back(std::move(lp));
  }
  p.head.w1 = gauss(c.width, c.hidden, sc);
  p.head.b1 = Matrix::Zero(1, c.hidden);
  p.head.w2 = gauss(c.hidden, 3, sh);
  p.head.b2 = Matrix::Zero(1, 3);
  return p;
}

// Handles to the parameter leaves of one tape, in EncoderParams::tensors() order.
struct ParamVars {
  std::vector<ad::Var> vars;
};

inline ParamVars bind_params(ad::Tape& tape, const EncoderParams& p, bool track) {
  ParamVars pv;
  for (const auto& t : p.tensors()) pv.vars.push_back(track ? tape.leaf(*t.second) : tape.constant(*t.second));
  return pv;
}

struct ForwardVars {
  ad::Var features;  // encoder output, M x C
  ad::Var raw;       // head output before normalization, M x 3
  ad::Var nocs;      // M x 3, unit rows
};

inline void check_finite_layer(const Matrix& m, int layer) {
  if (!m.allFinite()) {
    throw NumericFailure("non-finite activations after encoder layer " + std::to_string(layer));
  }
}

// Records the encoder and head on `tape`.
inline ForwardVars build_forward(ad::Tape& tape, const EncoderParams& p, const ParamVars& pv,
                                 const Matrix& f0) {
  const EncoderConfig& c = p.config;
  if (f0.rows() != p.epos.rows() || f0.cols() != p.epos.cols()) {
    throw InvalidArgument("feature map is " + std::to_string(f0.rows()) + "x" + std::to_string(f0.cols()) +
                          ", encoder expects " + std::to_string(p.epos.rows()) + "x" +
                          std::to_string(p.epos.cols()));
  }
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(c.width));
  const ad::Var e = pv.vars[0];
  ad::Var f = tape.constant(f0);
  for (int l = 0; l < static_cast<int>(p.layers.size()); ++l) {
    const int b = 1 + 7 * l;
    const ad::Var x = tape.add(f, e);
    const ad::Var q = tape.matmul(x, pv.vars[b]);
    const ad::Var k = tape.matmul(x, pv.vars[b + 1]);
    const ad::Var v = tape.matmul(f, pv.vars[b + 2]);
    const ad::Var a = tape.softmax_rows(tape.scale(tape.matmul_nt(q, k), inv_sqrt_c));
    const ad::Var fh = tape.add(tape.matmul(a, v), f);
    const ad::Var h = tape.gelu(tape.add_row(tape.matmul(fh, pv.vars[b + 3]), pv.vars[b + 4]));
    f = tape.add(tape.add_row(tape.matmul(h, pv.vars[b + 5]), pv.vars[b + 6]), fh);
    check_finite_layer(tape.value(f), l);
  }
  const int hb = 1 + 7 * static_cast<int>(p.layers.size());
  const ad::Var hh = tape.gelu(tape.add_row(tape.matmul(f, pv.vars[hb]), pv.vars[hb + 1]));
  const ad::Var raw = tape.add_row(tape.matmul(hh, pv.vars[hb + 2]), pv.vars[hb + 3]);
  if (!tape.value(raw).allFinite()) throw NumericFailure("non-finite NOCS head output");
  return {f, raw, tape.normalize_rows(raw, kHeadEpsilon)};
}

inline Matrix encoder_forward(const EncoderParams& p, const Matrix& f0) {
  ad::Tape tape;
  const ParamVars pv = bind_params(tape, p, false);
  return tape.value(build_forward(tape, p, pv, f0).features);
}

struct NocsOutput {
  Points o;             // M x 3 unit rows
  int guard_hits = 0;   // rows normalized through the epsilon guard
};

// Head only, applied to encoded features F.
inline NocsOutput nocs_head(const EncoderParams& p, const Matrix& f) {
  if (f.cols() != p.config.width) throw InvalidArgument("head input width differs from encoder width");
  ad::Tape tape;
  const ParamVars pv = bind_params(tape, p, false);
  const int hb = 1 + 7 * static_cast<int>(p.layers.size());
  const ad::Var x = tape.constant(f);
  const ad::Var hh = tape.gelu(tape.add_row(tape.matmul(x, pv.vars[hb]), pv.vars[hb + 1]));
  const ad::Var raw = tape.add_row(tape.matmul(hh, pv.vars[hb + 2]), pv.vars[hb + 3]);
  const ad::Var o = tape.normalize_rows(raw, kHeadEpsilon);
  return {tape.value(o), tape.normalize_guard_hits()};
}

// Encoder followed by head.
inline NocsOutput predict_nocs(const EncoderParams& p, const Matrix& f0) {
  ad::Tape tape;
  const ParamVars pv = bind_params(tape, p, false);
  const ForwardVars fw = build_forward(tape, p, pv, f0);
  return {tape.value(fw.nocs), tape.normalize_guard_hits()};
}

}  // namespace sphcorr

#endif  // SPHCORR_ENCODER_HPP_
