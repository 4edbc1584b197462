#ifndef SPHCORR_TRAINING_HPP_
#define SPHCORR_TRAINING_HPP_

// Adam with cosine annealing over the encoder parameters, one step per batch
// of (spherical feature map, ground-truth spherical NOCS) pairs.

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "sphcorr/autodiff.hpp"
#include "sphcorr/encoder.hpp"
#include "sphcorr/errors.hpp"
#include "sphcorr/losses.hpp"
#include "sphcorr/so3.hpp"
#include "sphcorr/spherical.hpp"
#include "sphcorr/types.hpp"

namespace sphcorr {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m, v;
  long step = 0;

  static AdamState for_params(const EncoderParams& p) {
    AdamState s;
    for (const auto& t : p.tensors()) {
      s.m.push_back(Matrix::Zero(t.second->rows(), t.second->cols()));
      s.v.push_back(Matrix::Zero(t.second->rows(), t.second->cols()));
    }
    return s;
  }
};

// 0.5 * lr0 * (1 + cos(pi * step / total)); constant when total <= 0.
inline double cosine_lr(double lr0, long step, long total) {
  if (total <= 0) return lr0;
  const double f = std::clamp(static_cast<double>(step) / static_cast<double>(total), 0.0, 1.0);
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * f));
}

struct TrainSample {
  SphericalFeatureMap map;
  Points o_gt;  // M x 3
};

struct StepOptions {
  LossKind loss = LossKind::kHypL2;
  bool mask_weighted = false;  // average the loss over assigned anchors only
  double clip_norm = 0.0;      // global gradient-norm clip; 0 disables
  int threads = 1;
  AdamConfig adam;
};

struct StepMetrics {
  double loss = 0.0;
  double nocs_angle_deg = 0.0;  // mean over anchors and batch items
  double grad_norm = 0.0;       // before clipping
  double lr = 0.0;
  int guard_hits = 0;
};

struct SampleGradient {
  double loss = 0.0;
  double nocs_angle_deg = 0.0;
  int guard_hits = 0;
  std::vector<Matrix> grads;  // EncoderParams::tensors() order
};

inline double mean_angle_deg(const Points& o, const Points& o_gt) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < o.rows(); ++i) {
    sum += vector_angle(o.row(i).transpose(), o_gt.row(i).transpose());
  }
  return sum / static_cast<double>(o.rows()) * 180.0 / std::numbers::pi;
}

// Loss of one sample and its gradient w.r.t. every parameter tensor.
inline SampleGradient sample_gradient(const EncoderParams& p, const TrainSample& s, LossKind kind,
                                      bool mask_weighted) {
  ad::Tape tape;
  const ParamVars pv = bind_params(tape, p, true);
  const ForwardVars fw = build_forward(tape, p, pv, s.map.features);
  const Points o = tape.value(fw.nocs);
  Vector weights;
  if (mask_weighted) weights = s.map.assigned_weights();
  const LossReport rep = corr_loss(o, s.o_gt, kind, weights);
  if (!std::isfinite(rep.value)) throw NumericFailure("non-finite correspondence loss");
  tape.backward(fw.nocs, rep.grad_wrt_o);
  SampleGradient out;
  out.loss = rep.value;
  out.nocs_angle_deg = mean_angle_deg(o, s.o_gt);
  out.guard_hits = tape.normalize_guard_hits();
  out.grads.reserve(pv.vars.size());
  for (const ad::Var v : pv.vars) out.grads.push_back(tape.grad(v));
  return out;
}

// Mean loss and gradient over a batch. Items may be evaluated on several
// threads; the reduction always runs in item order, so results do not depend
// on the thread count.
inline SampleGradient batch_gradient(const EncoderParams& p, const std::vector<TrainSample>& batch,
                                     LossKind kind, bool mask_weighted, int threads) {
  if (batch.empty()) throw InvalidArgument("empty training batch");
  std::vector<SampleGradient> items(batch.size());
  std::vector<std::exception_ptr> errors(batch.size());
  auto work = [&](std::size_t i) {
    try {
      items[i] = sample_gradient(p, batch[i], kind, mask_weighted);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t nt = std::clamp<std::size_t>(threads, 1, batch.size());
  if (nt == 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nt; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < batch.size(); i += nt) work(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  SampleGradient total = std::move(items[0]);
  for (std::size_t i = 1; i < items.size(); ++i) {
    total.loss += items[i].loss;
    total.nocs_angle_deg += items[i].nocs_angle_deg;
    total.guard_hits += items[i].guard_hits;
    for (std::size_t k = 0; k < total.grads.size(); ++k) total.grads[k] += items[i].grads[k];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  total.loss *= inv;
  total.nocs_angle_deg *= inv;
  for (auto& g : total.grads) g *= inv;
  return total;
}

inline void adam_update(EncoderParams& p, AdamState& st, const std::vector<Matrix>& grads, double lr,
                        const AdamConfig& cfg) {
  auto tensors = p.tensors();
  if (st.m.size() != tensors.size() || grads.size() != tensors.size()) {
    throw InvalidArgument("optimizer state does not match the parameter set");
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    st.m[k] = cfg.beta1 * st.m[k] + (1.0 - cfg.beta1) * grads[k];
    st.v[k] = cfg.beta2 * st.v[k] + (1.0 - cfg.beta2) * grads[k].cwiseAbs2();
    if (lr == 0.0) continue;
    Matrix& w = *tensors[k].second;
    w.array() -= lr * (st.m[k].array() / c1) / ((st.v[k].array() / c2).sqrt() + cfg.epsilon);
  }
}

// One optimizer step at learning rate `lr`. Throws NumericFailure, leaving
// `p` untouched, when the loss or a gradient is not finite.
inline StepMetrics train_step(EncoderParams& p, const std::vector<TrainSample>& batch, AdamState& st,
                              double lr, const StepOptions& opt = {}) {
  SampleGradient g = batch_gradient(p, batch, opt.loss, opt.mask_weighted, opt.threads);
  double sq = 0.0;
  for (const auto& m : g.grads) sq += m.squaredNorm();
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericFailure("non-finite gradient");
  if (opt.clip_norm > 0.0 && norm > opt.clip_norm) {
    for (auto& m : g.grads) m *= opt.clip_norm / norm;
  }
  adam_update(p, st, g.grads, lr, opt.adam);
  StepMetrics out;
  out.loss = g.loss;
  out.nocs_angle_deg = g.nocs_angle_deg;
  out.grad_norm = norm;
  out.lr = lr;
  out.guard_hits = g.guard_hits;
  return out;
}

}  // namespace sphcorr

#endif  // SPHCORR_TRAINING_HPP_
