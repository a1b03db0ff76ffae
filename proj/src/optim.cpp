#include "sosd/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace sosd {

void ScheduleSpec::validate(std::size_t total_steps) const {
  if (!(base_lr > 0.0)) throw std::invalid_argument("ScheduleSpec: base_lr > 0 required");
  switch (kind) {
    case ScheduleKind::kConstant:
      break;
    case ScheduleKind::kStep: {
      double prev = 0.0;
      for (double m : milestones) {
        if (!(m > prev && m < 1.0)) {
          throw std::invalid_argument(
              "ScheduleSpec: milestones must be strictly increasing in (0,1)");
        }
        prev = m;
      }
      if (!(drop_factor > 0.0)) {
        throw std::invalid_argument("ScheduleSpec: drop_factor > 0 required");
      }
      break;
    }
    case ScheduleKind::kWsd:
      if (warmup_steps + stable_steps + decay_steps != total_steps) {
        throw std::invalid_argument(
            "ScheduleSpec: warmup+stable+decay must partition total steps");
      }
      break;
    case ScheduleKind::kCosine:
      if (!(min_ratio > 0.0 && min_ratio <= 1.0)) {
        throw std::invalid_argument("ScheduleSpec: min_ratio in (0,1] required");
      }
      if (cosine_warmup >= total_steps) {
        throw std::invalid_argument("ScheduleSpec: cosine warmup exceeds total steps");
      }
      break;
  }
}

void OptimizerSpec::validate() const {
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw std::invalid_argument("OptimizerSpec: betas must lie in [0,1)");
  }
  if (!(eps_adam > 0.0)) throw std::invalid_argument("OptimizerSpec: eps_adam > 0 required");
  if (newton_schulz_steps < 1) {
    throw std::invalid_argument("OptimizerSpec: newton_schulz_steps >= 1 required");
  }
  if (weight_decay < 0.0) throw std::invalid_argument("OptimizerSpec: weight_decay >= 0 required");
  if (clip_norm < 0.0) throw std::invalid_argument("OptimizerSpec: clip_norm >= 0 required");
}

double lr_at(const ScheduleSpec& schedule, std::size_t t, std::size_t total_steps) {
  if (t > total_steps) throw std::invalid_argument("lr_at: step beyond total_steps");
  const double base = schedule.base_lr;
  switch (schedule.kind) {
    case ScheduleKind::kConstant:
      return base;
    case ScheduleKind::kStep: {
      double lr = base;
      for (double m : schedule.milestones) {
        if (static_cast<double>(t) >= m * static_cast<double>(total_steps)) {
          lr *= schedule.drop_factor;
        }
      }
      return lr;
    }
    case ScheduleKind::kWsd: {
      const std::size_t w = schedule.warmup_steps;
      const std::size_t s = schedule.stable_steps;
      if (t < w) return base * static_cast<double>(t) / static_cast<double>(w);
      if (t < w + s) return base;
      const double into = static_cast<double>(t - w - s);
      return base * std::max(0.0, 1.0 - into / static_cast<double>(schedule.decay_steps));
    }
    case ScheduleKind::kCosine: {
      const std::size_t w = schedule.cosine_warmup;
      if (t < w) return base * static_cast<double>(t) / static_cast<double>(w);
      const double progress =
          static_cast<double>(t - w) / static_cast<double>(total_steps - w);
      const double shape = 0.5 * (1.0 + std::cos(M_PI * progress));
      return base * (schedule.min_ratio + (1.0 - schedule.min_ratio) * shape);
    }
  }
  throw std::logic_error("lr_at: unreachable");
}

DenseMatrix newton_schulz(const DenseMatrix& m, int steps) {
  const double norm = frobenius_norm(m);
  if (!(norm > 0.0)) throw std::invalid_argument("newton_schulz: zero input");
  constexpr double a = 3.4445, b = -4.7750, c = 2.0315;
  DenseMatrix x = scale(m, 1.0 / norm);
  for (int i = 0; i < steps; ++i) {
    const DenseMatrix gram = multiply_transpose_b(x, x);        // X X^T
    const DenseMatrix gram2 = multiply(gram, gram);             // (X X^T)^2
    DenseMatrix next = scale(x, a);
    add_scaled_in_place(next, multiply(gram, x), b);
    add_scaled_in_place(next, multiply(gram2, x), c);
    x = std::move(next);
  }
  return x;
}

OptState OptState::create(const OptimizerSpec& spec, const ModelState& state) {
  OptState os;
  auto zeros_like = [](const DenseMatrix& w) { return DenseMatrix(w.rows(), w.cols()); };
  if (spec.kind == OptimizerKind::kAdamW) {
    for (const DenseMatrix* w : {&state.w_q, &state.w_k, &state.w_v}) {
      os.m1.push_back(zeros_like(*w));
      os.m2.push_back(zeros_like(*w));
    }
  } else if (spec.kind == OptimizerKind::kMuon) {
    for (const DenseMatrix* w : {&state.w_q, &state.w_k, &state.w_v}) {
      os.momentum.push_back(zeros_like(*w));
    }
  }
  return os;
}

void optimizer_step(ModelState& state, const GradientSet& grads, const OptimizerSpec& spec,
                    OptState& opt_state, double lr) {
  if (lr < 0.0) throw std::invalid_argument("optimizer_step: lr >= 0 required");
  DenseMatrix* weights[3] = {&state.w_q, &state.w_k, &state.w_v};
  const DenseMatrix* gradients[3] = {&grads.g_wq, &grads.g_wk, &grads.g_wv};
  for (int i = 0; i < 3; ++i) {
    if (!weights[i]->same_shape(*gradients[i])) {
      throw std::invalid_argument("optimizer_step: gradient shape mismatch");
    }
  }
  opt_state.step += 1;

  double clip_scale = 1.0;
  if (spec.clip_norm > 0.0) {
    double total_sq = 0.0;
    for (const DenseMatrix* g : gradients) {
      const double f = frobenius_norm(*g);
      total_sq += f * f;
    }
    const double total = std::sqrt(total_sq);
    if (total > spec.clip_norm) clip_scale = spec.clip_norm / total;
  }

  for (int i = 0; i < 3; ++i) {
    DenseMatrix& w = *weights[i];
    if (spec.weight_decay > 0.0) {
      scale_in_place(w, 1.0 - lr * spec.weight_decay);
    }
    DenseMatrix g = scale(*gradients[i], clip_scale);

    switch (spec.kind) {
      case OptimizerKind::kGd:
        add_scaled_in_place(w, g, -lr);
        break;
      case OptimizerKind::kAdamW: {
        DenseMatrix& m1 = opt_state.m1[static_cast<std::size_t>(i)];
        DenseMatrix& m2 = opt_state.m2[static_cast<std::size_t>(i)];
        const double t = static_cast<double>(opt_state.step);
        const double bc1 = 1.0 - std::pow(spec.beta1, t);
        const double bc2 = 1.0 - std::pow(spec.beta2, t);
        for (std::size_t j = 0; j < w.size(); ++j) {
          const double gj = g.data()[j];
          m1.data()[j] = spec.beta1 * m1.data()[j] + (1.0 - spec.beta1) * gj;
          m2.data()[j] = spec.beta2 * m2.data()[j] + (1.0 - spec.beta2) * gj * gj;
          const double mhat = m1.data()[j] / bc1;
          const double vhat = m2.data()[j] / bc2;
          w.data()[j] -= lr * mhat / (std::sqrt(vhat) + spec.eps_adam);
        }
        break;
      }
      case OptimizerKind::kMuon: {
        DenseMatrix& buf = opt_state.momentum[static_cast<std::size_t>(i)];
        scale_in_place(buf, spec.muon_momentum);
        add_scaled_in_place(buf, g, 1.0);
        if (frobenius_norm(buf) > 0.0) {
          const DenseMatrix direction = newton_schulz(buf, spec.newton_schulz_steps);
          add_scaled_in_place(w, direction, -lr);
        }
        break;
      }
    }
  }
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "constant") return ScheduleKind::kConstant;
  if (s == "step") return ScheduleKind::kStep;
  if (s == "wsd") return ScheduleKind::kWsd;
  if (s == "cosine") return ScheduleKind::kCosine;
  throw std::invalid_argument("unknown schedule kind: " + s);
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kConstant: return "constant";
    case ScheduleKind::kStep: return "step";
    case ScheduleKind::kWsd: return "wsd";
    case ScheduleKind::kCosine: return "cosine";
  }
  return "?";
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "gd") return OptimizerKind::kGd;
  if (s == "adamw") return OptimizerKind::kAdamW;
  if (s == "muon") return OptimizerKind::kMuon;
  throw std::invalid_argument("unknown optimizer kind: " + s);
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kGd: return "gd";
    case OptimizerKind::kAdamW: return "adamw";
    case OptimizerKind::kMuon: return "muon";
  }
  return "?";
}

}  // namespace sosd
