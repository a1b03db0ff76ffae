#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sosd/matrix.hpp"
#include "sosd/model.hpp"

namespace sosd {

enum class ScheduleKind { kConstant, kStep, kWsd, kCosine };

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::kConstant;
  double base_lr = 0.05;

  // step
  std::vector<double> milestones;  // fractions of total steps, strictly increasing in (0,1)
  double drop_factor = 0.1;

  // wsd: warmup + stable + decay must partition total_steps
  std::size_t warmup_steps = 0;
  std::size_t stable_steps = 0;
  std::size_t decay_steps = 0;

  // cosine
  std::size_t cosine_warmup = 0;
  double min_ratio = 0.1;

  void validate(std::size_t total_steps) const;
};

enum class OptimizerKind { kGd, kAdamW, kMuon };

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::kGd;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps_adam = 1e-8;
  double muon_momentum = 0.95;
  int newton_schulz_steps = 5;
  double weight_decay = 0.0;  // decoupled
  double clip_norm = 0.0;     // 0 = off; global-norm clip over all trainables

  void validate() const;
};

/// Per-matrix moment / momentum buffers plus the step counter.
struct OptState {
  std::vector<DenseMatrix> m1;        // adamw first moments
  std::vector<DenseMatrix> m2;        // adamw second moments
  std::vector<DenseMatrix> momentum;  // muon buffers
  std::uint64_t step = 0;

  static OptState create(const OptimizerSpec& spec, const ModelState& state);
};

double lr_at(const ScheduleSpec& schedule, std::size_t t, std::size_t total_steps);

/// Quintic Newton-Schulz orthogonalization; input is pre-scaled by its
/// Frobenius norm. Rejects zero input.
DenseMatrix newton_schulz(const DenseMatrix& m, int steps);

/// Applies one update to {W_Q, W_K, W_V}; W_C is never modified. Decoupled
/// weight decay runs before the gradient step.
void optimizer_step(ModelState& state, const GradientSet& grads, const OptimizerSpec& spec,
                    OptState& opt_state, double lr);

ScheduleKind schedule_kind_from_string(const std::string& s);
std::string to_string(ScheduleKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind kind);

}  // namespace sosd
