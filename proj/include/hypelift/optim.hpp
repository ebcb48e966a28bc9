#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace hypelift::optim {

/// One-cycle schedule with cosine annealing: warm up from peak/initial_div
/// to peak over the first `warmup_fraction` of the steps, then anneal to
/// peak/(initial_div*final_div).
struct OneCycle {
  double peak_lr = 1e-3;
  double initial_div = 10.0;
  double final_div = 1000.0;
  double warmup_fraction = 0.05;
  std::int64_t total_steps = 1;

  void validate() const;
  /// Schedule shape in (0, 1]; lr(step) = peak_lr * multiplier(step).
  double multiplier(std::int64_t step) const;
  double lr(std::int64_t step) const { return peak_lr * multiplier(step); }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled decay: p <- p - m_t * (lr * adam_direction + weight_decay * p),
  /// where m_t is the schedule multiplier. The decay term does not depend on
  /// lr, so lr = 0 still shrinks the weights.
  double weight_decay = 0.0;
};

/// Adam over a fixed list of parameter blocks.
class Adam {
 public:
  Adam(const std::vector<Eigen::Index>& block_sizes, AdamConfig cfg);

  /// grads[i] matches params[i]. `lr` is the base rate, `multiplier` the
  /// schedule factor applied to both the step and the decay.
  void step(const std::vector<Eigen::VectorXd*>& params, const std::vector<Eigen::VectorXd>& grads, double lr,
            double multiplier = 1.0);

  /// Same update on views of externally owned storage.
  void step(const std::vector<Eigen::Map<Eigen::VectorXd>>& params,
            const std::vector<Eigen::Map<const Eigen::VectorXd>>& grads, double lr, double multiplier = 1.0);

  std::int64_t steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Eigen::VectorXd> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace hypelift::optim
