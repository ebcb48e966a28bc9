#include "hypelift/optim.hpp"

#include <cmath>
#include <numbers>

#include "hypelift/errors.hpp"

namespace hypelift::optim {

void OneCycle::validate() const {
  if (!(peak_lr >= 0.0)) throw ConfigError("peak learning rate must be non-negative");
  if (!(initial_div > 0.0) || !(final_div > 0.0)) throw ConfigError("one-cycle divisors must be positive");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) throw ConfigError("warmup fraction must be in (0, 1)");
  if (total_steps < 1) throw ConfigError("one-cycle schedule needs at least one step");
}

double OneCycle::multiplier(std::int64_t step) const {
  const double start = 1.0 / initial_div;
  const double end = start / final_div;
  const auto anneal = [](double from, double to, double frac) {
    return to + (from - to) / 2.0 * (1.0 + std::cos(std::numbers::pi * frac));
  };
  if (total_steps == 1) return 1.0;
  const double warm_end = warmup_fraction * static_cast<double>(total_steps) - 1.0;
  const double last = static_cast<double>(total_steps - 1);
  const double s = static_cast<double>(std::min<std::int64_t>(std::max<std::int64_t>(step, 0), total_steps - 1));
  if (warm_end > 0.0 && s <= warm_end) return anneal(start, 1.0, s / warm_end);
  const double from = std::max(warm_end, 0.0);
  return anneal(1.0, end, last > from ? (s - from) / (last - from) : 1.0);
}

Adam::Adam(const std::vector<Eigen::Index>& block_sizes, AdamConfig cfg) : cfg_(cfg) {
  for (Eigen::Index n : block_sizes) {
    m_.push_back(Eigen::VectorXd::Zero(n));
    v_.push_back(Eigen::VectorXd::Zero(n));
  }
}

void Adam::step(const std::vector<Eigen::VectorXd*>& params, const std::vector<Eigen::VectorXd>& grads, double lr,
                double multiplier) {
  std::vector<Eigen::Map<Eigen::VectorXd>> p;
  std::vector<Eigen::Map<const Eigen::VectorXd>> g;
  for (auto* x : params) p.emplace_back(x->data(), x->size());
  for (const auto& x : grads) g.emplace_back(x.data(), x.size());
  step(p, g, lr, multiplier);
}

void Adam::step(const std::vector<Eigen::Map<Eigen::VectorXd>>& params,
                const std::vector<Eigen::Map<const Eigen::VectorXd>>& grads, double lr, double multiplier) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw DimensionError("optimizer expects " + std::to_string(m_.size()) + " parameter blocks");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    auto p = params[i];
    const auto& g = grads[i];
    if (p.size() != m_[i].size() || g.size() != m_[i].size()) throw DimensionError("parameter block size changed");
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const Eigen::ArrayXd direction = (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
    p.array() -= multiplier * (lr * direction + cfg_.weight_decay * p.array());
  }
}

}  // namespace hypelift::optim
