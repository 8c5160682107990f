#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "genmeter/errors.hpp"

namespace genmeter {

enum class OptimizerKind { kSgd, kRmsprop, kAdam };

inline OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "sgd") return OptimizerKind::kSgd;
    if (s == "rmsprop") return OptimizerKind::kRmsprop;
    if (s == "adam") return OptimizerKind::kAdam;
    throw ConfigError("unknown optimizer: " + s);
}

inline const char* to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::kSgd: return "sgd";
        case OptimizerKind::kRmsprop: return "rmsprop";
        case OptimizerKind::kAdam: return "adam";
    }
    return "?";
}

struct OptimConfig {
    OptimizerKind kind = OptimizerKind::kSgd;
    double lr = 0.1;
    double weight_decay = 0.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double rms_decay = 0.9;
    double rms_eps = 1e-8;
};

// One optimizer instance per run, operating on the flat coordinate layout.
// All three optimizers use decoupled weight decay: theta *= (1 - lr*wd)
// before the gradient step, so wd is inert when lr == 0.
//
//   sgd      theta -= lr * g
//   rmsprop  s = rho*s + (1-rho)*g^2;           theta -= lr * g / (sqrt(s)+eps)
//   adam     m = b1*m + (1-b1)*g
//            v = b2*v + (1-b2)*g^2
//            mhat = m/(1-b1^t), vhat = v/(1-b2^t)
//            theta -= lr * mhat / (sqrt(vhat)+eps)
class Optimizer {
  public:
    Optimizer(OptimConfig cfg, std::size_t dim) : cfg_(cfg) {
        if (cfg_.lr < 0.0) throw ConfigError("optimizer: negative learning rate");
        if (cfg_.weight_decay < 0.0) throw ConfigError("optimizer: negative weight decay");
        if (cfg_.kind != OptimizerKind::kSgd) {
            m_.assign(dim, 0.0);
            if (cfg_.kind == OptimizerKind::kAdam) v_.assign(dim, 0.0);
        }
    }

    void step(std::vector<double>& theta, const std::vector<double>& grad) {
        if (theta.size() != grad.size()) throw ShapeError("optimizer: grad/param size mismatch");
        for (double g : grad)
            if (!std::isfinite(g)) throw NonFiniteError("optimizer: non-finite gradient");
        ++t_;
        const double decay = 1.0 - cfg_.lr * cfg_.weight_decay;
        if (decay != 1.0)
            for (double& x : theta) x *= decay;
        switch (cfg_.kind) {
            case OptimizerKind::kSgd: {
                for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg_.lr * grad[i];
                break;
            }
            case OptimizerKind::kRmsprop: {
                for (std::size_t i = 0; i < theta.size(); ++i) {
                    m_[i] = cfg_.rms_decay * m_[i] + (1.0 - cfg_.rms_decay) * grad[i] * grad[i];
                    theta[i] -= cfg_.lr * grad[i] / (std::sqrt(m_[i]) + cfg_.rms_eps);
                }
                break;
            }
            case OptimizerKind::kAdam: {
                const double c1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_));
                const double c2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_));
                for (std::size_t i = 0; i < theta.size(); ++i) {
                    m_[i] = cfg_.adam_beta1 * m_[i] + (1.0 - cfg_.adam_beta1) * grad[i];
                    v_[i] = cfg_.adam_beta2 * v_[i] + (1.0 - cfg_.adam_beta2) * grad[i] * grad[i];
                    const double mhat = m_[i] / c1;
                    const double vhat = v_[i] / c2;
                    theta[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
                }
                break;
            }
        }
    }

    long long steps_taken() const { return t_; }

  private:
    OptimConfig cfg_;
    long long t_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

}  // namespace genmeter
