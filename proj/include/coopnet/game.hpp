#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "coopnet/errors.hpp"

namespace coopnet {

enum class Strategy : std::uint8_t { Defect = 0, Cooperate = 1 };

inline char to_char(Strategy s) { return s == Strategy::Cooperate ? 'C' : 'D'; }

/// Symmetric 2x2 social dilemma with R = 1 and P = 0, parameterized by the
/// temptation T in [0, 2] and the sucker's payoff S in [-1, 1].
class GameMatrix {
 public:
  static constexpr double kReward = 1.0;
  static constexpr double kPunishment = 0.0;

  GameMatrix(double temptation, double sucker) : t_(temptation), s_(sucker) {
    if (!(t_ >= 0.0 && t_ <= 2.0)) {
      throw InvalidConfig("T must lie in [0, 2], got " + std::to_string(t_));
    }
    if (!(s_ >= -1.0 && s_ <= 1.0)) {
      throw InvalidConfig("S must lie in [-1, 1], got " + std::to_string(s_));
    }
  }

  static GameMatrix prisoners_dilemma() { return GameMatrix(2.0, -1.0); }

  double temptation() const { return t_; }
  double sucker() const { return s_; }

  /// Payoff to a player using `self` against a player using `other`.
  double payoff(Strategy self, Strategy other) const {
    if (self == Strategy::Cooperate) {
      return other == Strategy::Cooperate ? kReward : s_;
    }
    return other == Strategy::Cooperate ? t_ : kPunishment;
  }

 private:
  double t_;
  double s_;
};

/// Fermi imitation probability 1 / (1 + exp(-beta * delta)), where delta is
/// the payoff advantage of the node being imitated.
inline double fermi(double delta, double beta) {
  const double x = std::clamp(-beta * delta, -700.0, 700.0);
  return 1.0 / (1.0 + std::exp(x));
}

}  // namespace coopnet
