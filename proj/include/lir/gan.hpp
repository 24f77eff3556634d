#pragma once

#include <vector>

#include "lir/pdg.hpp"

namespace lir {

/// Two-player density game on a small discrete outcome space: a data
/// distribution, a generator, and a discriminator D(real | x). Confidences
/// weigh the discriminator arc and the fair-coin reference arc; the usual
/// pairings are (+1, -1) for the discriminator's view and (-1, +1) for the
/// generator's.
struct GanInstance {
  std::vector<double> p_data;
  std::vector<double> generator;
  std::vector<double> discriminator;  // D(real | x), strictly inside (0, 1)
  double beta_d = 1.0;
  double beta_e = -1.0;
};

struct GanCheck {
  double numeric = 0.0;      // graph inconsistency evaluated at the mixture joint
  double closed_form = 0.0;  // -beta_d * gan_loss/2 + (beta_d+beta_e) * js - beta_d * log 2
  double gan_loss = 0.0;     // E_data[log D] + E_gen[log(1 - D)]
  double js = 0.0;           // Jensen-Shannon divergence between data and generator
  /// closed_form with the constant -beta_d * log 2 removed; the quantity each
  /// player's focus actually drives (log 2 at the symmetric saddle point).
  double focus_objective = 0.0;
};

/// Coin -> mixture -> (discriminator, fair-coin belief) graph over variables
/// C (coin, value 0 = real) and X (outcome).
ParametricPDG make_gan_pdg(const GanInstance& inst);

/// Evaluates the inconsistency of the game graph at the pinned mixture joint
/// and reassembles it from the adversarial loss and the Jensen-Shannon
/// divergence. Throws when the discriminator leaves the open interval (0, 1)
/// or the distributions are malformed.
GanCheck gan_identity_check(const GanInstance& inst);

}  // namespace lir
