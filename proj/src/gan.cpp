#include "lir/gan.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lir/inconsistency.hpp"

namespace lir {

namespace {

void check_distribution(const std::vector<double>& p, const std::string& name) {
  if (p.empty()) throw std::invalid_argument(name + " is empty");
  double total = 0.0;
  for (double x : p) {
    if (!(x > 0.0)) throw std::invalid_argument(name + " must be strictly positive");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument(name + " must sum to 1");
}

}  // namespace

ParametricPDG make_gan_pdg(const GanInstance& inst) {
  check_distribution(inst.p_data, "p_data");
  check_distribution(inst.generator, "generator");
  const std::size_t n = inst.p_data.size();
  if (inst.generator.size() != n || inst.discriminator.size() != n)
    throw std::invalid_argument("p_data, generator and discriminator sizes differ");
  for (double d : inst.discriminator)
    if (!(d > 0.0 && d < 1.0))
      throw std::invalid_argument("discriminator must lie strictly inside (0, 1)");

  ParametricPDG pdg;
  pdg.variables = {{"C", 2}, {"X", static_cast<int>(n)}};

  Hyperarc coin;
  coin.id = "coin";
  coin.targets = {"C"};
  coin.cpd.kind = CpdKind::ConstantTable;
  coin.cpd.params = {0.5, 0.5};
  coin.cpd.default_params = coin.cpd.params;
  pdg.arcs.push_back(coin);

  Hyperarc mix;
  mix.id = "mix";
  mix.sources = {"C"};
  mix.targets = {"X"};
  mix.cpd.kind = CpdKind::ConstantTable;
  mix.cpd.params = inst.p_data;
  mix.cpd.params.insert(mix.cpd.params.end(), inst.generator.begin(), inst.generator.end());
  mix.cpd.default_params = mix.cpd.params;
  pdg.arcs.push_back(mix);

  Hyperarc disc;
  disc.id = "disc";
  disc.sources = {"X"};
  disc.targets = {"C"};
  disc.cpd.kind = CpdKind::LearnableTable;
  disc.cpd.params.resize(2 * n);
  for (std::size_t x = 0; x < n; ++x) {
    disc.cpd.params[2 * x] = std::log(inst.discriminator[x]);
    disc.cpd.params[2 * x + 1] = std::log(1.0 - inst.discriminator[x]);
  }
  disc.cpd.default_params = disc.cpd.params;
  disc.beta = inst.beta_d;
  pdg.arcs.push_back(disc);

  Hyperarc fair;
  fair.id = "e";
  fair.sources = {"X"};
  fair.targets = {"C"};
  fair.cpd.kind = CpdKind::ConstantTable;
  fair.cpd.params.assign(2 * n, 0.5);
  fair.cpd.default_params = fair.cpd.params;
  fair.beta = inst.beta_e;
  pdg.arcs.push_back(fair);

  pdg.validate();
  return pdg;
}

GanCheck gan_identity_check(const GanInstance& inst) {
  const ParametricPDG pdg = make_gan_pdg(inst);
  const JointTable mu = joint_from_cpds(pdg, {"coin", "mix"});

  std::vector<double> beta;
  beta.reserve(pdg.arcs.size());
  for (const auto& a : pdg.arcs) beta.push_back(a.beta);

  GanCheck out;
  out.numeric = oinc(pdg, mu, beta);

  for (std::size_t x = 0; x < inst.p_data.size(); ++x) {
    const double p = inst.p_data[x];
    const double g = inst.generator[x];
    const double d = inst.discriminator[x];
    const double m = 0.5 * (p + g);
    out.gan_loss += p * std::log(d) + g * std::log(1.0 - d);
    out.js += 0.5 * p * std::log(p / m) + 0.5 * g * std::log(g / m);
  }

  const double log2 = std::log(2.0);
  out.focus_objective = -inst.beta_d * out.gan_loss / 2.0 + (inst.beta_d + inst.beta_e) * out.js;
  out.closed_form = out.focus_objective - inst.beta_d * log2;
  return out;
}

}  // namespace lir
