#include "lir/triad.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lir {

namespace {

std::vector<double> softmax(const std::vector<double>& z) {
  double m = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double sum = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

void check_sample(const TriadModel& model, const std::vector<double>& x,
                  const std::vector<double>& y) {
  if (model.d <= 0 || model.k <= 0 || model.w.size() != std::size_t(model.d) * model.k)
    throw std::invalid_argument("classifier dimensions do not match its weight matrix");
  if (x.size() != std::size_t(model.d)) throw std::invalid_argument("input has wrong dimension");
  if (y.size() != std::size_t(model.k)) throw std::invalid_argument("label has wrong dimension");
  double sum = 0;
  for (double v : y) {
    if (v < -1e-12) throw std::invalid_argument("label entries must be nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("label must sum to 1");
}

}  // namespace

std::vector<double> TriadModel::logits(const std::vector<double>& x) const {
  std::vector<double> z(k, 0.0);
  for (int f = 0; f < d; ++f)
    for (int c = 0; c < k; ++c) z[c] += x[f] * w[std::size_t(f) * k + c];
  return z;
}

std::vector<double> TriadModel::predict(const std::vector<double>& x) const {
  return softmax(logits(x));
}

double TriadModel::nll(const std::vector<double>& x, const std::vector<double>& y) const {
  std::vector<double> z = logits(x);
  double m = *std::max_element(z.begin(), z.end());
  double lse = 0;
  for (double v : z) lse += std::exp(v - m);
  lse = m + std::log(lse);
  double val = 0;
  for (int c = 0; c < k; ++c) val -= y[c] * (z[c] - lse);
  return val;
}

TriadResult triad_resolve(const TriadModel& model, const std::vector<double>& x,
                          const std::vector<double>& y, TriadControl control,
                          const TriadConfig& cfg) {
  check_sample(model, x, y);
  TriadResult out{model, x, y, {}};

  auto label_kl = [&](const std::vector<double>& lab) {
    std::vector<double> p = out.model.predict(out.x);
    double v = 0;
    for (int c = 0; c < model.k; ++c)
      if (lab[c] > 0) v += lab[c] * (std::log(lab[c]) - std::log(p[c]));
    return v;
  };

  if (control == TriadControl::Label && cfg.full_control) {
    out.objective.push_back(label_kl(out.y));
    out.y = model.predict(x);
    out.objective.push_back(0.0);
    return out;
  }

  // Label control runs in logit coordinates so the iterate stays on the simplex.
  std::vector<double> label_logits(model.k, 0.0);
  if (control == TriadControl::Label) {
    for (int c = 0; c < model.k; ++c) label_logits[c] = std::log(std::max(y[c], 1e-300));
    out.y = softmax(label_logits);
  }

  auto objective = [&]() {
    switch (control) {
      case TriadControl::Label: return label_kl(out.y);
      default: return out.model.nll(out.x, out.y);
    }
  };

  out.objective.push_back(objective());
  for (int step = 0; step < cfg.steps; ++step) {
    switch (control) {
      case TriadControl::Theta: {
        std::vector<double> p = out.model.predict(out.x);
        for (int f = 0; f < model.d; ++f)
          for (int c = 0; c < model.k; ++c)
            out.model.w[std::size_t(f) * model.k + c] -= cfg.rate * out.x[f] * (p[c] - out.y[c]);
        break;
      }
      case TriadControl::Input: {
        std::vector<double> p = out.model.predict(out.x);
        for (int f = 0; f < model.d; ++f) {
          double g = 0;
          for (int c = 0; c < model.k; ++c)
            g += out.model.w[std::size_t(f) * model.k + c] * (p[c] - out.y[c]);
          out.x[f] -= cfg.rate * g;
        }
        break;
      }
      case TriadControl::Label: {
        std::vector<double> p = out.model.predict(out.x);
        double dot = 0;
        std::vector<double> diff(model.k);
        for (int c = 0; c < model.k; ++c) {
          diff[c] = std::log(std::max(out.y[c], 1e-300)) - std::log(p[c]);
          dot += out.y[c] * diff[c];
        }
        for (int c = 0; c < model.k; ++c)
          label_logits[c] -= cfg.rate * out.y[c] * (diff[c] - dot);
        out.y = softmax(label_logits);
        break;
      }
    }
    out.objective.push_back(objective());
  }
  return out;
}

AdversarialTrace adversarial_cycle(const TriadModel& model, const std::vector<double>& x,
                                   int true_label, int adv_label,
                                   const AdversarialCycleConfig& cfg) {
  if (true_label < 0 || true_label >= model.k || adv_label < 0 || adv_label >= model.k)
    throw std::invalid_argument("label index out of range");
  std::vector<double> y_true(model.k, 0.0), y_adv(model.k, 0.0);
  y_true[true_label] = 1.0;
  y_adv[adv_label] = 1.0;
  check_sample(model, x, y_true);

  AdversarialTrace out{model, x, {}, {}};

  auto proximity = [&]() {
    double q = 0;
    for (int f = 0; f < model.d; ++f) {
      double dxf = out.x_adv[f] - x[f];
      q += dxf * dxf;
    }
    return q / 2;
  };

  for (int cycle = 0; cycle < cfg.cycles; ++cycle) {
    out.attack_objective.push_back(out.model.nll(out.x_adv, y_adv) + proximity());
    for (int step = 0; step < cfg.attack_steps; ++step) {
      std::vector<double> p = out.model.predict(out.x_adv);
      for (int f = 0; f < model.d; ++f) {
        double g = out.x_adv[f] - x[f];
        for (int c = 0; c < model.k; ++c)
          g += out.model.w[std::size_t(f) * model.k + c] * (p[c] - y_adv[c]);
        out.x_adv[f] -= cfg.attack_rate * g;
      }
      out.attack_objective.push_back(out.model.nll(out.x_adv, y_adv) + proximity());
    }

    out.patch_objective.push_back(out.model.nll(out.x_adv, y_true));
    for (int step = 0; step < cfg.patch_steps; ++step) {
      std::vector<double> p = out.model.predict(out.x_adv);
      for (int f = 0; f < model.d; ++f)
        for (int c = 0; c < model.k; ++c)
          out.model.w[std::size_t(f) * model.k + c] -=
              cfg.patch_rate * out.x_adv[f] * (p[c] - y_true[c]);
      out.patch_objective.push_back(out.model.nll(out.x_adv, y_true));
    }
  }
  return out;
}

ParametricPDG make_classification_pdg(const TriadModel& model,
                                      const std::vector<std::vector<double>>& xs,
                                      const std::vector<int>& labels) {
  if (xs.empty() || xs.size() != labels.size())
    throw std::invalid_argument("need one label per sample");
  int n = int(xs.size());

  ParametricPDG pdg;
  pdg.variables.push_back({"X", n});
  pdg.variables.push_back({"Y", model.k});

  Hyperarc data;
  data.id = "data";
  data.targets = {"X", "Y"};
  data.cpd.kind = CpdKind::ConstantTable;
  data.cpd.params.assign(std::size_t(n) * model.k, 0.0);
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= model.k)
      throw std::invalid_argument("label index out of range");
    data.cpd.params[std::size_t(i) * model.k + labels[i]] = 1.0 / n;
  }
  data.cpd.default_params = data.cpd.params;
  pdg.arcs.push_back(std::move(data));

  Hyperarc clf;
  clf.id = "clf";
  clf.sources = {"X"};
  clf.targets = {"Y"};
  clf.cpd.kind = CpdKind::LinearSoftmax;
  clf.cpd.feat_dim = model.d;
  clf.cpd.features.reserve(std::size_t(n) * model.d);
  for (const auto& row : xs) {
    if (row.size() != std::size_t(model.d))
      throw std::invalid_argument("sample has wrong dimension");
    clf.cpd.features.insert(clf.cpd.features.end(), row.begin(), row.end());
  }
  clf.cpd.params = model.w;
  clf.cpd.default_params = model.w;
  pdg.arcs.push_back(std::move(clf));

  pdg.validate();
  return pdg;
}

JointTable empirical_joint(int n_samples, int n_classes, const std::vector<int>& labels) {
  JointTable mu;
  mu.scope = {"X", "Y"};
  mu.sizes = {n_samples, n_classes};
  mu.probs.assign(std::size_t(n_samples) * n_classes, 0.0);
  for (int i = 0; i < n_samples; ++i)
    mu.probs[std::size_t(i) * n_classes + labels[i]] = 1.0 / n_samples;
  return mu;
}

}  // namespace lir
