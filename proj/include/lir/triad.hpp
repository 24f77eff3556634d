#pragma once

#include <vector>

#include "lir/pdg.hpp"

namespace lir {

/// Linear softmax classifier over real feature vectors: p(c|x) = softmax(x.W).
struct TriadModel {
  int d = 0;  // input dimension
  int k = 0;  // classes
  std::vector<double> w;  // row-major d x k

  std::vector<double> logits(const std::vector<double>& x) const;
  std::vector<double> predict(const std::vector<double>& x) const;
  /// Cross-entropy -sum_c y_c log p(c|x) for a simplex point y.
  double nll(const std::vector<double>& x, const std::vector<double>& y) const;
};

enum class TriadControl { Theta, Label, Input };

struct TriadConfig {
  int steps = 50;
  double rate = 0.1;
  bool full_control = false;  // drive the controlled quantity to its stationary point
};

struct TriadResult {
  TriadModel model;
  std::vector<double> x;
  std::vector<double> y;
  /// Controlled objective before any update and after each step.
  std::vector<double> objective;
};

/// Gradient flow of the sample's inconsistency with respect to one corner of
/// the (theta, x, y) triangle, leaving the other two fixed.
///   Theta: descends -sum_c y_c log p(c|x) in the weights.
///   Label: descends KL(y || p(.|x)) in label logits; with full control the
///          label snaps to the predictive distribution exactly.
///   Input: descends -sum_c y_c log p(c|x) in x.
TriadResult triad_resolve(const TriadModel& model, const std::vector<double>& x,
                          const std::vector<double>& y, TriadControl control,
                          const TriadConfig& cfg);

struct AdversarialCycleConfig {
  int cycles = 5;
  int attack_steps = 20;
  int patch_steps = 20;
  double attack_rate = 0.05;
  double patch_rate = 0.1;
};

struct AdversarialTrace {
  TriadModel model;
  std::vector<double> x_adv;
  /// -log p(adv_label|x') + ||x'-x||^2/2, recorded before the first attack
  /// step and after every subsequent one.
  std::vector<double> attack_objective;
  /// -log p(true_label|x'), recorded before the first patch step and after
  /// every subsequent one.
  std::vector<double> patch_objective;
};

/// Alternates perturbing the input toward adv_label under a quadratic
/// proximity penalty with patching the weights to restore true_label on the
/// perturbed point.
AdversarialTrace adversarial_cycle(const TriadModel& model, const std::vector<double>& x,
                                   int true_label, int adv_label,
                                   const AdversarialCycleConfig& cfg);

/// Dataset view of the classifier as a PDG: variable X indexes the samples,
/// Y the classes; a constant arc holds the empirical (x_i, label_i) joint and
/// a linear-softmax arc X -> Y shares the classifier weights. The envelope
/// gradient of the inconsistency at the empirical joint is the mean NLL
/// gradient of the dataset.
ParametricPDG make_classification_pdg(const TriadModel& model,
                                      const std::vector<std::vector<double>>& xs,
                                      const std::vector<int>& labels);

/// The empirical joint over (X, Y) used by make_classification_pdg.
JointTable empirical_joint(int n_samples, int n_classes, const std::vector<int>& labels);

}  // namespace lir
