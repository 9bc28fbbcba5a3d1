#pragma once

// Single-index losses l(y, y*) and the scalar functions of the label pair
// u = (y, y*) that enter the landscape variational formulas.

#include <memory>
#include <string>

namespace kacrice {

struct LabelPoint {
  double y = 0.0;       // x . theta
  double y_star = 0.0;  // x . theta*
};

/// Scalar functions of u derived from the loss at overlap q.
struct DerivedFunctions {
  double A = 0.0;    // (d1 l)^2
  double c_q = 0.0;  // (y* - q y)/sqrt(1-q^2) * d1 l
  double F = 0.0;    // d1^2 l
  double t = 0.0;    // y * d1 l
  double K_q = 0.0;  // F (y* - q y)^2/(1-q^2) - t
};

/// A loss of the predicted label y given the true label y*.
///
/// Implementations must be pure: every member is called concurrently from
/// quadrature workers. Derivatives are with respect to the first argument.
class LossModel {
 public:
  virtual ~LossModel() = default;

  virtual double value(LabelPoint u) const = 0;
  virtual double first_deriv(LabelPoint u) const = 0;
  virtual double second_deriv(LabelPoint u) const = 0;

  /// Greatest lower bound of second_deriv over R^2. Used to decide whether
  /// the domain {alpha + g F(u) > 0} is the whole plane.
  virtual double second_deriv_infimum() const = 0;

  virtual std::string name() const = 0;
  virtual std::unique_ptr<LossModel> clone() const = 0;

  /// Throws std::invalid_argument when |q| >= 1.
  DerivedFunctions derived(LabelPoint u, double q) const;
};

/// Real phase retrieval loss (y^2 - y*^2)^2 / (a + y*^2).
class PhaseRetrievalLoss final : public LossModel {
 public:
  explicit PhaseRetrievalLoss(double a);

  double a() const { return a_; }

  double value(LabelPoint u) const override;
  double first_deriv(LabelPoint u) const override;
  double second_deriv(LabelPoint u) const override;
  double second_deriv_infimum() const override { return -4.0; }
  std::string name() const override { return "phase_retrieval"; }
  std::unique_ptr<LossModel> clone() const override;

 private:
  double a_;
};

/// Factory used by the configuration layer; name is the value returned by
/// LossModel::name(). Throws std::invalid_argument for unknown names.
std::unique_ptr<LossModel> make_loss(const std::string& name, double a);

}  // namespace kacrice
