#include "kacrice/loss_model.hpp"

#include <cmath>
#include <stdexcept>

namespace kacrice {

DerivedFunctions LossModel::derived(LabelPoint u, double q) const {
  if (!(std::abs(q) < 1.0)) {
    throw std::invalid_argument("derived: overlap must satisfy |q| < 1");
  }
  const double d1 = first_deriv(u);
  const double d2 = second_deriv(u);
  const double one_m_q2 = 1.0 - q * q;
  const double r = u.y_star - q * u.y;
  DerivedFunctions out;
  out.A = d1 * d1;
  out.c_q = r / std::sqrt(one_m_q2) * d1;
  out.F = d2;
  out.t = u.y * d1;
  out.K_q = d2 * r * r / one_m_q2 - out.t;
  return out;
}

PhaseRetrievalLoss::PhaseRetrievalLoss(double a) : a_(a) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw std::invalid_argument("PhaseRetrievalLoss: a must be positive");
  }
}

double PhaseRetrievalLoss::value(LabelPoint u) const {
  const double s2 = u.y_star * u.y_star;
  const double diff = u.y * u.y - s2;
  return diff * diff / (a_ + s2);
}

double PhaseRetrievalLoss::first_deriv(LabelPoint u) const {
  const double s2 = u.y_star * u.y_star;
  return 4.0 * u.y * (u.y * u.y - s2) / (a_ + s2);
}

double PhaseRetrievalLoss::second_deriv(LabelPoint u) const {
  const double s2 = u.y_star * u.y_star;
  return (12.0 * u.y * u.y - 4.0 * s2) / (a_ + s2);
}

std::unique_ptr<LossModel> PhaseRetrievalLoss::clone() const {
  return std::make_unique<PhaseRetrievalLoss>(a_);
}

std::unique_ptr<LossModel> make_loss(const std::string& name, double a) {
  if (name == "phase_retrieval") return std::make_unique<PhaseRetrievalLoss>(a);
  throw std::invalid_argument("unknown loss '" + name + "'");
}

}  // namespace kacrice
