#include "plant.hpp"

namespace ubpod::cli {

Plant::Plant(const PipelineConfig& cfg) {
  if (cfg.testbed.kind == "hopf-pde") {
    pde_.emplace(cfg.testbed.hopf);
    dyn_ = pde_->dynamics();
  } else {
    lti_ = random_lti(cfg.testbed.lti);
    const Matrix a = lti_->sys.A.matrix();
    const auto n = a.rows();
    dyn_.linear = a;
    dyn_.remainder = [n](const Vector&) { return Vector(Vector::Zero(n)); };
    dyn_.jacobian = [a](const Vector&) { return a; };
  }
}

const HopfPde& Plant::pde() const {
  if (!pde_) throw ValidationError("this stage needs the hopf-pde testbed");
  return *pde_;
}

const RandomLti& Plant::lti() const {
  if (!lti_) throw ValidationError("this stage needs the random-lti testbed");
  return *lti_;
}

int Plant::states() const {
  return pde_ ? pde_->states() : lti_->sys.states();
}

InnerProductWeight Plant::weight() const {
  return pde_ ? pde_->weight() : lti_->sys.W;
}

double Plant::energy(const Vector& deviation) const {
  return pde_ ? pde_->energy(deviation) : weight().norm(deviation);
}

StateSpaceSystem Plant::linearization(const Vector& steady_state) const {
  if (pde_) return pde_->linearization(steady_state);
  return lti_->sys;
}

std::vector<int> Plant::default_sensors() const {
  if (pde_) return pde_->sensor_rows();
  std::vector<int> rows(static_cast<std::size_t>(lti_->sys.outputs()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  return rows;
}

Vector Plant::actuator_state() const {
  return pde_ ? Vector(pde_->actuator().col(0)) : Vector(lti_->sys.B.col(0));
}

}  // namespace ubpod::cli
