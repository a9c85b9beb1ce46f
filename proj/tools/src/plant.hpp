#pragma once

#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "ubpod/testbed.hpp"

namespace ubpod::cli {

/// The configured testbed behind one interface. Random LTI plants are
/// linear, so their steady state is the origin and their "nonlinear"
/// dynamics have a zero remainder.
class Plant {
 public:
  explicit Plant(const PipelineConfig& cfg);

  bool is_hopf() const { return pde_.has_value(); }
  const HopfPde& pde() const;
  const RandomLti& lti() const;

  int states() const;
  const NonlinearDynamics& dynamics() const { return dyn_; }
  InnerProductWeight weight() const;
  double energy(const Vector& deviation) const;
  /// Linearized plant about `steady_state`, with the nonlinear dynamics
  /// attached for Hopf plants.
  StateSpaceSystem linearization(const Vector& steady_state) const;
  /// Sensor rows in the full output when none are configured.
  std::vector<int> default_sensors() const;
  /// A representative disturbed state: the actuator footprint.
  Vector actuator_state() const;

 private:
  std::optional<HopfPde> pde_;
  std::optional<RandomLti> lti_;
  NonlinearDynamics dyn_;
};

}  // namespace ubpod::cli
