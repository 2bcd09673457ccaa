#pragma once

#include "mhmm/model.hpp"

namespace mhmm {

/// Population values used by the simulation study: three states, three
/// dependent variables, residual variance 0.1 in every cell.
namespace population {

/// Group-level emission means of the sleep-data simulations
/// (rows: EEG mean beta, EOG median theta, EOG min beta; columns: Awake, NREM, REM).
MatrixXd sleep_means();
/// Well-separated emission means of the baseline simulations.
MatrixXd baseline_means();

/// Group-level TPM of the sleep-data simulations.
MatrixXd sleep_tpm();
/// Group-level TPM of baseline scenarios 2-5.
MatrixXd baseline_tpm();

constexpr double kResidualVariance = 0.1;

/// Assembles GroupParams from population means and TPM, with every
/// between-subject emission variance set to zeta and every TPM random-effect
/// variance set to q_var.
GroupParams make_group(const MatrixXd& means, const MatrixXd& tpm, double zeta, double q_var,
                       double resid_var = kResidualVariance);

ModelSpec sleep_spec();
ModelSpec baseline_spec();

}  // namespace population
}  // namespace mhmm
