#pragma once

#include <iosfwd>

namespace didnet {

// Property suites, one per verifiable claim; each prints a single
// "criterion N PASS/FAIL ..." line with the measured worst case.
bool prove_modulation_equivalence(std::ostream& out);  // criterion 1
bool prove_dmc_fold(std::ostream& out);                // criterion 2
bool prove_cost_table(std::ostream& out);              // criterion 3
bool prove_wavelet(std::ostream& out);                 // criterion 4
bool prove_deform(std::ostream& out);                  // criterion 5
bool prove_grad_checks(std::ostream& out);             // criterion 6
bool prove_color(std::ostream& out);                   // criterion 7
bool prove_degradation(std::ostream& out);             // criterion 8
bool prove_metric_sanity(std::ostream& out);           // criterion 11

/// All property suites above, in order. True when everything passed.
bool prove_all(std::ostream& out);

}  // namespace didnet
