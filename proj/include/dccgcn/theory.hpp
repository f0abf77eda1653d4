#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace dccgcn {

/// Closed-form accuracy bounds for a pair of classifiers that make
/// symmetric errors, plus a Monte Carlo simulator that validates them.

/// Upper bound on the accuracy of the disagreement set: p1(1-p2)/(1-p1p2).
double theorem1_bound(double p1, double p2);

/// Expected fraction of samples where the two classifiers agree:
/// p1 p2 + (1-p1)(1-p2)/(c-1) + gamma.
double agreement_fraction(double p1, double p2, int c, double gamma);

/// Exact disagreement-set accuracy under the symmetric-error model:
/// (p1 - p1p2 - (1-p1)(1-p2)/(c-1) - gamma) / (1 - p1p2 - (1-p1)(1-p2)/(c-1) - gamma).
double lowconf_accuracy_exact(double p1, double p2, int c, double gamma);

/// Upper bound on the accuracy gain from recovering the disagreement set:
/// (1-p1) * agreement_fraction.
double theorem2_bound(double p1, double p2, int c, double gamma);

/// Gain bound using the tighter corrected-set accuracy limit min(p1, p2):
/// A + (1-A) min(p1,p2) - p1 with A the agreement fraction. Coincides with
/// theorem2_bound whenever p2 >= p1.
double effective_gain_bound(double p1, double p2, int c, double gamma);

struct SimSpec {
    std::int64_t n = 1000000;
    int c = 7;
    double p1 = 0.8;
    double p2 = 0.7;
    double rho = 0.0;  // 0 independent channels, 1 comonotone correctness
    std::uint64_t seed = 7;

    void validate() const;
};

struct SimResult {
    std::int64_t n = 0;
    std::int64_t n_r = 0;          // both correct
    std::int64_t n_w = 0;          // both wrong, same class
    std::int64_t n_a = 0;          // agreements = n_r + n_w
    std::int64_t disagreements = 0;
    double agreement = 0.0;        // n_a / n
    // Disagreement-set accuracy via the count ledger that the closed forms
    // use, (channel-1 correct - n_a) / disagreements, clamped to [0, 1].
    // The ledger treats same-class double errors as channel-1 hits, so this
    // is what lowconf_accuracy_exact predicts.
    double p_lowconf = 0.0;
    // Plain channel-1 accuracy restricted to the disagreements; exceeds
    // p_lowconf by about n_w / disagreements.
    double p_lowconf_raw = 0.0;
    double gamma_hat = 0.0;        // agreement minus the independent-case value
};

/// Draws n samples with uniform ground truth over c classes. Channel 1 is
/// correct when its uniform draw falls below p1; channel 2 reuses channel
/// 1's draw with probability rho and a fresh draw otherwise; wrong
/// channels pick uniformly among the other c-1 classes. Per-sample
/// randomness is derived from (seed, sample index), so the result does not
/// depend on any chunking.
SimResult simulate(const SimSpec& spec);

struct BoundPoint {
    int c = 0;
    double p1 = 0.0;
    double p2 = 0.0;
    double gamma = 0.0;
    double theorem2 = 0.0;
    double effective_gain = 0.0;
};

/// Evaluates both gain bounds on a (p1, p2) grid with the given step for
/// each class count.
std::vector<BoundPoint> sweep_gain_surface(const std::vector<int>& c_list, double grid_step,
                                           double gamma);

/// CSV with header c,p1,p2,gamma,theorem2_bound,effective_gain_bound.
void write_surface_csv(std::ostream& out, const std::vector<BoundPoint>& points);

}  // namespace dccgcn
