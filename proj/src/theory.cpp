#include "dccgcn/theory.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "dccgcn/errors.hpp"
#include "dccgcn/random.hpp"

namespace dccgcn {

namespace {

void check_prob(const char* what, double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw ContractError(std::string(what) + ": probability out of [0, 1]");
    }
}

void check_classes(const char* what, int c) {
    if (c < 2) {
        throw ContractError(std::string(what) + ": class count must be >= 2");
    }
}

}  // namespace

double theorem1_bound(double p1, double p2) {
    check_prob("theorem1_bound", p1);
    check_prob("theorem1_bound", p2);
    if (p1 * p2 >= 1.0) {
        throw ContractError("theorem1_bound: requires p1*p2 < 1");
    }
    return p1 * (1.0 - p2) / (1.0 - p1 * p2);
}

double agreement_fraction(double p1, double p2, int c, double gamma) {
    check_prob("agreement_fraction", p1);
    check_prob("agreement_fraction", p2);
    check_classes("agreement_fraction", c);
    const double a = p1 * p2 + (1.0 - p1) * (1.0 - p2) / (c - 1) + gamma;
    if (a < 0.0 || a > 1.0) {
        throw ContractError("agreement_fraction: value " + std::to_string(a) +
                            " outside [0, 1]");
    }
    return a;
}

double lowconf_accuracy_exact(double p1, double p2, int c, double gamma) {
    check_prob("lowconf_accuracy_exact", p1);
    check_prob("lowconf_accuracy_exact", p2);
    check_classes("lowconf_accuracy_exact", c);
    const double base = p1 * p2 + (1.0 - p1) * (1.0 - p2) / (c - 1) + gamma;
    const double denom = 1.0 - base;
    if (denom <= 0.0) {
        throw ContractError("lowconf_accuracy_exact: nonpositive denominator");
    }
    return (p1 - base) / denom;
}

double theorem2_bound(double p1, double p2, int c, double gamma) {
    check_prob("theorem2_bound", p1);
    check_prob("theorem2_bound", p2);
    check_classes("theorem2_bound", c);
    return (1.0 - p1) *
           (p1 * p2 + (1.0 - p1) * (1.0 - p2) / (c - 1) + gamma);
}

double effective_gain_bound(double p1, double p2, int c, double gamma) {
    const double a = agreement_fraction(p1, p2, c, gamma);
    return a + (1.0 - a) * std::min(p1, p2) - p1;
}

void SimSpec::validate() const {
    if (n < 1) throw ContractError("SimSpec: n must be >= 1");
    check_classes("SimSpec", c);
    if (!(p1 > 0.0 && p1 < 1.0) || !(p2 > 0.0 && p2 < 1.0)) {
        throw ContractError("SimSpec: accuracies must be in (0, 1)");
    }
    if (rho < 0.0 || rho > 1.0) {
        throw ContractError("SimSpec: rho must be in [0, 1]");
    }
}

SimResult simulate(const SimSpec& spec) {
    spec.validate();
    SimResult r;
    r.n = spec.n;
    std::int64_t lowconf_correct = 0;
    std::int64_t correct1_total = 0;
    for (std::int64_t i = 0; i < spec.n; ++i) {
        Rng rng(Rng::mix(spec.seed, static_cast<std::uint64_t>(i)));
        const int truth = static_cast<int>(rng.uniform_index(spec.c));
        const double u1 = rng.uniform();
        const double u_fresh = rng.uniform();
        const bool share = rng.uniform() < spec.rho;
        const int wrong1_raw = static_cast<int>(rng.uniform_index(spec.c - 1));
        const int wrong2_raw = static_cast<int>(rng.uniform_index(spec.c - 1));

        const bool correct1 = u1 < spec.p1;
        const bool correct2 = (share ? u1 : u_fresh) < spec.p2;
        const int g1 = correct1 ? truth : (wrong1_raw >= truth ? wrong1_raw + 1 : wrong1_raw);
        const int g2 = correct2 ? truth : (wrong2_raw >= truth ? wrong2_raw + 1 : wrong2_raw);

        correct1_total += correct1;
        if (g1 == g2) {
            ++r.n_a;
            if (correct1) {
                ++r.n_r;
            } else {
                ++r.n_w;
            }
        } else {
            ++r.disagreements;
            lowconf_correct += correct1;
        }
    }
    r.agreement = static_cast<double>(r.n_a) / static_cast<double>(r.n);
    if (r.disagreements > 0) {
        const double ledger = static_cast<double>(correct1_total - r.n_a) /
                              static_cast<double>(r.disagreements);
        r.p_lowconf = std::min(1.0, std::max(0.0, ledger));
        r.p_lowconf_raw = static_cast<double>(lowconf_correct) /
                          static_cast<double>(r.disagreements);
    }
    r.gamma_hat = r.agreement - agreement_fraction(spec.p1, spec.p2, spec.c, 0.0);
    return r;
}

std::vector<BoundPoint> sweep_gain_surface(const std::vector<int>& c_list, double grid_step,
                                           double gamma) {
    if (grid_step <= 0.0 || grid_step >= 0.5) {
        throw ContractError("sweep_gain_surface: grid step must be in (0, 0.5)");
    }
    std::vector<BoundPoint> points;
    for (int c : c_list) {
        check_classes("sweep_gain_surface", c);
        for (int i = 1; i * grid_step < 1.0 - grid_step / 2; ++i) {
            for (int j = 1; j * grid_step < 1.0 - grid_step / 2; ++j) {
                BoundPoint pt;
                pt.c = c;
                pt.p1 = i * grid_step;
                pt.p2 = j * grid_step;
                pt.gamma = gamma;
                pt.theorem2 = theorem2_bound(pt.p1, pt.p2, c, gamma);
                pt.effective_gain = effective_gain_bound(pt.p1, pt.p2, c, gamma);
                points.push_back(pt);
            }
        }
    }
    return points;
}

void write_surface_csv(std::ostream& out, const std::vector<BoundPoint>& points) {
    out << "c,p1,p2,gamma,theorem2_bound,effective_gain_bound\n";
    out.precision(12);
    for (const BoundPoint& p : points) {
        out << p.c << ',' << p.p1 << ',' << p.p2 << ',' << p.gamma << ',' << p.theorem2
            << ',' << p.effective_gain << '\n';
    }
}

}  // namespace dccgcn
