#pragma once

#include <vector>

// Two-sample comparison of biomarker cohorts. Welch's unequal-variance
// t-test is the default (the cohorts differ in size); a paired variant is
// available for equal-sized groups. Two-sided p-values come from the
// regularized incomplete beta function.

namespace seganet {

struct GroupSummary {
    int n = 0;
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation, n-1 denominator
};

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double df = 0.0;
    GroupSummary group_a;
    GroupSummary group_b;
    bool paired = false;
};

GroupSummary summarize(const std::vector<double>& values);

// Welch's t with Welch-Satterthwaite degrees of freedom. Groups need >= 2
// values each.
TTestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Paired t-test on per-subject differences; sizes must match.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Two-sided tail probability of Student's t with df degrees of freedom.
double t_two_sided_p(double t, double df);

// Regularized incomplete beta I_x(a,b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

}  // namespace seganet
