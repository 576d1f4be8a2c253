#include "seganet/stats.hpp"

#include <cmath>

#include "seganet/errors.hpp"

namespace seganet {

GroupSummary summarize(const std::vector<double>& values) {
    GroupSummary s;
    s.n = static_cast<int>(values.size());
    if (s.n == 0) return s;
    double acc = 0.0;
    for (double v : values) acc += v;
    s.mean = acc / s.n;
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / (s.n - 1));
    }
    return s;
}

namespace {

// Lentz's continued fraction for the incomplete beta, as in standard
// numerical references. Converges fast for x < (a+1)/(a+b+2).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;

    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw NumericError("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw DataError("incomplete_beta: a and b must be positive");
    if (x < 0.0 || x > 1.0) throw DataError("incomplete_beta: x must lie in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double t_two_sided_p(double t, double df) {
    if (df <= 0.0) throw DataError("t_two_sided_p: df must be positive");
    if (t == 0.0) return 1.0;
    const double x = df / (df + t * t);
    return incomplete_beta(df / 2.0, 0.5, x);
}

TTestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2)
        throw DataError("t-test needs at least 2 values per group");
    TTestResult r;
    r.group_a = summarize(a);
    r.group_b = summarize(b);
    const double va = r.group_a.sd * r.group_a.sd / r.group_a.n;
    const double vb = r.group_b.sd * r.group_b.sd / r.group_b.n;
    const double se2 = va + vb;
    const double diff = r.group_a.mean - r.group_b.mean;
    if (se2 == 0.0) {
        if (diff != 0.0) throw NumericError("t-test undefined: zero variance, unequal means");
        r.t = 0.0;
        r.p = 1.0;
        r.df = static_cast<double>(a.size() + b.size() - 2);
        return r;
    }
    r.t = diff / std::sqrt(se2);
    r.df = se2 * se2 / (va * va / (r.group_a.n - 1) + vb * vb / (r.group_b.n - 1));
    r.p = t_two_sided_p(r.t, r.df);
    return r;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw DataError("paired t-test requires groups of equal size");
    if (a.size() < 2) throw DataError("t-test needs at least 2 values per group");
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    const GroupSummary d = summarize(diff);

    TTestResult r;
    r.paired = true;
    r.group_a = summarize(a);
    r.group_b = summarize(b);
    r.df = static_cast<double>(d.n - 1);
    if (d.sd == 0.0) {
        if (d.mean != 0.0)
            throw NumericError("paired t-test undefined: constant nonzero differences");
        r.t = 0.0;
        r.p = 1.0;
        return r;
    }
    r.t = d.mean / (d.sd / std::sqrt(static_cast<double>(d.n)));
    r.p = t_two_sided_p(r.t, r.df);
    return r;
}

}  // namespace seganet
