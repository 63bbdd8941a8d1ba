#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace towerlimits::util {

double normal_cdf(double x);

// Survival function of the Kolmogorov distribution, Q(t) = P(sup|B(s)| bridge > t).
double kolmogorov_survival(double t);

// Regularized incomplete gamma functions P(a,x), Q(a,x) = 1 - P(a,x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Upper tail of the chi-square distribution with k degrees of freedom.
double chi_square_sf(double x, double k);

struct KsResult {
  double statistic = 0.0;  // sup distance D_n
  double p_value = 1.0;    // asymptotic
  std::size_t n = 0;
};

// One-sample KS against a continuous CDF.
KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf);

// Two-sample KS with asymptotic p-value at effective size n1*n2/(n1+n2).
KsResult ks_test_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace towerlimits::util
