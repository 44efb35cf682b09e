#pragma once

namespace abx {

// Error function and complement, rational approximations after W. J. Cody
// (Math. Comp. 23, 1969). Max relative error below 1e-15 across regimes;
// normal_cdf derived from erfc is accurate to well under 1e-9 absolute.
double erf_approx(double x);
double erfc_approx(double x);

// Standard normal CDF.
double normal_cdf(double x);

// Standard normal quantile, Wichura's PPND16 (AS 241). p in (0,1).
double normal_quantile(double p);

}  // namespace abx
