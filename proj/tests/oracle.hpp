#pragma once

// Values frozen from tests/oracles/oracle_values.py (scipy quadrature and
// bisection, independent of the library's closed forms).

#include <cmath>

namespace oracle {

inline const double kPhi = (1.0 + std::sqrt(5.0)) / 2.0;

// X, eps ~ N(0,1), Y = X + eps: M0 = 1/2, Delta = 2, Var(M0 dY) = 1/2.
inline constexpr double kRadii[] = {0.01, 0.05, 0.1, 0.25, 0.5};
inline constexpr double kBRadiusHalf[] = {1.37540144318126, 0.988801947514517, 0.806222748933689,
                                          0.541484742197418, 0.308529472070316};
inline constexpr double kRhoHalf = 0.806222748933689;           // r = 0.1
inline constexpr double kClippedProductHalf = 0.372892496970205;  // E|D| min(|D|, rho)
inline constexpr double kSaddleRiskHalf = 0.664396752726815;
inline constexpr double kEsoRiskHalfG2 = 0.764396752726815;

// Scalar unit model in steady state: Sigma_pred = phi, M0 = 1/phi,
// Var(M0 dY) = 1, Sigma_filt = phi - 1.
inline constexpr double kBDeltaUnit005 = 1.64926324989413;
inline constexpr double kVarIoUnit = 0.381966011250105;
inline constexpr double kBIoUnit01 = 0.704664521118402;
inline constexpr double kBRadiusUnit01 = 1.14017114583574;
inline constexpr double kBRadiusUnit05 = 0.436326563793651;
inline constexpr double kAUnit01 = 0.727805634609885;
inline constexpr double kBUnit01 = 2.1902185959364;
inline constexpr double kR0Unit = 0.33676761325368;  // [r_l, r_u] = [0.01, 0.5]
inline constexpr double kRho0Unit = 1.49399843079345;

}  // namespace oracle
