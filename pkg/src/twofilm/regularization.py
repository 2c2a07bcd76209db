"""Degeneracy regularization: mobility floor and surface-tension slope truncation.

The film equations lose parabolicity wherever a film height vanishes (the
mobilities are powers of the heights) and the surfactant advection can
steepen without bound where sigma'(Gamma) is large.  Both are tamed by an
epsilon-family of surgeries that leave the energy structure intact:

* `a_eps(s) = eps + max(0, s)` lifts the mobilities off zero,
* the tent-truncated slope `sigma_eps_prime` agrees with sigma' where
  eps*|sigma'| < 1, ramps back down on eps*|sigma'| in [1, 2] and cuts off
  beyond, so that |sigma_eps_prime| <= min(|sigma'|, 1/eps),
* `tau_eps(s) = s * sigma_eps_prime(s)/sigma'(s)` replaces the bare
  concentration in the advective flux; it equals s below an explicit
  threshold, satisfies |tau_eps(s)| <= |s| and inherits compact support from
  the truncation.

The tent is extended to negative arguments as an odd function, so truncating
a negative slope yields a negative (shrunken) slope rather than a
sign-flipped one.
"""

import warnings

import numpy as np
from scipy import integrate

from .closures import SurfactantClosure

# Below this magnitude sigma'(s) is treated as exactly zero and the truncation
# ratio sigma_eps'/sigma' is taken as 1 (its analytic limit for small slopes).
_SLOPE_FLOOR = 1e-30


def a_eps(s, eps: float):
    """Regularized mobility argument eps + max(0, s)."""
    return eps + np.maximum(np.asarray(s, dtype=float), 0.0)


def tent(s):
    """Odd tent profile: identity on (0, 1), 2 - s on [1, 2], zero beyond.

    Extended to s < 0 by oddness, so tent(s) has the sign of s everywhere
    and |tent(s)| <= min(|s|, 1).
    """
    s = np.asarray(s, dtype=float)
    mag = np.abs(s)
    out = np.where(mag < 1.0, mag, np.maximum(2.0 - mag, 0.0))
    return np.sign(s) * out


def tent_eps(s, eps: float):
    """Rescaled tent: tent(eps*s)/eps, clamping magnitudes to 1/eps."""
    return tent(np.asarray(s, dtype=float) * eps) / eps


def sigma_eps_prime(s, eps: float, closure: SurfactantClosure):
    """Truncated surface-tension slope, |result| <= min(|sigma'(s)|, 1/eps)."""
    return tent_eps(closure.sigma_prime(s), eps)


def tau_eps(s, eps: float, closure: SurfactantClosure):
    """Truncated identity s * sigma_eps'(s)/sigma'(s).

    Where |sigma'(s)| is below the floating-point slope floor the ratio is
    taken as 1, which matches the limit of the tent truncation for small
    arguments: there sigma_eps' = sigma' exactly.
    """
    s = np.asarray(s, dtype=float)
    slope = np.asarray(closure.sigma_prime(s), dtype=float)
    truncated = tent_eps(slope, eps)
    tiny = np.abs(slope) < _SLOPE_FLOOR
    ratio = np.where(tiny, 1.0, truncated / np.where(tiny, 1.0, slope))
    return s * ratio


def tau_identity_threshold(eps: float, closure: SurfactantClosure) -> float:
    """Largest s_eps >= 0 with tau_eps = identity on [0, s_eps].

    When the closure can invert |sigma'| the threshold is exact:
    sup{s >= 0 : eps*|sigma'(s)| <= 1}.  Otherwise the growth bound
    Phi'' <= big_c_phi*(|s|^r + 1) yields the guaranteed value

        s_eps = ((1/(eps*big_c_phi))^(r/(r+1)) - 1)^(1/r),

    which degenerates to 0 once eps*big_c_phi >= 1 (a warning is issued:
    the truncation then has no guaranteed identity region).
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if closure.abs_slope_inverse is not None:
        return float(closure.abs_slope_inverse(1.0 / eps))
    r = closure.growth_r
    base = (1.0 / (eps * closure.big_c_phi)) ** (r / (r + 1.0)) - 1.0
    if base <= 0.0:
        warnings.warn(
            f"eps*big_c_phi = {eps * closure.big_c_phi:g} >= 1: the slope "
            "truncation has no guaranteed identity region (threshold 0)",
            RuntimeWarning,
        )
        return 0.0
    return float(base ** (1.0 / r))


def sigma_eps(s, eps: float, closure: SurfactantClosure):
    """Truncated tension sigma_eps(s) = sigma(1) + int_1^s sigma_eps'(t) dt.

    Diagnostic helper; evaluated by adaptive quadrature point by point, so it
    stays correct for any closure at the cost of speed.
    """
    sig1 = float(np.asarray(closure.sigma(np.array(1.0)), dtype=float))

    def integrand(t):
        return float(sigma_eps_prime(np.array(t), eps, closure))

    def single(val):
        result, _ = integrate.quad(integrand, 1.0, float(val), limit=200)
        return sig1 + result

    s_arr = np.asarray(s, dtype=float)
    if s_arr.ndim == 0:
        return single(s_arr)
    return np.array([single(v) for v in s_arr.ravel()]).reshape(s_arr.shape)
