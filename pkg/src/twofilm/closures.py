"""Physical parameters and surfactant equation-of-state closures.

The model couples two superposed thin liquid films (heights f and g) with an
insoluble surfactant of concentration Gamma transported on the upper free
surface.  The surface tension sigma(Gamma) enters the momentum balance only
through its slope sigma'(Gamma); the energy functional instead sees the
surfactant through a convex potential Phi.  The two are tied together by the
pairing identity

    Phi''(s) = -sigma'(s) / s        for all s,

which is what makes the energy estimate close.  A closure bundles sigma, Phi
and their derivatives together with the inverse W of Phi' (used to recover
Gamma from the evolved variable v = Phi'(Gamma)) and the convexity/growth
constants that the regularization thresholds need:

    anchor:      Phi(1) = Phi'(1) = 0
    convexity:   Phi''(s) >= c_phi > 0
    growth:      Phi''(s) <= big_c_phi * (|s|**r + 1),  0 < r < 1.

`validate_closure` checks all of this numerically on a sample grid so that a
hand-written closure cannot silently break the energy structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class PhysicalParams:
    """Geometry and material constants.

    mu is the viscosity ratio of the upper to the lower fluid (mu = 0
    decouples the lower film), sigma1c/sigma2c are the constant reference
    tensions of the two interfaces, diffusivity is the surface diffusivity of
    the surfactant.  The derived aggregates

        R = sigma1c + sigma2c * mu,   S = sigma2c

    are the coefficients multiplying the capillary gradients.
    """

    length: float = 1.0
    mu: float = 0.5
    sigma1c: float = 1.0
    sigma2c: float = 1.0
    diffusivity: float = 0.05

    def __post_init__(self):
        if self.length <= 0.0:
            raise ValueError(f"domain length must be positive, got {self.length}")
        if self.mu < 0.0:
            raise ValueError(f"viscosity ratio must be >= 0, got {self.mu}")
        if self.sigma1c <= 0.0 or self.sigma2c <= 0.0:
            raise ValueError("reference surface tensions must be positive")
        if self.diffusivity <= 0.0:
            raise ValueError(f"surfactant diffusivity must be positive, got {self.diffusivity}")

    @property
    def cap_r(self) -> float:
        """Coefficient R of the lower-interface capillary term."""
        return self.sigma1c + self.sigma2c * self.mu

    @property
    def cap_s(self) -> float:
        """Coefficient S of the combined-interface capillary term."""
        return self.sigma2c

    @property
    def r_exceeds_s(self) -> bool:
        """Whether R > S holds.

        Nothing in the solver assumes this ordering; it is reported because
        some a-priori estimates sharpen when it holds.
        """
        return self.cap_r > self.cap_s


def derive_coefficients(params: PhysicalParams) -> tuple[float, float]:
    """Return the capillary coefficient pair (R, S) for `params`."""
    return params.cap_r, params.cap_s


@dataclass(frozen=True)
class SurfactantClosure:
    """Equation of state sigma(Gamma) with its paired energy potential Phi.

    `w` inverts phi_prime: w(phi_prime(s)) = s.  `abs_slope_inverse`, when
    provided, inverts s -> |sigma_prime(s)| on s >= 0 and lets the
    regularization module compute its truncation threshold exactly instead of
    through the generic growth bound.
    """

    name: str
    sigma: Callable[[np.ndarray], np.ndarray]
    sigma_prime: Callable[[np.ndarray], np.ndarray]
    phi: Callable[[np.ndarray], np.ndarray]
    phi_prime: Callable[[np.ndarray], np.ndarray]
    phi_second: Callable[[np.ndarray], np.ndarray]
    w: Callable[[np.ndarray], np.ndarray]
    c_phi: float
    big_c_phi: float
    growth_r: float = 0.5
    abs_slope_inverse: Optional[Callable[[float], float]] = None
    # When Phi'' is a constant, set it here: the coefficient mass matrix of
    # the evolved surfactant variable is then state-independent and its
    # factorization can be cached.
    constant_phi_second: Optional[float] = None

    def __post_init__(self):
        if self.c_phi <= 0.0:
            raise ValueError("convexity constant c_phi must be positive")
        if self.big_c_phi < self.c_phi:
            raise ValueError("growth constant must dominate the convexity constant")
        if not (0.0 < self.growth_r < 1.0):
            raise ValueError(f"growth exponent must lie in (0, 1), got {self.growth_r}")


def quadratic_closure(beta: float = 0.5) -> SurfactantClosure:
    """Linear equation of state sigma'(s) = -beta*s.

    This gives sigma(s) = -(beta/2)(s^2 - 1), Phi(s) = (beta/2)(s - 1)^2,
    Phi''(s) = beta identically, and the affine inverse W(v) = 1 + v/beta.
    It satisfies the closure contract with c_phi = big_c_phi = beta for any
    growth exponent, and |sigma'| is exactly invertible.
    """
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")

    return SurfactantClosure(
        name=f"quadratic(beta={beta:g})",
        sigma=lambda s: -(beta / 2.0) * (np.asarray(s, dtype=float) ** 2 - 1.0),
        sigma_prime=lambda s: -beta * np.asarray(s, dtype=float),
        phi=lambda s: (beta / 2.0) * (np.asarray(s, dtype=float) - 1.0) ** 2,
        phi_prime=lambda s: beta * (np.asarray(s, dtype=float) - 1.0),
        phi_second=lambda s: np.full_like(np.asarray(s, dtype=float), beta),
        w=lambda v: 1.0 + np.asarray(v, dtype=float) / beta,
        c_phi=beta,
        big_c_phi=beta,
        growth_r=0.5,
        abs_slope_inverse=lambda y: y / beta,
        constant_phi_second=beta,
    )


@dataclass
class ClosureReport:
    """Numerical audit of a closure against its structural contract."""

    closure_name: str
    anchor_phi: float          # |Phi(1)|
    anchor_phi_prime: float    # |Phi'(1)|
    pairing_defect: float      # max |Phi''(s) + sigma'(s)/s|
    convexity_margin: float    # min Phi''(s) - c_phi  (>= -tol required)
    growth_excess: float       # max Phi''(s) - big_c_phi*(|s|^r + 1)  (<= tol)
    inverse_defect: float      # max |W(Phi'(s)) - s|
    lower_bound_margin: float  # min Phi(s) - (c_phi/2)(s-1)^2  (>= -tol)
    slope_sign_excess: float   # max sigma'(s) over s > 0  (<= tol)
    tol: float = 1e-10
    messages: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.messages


def validate_closure(closure: SurfactantClosure,
                     s_max: float = 8.0,
                     num: int = 4001,
                     tol: float = 1e-10) -> ClosureReport:
    """Check the closure contract on a sample grid of (0, s_max].

    Returns a report whose `ok` is False when any condition fails beyond
    `tol`; `messages` then names each violated condition.  The pairing
    identity is sampled away from s = 0 where it degenerates to 0/0.
    """
    s = np.linspace(s_max / num, s_max, num)
    phi = np.asarray(closure.phi(s), dtype=float)
    phi_p = np.asarray(closure.phi_prime(s), dtype=float)
    phi_pp = np.asarray(closure.phi_second(s), dtype=float)
    sig_p = np.asarray(closure.sigma_prime(s), dtype=float)

    report = ClosureReport(
        closure_name=closure.name,
        anchor_phi=abs(float(closure.phi(np.array(1.0)))),
        anchor_phi_prime=abs(float(closure.phi_prime(np.array(1.0)))),
        pairing_defect=float(np.max(np.abs(phi_pp + sig_p / s))),
        convexity_margin=float(np.min(phi_pp) - closure.c_phi),
        growth_excess=float(np.max(phi_pp - closure.big_c_phi * (np.abs(s) ** closure.growth_r + 1.0))),
        inverse_defect=float(np.max(np.abs(np.asarray(closure.w(phi_p), dtype=float) - s))),
        lower_bound_margin=float(np.min(phi - 0.5 * closure.c_phi * (s - 1.0) ** 2)),
        slope_sign_excess=float(np.max(sig_p)),
        tol=tol,
    )

    if report.anchor_phi > tol or report.anchor_phi_prime > tol:
        report.messages.append("potential is not anchored at s = 1 (Phi(1) or Phi'(1) nonzero)")
    if report.pairing_defect > tol:
        report.messages.append("pairing identity Phi''(s) = -sigma'(s)/s violated")
    if report.convexity_margin < -tol:
        report.messages.append("uniform convexity Phi'' >= c_phi violated")
    if report.growth_excess > tol:
        report.messages.append("sublinear growth bound on Phi'' violated")
    if report.inverse_defect > tol:
        report.messages.append("W does not invert Phi'")
    if report.lower_bound_margin < -tol:
        report.messages.append("quadratic lower bound Phi(s) >= (c_phi/2)(s-1)^2 violated")
    if report.slope_sign_excess > tol:
        report.messages.append("sigma must be non-increasing on s >= 0")
    return report
