"""Exact per-frequency symbol algebra for the two-sided interface model.

The second-order operator with piecewise-constant symmetric positive-definite
diffusion matrices is reduced at the interface {x_n = 0}: the normal
coefficient a_nn, the shift vector t_j = a_nj/a_nn and the tangential Schur
complement B (b_jk = a_jk - a_nj a_nk / a_nn) determine, per tangential
frequency xi', the scalar symbols

    m   = (<B xi', xi'> / a_nn)^(1/2)        (tangential square root)
    s   = <t, xi'>                           (normal/tangential cross shift)
    e,f = tau * phi' +- m                    (first-order factor imaginary parts)

for the weight phi_pm = alpha_pm x_n + beta x_n^2 / 2.  The homogeneous
formula for m is used for all xi' (no low-frequency smoothing), so
homogeneity m(rho xi') = rho m(xi') is exact and testable.

The module also hosts the weight-admissibility condition
alpha_+/alpha_- > sup m_+/m_-, the two overlapping microlocal cones in the
(tau, |xi'|) plane, the sub-ellipticity bracket checker, and the convexified
(x'-dependent-weight) symbols with their three-zone classification.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CoverFailureError, ValidationError, ZoneAssignmentError

# Default threshold above which the two cones must cover every frequency.
TAU2_DEFAULT = 10.0

# Scale-invariant tolerance for membership in the characteristic set.
CHAR_SET_TOL = 1e-9

_SYM_TOL = 1e-10


def _check_spd(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name}: expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > _SYM_TOL * scale:
        raise ValidationError(f"{name}: matrix is not symmetric")
    a = 0.5 * (a + a.T)
    w = np.linalg.eigvalsh(a)
    if w[0] <= 0.0:
        raise ValidationError(
            f"{name}: matrix is not positive-definite (min eigenvalue {w[0]:.3e})")
    return a


@dataclass(frozen=True)
class ReducedCoefficients:
    """Interface reduction of one diffusion matrix: a_nn, t and B."""

    a_nn: float
    t: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))
        object.__setattr__(self, "b", _check_spd(self.b, "reduced B"))
        if self.a_nn <= 0.0:
            raise ValidationError(f"a_nn must be positive, got {self.a_nn}")

    @property
    def g(self) -> np.ndarray:
        """Tangential form B / a_nn whose square root is m."""
        return self.b / self.a_nn

    def m(self, xi) -> np.ndarray | float:
        """m(xi') = (<B xi', xi'> / a_nn)^(1/2); accepts (..., n-1) arrays."""
        xi = np.asarray(xi, dtype=float)
        quad = np.einsum("...i,ij,...j->...", xi, self.g, xi)
        out = np.sqrt(quad)
        return float(out) if out.ndim == 0 else out

    def s(self, xi) -> np.ndarray | float:
        xi = np.asarray(xi, dtype=float)
        out = xi @ self.t
        return float(out) if np.ndim(out) == 0 else out

    def lambda_bounds(self) -> tuple[float, float]:
        """(lambda0, lambda1): min/max of m over the unit sphere."""
        w = np.linalg.eigvalsh(self.g)
        return float(np.sqrt(w[0])), float(np.sqrt(w[-1]))


@dataclass(frozen=True)
class ModelCoefficients:
    """The two constant SPD diffusion matrices of the interface model."""

    a_plus: np.ndarray
    a_minus: np.ndarray

    def __post_init__(self):
        ap = _check_spd(self.a_plus, "A_plus")
        am = _check_spd(self.a_minus, "A_minus")
        if ap.shape != am.shape:
            raise ValidationError(
                f"A_plus and A_minus have different shapes: {ap.shape} vs {am.shape}")
        if ap.shape[0] < 2:
            raise ValidationError("dimension must be at least 2")
        ap.flags.writeable = False
        am.flags.writeable = False
        object.__setattr__(self, "a_plus", ap)
        object.__setattr__(self, "a_minus", am)

    @classmethod
    def from_diagonal(cls, c_plus, c_minus) -> "ModelCoefficients":
        return cls(np.diag(np.asarray(c_plus, dtype=float)),
                   np.diag(np.asarray(c_minus, dtype=float)))

    @property
    def dimension(self) -> int:
        return self.a_plus.shape[0]

    @functools.cached_property
    def reduced_plus(self) -> ReducedCoefficients:
        return reduce_coefficients(self.a_plus)

    @functools.cached_property
    def reduced_minus(self) -> ReducedCoefficients:
        return reduce_coefficients(self.a_minus)


@dataclass(frozen=True)
class WeightSpec:
    """Piecewise weight phi_pm = alpha_pm x_n + beta x_n^2 / 2."""

    alpha_plus: float
    alpha_minus: float
    beta: float = 0.0

    def __post_init__(self):
        if self.alpha_plus <= 0.0:
            raise ValidationError(f"alpha_plus must be positive, got {self.alpha_plus}")
        if self.alpha_minus <= 0.0:
            raise ValidationError(f"alpha_minus must be positive, got {self.alpha_minus}")
        if self.beta < 0.0:
            raise ValidationError(f"beta must be nonnegative, got {self.beta}")

    def alpha(self, side: int) -> float:
        return self.alpha_plus if side > 0 else self.alpha_minus

    def phi_prime(self, side: int, x_n) -> np.ndarray | float:
        return self.alpha(side) + self.beta * np.asarray(x_n, dtype=float)

    def phi(self, side: int, x_n) -> np.ndarray | float:
        x_n = np.asarray(x_n, dtype=float)
        return self.alpha(side) * x_n + 0.5 * self.beta * x_n**2


@dataclass(frozen=True)
class TangentialFrequency:
    """A point (tau, xi') with lam = (tau^2 + |xi'|^2)^(1/2)."""

    tau: float
    xi: np.ndarray

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if not np.all(np.isfinite(xi)):
            raise ValidationError("xi must be finite")
        if not (self.tau > 0.0 and np.isfinite(self.tau)):
            raise ValidationError(f"tau must be positive and finite, got {self.tau}")
        xi.flags.writeable = False
        object.__setattr__(self, "xi", xi)

    @property
    def xi_abs(self) -> float:
        return float(np.linalg.norm(self.xi))

    @property
    def lam(self) -> float:
        return float(np.hypot(self.tau, self.xi_abs))


@dataclass(frozen=True)
class SymbolValues:
    m_plus: float
    m_minus: float
    s_plus: float
    s_minus: float
    e_plus: float
    e_minus: float
    f_plus: float
    f_minus: float
    phi_prime_plus: float
    phi_prime_minus: float


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of the interface slope condition alpha_+/alpha_- > sup m_+/m_-."""

    satisfied: bool
    sup_ratio: float
    sigma: float | None
    witness_direction: np.ndarray

    def sigma0_default(self) -> float:
        if self.sigma is None:
            raise ValidationError("sigma is undefined when the condition fails")
        return 0.5 * (1.0 + self.sigma)


class RegionLabel(enum.Enum):
    GAMMA_ONLY = "GammaOnly"
    TILDE_ONLY = "TildeOnly"
    BOTH = "Both"


class ConvexZone(enum.Enum):
    ZONE1 = "Zone1"
    ZONE2 = "Zone2"
    ZONE3 = "Zone3"


def reduce_coefficients(a) -> ReducedCoefficients:
    """Schur-complement reduction of an SPD matrix at the interface."""
    a = _check_spd(a, "coefficient matrix")
    a_nn = float(a[-1, -1])
    t = a[-1, :-1] / a_nn
    b = a[:-1, :-1] - np.outer(a[:-1, -1], a[-1, :-1]) / a_nn
    return ReducedCoefficients(a_nn=a_nn, t=t, b=b)


def symbol_values(red_plus: ReducedCoefficients, red_minus: ReducedCoefficients,
                  w: WeightSpec, freq: TangentialFrequency, x_n: float) -> SymbolValues:
    """Evaluate m, s, phi' and the factor symbols e, f on both sides."""
    if not np.isfinite(x_n):
        raise ValidationError(f"x_n must be finite, got {x_n}")
    mp = red_plus.m(freq.xi)
    mm = red_minus.m(freq.xi)
    pp = float(w.phi_prime(+1, x_n))
    pm = float(w.phi_prime(-1, x_n))
    return SymbolValues(
        m_plus=mp, m_minus=mm,
        s_plus=red_plus.s(freq.xi), s_minus=red_minus.s(freq.xi),
        e_plus=freq.tau * pp + mp, e_minus=freq.tau * pm + mm,
        f_plus=freq.tau * pp - mp, f_minus=freq.tau * pm - mm,
        phi_prime_plus=pp, phi_prime_minus=pm)


def sup_m_ratio(red_plus: ReducedCoefficients,
                red_minus: ReducedCoefficients) -> tuple[float, np.ndarray]:
    """sup over |xi'| = 1 of m_+/m_- and the maximizing unit direction.

    The square of the ratio is a generalized Rayleigh quotient of the pencil
    (B_+/a_nn^+, B_-/a_nn^-); the sup is the square root of its largest
    generalized eigenvalue (solved through the Cholesky factor of the
    minus-side form).
    """
    w, v = scipy.linalg.eigh(red_plus.g, red_minus.g)
    witness = v[:, -1] / np.linalg.norm(v[:, -1])
    k = int(np.argmax(np.abs(witness)))
    if witness[k] < 0:
        witness = -witness
    return float(np.sqrt(w[-1])), witness


def check_condition(coeffs: ModelCoefficients, w: WeightSpec) -> ConditionReport:
    """Test alpha_+/alpha_- > sup m_+/m_-; on success report sigma > 1 with
    alpha_+/alpha_- = sigma^2 * sup_ratio."""
    sup, witness = sup_m_ratio(coeffs.reduced_plus, coeffs.reduced_minus)
    slope_ratio = w.alpha_plus / w.alpha_minus
    satisfied = slope_ratio > sup
    sigma = float(np.sqrt(slope_ratio / sup)) if satisfied else None
    return ConditionReport(satisfied=satisfied, sup_ratio=sup, sigma=sigma,
                           witness_direction=witness)


def classify_region(red_plus: ReducedCoefficients, w: WeightSpec,
                    freq: TangentialFrequency, sigma0: float,
                    sigma: float) -> RegionLabel:
    """Assign a frequency point to the overlapping cones.

    Gamma_{sigma0} = {|xi'| < 2 or tau alpha_+ > sigma0 m_+}: f_+ elliptic
    positive there; TildeGamma_sigma = {|xi'| > 1 and tau alpha_+ < sigma m_+}:
    f_- elliptic negative there.  Raises CoverFailureError if the point lies
    in neither (must not happen for tau above the cover threshold).
    """
    if not 1.0 < sigma0 < sigma:
        raise ValidationError(f"need 1 < sigma0 < sigma, got {sigma0}, {sigma}")
    mp = red_plus.m(freq.xi)
    xi_abs = freq.xi_abs
    in_gamma = xi_abs < 2.0 or freq.tau * w.alpha_plus > sigma0 * mp
    in_tilde = xi_abs > 1.0 and freq.tau * w.alpha_plus < sigma * mp
    if in_gamma and in_tilde:
        return RegionLabel.BOTH
    if in_gamma:
        return RegionLabel.GAMMA_ONLY
    if in_tilde:
        return RegionLabel.TILDE_ONLY
    raise CoverFailureError(
        f"(tau={freq.tau}, |xi'|={xi_abs}) in neither cone "
        f"(sigma0={sigma0}, sigma={sigma})")


@dataclass(frozen=True)
class SubellipticityReport:
    q2: float
    q1: float
    bracket: float
    factor_bracket: float
    on_char_set: bool
    in_delta_set: bool
    lemma_holds: bool


def subellipticity_report(red: ReducedCoefficients, w: WeightSpec,
                          freq: TangentialFrequency, xi_n: float, x_n: float,
                          delta: float, *, side: int = +1, c_ratio: float = 100.0,
                          c_prime: float = 0.1) -> SubellipticityReport:
    """Sub-ellipticity checker at one phase-space point of one side.

    q2 = (xi_n + s)^2 + m^2 - (tau phi')^2 and q1 = tau phi' (xi_n + s) are the
    real and (half the) imaginary parts of the conjugated symbol.  For weights
    independent of x' the bracket {q2, q1} has the closed form
    2 tau beta ((xi_n + s)^2 + tau^2 phi'^2), and {xi_n + s, f} = tau beta.
    The half-derivative-loss property is tested on the set {|f| <= delta lam}:
    there tau and |xi'| must be comparable (within c_ratio) and the factor
    bracket must clear c_prime * lam.  beta = 0 reports failure rather than
    raising.
    """
    if delta <= 0.0:
        raise ValidationError(f"delta must be positive, got {delta}")
    tau = freq.tau
    m = red.m(freq.xi)
    s = red.s(freq.xi)
    phip = float(w.phi_prime(side, x_n))
    q2 = (xi_n + s) ** 2 + m**2 - (tau * phip) ** 2
    q1 = tau * phip * (xi_n + s)
    bracket = 2.0 * tau * w.beta * ((xi_n + s) ** 2 + (tau * phip) ** 2)
    factor_bracket = tau * w.beta
    lam2 = freq.lam ** 2
    on_char = abs(q2) <= CHAR_SET_TOL * lam2 and abs(q1) <= CHAR_SET_TOL * lam2
    f = tau * phip - m
    in_set = abs(f) <= delta * freq.lam
    if in_set:
        xi_abs = freq.xi_abs
        comparable = (xi_abs <= c_ratio * tau) and (tau <= c_ratio * xi_abs)
        lemma = w.beta > 0.0 and comparable and factor_bracket >= c_prime * freq.lam
    else:
        lemma = w.beta > 0.0
    return SubellipticityReport(q2=q2, q1=q1, bracket=bracket,
                                factor_bracket=factor_bracket,
                                on_char_set=on_char, in_delta_set=in_set,
                                lemma_holds=lemma)


@dataclass(frozen=True)
class ConvexifiedReport:
    frak_m: complex
    frak_e: float
    frak_f: float
    zone: ConvexZone
    smooth_root: bool
    realpart_bound_ok: bool


def convexified_symbols(red: ReducedCoefficients, w: WeightSpec, kappa_grad,
                        kappa_xn_deriv: float, freq: TangentialFrequency,
                        x_n: float, *, sigma0: float, sigma: float,
                        side: int = +1) -> ConvexifiedReport:
    """Symbols for a weight perturbed by kappa(x', x_n) with small gradient.

    frak_m is the principal square root of the complexified tangential form
    <G (xi' + i tau kappa'), (xi' + i tau kappa')> (bilinear, branch cut on
    the negative real axis, Re >= 0).  The root stays smooth while
    2 tau lambda1 |kappa'| <= lambda0 |xi'|, in which case
    Re(frak_m^2) >= (3/4) lambda0^2 |xi'|^2.  Zone1/2/3 reproduce the
    three overlapping tau-ranges of the perturbed analysis: factor elliptic
    below sigma m/alpha, smooth factorization in the middle band, fully
    elliptic above lambda0|xi'| / (4 lambda1 |kappa'|).
    """
    if not 1.0 < sigma0 < sigma:
        raise ValidationError(f"need 1 < sigma0 < sigma, got {sigma0}, {sigma}")
    kappa_grad = np.atleast_1d(np.asarray(kappa_grad, dtype=float))
    tau = freq.tau
    g = red.g
    z = freq.xi + 1j * tau * kappa_grad
    m2 = complex(z @ g @ z)
    frak_m = complex(np.sqrt(m2))
    s_kappa = float(kappa_grad @ red.t)
    normal_slope = float(w.phi_prime(side, x_n)) + kappa_xn_deriv
    frak_e = tau * (normal_slope + s_kappa) + frak_m.real
    frak_f = tau * (normal_slope + s_kappa) - frak_m.real

    lam0, lam1 = red.lambda_bounds()
    xi_abs = freq.xi_abs
    kg = float(np.linalg.norm(kappa_grad))
    smooth_root = 2.0 * tau * lam1 * kg <= lam0 * xi_abs
    realpart_ok = m2.real >= 0.75 * lam0**2 * xi_abs**2

    alpha = w.alpha(side)
    m = red.m(freq.xi)
    upper2 = lam0 * xi_abs / (2.0 * lam1 * kg) if kg > 0 else np.inf
    lower3 = lam0 * xi_abs / (4.0 * lam1 * kg) if kg > 0 else np.inf
    if tau * alpha <= sigma * m:
        zone = ConvexZone.ZONE1
    elif sigma0 * m / alpha <= tau <= upper2:
        zone = ConvexZone.ZONE2
    elif tau >= lower3:
        zone = ConvexZone.ZONE3
    else:
        raise ZoneAssignmentError(
            f"no zone matched (tau={tau}, |xi'|={xi_abs}, |kappa'|={kg})")
    return ConvexifiedReport(frak_m=frak_m, frak_e=frak_e, frak_f=frak_f,
                             zone=zone, smooth_root=smooth_root,
                             realpart_bound_ok=realpart_ok)
