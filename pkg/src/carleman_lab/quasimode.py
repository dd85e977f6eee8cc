"""Quasi-mode construction certifying failure of the weighted estimate.

When the slope condition alpha_+/alpha_- > sup m_+/m_- is strictly violated
there is a normalized frequency ray (tau0, xi0') with
m_-(xi0')/alpha_- < tau0 < m_+(xi0')/alpha_+, i.e. f_+ < 0 < f_- at the
interface.  Along a thin cone around that ray one can solve the first-order
factor equations exactly on each half-line:

    u_+ = Q_+ psi chi(tau beta gamma x_n / |f_+(0)|),          x_n >= 0,
    u_- = (a Q_- chi(.../f_-(0)) + b Qt_- chi(.../e_-(0))) psi, x_n <= 0,

with Q(x_n) = exp(x_n (g(0) + tau beta x_n / 2)) for g in {f_+, f_-, e_-},
a + b = 1 (continuity) and a_nn^+ m_+ = a_nn^- (a - b) m_- (flux).  The
residual of the conjugated operator lives where the plateau cutoff varies and
carries the factor exp(x_n f(0)) evaluated there, which vanishes like
exp(-c tau / gamma): the residual/norm ratio decays and no estimate constant
can survive.  A per-side phase exp(-i s x_n) extends the construction to
matrices with nonzero normal/tangential coupling.

Norms are computed by tensor Gauss-Legendre quadrature over the cone and the
profile supports, with resolution-doubling as the convergence check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergenceError, ValidationError
from .fitting import LinearFit, fit_log_vs_x
from .symbols import ModelCoefficients, WeightSpec, check_condition

TAU_MIN_DEFAULT = 50.0


# --------------------------------------------------------------------------
# plateau cutoff: 1 on [-1/2, 1/2], supported in (-1, 1), bump bridge between
# --------------------------------------------------------------------------

def plateau_bump(t):
    """chi(t): 1 for |t| <= 1/2, exp(1 - 1/(1 - r^2)) with r = 2|t| - 1 on the
    bridge, 0 for |t| >= 1."""
    t = np.abs(np.asarray(t, dtype=float))
    out = np.zeros(t.shape)
    out[t <= 0.5] = 1.0
    mid = (t > 0.5) & (t < 1.0)
    r = 2.0 * t[mid] - 1.0
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - r * r))
    return out


def plateau_bump_d1(t):
    t_arr = np.asarray(t, dtype=float)
    ta = np.abs(t_arr)
    out = np.zeros(ta.shape)
    mid = (ta > 0.5) & (ta < 1.0)
    r = 2.0 * ta[mid] - 1.0
    s = 1.0 - r * r
    out[mid] = np.exp(1.0 - 1.0 / s) * (-2.0 * r / s**2) * 2.0
    return out * np.sign(t_arr)


def plateau_bump_d2(t):
    ta = np.abs(np.asarray(t, dtype=float))
    out = np.zeros(ta.shape)
    mid = (ta > 0.5) & (ta < 1.0)
    r = 2.0 * ta[mid] - 1.0
    s = 1.0 - r * r
    g = np.exp(1.0 - 1.0 / s)
    out[mid] = 4.0 * g * (4.0 * r * r / s**4 - 2.0 / s**2 - 8.0 * r * r / s**3)
    return out


# --------------------------------------------------------------------------
# domain types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ViolationPoint:
    """Normalized ray (tau0, xi0') with f_+ < 0 < f_- at the interface."""

    tau0: float
    xi0: np.ndarray

    def __post_init__(self):
        xi0 = np.atleast_1d(np.asarray(self.xi0, dtype=float))
        xi0.flags.writeable = False
        object.__setattr__(self, "xi0", xi0)
        if not 0.0 < self.tau0 < 1.0:
            raise ValidationError(f"tau0 must lie in (0, 1), got {self.tau0}")
        norm2 = self.tau0**2 + float(xi0 @ xi0)
        if abs(norm2 - 1.0) > 1e-10:
            raise ValidationError(f"(tau0, xi0) not normalized: |.|^2 = {norm2}")

    def sandwiched(self, coeffs: ModelCoefficients, w: WeightSpec) -> bool:
        """Re-check m_-(xi0)/alpha_- < tau0 < m_+(xi0)/alpha_+."""
        m_p = coeffs.reduced_plus.m(self.xi0)
        m_m = coeffs.reduced_minus.m(self.xi0)
        return m_m / w.alpha_minus < self.tau0 < m_p / w.alpha_plus


@dataclass(frozen=True)
class QuasiModeSpec:
    """Violation ray, support-shrinking factor and interface coefficients.

    a, b are the matching coefficients at the ray center; the evaluators
    recompute them per frequency so the flux condition holds pointwise.
    """

    violation: ViolationPoint
    gamma: float
    a: float
    b: float
    cutoff_width: float = 0.05

    def __post_init__(self):
        if self.gamma < 1.0:
            raise ValidationError(f"gamma must be >= 1, got {self.gamma}")
        if not 0.0 < self.cutoff_width < 0.5:
            raise ValidationError(f"cutoff_width must lie in (0, 1/2), got {self.cutoff_width}")
        if abs(self.a + self.b - 1.0) > 1e-12:
            raise ValidationError("interface coefficients must satisfy a + b = 1")
        if self.a < 0.5:
            raise ValidationError(f"a must be >= 1/2, got {self.a}")

    def psi(self, tau: float, xi) -> np.ndarray:
        """Cone cutoff around the violation ray in the (tau, xi') sphere.
        xi is one frequency (1-d) or a stack of them (K, n-1)."""
        xi = np.asarray(xi, dtype=float)
        if xi.ndim == 1:
            xi = xi[None, :]
        lam = np.sqrt(tau**2 + np.sum(xi**2, axis=-1))
        d_tau = tau / lam - self.violation.tau0
        d_xi = np.linalg.norm(xi / lam[..., None] - self.violation.xi0, axis=-1)
        wdt = self.cutoff_width
        return plateau_bump(d_tau / wdt) * plateau_bump(d_xi / wdt)


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor Gauss-Legendre resolution for the cone and profile integrals."""

    xi_nodes: int = 128
    xn_nodes_per_scale: int = 64
    panel_nodes: int = 16

    def doubled(self) -> "QuadratureSpec":
        return QuadratureSpec(xi_nodes=2 * self.xi_nodes,
                              xn_nodes_per_scale=2 * self.xn_nodes_per_scale,
                              panel_nodes=self.panel_nodes)


@dataclass(frozen=True)
class QuasiModeEval:
    tau: float
    norm_residual: float
    norm_u: float
    ratio: float
    norm_u_sq_lower_bound: float
    tables: dict | None = None


@dataclass(frozen=True)
class QuasiModeSweep:
    evals: list[QuasiModeEval]
    fit: LinearFit | None  # None for single-point sweeps


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def find_violation(coeffs: ModelCoefficients, w: WeightSpec) -> ViolationPoint | None:
    """Midpoint of the violated frequency interval along the witness
    direction, normalized to the unit sphere; absent when the slope condition
    holds (or sits exactly on the boundary)."""
    report = check_condition(coeffs, w)
    if w.alpha_plus / w.alpha_minus >= report.sup_ratio:
        return None
    d = report.witness_direction
    lo = coeffs.reduced_minus.m(d) / w.alpha_minus
    hi = coeffs.reduced_plus.m(d) / w.alpha_plus
    mu = 0.5 * (lo + hi)
    rho = 1.0 / math.sqrt(1.0 + mu * mu)
    point = ViolationPoint(tau0=mu * rho, xi0=rho * d)
    if not point.sandwiched(coeffs, w):
        raise ValidationError("constructed violation point failed its own invariant")
    return point


def ab_coefficients(coeffs: ModelCoefficients, xi_prime) -> tuple[float, float]:
    """Interface matching coefficients: a + b = 1 and
    a_nn^+ m_+ = a_nn^- (a - b) m_-."""
    red_p, red_m = coeffs.reduced_plus, coeffs.reduced_minus
    m_m = red_m.m(xi_prime)
    if np.any(np.asarray(m_m) == 0.0):
        raise ValidationError("ab_coefficients: m_-(xi') vanishes (xi' = 0)")
    r = red_p.a_nn * red_p.m(xi_prime) / (red_m.a_nn * m_m)
    a = 0.5 * (1.0 + r)
    return a, 1.0 - a


def build_spec(coeffs: ModelCoefficients, w: WeightSpec, gamma: float,
               cutoff_width: float = 0.05) -> QuasiModeSpec | None:
    """Assemble a QuasiModeSpec at the violation ray; None when none exists."""
    point = find_violation(coeffs, w)
    if point is None:
        return None
    a, b = ab_coefficients(coeffs, point.xi0)
    return QuasiModeSpec(violation=point, gamma=gamma, a=float(a), b=float(b),
                         cutoff_width=cutoff_width)


def _profiles(spec: QuasiModeSpec, coeffs: ModelCoefficients, w: WeightSpec,
              tau: float, xi: np.ndarray, xn_plus: np.ndarray,
              xn_minus: np.ndarray):
    """Vectorized u and residual tables on a (xi, x_n) tensor grid.

    xi has shape (K, n-1); returns arrays of shape (K, len(xn_plus)) and
    (K, len(xn_minus)).  Entries outside supp psi are zero.
    """
    red_p, red_m = coeffs.reduced_plus, coeffs.reduced_minus
    psiv = spec.psi(tau, xi)
    mask = psiv > 0.0

    m_p = red_p.m(xi)
    m_m = red_m.m(xi)
    fp0 = tau * w.alpha_plus - m_p
    fm0 = tau * w.alpha_minus - m_m
    em0 = tau * w.alpha_minus + m_m
    if np.any(mask & ~((fp0 < 0.0) & (fm0 > 0.0))):
        raise ValidationError("psi support leaks outside the violation cone; "
                              "reduce the cutoff width")

    # safe denominators off the support
    fp0s = np.where(mask, fp0, -1.0)
    fm0s = np.where(mask, fm0, 1.0)
    em0s = np.where(mask, em0, 1.0)
    m_ms = np.where(mask, m_m, 1.0)

    r = red_p.a_nn * m_p / (red_m.a_nn * m_ms)
    a = 0.5 * (1.0 + r)
    b = 1.0 - a

    tb = tau * w.beta
    tbg = tb * spec.gamma
    psv = np.where(mask, psiv, 0.0)[:, None]

    s_p = red_p.s(xi)[:, None] if red_p.t.size else 0.0
    s_m = red_m.s(xi)[:, None] if red_m.t.size else 0.0
    if np.ndim(s_p) and np.all(s_p == 0.0):
        s_p = 0.0
    if np.ndim(s_m) and np.all(s_m == 0.0):
        s_m = 0.0

    xp = xn_plus[None, :]
    q_plus = np.exp(xp * (fp0s[:, None] + 0.5 * tb * xp))
    arg_p = tbg * xp / np.abs(fp0s)[:, None]
    theta_p = tbg / np.abs(fp0s)[:, None]
    phase_p = np.exp(-1j * s_p * xp) if np.ndim(s_p) else 1.0
    u_plus = phase_p * q_plus * plateau_bump(arg_p) * psv
    res_plus = phase_p * red_p.a_nn * (
        2.0 * m_p[:, None] * theta_p * q_plus * plateau_bump_d1(arg_p)
        - theta_p**2 * q_plus * plateau_bump_d2(arg_p)) * psv

    xm = xn_minus[None, :]
    q_minus = np.exp(xm * (fm0s[:, None] + 0.5 * tb * xm))
    qt_minus = np.exp(xm * (em0s[:, None] + 0.5 * tb * xm))
    arg_f = tbg * xm / fm0s[:, None]
    arg_e = tbg * xm / em0s[:, None]
    th_f = tbg / fm0s[:, None]
    th_e = tbg / em0s[:, None]
    phase_m = np.exp(-1j * s_m * xm) if np.ndim(s_m) else 1.0
    a_ = a[:, None]
    b_ = b[:, None]
    u_minus = phase_m * (a_ * q_minus * plateau_bump(arg_f)
                         + b_ * qt_minus * plateau_bump(arg_e)) * psv
    res_minus = phase_m * red_m.a_nn * (
        2.0 * m_m[:, None] * (a_ * th_f * q_minus * plateau_bump_d1(arg_f)
                              - b_ * th_e * qt_minus * plateau_bump_d1(arg_e))
        - (a_ * th_f**2 * q_minus * plateau_bump_d2(arg_f)
           + b_ * th_e**2 * qt_minus * plateau_bump_d2(arg_e))) * psv

    bounds = {"fp0": fp0, "fm0": fm0, "em0": em0, "mask": mask, "psi": psiv,
              "m_plus": m_p, "m_minus": m_m}
    return u_plus, res_plus, u_minus, res_minus, bounds


def eval_quasimode(spec: QuasiModeSpec, coeffs: ModelCoefficients, w: WeightSpec,
                   tau: float, xi_prime, x_n):
    """Pointwise (u, residual) at one frequency; x_n may be an array."""
    xi = np.atleast_1d(np.asarray(xi_prime, dtype=float))[None, :]
    fp0 = tau * w.alpha_plus - coeffs.reduced_plus.m(xi[0])
    if fp0 >= 0.0:
        raise ValidationError(
            f"f_+(0) = {fp0:.6g} >= 0 at (tau={tau}, xi'={xi_prime}): "
            "outside the violation cone")
    x_arr = np.atleast_1d(np.asarray(x_n, dtype=float))
    xn_plus = np.where(x_arr >= 0.0, x_arr, 0.0)
    xn_minus = np.where(x_arr < 0.0, x_arr, 0.0)
    up, rp, um, rm = _profiles(spec, coeffs, w, tau, xi, xn_plus, xn_minus)[:4]
    u = np.where(x_arr >= 0.0, up[0], um[0])
    res = np.where(x_arr >= 0.0, rp[0], rm[0])
    if np.ndim(x_n) == 0:
        return complex(u[0]), complex(res[0])
    return u, res


def _panel_gauss(a: float, b: float, n_panels: int, nodes: int):
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    xs = (half[:, None] * xg[None, :] + mid[:, None]).ravel()
    ws = (half[:, None] * wg[None, :]).ravel()
    return xs, ws


def _xi_grid(spec: QuasiModeSpec, tau: float, q: QuadratureSpec):
    """Composite GL grid over the bounding box of supp psi; returns
    (points (K, d), weights (K,))."""
    wdt = spec.cutoff_width
    v = spec.violation
    lam_lo = tau / (v.tau0 + wdt)
    lam_hi = tau / (v.tau0 - wdt)
    axes, weights = [], []
    n_panels = max(1, q.xi_nodes // q.panel_nodes)
    for j in range(v.xi0.size):
        cands = [lam_lo * (v.xi0[j] - wdt), lam_lo * (v.xi0[j] + wdt),
                 lam_hi * (v.xi0[j] - wdt), lam_hi * (v.xi0[j] + wdt)]
        xs, ws = _panel_gauss(min(cands), max(cands), n_panels, q.panel_nodes)
        axes.append(xs)
        weights.append(ws)
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.ones(pts.shape[0])
    for j, ws in enumerate(weights):
        shape = [1] * len(weights)
        shape[j] = ws.size
        wts = wts * np.broadcast_to(ws.reshape(shape),
                                    [w.size for w in weights]).ravel()
    return pts, wts


def _xn_grids(spec: QuasiModeSpec, w: WeightSpec, tau: float, bounds,
              q: QuadratureSpec):
    mask = bounds["mask"]
    tbg = tau * w.beta * spec.gamma
    fp = np.abs(bounds["fp0"][mask])
    fm = bounds["fm0"][mask]
    em = bounds["em0"][mask]
    x_plus = float(np.max(fp)) / tbg
    scale_p = float(np.min(fp)) / tbg
    x_minus = float(np.max(em)) / tbg
    scale_m = float(np.min(fm)) / tbg
    per_scale = max(1, q.xn_nodes_per_scale // q.panel_nodes)
    np_plus = max(2, math.ceil(per_scale * x_plus / scale_p))
    np_minus = max(2, math.ceil(per_scale * x_minus / scale_m))
    xp, wp = _panel_gauss(0.0, x_plus, np_plus, q.panel_nodes)
    xm, wm = _panel_gauss(-x_minus, 0.0, np_minus, q.panel_nodes)
    return (xp, wp), (xm, wm)


def _norms_once(spec, coeffs, w, tau, q, keep_tables=False):
    xi, wxi = _xi_grid(spec, tau, q)
    psiv = spec.psi(tau, xi)
    # probe pass to get support bounds without building profile tables
    red_p, red_m = coeffs.reduced_plus, coeffs.reduced_minus
    mask = psiv > 0.0
    if not np.any(mask):
        raise ValidationError("psi vanishes on the whole quadrature box")
    bounds_probe = {
        "fp0": tau * w.alpha_plus - red_p.m(xi),
        "fm0": tau * w.alpha_minus - red_m.m(xi),
        "em0": tau * w.alpha_minus + red_m.m(xi),
        "mask": mask,
    }
    (xp, wp), (xm, wm) = _xn_grids(spec, w, tau, bounds_probe, q)
    u_p, r_p, u_m, r_m, bounds = _profiles(spec, coeffs, w, tau, xi, xp, xm)
    nu2 = float(wxi @ (np.abs(u_p) ** 2 @ wp) + wxi @ (np.abs(u_m) ** 2 @ wm))
    nr2 = float(wxi @ (np.abs(r_p) ** 2 @ wp) + wxi @ (np.abs(r_m) ** 2 @ wm))
    tbg = tau * w.beta * spec.gamma
    fp0, fm0 = bounds["fp0"], bounds["fm0"]
    with np.errstate(divide="ignore", invalid="ignore"):
        lb_terms = ((1.0 - np.exp(-fp0**2 / tbg)) / (2.0 * np.abs(fp0))
                    + (1.0 - np.exp(-fm0**2 / tbg)) / (8.0 * fm0))
    lb = float(np.sum(wxi[mask] * bounds["psi"][mask] ** 2 * lb_terms[mask]))
    tables = None
    if keep_tables:
        tables = {"xi": xi, "xi_weights": wxi, "xn_plus": xp, "xn_minus": xm,
                  "u_plus": u_p, "u_minus": u_m,
                  "residual_plus": r_p, "residual_minus": r_m}
    return math.sqrt(nr2), math.sqrt(nu2), lb, tables


def quasimode_norms(spec: QuasiModeSpec, coeffs: ModelCoefficients,
                    w: WeightSpec, tau_list, quadrature: QuadratureSpec,
                    *, tau_min: float = TAU_MIN_DEFAULT, keep_tables=False,
                    convergence_rtol: float = 1e-3) -> QuasiModeSweep:
    """Residual and solution norms over a tau sweep, with a log-linear fit of
    the ratio.  Each tau is recomputed at doubled resolution; a relative shift
    beyond convergence_rtol in either norm raises NonConvergenceError."""
    if w.beta <= 0.0:
        raise ValidationError("quasi-mode evaluation requires beta > 0")
    taus = sorted(float(t) for t in tau_list)
    if taus and taus[0] < tau_min:
        raise ValidationError(f"tau values must be >= {tau_min}, got {taus[0]}")
    evals = []
    for tau in taus:
        nr, nu, lb, _ = _norms_once(spec, coeffs, w, tau, quadrature)
        nr2, nu2, lb2, tables = _norms_once(spec, coeffs, w, tau,
                                            quadrature.doubled(),
                                            keep_tables=keep_tables)
        if abs(nr - nr2) > convergence_rtol * nr2 or \
           abs(nu - nu2) > convergence_rtol * nu2:
            raise NonConvergenceError(
                f"quadrature not converged at tau={tau}: "
                f"residual shift {abs(nr - nr2) / nr2:.2e}, "
                f"norm shift {abs(nu - nu2) / nu2:.2e}")
        evals.append(QuasiModeEval(tau=tau, norm_residual=nr2, norm_u=nu2,
                                   ratio=nr2 / nu2,
                                   norm_u_sq_lower_bound=lb2, tables=tables))
    fit = None
    if len(evals) >= 2:
        fit = fit_log_vs_x([e.tau for e in evals], [e.ratio for e in evals])
    return QuasiModeSweep(evals=evals, fit=fit)


# --------------------------------------------------------------------------
# physical-space realization (one tangential dimension)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid2D:
    """Evaluation grid for the physical-space field: tangential nodes and
    one uniform normal grid per side (xn_plus starts at 0, xn_minus ends
    at 0)."""

    x_t: np.ndarray
    xn_plus: np.ndarray
    xn_minus: np.ndarray

    def __post_init__(self):
        for name in ("x_t", "xn_plus", "xn_minus"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.size < 8:
                raise ValidationError(f"grid2d.{name}: need a 1-d array with >= 8 nodes")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.xn_plus[0] != 0.0 or np.any(np.diff(self.xn_plus) <= 0):
            raise ValidationError("grid2d.xn_plus must increase from 0")
        if self.xn_minus[-1] != 0.0 or np.any(np.diff(self.xn_minus) <= 0):
            raise ValidationError("grid2d.xn_minus must increase up to 0")

    @classmethod
    def for_quasimode(cls, spec: QuasiModeSpec, coeffs: ModelCoefficients,
                      w: WeightSpec, tau: float, n_tangential: int = 48,
                      n_normal: int = 96) -> "Grid2D":
        v = spec.violation
        lam_hi = tau / (v.tau0 - spec.cutoff_width)
        m_hi_p = coeffs.reduced_plus.lambda_bounds()[1]
        m_hi_m = coeffs.reduced_minus.lambda_bounds()[1]
        reach = lam_hi * (np.linalg.norm(v.xi0) + spec.cutoff_width)
        tbg = tau * w.beta * spec.gamma
        x_plus = (tau * w.alpha_plus + m_hi_p * reach) / tbg
        x_minus = (tau * w.alpha_minus + m_hi_m * reach) / tbg
        half_width = 1.05 / math.sqrt(tau)
        return cls(x_t=np.linspace(-half_width, half_width, n_tangential),
                   xn_plus=np.linspace(0.0, x_plus, n_normal),
                   xn_minus=np.linspace(-x_minus, 0.0, n_normal))


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x)
    w[1:] += 0.5 * np.diff(x)
    w[:-1] += 0.5 * np.diff(x)
    return w


@dataclass(frozen=True)
class PhysicalField:
    """Physical quasi-mode on a 2-d grid with its residual and the
    transmission/consistency report."""

    grid: Grid2D
    v_plus: np.ndarray
    v_minus: np.ndarray
    residual_plus: np.ndarray
    residual_minus: np.ndarray
    norm_v: float
    norm_residual: float
    ratio_physical: float
    ratio_frequency: float
    continuity_error: float
    flux_mismatch: float

    @property
    def ratio_quotient(self) -> float:
        return self.ratio_physical / self.ratio_frequency


def _dn_one_sided(values: np.ndarray, h: float, at_start: bool) -> np.ndarray:
    """Second-order one-sided D_n = -i d/dx_n along the last axis."""
    if at_start:
        d = (-3.0 * values[..., 0] + 4.0 * values[..., 1] - values[..., 2]) / (2 * h)
    else:
        d = (3.0 * values[..., -1] - 4.0 * values[..., -2] + values[..., -3]) / (2 * h)
    return -1j * d


def build_physical_v(spec: QuasiModeSpec, coeffs: ModelCoefficients,
                     w: WeightSpec, tau: float, grid2d: Grid2D,
                     quadrature: QuadratureSpec | None = None,
                     *, convergence_rtol: float = 5e-3) -> PhysicalField:
    """Inverse tangential Fourier integral of the quasi-mode times the
    spatial cutoff chi(sqrt(tau) x'), with the conjugated-operator residual
    evaluated analytically (frequency-side residual plus the cutoff
    commutator terms).  One tangential dimension only.

    Continuity at the interface is exact.  The flux condition is exact for
    the uncut field; the cutoff commutes with the conjugated flux only when
    a_nn^+ t_+ = a_nn^- t_- (diagonal matrices in particular), so for
    coupled matrices flux_mismatch carries a genuine stationary-phase tail
    supported on the cutoff's derivative annulus, on top of the one-sided
    stencil truncation that refinement removes."""
    if coeffs.dimension != 2:
        raise ValidationError("build_physical_v requires dimension n = 2")
    q = quadrature or QuadratureSpec()

    def compute(qspec: QuadratureSpec):
        xi, wxi = _xi_grid(spec, tau, qspec)
        u_p, r_p, u_m, r_m, bounds = _profiles(
            spec, coeffs, w, tau, xi, grid2d.xn_plus, grid2d.xn_minus)
        xi1 = xi[:, 0]
        osc = np.exp(1j * np.outer(grid2d.x_t, xi1)) * wxi[None, :]
        cut = plateau_bump(math.sqrt(tau) * grid2d.x_t)
        cut_d1 = plateau_bump_d1(math.sqrt(tau) * grid2d.x_t)
        cut_d2 = plateau_bump_d2(math.sqrt(tau) * grid2d.x_t)
        pref = 1.0 / (2.0 * math.pi)

        out = {}
        for side, u_tab, r_tab, red in (("plus", u_p, r_p, coeffs.reduced_plus),
                                        ("minus", u_m, r_m, coeffs.reduced_minus)):
            ift_u = osc @ u_tab
            ift_r = osc @ r_tab
            ift_ju = osc @ (xi1[:, None] * u_tab)
            # conjugated normal factor (D_n + i tau phi') u, in closed form
            xn = grid2d.xn_plus if side == "plus" else grid2d.xn_minus
            m = red.m(xi)
            s = red.s(xi) if red.t.size else np.zeros(xi.shape[0])
            phase = np.exp(-1j * np.outer(s, xn))
            y_tab = u_tab * np.conj(phase)
            tbg = tau * w.beta * spec.gamma
            psiv = bounds["psi"]
            mask = bounds["mask"]
            if side == "plus":
                fp0 = np.where(mask, bounds["fp0"], -1.0)
                qq = np.exp(xn[None, :] * (fp0[:, None] + 0.5 * tau * w.beta * xn[None, :]))
                th = tbg / np.abs(fp0)[:, None]
                dchi = th * qq * plateau_bump_d1(tbg * xn[None, :] / np.abs(fp0)[:, None])
                w_tab = phase * ((-s[:, None] + 1j * m[:, None]) * y_tab
                                 - 1j * dchi * np.where(mask, psiv, 0.0)[:, None])
            else:
                fm0 = np.where(mask, bounds["fm0"], 1.0)
                em0 = np.where(mask, bounds["em0"], 1.0)
                m_ms = np.where(mask, bounds["m_minus"], 1.0)
                rr = coeffs.reduced_plus.a_nn * bounds["m_plus"] / (coeffs.reduced_minus.a_nn * m_ms)
                a_ = 0.5 * (1.0 + rr)[:, None]
                b_ = 1.0 - a_
                qm = np.exp(xn[None, :] * (fm0[:, None] + 0.5 * tau * w.beta * xn[None, :]))
                qt = np.exp(xn[None, :] * (em0[:, None] + 0.5 * tau * w.beta * xn[None, :]))
                th_f = tbg / fm0[:, None]
                th_e = tbg / em0[:, None]
                psv = np.where(mask, psiv, 0.0)[:, None]
                mcol = m[:, None]
                w_tab = phase * (
                    -s[:, None] * y_tab
                    + 1j * mcol * (a_ * qm * plateau_bump(tbg * xn[None, :] / fm0[:, None])
                                   - b_ * qt * plateau_bump(tbg * xn[None, :] / em0[:, None])) * psv
                    - 1j * (a_ * th_f * qm * plateau_bump_d1(tbg * xn[None, :] / fm0[:, None])
                            + b_ * th_e * qt * plateau_bump_d1(tbg * xn[None, :] / em0[:, None])) * psv)
            ift_w = osc @ w_tab

            a_full = coeffs.a_plus if side == "plus" else coeffs.a_minus
            a11 = a_full[0, 0]
            a1n = a_full[0, 1]
            v_side = pref * cut[:, None] * ift_u
            res_side = pref * (
                cut[:, None] * ift_r
                + a11 * (-tau * cut_d2[:, None] * ift_u
                         - 2j * math.sqrt(tau) * cut_d1[:, None] * ift_ju)
                + 2.0 * a1n * (-1j * math.sqrt(tau)) * cut_d1[:, None] * ift_w)
            out[side] = (v_side, res_side)
        return out

    coarse = compute(q)
    fine = compute(QuadratureSpec(xi_nodes=2 * q.xi_nodes,
                                  xn_nodes_per_scale=q.xn_nodes_per_scale,
                                  panel_nodes=q.panel_nodes))
    wt = _trapezoid_weights(grid2d.x_t)
    wp = _trapezoid_weights(grid2d.xn_plus)
    wm = _trapezoid_weights(grid2d.xn_minus)

    def norms(tabs):
        v2 = float(wt @ (np.abs(tabs["plus"][0]) ** 2 @ wp)
                   + wt @ (np.abs(tabs["minus"][0]) ** 2 @ wm))
        r2 = float(wt @ (np.abs(tabs["plus"][1]) ** 2 @ wp)
                   + wt @ (np.abs(tabs["minus"][1]) ** 2 @ wm))
        return math.sqrt(v2), math.sqrt(r2)

    nv_c, nr_c = norms(coarse)
    nv, nr = norms(fine)
    if abs(nv - nv_c) > convergence_rtol * nv or abs(nr - nr_c) > convergence_rtol * nr:
        raise NonConvergenceError(
            f"oscillatory quadrature failed its doubling test at tau={tau}: "
            f"norm shift {abs(nv - nv_c) / nv:.2e}, "
            f"residual shift {abs(nr - nr_c) / nr:.2e}")

    v_plus, res_plus = fine["plus"]
    v_minus, res_minus = fine["minus"]
    max_v = max(float(np.max(np.abs(v_plus))), float(np.max(np.abs(v_minus))))
    continuity = float(np.max(np.abs(v_plus[:, 0] - v_minus[:, -1])))

    # discrete conjugated flux a_nn (D_n + T + i tau alpha) v at the interface
    red_p, red_m = coeffs.reduced_plus, coeffs.reduced_minus
    hp = float(grid2d.xn_plus[1] - grid2d.xn_plus[0])
    hm = float(grid2d.xn_minus[-1] - grid2d.xn_minus[-2])
    ht = float(grid2d.x_t[1] - grid2d.x_t[0])
    d1_trace_p = -1j * np.gradient(v_plus[:, 0], ht)
    d1_trace_m = -1j * np.gradient(v_minus[:, -1], ht)
    flux_p = red_p.a_nn * (_dn_one_sided(v_plus, hp, at_start=True)
                           + red_p.t[0] * d1_trace_p
                           + 1j * tau * w.alpha_plus * v_plus[:, 0])
    flux_m = red_m.a_nn * (_dn_one_sided(v_minus, hm, at_start=False)
                           + red_m.t[0] * d1_trace_m
                           + 1j * tau * w.alpha_minus * v_minus[:, -1])
    flux_scale = max(float(np.max(np.abs(flux_p))), float(np.max(np.abs(flux_m))), 1e-300)
    flux_mismatch = float(np.max(np.abs(flux_p - flux_m))) / flux_scale

    nr_u, nu_u, _, _ = _norms_once(spec, coeffs, w, tau, q)
    return PhysicalField(grid=grid2d, v_plus=v_plus, v_minus=v_minus,
                         residual_plus=res_plus, residual_minus=res_minus,
                         norm_v=nv, norm_residual=nr,
                         ratio_physical=nr / nv, ratio_frequency=nr_u / nu_u,
                         continuity_error=continuity / max(max_v, 1e-300),
                         flux_mismatch=flux_mismatch)
