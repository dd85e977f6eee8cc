"""Per-frequency finite-difference discretization of the conjugated operator.

One tangential frequency (tau, xi') at a time, the conjugated operator on the
line is, per side,

    P = a_nn ( -d2/dx_n^2 + (2 tau phi' - 2 i s) d/dx_n
               + tau beta + (s + i tau phi')^2 + m^2 ),

equivalently the product of the first-order factors D_n + s + i(tau phi' +- m)
ordered per side.  Functions carry independent one-sided values at x_n = 0
tied by the two transmission rows (continuity and conjugated flux).  The two
trace DOFs are eliminated through the constraint rows; the smallest singular
value of the reduced operator is the numeric surrogate for the best constant
of the weighted estimate, swept along fixed rays xi' = r tau d.

Second-order centered stencils in the interior, second-order one-sided
stencils at side boundaries and for the flux rows, trapezoid quadrature
weights.  Compact support at the outer ends is modelled by pinning the two
outermost nodes of each side: a single zero endpoint value costs a discrete
exponential nothing (the interior three-point recurrence solves through it
exactly), whereas two consecutive zeros admit no nonzero recurrence solution,
so the trial space really is the compactly-supported one the estimate
quantifies over.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import NonConvergenceError, ValidationError
from .fitting import LinearFit, fit_loglog
from .symbols import (ModelCoefficients, ReducedCoefficients, TangentialFrequency,
                      WeightSpec, subellipticity_report, sup_m_ratio)

N_MIN = 16
DENSE_SVD_LIMIT = 1500


# --------------------------------------------------------------------------
# grid and functions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_points: int
    h: float
    interface_index: int
    nodes: np.ndarray

    @property
    def n_minus(self) -> int:
        return self.interface_index + 1

    @property
    def n_plus(self) -> int:
        return self.n_points - self.interface_index

    @property
    def nodes_minus(self) -> np.ndarray:
        return self.nodes[:self.interface_index + 1]

    @property
    def nodes_plus(self) -> np.ndarray:
        return self.nodes[self.interface_index:]

    def trapezoid_weights(self, side: int) -> np.ndarray:
        n = self.n_plus if side > 0 else self.n_minus
        w = np.full(n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


def make_grid(x_min: float, x_max: float, n_points: int,
              adjust: bool = False) -> Grid1D:
    """Uniform grid on [x_min, x_max] with x_n = 0 exactly a node.

    With adjust=True the node count is bumped (at most +64) until 0 lands on
    a node; otherwise a non-conforming count is an error.
    """
    if not x_min < 0.0 < x_max:
        raise ValidationError(f"need x_min < 0 < x_max, got [{x_min}, {x_max}]")
    if n_points < N_MIN:
        raise ValidationError(f"n_points must be >= {N_MIN}, got {n_points}")
    span = x_max - x_min
    for n in range(n_points, n_points + 65):
        k = (n - 1) * (-x_min) / span
        if abs(k - round(k)) < 1e-9:
            if n != n_points and not adjust:
                raise ValidationError(
                    f"0 is not a node of the {n_points}-point grid on "
                    f"[{x_min}, {x_max}] (nearest conforming count: {n})")
            idx = int(round(k))
            if idx < 5 or n - 1 - idx < 5:
                raise ValidationError("each side of the interface needs >= 6 nodes")
            h = span / (n - 1)
            nodes = x_min + h * np.arange(n)
            nodes[idx] = 0.0
            nodes.flags.writeable = False
            return Grid1D(x_min=x_min, x_max=x_max, n_points=n, h=h,
                          interface_index=idx, nodes=nodes)
    raise ValidationError(
        f"no conforming node count found near {n_points} for [{x_min}, {x_max}]")


@dataclass(frozen=True)
class InterfaceFunction:
    """One-sided node values; the interface node appears in both arrays."""

    grid: Grid1D
    v_minus: np.ndarray
    v_plus: np.ndarray

    def __post_init__(self):
        vm = np.asarray(self.v_minus, dtype=complex)
        vp = np.asarray(self.v_plus, dtype=complex)
        if vm.shape != (self.grid.n_minus,) or vp.shape != (self.grid.n_plus,):
            raise ValidationError(
                f"side value shapes {vm.shape}, {vp.shape} do not match grid "
                f"({self.grid.n_minus}, {self.grid.n_plus})")
        object.__setattr__(self, "v_minus", vm)
        object.__setattr__(self, "v_plus", vp)

    @property
    def trace_minus(self) -> complex:
        return complex(self.v_minus[-1])

    @property
    def trace_plus(self) -> complex:
        return complex(self.v_plus[0])

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.v_minus, self.v_plus])


@dataclass(frozen=True)
class TransmissionData:
    """Conjugated jump data (theta_phi, Theta_phi) at one frequency."""

    theta_phi: complex = 0j
    Theta_phi: complex = 0j


# --------------------------------------------------------------------------
# stencil builders (plain-float core, one side at a time)
# --------------------------------------------------------------------------

def _stencil_matrix(n: int, interior: dict[int, complex],
                    first_row: dict[int, complex],
                    mirror_sign: int) -> scipy.sparse.csr_matrix:
    """Banded matrix with a fixed interior stencil; one-sided first row as
    given, last row its mirror times mirror_sign (-1 for odd stencils)."""
    rows, cols, vals = [], [], []
    for off, val in interior.items():
        rows.append(np.arange(1, n - 1))
        cols.append(np.arange(1, n - 1) + off)
        vals.append(np.full(n - 2, val))
    for col, val in first_row.items():
        rows.append([0, n - 1])
        cols.append([col, n - 1 - col])
        vals.append([val, mirror_sign * val])
    rows = np.concatenate([np.atleast_1d(r) for r in rows])
    cols = np.concatenate([np.atleast_1d(c) for c in cols])
    vals = np.concatenate([np.atleast_1d(v) for v in vals]).astype(complex)
    return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _dn_matrix(n: int, h: float) -> scipy.sparse.csr_matrix:
    """D_n = -i d/dx_n: centered interior, second-order one-sided ends."""
    c = -1j / (2.0 * h)
    return _stencil_matrix(n, {-1: -c, 1: c},
                           {0: -3 * c, 1: 4 * c, 2: -c}, mirror_sign=-1)


def _second_derivative_matrix(n: int, h: float) -> scipy.sparse.csr_matrix:
    c = 1.0 / h**2
    return _stencil_matrix(n, {-1: c, 0: -2 * c, 1: c},
                           {0: 2 * c, 1: -5 * c, 2: 4 * c, 3: -c},
                           mirror_sign=+1)


def _side_direct(red: ReducedCoefficients, w: WeightSpec, tau: float,
                 xi: np.ndarray, side: int, xn: np.ndarray,
                 h: float) -> scipy.sparse.csr_matrix:
    """Expanded conjugated operator on one side, rows at every node."""
    n = xn.size
    s = red.s(xi)
    m = red.m(xi)
    phip = w.phi_prime(side, xn)
    d2 = _second_derivative_matrix(n, h)
    d1 = _dn_matrix(n, h) * 1j  # plain d/dx_n
    adv = scipy.sparse.diags(2.0 * tau * phip - 2j * s)
    zero_order = scipy.sparse.diags(
        tau * w.beta + (s + 1j * tau * phip) ** 2 + m**2)
    return (red.a_nn * (-d2 + adv @ d1 + zero_order)).tocsr()


def _side_first_order(red: ReducedCoefficients, w: WeightSpec, tau: float,
                      xi: np.ndarray, side: int, which: str, xn: np.ndarray,
                      h: float) -> scipy.sparse.csr_matrix:
    """D_n + s + i(tau phi' +- m), rows at every node."""
    s = red.s(xi)
    m = red.m(xi)
    phip = w.phi_prime(side, xn)
    g = tau * phip + m if which == "e" else tau * phip - m
    return (_dn_matrix(xn.size, h)
            + scipy.sparse.diags(s + 1j * g).tocsr()).tocsr()


def _side_factored(red: ReducedCoefficients, w: WeightSpec, tau: float,
                   xi: np.ndarray, side: int, xn: np.ndarray,
                   h: float) -> scipy.sparse.csr_matrix:
    pe = _side_first_order(red, w, tau, xi, side, "e", xn, h)
    pf = _side_first_order(red, w, tau, xi, side, "f", xn, h)
    if side > 0:
        return (red.a_nn * (pe @ pf)).tocsr()
    return (red.a_nn * (pf @ pe)).tocsr()


def _constraint_embedding(coeffs: ModelCoefficients, w: WeightSpec,
                          freq: TangentialFrequency, grid: Grid1D,
                          data: TransmissionData):
    """Map free DOFs (interior nodes of both sides) to the full stacked
    vector [v_minus; v_plus]: traces solved from the transmission rows, the
    two outermost nodes of each side pinned to zero (compact-support
    surrogate).  Returns (embed csr, offset)."""
    red_p, red_m = coeffs.reduced_plus, coeffs.reduced_minus
    tau, h = freq.tau, grid.h
    n_m, n_p = grid.n_minus, grid.n_plus
    total = n_m + n_p
    # free: minus nodes 2 .. n_m-2, plus nodes 1 .. n_p-3
    k_m = n_m - 3
    k_p = n_p - 3
    n_free = k_m + k_p

    s_p, s_m = red_p.s(freq.xi), red_m.s(freq.xi)
    c_p = red_p.a_nn * (3j / (2 * h) + s_p + 1j * tau * w.alpha_plus)
    c_m = -red_m.a_nn * (-3j / (2 * h) + s_m + 1j * tau * w.alpha_minus)
    den = c_m + c_p
    if abs(den) < 1e-12 * (abs(c_m) + abs(c_p)):
        raise ValidationError("transmission constraint elimination is singular")

    # flux-row coefficients on the four interior neighbours of the traces
    r_vp1 = red_p.a_nn * (-2j / h)      # v_plus[1]
    r_vp2 = red_p.a_nn * (1j / (2 * h))  # v_plus[2]
    r_vm1 = -red_m.a_nn * (2j / h)       # v_minus[-2]
    r_vm2 = red_m.a_nn * (1j / (2 * h))  # v_minus[-3]

    embed = scipy.sparse.lil_matrix((total, n_free), dtype=complex)
    for k in range(k_m):                 # minus nodes 2 .. n_m-2
        embed[2 + k, k] = 1.0
    for k in range(k_p):                 # plus nodes 1 .. n_p-3
        embed[n_m + 1 + k, k_m + k] = 1.0

    # t_minus = (Theta - r.free - c_p theta) / den ; t_plus = t_minus + theta
    idx_vm1 = k_m - 1                    # free index of v_minus[-2]
    idx_vm2 = k_m - 2                    # free index of v_minus[-3]
    idx_vp1 = k_m                        # free index of v_plus[1]
    idx_vp2 = k_m + 1                    # free index of v_plus[2]
    trace_m_row = n_m - 1
    trace_p_row = n_m
    for row in (trace_m_row, trace_p_row):
        embed[row, idx_vm1] = -r_vm1 / den
        embed[row, idx_vm2] = -r_vm2 / den
        embed[row, idx_vp1] = -r_vp1 / den
        embed[row, idx_vp2] = -r_vp2 / den

    offset = np.zeros(total, dtype=complex)
    base = (data.Theta_phi - c_p * data.theta_phi) / den
    offset[trace_m_row] = base
    offset[trace_p_row] = base + data.theta_phi
    return embed.tocsr(), offset


@dataclass(frozen=True)
class AssembledOperator:
    """Interior equations composed with the constraint embedding."""

    matrix: scipy.sparse.csr_matrix
    embed: scipy.sparse.csr_matrix
    embed_offset: np.ndarray
    row_offset: np.ndarray
    grid: Grid1D
    tau: float
    xi: np.ndarray
    mode: str

    @property
    def n_free(self) -> int:
        return self.matrix.shape[1]

    def embed_full(self, free: np.ndarray) -> InterfaceFunction:
        full = self.embed @ np.asarray(free, dtype=complex) + self.embed_offset
        n_m = self.grid.n_minus
        return InterfaceFunction(grid=self.grid, v_minus=full[:n_m],
                                 v_plus=full[n_m:])

    def apply(self, free: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(free, dtype=complex) + self.row_offset


def assemble_operator(coeffs: ModelCoefficients, w: WeightSpec,
                      freq: TangentialFrequency, grid: Grid1D,
                      mode: str = "direct",
                      data: TransmissionData = TransmissionData()) -> AssembledOperator:
    """Interior rows of the per-frequency operator on the free DOFs.

    mode 'direct' expands the second-order form; 'factored' multiplies the
    two first-order difference factors (E then F on the plus side, F then E
    on the minus side).  The continuum forms coincide; the discrete ones
    differ at O(h) on smooth functions.  The system is rectangular:
    equations at every interior node of both sides, unknowns only the
    non-pinned ones.

    The factored product composes two one-sided stencils at the trace rows,
    which leaves an O(1) consistency defect there and a resolution-
    independent small singular value carried by an interface boundary
    layer; singular-value sweeps therefore use the direct mode, and the
    factored mode serves the operator-level consistency checks.
    """
    if mode not in ("direct", "factored"):
        raise ValidationError(f"unknown assembly mode: {mode!r}")
    red_m, red_p = coeffs.reduced_minus, coeffs.reduced_plus
    build = _side_direct if mode == "direct" else _side_factored
    l_minus = build(red_m, w, freq.tau, freq.xi, -1, grid.nodes_minus, grid.h)
    l_plus = build(red_p, w, freq.tau, freq.xi, +1, grid.nodes_plus, grid.h)

    n_m, n_p = grid.n_minus, grid.n_plus
    interior = scipy.sparse.vstack([
        scipy.sparse.hstack([l_minus[1:n_m - 1, :],
                             scipy.sparse.csr_matrix((n_m - 2, n_p), dtype=complex)]),
        scipy.sparse.hstack([scipy.sparse.csr_matrix((n_p - 2, n_m), dtype=complex),
                             l_plus[1:n_p - 1, :]]),
    ]).tocsr()
    embed, offset = _constraint_embedding(coeffs, w, freq, grid, data)
    return AssembledOperator(matrix=(interior @ embed).tocsr(), embed=embed,
                             embed_offset=offset,
                             row_offset=interior @ offset, grid=grid,
                             tau=freq.tau, xi=freq.xi, mode=mode)


# --------------------------------------------------------------------------
# smallest singular value
# --------------------------------------------------------------------------

def smallest_singular_value(matrix, method: str = "auto", tol: float = 1e-10,
                            max_iterations: int = 500,
                            shift: float = 0.0) -> float:
    """Smallest singular value: dense decomposition, or inverse iteration on
    the (optionally shifted) normal equations for matrices too large to
    decompose densely."""
    if method not in ("auto", "dense", "iterative"):
        raise ValidationError(f"unknown method: {method!r}")
    sparse_in = scipy.sparse.issparse(matrix)
    n = matrix.shape[1]
    if method == "dense" or (method == "auto" and n <= DENSE_SVD_LIMIT):
        dense = matrix.toarray() if sparse_in else np.asarray(matrix)
        return float(scipy.linalg.svdvals(dense)[-1])
    a = (scipy.sparse.csr_matrix(matrix) if not sparse_in
         else matrix.tocsr()).astype(complex)
    normal = (a.conj().T @ a).tocsc()
    if shift != 0.0:
        normal = (normal - shift**2 * scipy.sparse.identity(n)).tocsc()
    lu = scipy.sparse.linalg.splu(normal)
    x = np.full(n, 1.0 + 0.0j) / math.sqrt(n)
    previous = None
    for _ in range(max_iterations):
        y = lu.solve(x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        estimate = float(np.linalg.norm(a @ x))
        if previous is not None and abs(estimate - previous) <= tol * max(estimate, 1e-300):
            return estimate
        previous = estimate
    raise NonConvergenceError(
        f"inverse iteration did not converge in {max_iterations} iterations")


def min_singular_value(op: AssembledOperator, method: str = "auto",
                       tol: float = 1e-10, max_iterations: int = 500) -> float:
    if method == "auto":
        method = "dense" if op.grid.n_points <= DENSE_SVD_LIMIT else "iterative"
    return smallest_singular_value(op.matrix, method=method, tol=tol,
                                   max_iterations=max_iterations)


# --------------------------------------------------------------------------
# sweeps and the two-sides evaluator
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    tau: float
    xi_abs: float
    sigma_min: float
    sigma_over_tau32: float


@dataclass(frozen=True)
class CarlemanSweep:
    points: list[SweepPoint]
    fit: LinearFit


def carleman_sweep(coeffs: ModelCoefficients, w: WeightSpec, direction,
                   ray_ratio: float, tau_list, grid: Grid1D,
                   mode: str = "direct", threads: int = 1) -> CarlemanSweep:
    """sigma_min along the fixed ray xi' = ray_ratio * tau * direction, with a
    log-log fit of sigma_min against tau."""
    direction = np.atleast_1d(np.asarray(direction, dtype=float))
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        raise ValidationError("ray direction must be nonzero")
    direction = direction / norm
    taus = sorted(float(t) for t in tau_list)

    def point(tau: float) -> SweepPoint:
        freq = TangentialFrequency(tau=tau, xi=ray_ratio * tau * direction)
        op = assemble_operator(coeffs, w, freq, grid, mode=mode)
        smin = min_singular_value(op)
        return SweepPoint(tau=tau, xi_abs=freq.xi_abs, sigma_min=smin,
                          sigma_over_tau32=smin / tau**1.5)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(point, taus))
    else:
        points = [point(t) for t in taus]
    fit = fit_loglog([p.tau for p in points], [p.sigma_min for p in points])
    return CarlemanSweep(points=points, fit=fit)


@dataclass(frozen=True)
class EstimateSides:
    lhs: float
    rhs: float
    ratio: float


def _constraint_residuals(v: InterfaceFunction, data: TransmissionData,
                          coeffs: ModelCoefficients, w: WeightSpec,
                          freq: TangentialFrequency, grid: Grid1D):
    red_p, red_m = coeffs.reduced_plus, coeffs.reduced_minus
    h, tau = grid.h, freq.tau
    dn_p = -1j * (-3 * v.v_plus[0] + 4 * v.v_plus[1] - v.v_plus[2]) / (2 * h)
    dn_m = -1j * (3 * v.v_minus[-1] - 4 * v.v_minus[-2] + v.v_minus[-3]) / (2 * h)
    r1 = v.trace_plus - v.trace_minus - data.theta_phi
    r2 = (red_p.a_nn * (dn_p + (red_p.s(freq.xi) + 1j * tau * w.alpha_plus) * v.trace_plus)
          - red_m.a_nn * (dn_m + (red_m.s(freq.xi) + 1j * tau * w.alpha_minus) * v.trace_minus)
          - data.Theta_phi)
    vmax = max(float(np.max(np.abs(v.stacked()))), 1e-300)
    scale1 = max(vmax, abs(data.theta_phi))
    row_norm = (red_p.a_nn + red_m.a_nn) * (3 / h + abs(red_p.s(freq.xi))
                                            + abs(red_m.s(freq.xi))
                                            + tau * (w.alpha_plus + w.alpha_minus))
    scale2 = max(row_norm * vmax, abs(data.Theta_phi), 1e-300)
    return abs(r1) / scale1, abs(r2) / scale2


def estimate_sides(v: InterfaceFunction, data: TransmissionData,
                   coeffs: ModelCoefficients, w: WeightSpec,
                   freq: TangentialFrequency, grid: Grid1D,
                   constraint_rtol: float = 1e-8) -> EstimateSides:
    """Both sides of the per-frequency two-sides estimate.

    lhs: operator images plus the jump-data terms; rhs: the weighted interior
    and trace norms the estimate claims to control.  All norms discrete L^2
    with trapezoid weights.
    """
    r1, r2 = _constraint_residuals(v, data, coeffs, w, freq, grid)
    if r1 > constraint_rtol or r2 > constraint_rtol:
        raise ValidationError(
            f"function violates the transmission constraints "
            f"(relative residuals {r1:.2e}, {r2:.2e})")
    red_p, red_m = coeffs.reduced_plus, coeffs.reduced_minus
    tau, h = freq.tau, grid.h
    xi_abs = freq.xi_abs
    wts_m = grid.trapezoid_weights(-1)
    wts_p = grid.trapezoid_weights(+1)

    p_minus = _side_direct(red_m, w, tau, freq.xi, -1, grid.nodes_minus, h)
    p_plus = _side_direct(red_p, w, tau, freq.xi, +1, grid.nodes_plus, h)
    lhs_minus = math.sqrt(float(wts_m @ np.abs(p_minus @ v.v_minus) ** 2))
    lhs_plus = math.sqrt(float(wts_p @ np.abs(p_plus @ v.v_plus) ** 2))
    jump_terms = (tau**1.5 * abs(data.theta_phi)
                  + tau**0.5 * xi_abs * abs(data.theta_phi)
                  + tau**0.5 * abs(data.Theta_phi))
    lhs = lhs_minus + lhs_plus + jump_terms

    dn_m = _dn_matrix(grid.n_minus, h) @ v.v_minus
    dn_p = _dn_matrix(grid.n_plus, h) @ v.v_plus
    norm_v = math.sqrt(float(wts_m @ np.abs(v.v_minus) ** 2
                             + wts_p @ np.abs(v.v_plus) ** 2))
    norm_dn = math.sqrt(float(wts_m @ np.abs(dn_m) ** 2
                              + wts_p @ np.abs(dn_p) ** 2))
    traces = abs(v.trace_minus) + abs(v.trace_plus)
    dn_traces = abs(dn_m[-1]) + abs(dn_p[0])
    rhs = (tau**1.5 * norm_v
           + tau**0.5 * (norm_dn + xi_abs * norm_v)
           + tau**1.5 * traces
           + tau**0.5 * (dn_traces + xi_abs * traces))
    if lhs == 0.0 and rhs == 0.0:
        return EstimateSides(lhs=0.0, rhs=0.0, ratio=0.0)
    return EstimateSides(lhs=lhs, rhs=rhs, ratio=rhs / lhs)


def random_admissible_v(grid: Grid1D, data: TransmissionData, seed: int,
                        smoothness: int, *, coeffs: ModelCoefficients,
                        w: WeightSpec, freq: TangentialFrequency) -> InterfaceFunction:
    """Complex Gaussian free DOFs, nearest-neighbour smoothing per side, then
    the two trace DOFs solved from the transmission rows.  Deterministic in
    the seed."""
    if smoothness < 0:
        raise ValidationError(f"smoothness must be >= 0, got {smoothness}")
    rng = np.random.default_rng(seed)
    n_free = (grid.n_minus - 3) + (grid.n_plus - 3)
    free = (rng.standard_normal(n_free) + 1j * rng.standard_normal(n_free)) / math.sqrt(2)

    def smooth(side_vals: np.ndarray, trace_at_end: bool) -> np.ndarray:
        out = side_vals
        for _ in range(smoothness):
            left = np.concatenate([[0.0 if trace_at_end else out[0]], out[:-1]])
            right = np.concatenate([out[1:], [out[-1] if trace_at_end else 0.0]])
            out = 0.25 * (left + 2.0 * out + right)
        return out

    k = grid.n_minus - 3
    free = np.concatenate([smooth(free[:k], trace_at_end=True),
                           smooth(free[k:], trace_at_end=False)])
    embed, offset = _constraint_embedding(coeffs, w, freq, grid, data)
    full = embed @ free + offset
    return InterfaceFunction(grid=grid, v_minus=full[:grid.n_minus],
                             v_plus=full[grid.n_minus:])


# --------------------------------------------------------------------------
# half-line first-order factor identities
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HalfLineFactor:
    """g(t) = sign * lam + slope * t on the half-line t >= 0."""

    lam: float
    slope: float
    sign: int

    def __post_init__(self):
        if self.lam <= 0.0 or self.slope <= 0.0:
            raise ValidationError("lam and slope must be positive")
        if self.sign not in (-1, 1):
            raise ValidationError(f"sign must be +1 or -1, got {self.sign}")


@dataclass(frozen=True)
class HalfLineCheck:
    lhs_sq: float
    rhs_sq: float
    slack: float
    identity_residual: float


def halfline_factor_check(factor: HalfLineFactor, omega: np.ndarray,
                          h: float) -> HalfLineCheck:
    """Discrete energy identity and inequality for D_t + i g on t >= 0:

        ||D_t w + i g w||^2 = ||w'||^2 + ||g w||^2 + slope ||w||^2
                              + g(0) |w(0)|^2          (up to O(h))

    against which the elliptic bound (sign +1: >= lam^2 ||w||^2 + lam|w(0)|^2)
    or the reversed bound (sign -1: plus lam |w(0)|^2 >= slope ||w||^2) leaves
    a nonnegative slack."""
    omega = np.asarray(omega, dtype=complex)
    n = omega.size
    if n < 8:
        raise ValidationError("omega needs at least 8 samples")
    t = h * np.arange(n)
    g = factor.sign * factor.lam + factor.slope * t
    wts = np.full(n, h)
    wts[0] = wts[-1] = 0.5 * h

    dw = np.empty(n, dtype=complex)
    dw[1:-1] = (omega[2:] - omega[:-2]) / (2 * h)
    dw[0] = (-3 * omega[0] + 4 * omega[1] - omega[2]) / (2 * h)
    dw[-1] = (3 * omega[-1] - 4 * omega[-2] + omega[-3]) / (2 * h)

    lhs_sq = float(wts @ np.abs(-1j * dw + 1j * g * omega) ** 2)
    norm_dw = float(wts @ np.abs(dw) ** 2)
    norm_gw = float(wts @ np.abs(g * omega) ** 2)
    norm_w = float(wts @ np.abs(omega) ** 2)
    w0_sq = float(abs(omega[0]) ** 2)
    identity_rhs = norm_dw + norm_gw + factor.slope * norm_w + g[0] * w0_sq
    if factor.sign > 0:
        rhs_sq = factor.lam**2 * norm_w + factor.lam * w0_sq
    else:
        rhs_sq = factor.slope * norm_w - factor.lam * w0_sq
    return HalfLineCheck(lhs_sq=lhs_sq, rhs_sq=rhs_sq, slack=lhs_sq - rhs_sq,
                         identity_residual=lhs_sq - identity_rhs)


# --------------------------------------------------------------------------
# weight convexification strength
# --------------------------------------------------------------------------

def select_beta(coeffs: ModelCoefficients, alpha_plus: float, alpha_minus: float,
                x_min: float, x_max: float, *, c_prime: float = 0.1,
                delta: float = 0.1, max_doublings: int = 20) -> float:
    """Smallest beta in {1, 2, 4, ...} passing the sub-ellipticity check on
    the sampled characteristic set while keeping phi' > 0 on the domain."""
    red_p, red_m = coeffs.reduced_plus, coeffs.reduced_minus
    _, witness = sup_m_ratio(red_p, red_m)
    d = coeffs.dimension - 1
    directions = [witness] + [np.eye(d)[j] for j in range(d)]
    x_samples = np.linspace(x_min, x_max, 9)

    for k in range(max_doublings):
        beta = float(2**k)
        w = WeightSpec(alpha_plus, alpha_minus, beta)
        phi_ok = (np.min(w.phi_prime(+1, x_samples)) > 0.0
                  and np.min(w.phi_prime(-1, x_samples)) > 0.0)
        if not phi_ok:
            break
        ok = True
        for side, red in ((+1, red_p), (-1, red_m)):
            for direction in directions:
                m_d = red.m(direction)
                s_d = red.s(direction)
                for x_n in x_samples:
                    tau = m_d / float(w.phi_prime(side, x_n))
                    freq = TangentialFrequency(tau=tau, xi=direction)
                    rep = subellipticity_report(red, w, freq, xi_n=-s_d,
                                                x_n=float(x_n), delta=delta,
                                                side=side, c_prime=c_prime)
                    if not (rep.in_delta_set and rep.lemma_holds):
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            return beta
    raise NonConvergenceError(
        "no beta in the doubling ladder passes sub-ellipticity while "
        "keeping phi' positive on the domain")
