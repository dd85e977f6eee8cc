"""Configuration-driven experiment runner.

    carleman-lab <subcommand> --config <path> [--out <dir>] [--threads <k>]
                 [--seed <u64>]

Subcommands: check-condition, regions, subellipticity, sweep-carleman,
quasimode, factor-estimates, estimate-ratio.  Every run writes deterministic
CSV (UTF-8, comma-separated, 17 significant digits, rows sorted by primary
key); exit code 0 on success, 2 on validation errors, 3 on numeric
non-convergence.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import discrete, quasimode, symbols
from .config import ExperimentConfig, load_config
from .errors import NonConvergenceError, ValidationError

_FLOAT_FMT = "{:.16e}"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _FLOAT_FMT.format(float(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines += [",".join(_fmt(x) for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _resolved_weight(cfg: ExperimentConfig, coeffs) -> symbols.WeightSpec:
    if cfg.weight.beta is not None:
        return symbols.WeightSpec(cfg.weight.alpha_plus, cfg.weight.alpha_minus,
                                  cfg.weight.beta)
    beta = discrete.select_beta(coeffs, cfg.weight.alpha_plus,
                                cfg.weight.alpha_minus,
                                cfg.grid.x_min, cfg.grid.x_max,
                                c_prime=cfg.subellipticity.c_prime,
                                delta=cfg.subellipticity.delta)
    return symbols.WeightSpec(cfg.weight.alpha_plus, cfg.weight.alpha_minus, beta)


def _sigmas(cfg: ExperimentConfig, report) -> tuple[float, float]:
    """(sigma0, sigma) for region classification: config override, else from
    the condition report, else a generic admissible pair."""
    sigma = cfg.regions.sigma
    sigma0 = cfg.regions.sigma0
    if sigma is None:
        sigma = report.sigma if report.satisfied else 1.5
    if sigma0 is None:
        sigma0 = 0.5 * (1.0 + sigma)
    return float(sigma0), float(sigma)


def run_check_condition(cfg: ExperimentConfig, out: Path, threads: int,
                        seed: int) -> int:
    coeffs = cfg.coefficients.model()
    w = _resolved_weight(cfg, coeffs)
    report = symbols.check_condition(coeffs, w)
    header = ["satisfied", "sup_ratio", "sigma", "beta"] + \
        [f"witness_{j}" for j in range(report.witness_direction.size)]
    row = (report.satisfied, report.sup_ratio,
           "" if report.sigma is None else _fmt(report.sigma), w.beta,
           *report.witness_direction)
    _write_csv(out / "check_condition.csv", header, [row])
    print(f"check-condition: satisfied={report.satisfied} "
          f"sup_ratio={report.sup_ratio:.6g}")
    return 0


def run_regions(cfg: ExperimentConfig, out: Path, threads: int, seed: int) -> int:
    coeffs = cfg.coefficients.model()
    w = _resolved_weight(cfg, coeffs)
    report = symbols.check_condition(coeffs, w)
    sigma0, sigma = _sigmas(cfg, report)
    red_p = coeffs.reduced_plus
    direction = np.asarray(cfg.ray.direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    taus = np.linspace(cfg.regions.tau_min, cfg.regions.tau_max, cfg.regions.n_tau)
    xis = np.linspace(cfg.regions.xi_max / cfg.regions.n_xi, cfg.regions.xi_max,
                      cfg.regions.n_xi)
    rows = []
    for tau in taus:
        for xi_abs in xis:
            freq = symbols.TangentialFrequency(tau=float(tau),
                                               xi=xi_abs * direction)
            label = symbols.classify_region(red_p, w, freq, sigma0, sigma)
            rows.append((float(tau), float(xi_abs), label.value))
    rows.sort(key=lambda r: (r[0], r[1]))
    _write_csv(out / "regions.csv", ["tau", "xi_abs", "label"], rows)
    print(f"regions: {len(rows)} points classified, zero cover failures")
    return 0


def run_subellipticity(cfg: ExperimentConfig, out: Path, threads: int,
                       seed: int) -> int:
    coeffs = cfg.coefficients.model()
    w = _resolved_weight(cfg, coeffs)
    rng = np.random.default_rng(seed)
    rows = []
    n_fail = 0
    d = coeffs.dimension - 1
    for k in range(cfg.subellipticity.n_points):
        side = +1 if k % 2 == 0 else -1
        red = coeffs.reduced_plus if side > 0 else coeffs.reduced_minus
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        x_n = rng.uniform(cfg.grid.x_min, cfg.grid.x_max)
        phip = float(w.phi_prime(side, x_n))
        if phip <= 0:
            continue
        scale = rng.uniform(1.0, 100.0)
        tau = scale * red.m(direction) / phip
        freq = symbols.TangentialFrequency(tau=tau, xi=scale * direction)
        rep = symbols.subellipticity_report(
            red, w, freq, xi_n=float(-red.s(scale * direction)), x_n=x_n,
            delta=cfg.subellipticity.delta, side=side,
            c_prime=cfg.subellipticity.c_prime)
        margin = rep.factor_bracket - cfg.subellipticity.c_prime * freq.lam
        if rep.in_delta_set and not rep.lemma_holds:
            n_fail += 1
        rows.append((side, tau, freq.xi_abs, x_n, rep.q2, rep.q1, rep.bracket,
                     rep.on_char_set, rep.in_delta_set, rep.lemma_holds, margin))
    rows.sort(key=lambda r: (r[0], r[1]))
    _write_csv(out / "subellipticity.csv",
               ["side", "tau", "xi_abs", "x_n", "q2", "q1", "bracket",
                "on_char_set", "in_delta_set", "lemma_holds", "margin"], rows)
    status = "PASS" if n_fail == 0 else f"FAIL ({n_fail} sampled failures)"
    print(f"subellipticity: {status} over {len(rows)} points (beta={w.beta})")
    return 0


def run_sweep_carleman(cfg: ExperimentConfig, out: Path, threads: int,
                       seed: int) -> int:
    coeffs = cfg.coefficients.model()
    w = _resolved_weight(cfg, coeffs)
    grid = discrete.make_grid(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n_points)
    sweep = discrete.carleman_sweep(coeffs, w, cfg.ray.direction, cfg.ray.ratio,
                                    cfg.sweep.tau, grid, threads=threads)
    rows = [(p.tau, p.xi_abs, p.sigma_min, p.sigma_over_tau32,
             grid.n_points, grid.h, "direct") for p in sweep.points]
    _write_csv(out / "sweep_carleman.csv",
               ["tau", "xi_abs", "sigma_min", "sigma_over_tau32", "N", "h", "mode"],
               rows)
    _write_csv(out / "sweep_carleman_fit.csv",
               ["slope", "intercept", "r_squared"],
               [(sweep.fit.slope, sweep.fit.intercept, sweep.fit.r_squared)])
    print(f"sweep-carleman: loglog slope {sweep.fit.slope:.4f} "
          f"(r^2 {sweep.fit.r_squared:.5f})")
    return 0


def run_quasimode(cfg: ExperimentConfig, out: Path, threads: int, seed: int) -> int:
    coeffs = cfg.coefficients.model()
    w = _resolved_weight(cfg, coeffs)
    spec = quasimode.build_spec(coeffs, w, cfg.quasimode.gamma,
                                cfg.quasimode.cutoff_width)
    if spec is None:
        raise ValidationError(
            "weight.alpha_plus/alpha_minus: condition satisfied, no quasi-mode "
            "exists for this configuration")
    q = quasimode.QuadratureSpec(xi_nodes=cfg.quasimode.xi_nodes,
                                 xn_nodes_per_scale=cfg.quasimode.xn_nodes_per_scale)
    sweep = quasimode.quasimode_norms(spec, coeffs, w, cfg.sweep.tau, q)
    rows = [(e.tau, e.norm_residual, e.norm_u, e.ratio) for e in sweep.evals]
    _write_csv(out / "quasimode.csv",
               ["tau", "norm_residual", "norm_u", "ratio"], rows)
    _write_csv(out / "quasimode_fit.csv",
               ["slope", "intercept", "r_squared"],
               [(sweep.fit.slope, sweep.fit.intercept, sweep.fit.r_squared)])
    print(f"quasimode: log-ratio slope {sweep.fit.slope:.6g} "
          f"(r^2 {sweep.fit.r_squared:.5f})")
    return 0


def run_factor_estimates(cfg: ExperimentConfig, out: Path, threads: int,
                         seed: int) -> int:
    fc = cfg.factors
    rng = np.random.default_rng(seed)
    rows = []
    for j in range(fc.n_omega):
        centers = rng.uniform(0.15 * fc.t_max, 0.5 * fc.t_max, size=2)
        widths = rng.uniform(0.05 * fc.t_max, 0.12 * fc.t_max, size=2)
        amps = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        for level in range(fc.halvings):
            n = fc.n_grid * 2**level
            h = fc.t_max / (n - 1)
            t = h * np.arange(n)
            omega = sum(a * np.exp(-((t - c) / wd) ** 2)
                        for a, c, wd in zip(amps, centers, widths))
            for sign, case in ((+1, "elliptic"), (-1, "reversed")):
                factor = discrete.HalfLineFactor(lam=fc.lam, slope=fc.slope,
                                                 sign=sign)
                chk = discrete.halfline_factor_check(factor, omega, h)
                rows.append((case, j, h, chk.lhs_sq, chk.rhs_sq, chk.slack,
                             chk.identity_residual))
    rows.sort(key=lambda r: (r[0], r[1], -r[2]))
    _write_csv(out / "factor_estimates.csv",
               ["case", "omega_index", "h", "lhs_sq", "rhs_sq", "slack",
                "identity_residual"], rows)
    n_neg = sum(1 for r in rows if r[5] < 0)
    print(f"factor-estimates: {len(rows)} checks, {n_neg} negative slacks")
    return 0


def run_estimate_ratio(cfg: ExperimentConfig, out: Path, threads: int,
                       seed: int) -> int:
    coeffs = cfg.coefficients.model()
    w = _resolved_weight(cfg, coeffs)
    grid = discrete.make_grid(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n_points)
    direction = np.asarray(cfg.ray.direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    data = discrete.TransmissionData()
    rows = []
    for tau in cfg.sweep.tau:
        freq = symbols.TangentialFrequency(tau=float(tau),
                                           xi=cfg.ray.ratio * tau * direction)
        ratios = []
        for k in range(cfg.estimate.n_samples):
            v = discrete.random_admissible_v(grid, data, seed + 7919 * k,
                                             cfg.estimate.smoothness,
                                             coeffs=coeffs, w=w, freq=freq)
            ratios.append(discrete.estimate_sides(v, data, coeffs, w, freq,
                                                  grid).ratio)
        ratios = np.asarray(ratios)
        rows.append((float(tau), freq.xi_abs, len(ratios),
                     float(ratios.max()), float(ratios.mean())))
    rows.sort(key=lambda r: r[0])
    _write_csv(out / "estimate_ratio.csv",
               ["tau", "xi_abs", "n_samples", "max_ratio", "mean_ratio"], rows)
    print("estimate-ratio: max over sweep "
          f"{max(r[3] for r in rows):.6g}")
    return 0


_SUBCOMMANDS = {
    "check-condition": run_check_condition,
    "regions": run_regions,
    "subellipticity": run_subellipticity,
    "sweep-carleman": run_sweep_carleman,
    "quasimode": run_quasimode,
    "factor-estimates": run_factor_estimates,
    "estimate-ratio": run_estimate_ratio,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carleman-lab",
        description="Config-driven checks and sweeps for the interface "
                    "Carleman-estimate laboratory.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for sweep points "
                            "(default: CARLEMAN_LAB_THREADS or 1)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        threads = args.threads
        if threads is None:
            env = os.environ.get("CARLEMAN_LAB_THREADS", "1")
            try:
                threads = int(env)
            except ValueError:
                raise ValidationError(
                    f"CARLEMAN_LAB_THREADS: expected an integer, got {env!r}")
        if threads < 1:
            raise ValidationError(f"--threads: must be >= 1, got {threads}")
        seed = cfg.seed if args.seed is None else args.seed
        out = Path(args.out) if args.out is not None else Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        return _SUBCOMMANDS[args.subcommand](cfg, out, threads, seed)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NonConvergenceError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
