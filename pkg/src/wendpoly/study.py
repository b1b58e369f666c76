"""Convergence-study driver: configs, error metric, CSV emission.

A study walks a refinement sequence of node sets, resolves a polynomial
degree and a shape parameter for each, fits every requested comparison
mode, and measures the relative l2 error against the target on a fixed
evaluation set. Rows stream into a CSV whose header echoes the full
config for provenance; rerunning a config with the same seeds reproduces
everything except the wall-clock columns bit for bit.

Comparison modes:
  pls     -- polynomial least squares alone (rank-aware); the kernel is
             never assembled, so its assembly timing is identically 0
  diag    -- the polynomial-limit interpolant with a sub-separation
             support (interpolates, same polynomial as pls)
  unified -- the full kernel-plus-polynomial fit at the strategy's eps
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields

import numpy as np

from .kernels import KERNEL_IDS, WendlandKernel
from .nodes import (
    PointSet,
    chebyshev_lobatto,
    dart_throw_target,
    hemisphere_fibonacci,
    kte_map,
    read_points,
    sphere_spiral,
)
from .polynomials import build_basis, degree_from_points, vandermonde
from .solver import evaluate, fit_auto, fit_diag
from .sparselinalg import cpqr_truncated, lstsq_coeffs
from .targets import registry_lookup
from .tuning import ShapeStrategy, apply_strategy

CSV_SCHEMA = "N,ell,M,eps,mode,cond_est,q,w,nnz_A,rel_l2,err_flag,t_assemble,t_factor,t_solve,t_eval"

_EVAL_SEED = 10007  # fixed so studies share evaluation sets per domain/size
_VALID_MODES = ("pls", "diag", "unified")


class MetricError(ValueError):
    """Raised when the error metric denominator vanishes."""


def rel_l2_error(s_vals: np.ndarray, f_vals: np.ndarray) -> float:
    """Euclidean-norm ratio ||s - f|| / ||f||."""
    s_vals = np.asarray(s_vals, dtype=float).ravel()
    f_vals = np.asarray(f_vals, dtype=float).ravel()
    if s_vals.shape != f_vals.shape:
        raise ValueError("value vectors differ in length")
    denom = float(np.linalg.norm(f_vals))
    if denom == 0.0:
        raise MetricError("reference values have zero norm")
    return float(np.linalg.norm(s_vals - f_vals)) / denom


@dataclass
class StudyConfig:
    """Flat description of one convergence study (see README for keys)."""

    target: str
    domain: str = "interval"
    ns: tuple[int, ...] = ()
    node_files: tuple[str, ...] = ()
    degrees: tuple[int, ...] = ()
    degree_scale: float = 0.0  # 0 = per-dimension default
    degree_cap: int = 0  # 0 = uncapped
    kernel: str = "c2"
    modes: tuple[str, ...] = ("unified",)
    strategy: str = "explicit"
    eps: float = 0.0
    target_cond: float = 0.0
    eval_n: int = 0  # 0 = domain default
    eval_file: str = ""
    seed: int = 0
    alpha: float = 0.0  # arcsine node-map parameter, 0 = off
    qcluster: float = 1.5

    def validate(self):
        registry_lookup(self.target)
        if self.kernel not in KERNEL_IDS:
            raise ValueError(f"unknown kernel id {self.kernel!r}")
        for m in self.modes:
            if m not in _VALID_MODES:
                raise ValueError(f"unknown comparison mode {m!r}")
        if not self.ns and not self.node_files:
            raise ValueError("config needs either ns or node_files")
        if self.strategy == "explicit":
            if not self.eps > 0:
                raise ValueError("explicit strategy needs eps > 0")
        elif self.strategy in ("fs", "fc"):
            if not self.target_cond > 1:
                raise ValueError("fs/fc strategy needs target_cond > 1")
        else:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.degrees and (self.degree_scale or self.degree_cap):
            raise ValueError("give either explicit degrees or a scale/cap, not both")


_TUPLE_INT = ("ns", "degrees")
_TUPLE_STR = ("node_files", "modes")


def parse_config(path) -> StudyConfig:
    """Read a flat `key = value` study file (lists comma-separated)."""
    raw = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, eq, val = line.partition("=")
            if not eq:
                raise ValueError(f"malformed config line: {line!r}")
            raw[key.strip()] = val.strip()
    kwargs = {}
    valid = {f.name: f.type for f in fields(StudyConfig)}
    for key, val in raw.items():
        if key not in valid:
            raise ValueError(f"unknown config key {key!r}")
        if key in _TUPLE_INT:
            kwargs[key] = tuple(int(v) for v in val.split(",") if v)
        elif key in _TUPLE_STR:
            kwargs[key] = tuple(v.strip() for v in val.split(",") if v.strip())
        elif key in ("target", "domain", "kernel", "strategy", "eval_file"):
            kwargs[key] = val
        elif key in ("eval_n", "seed", "degree_cap"):
            kwargs[key] = int(val)
        else:
            kwargs[key] = float(val)
    cfg = StudyConfig(**kwargs)
    cfg.validate()
    return cfg


def config_items(cfg: StudyConfig) -> list[tuple[str, str]]:
    out = []
    for f in fields(StudyConfig):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            out.append((f.name, ",".join(str(v) for v in val)))
        else:
            out.append((f.name, f"{val:.17g}" if isinstance(val, float) else str(val)))
    return out


@dataclass
class ConvergenceRow:
    n: int
    ell: int
    m: int
    eps: float
    mode: str
    cond_est: float
    q: float
    w: float
    nnz_a: int
    rel_l2: float
    err_flag: str = ""
    t_assemble: float = 0.0
    t_factor: float = 0.0
    t_solve: float = 0.0
    t_eval: float = 0.0

    def csv_line(self) -> str:
        return ",".join(
            [
                str(self.n),
                str(self.ell),
                str(self.m),
                f"{self.eps:.17g}",
                self.mode,
                f"{self.cond_est:.17g}",
                f"{self.q:.17g}",
                f"{self.w:.17g}",
                str(self.nnz_a),
                f"{self.rel_l2:.17g}",
                self.err_flag,
                f"{self.t_assemble:.6f}",
                f"{self.t_factor:.6f}",
                f"{self.t_solve:.6f}",
                f"{self.t_eval:.6f}",
            ]
        )


def _resolve_nodes(cfg: StudyConfig) -> list[PointSet]:
    sets = []
    if cfg.node_files:
        for path in cfg.node_files:
            sets.append(read_points(path))
        return sets
    for i, n in enumerate(cfg.ns):
        if cfg.domain == "interval":
            ps = chebyshev_lobatto(n)
            if cfg.alpha > 0:
                ps = kte_map(ps, cfg.alpha)
        elif cfg.domain in ("disk", "ball"):
            ps = dart_throw_target(cfg.domain, n, cfg.seed + i)
        elif cfg.domain == "sphere":
            ps = sphere_spiral(n)
        elif cfg.domain == "hemisphere":
            ps = hemisphere_fibonacci(n, cfg.qcluster)
        else:
            raise ValueError(f"cannot generate nodes for domain {cfg.domain!r}")
        sets.append(ps)
    return sets


def _resolve_eval(cfg: StudyConfig, node_sets: list[PointSet]) -> PointSet:
    if cfg.eval_file:
        return read_points(cfg.eval_file)
    dim = node_sets[0].dim
    if dim == 1:
        n = cfg.eval_n or 2**14
        lo = min(ps.coords.min() for ps in node_sets)
        hi = max(ps.coords.max() for ps in node_sets)
        return PointSet(np.linspace(lo, hi, n)[:, None], domain="interval")
    if cfg.domain in ("disk", "ball"):
        return dart_throw_target(cfg.domain, cfg.eval_n or 20000, _EVAL_SEED)
    if cfg.domain == "sphere":
        return sphere_spiral(cfg.eval_n or 15000)
    if cfg.domain == "hemisphere":
        return hemisphere_fibonacci(cfg.eval_n or 15000, cfg.qcluster)
    raise ValueError(f"no evaluation-set rule for domain {cfg.domain!r}")


def _resolve_degree(cfg: StudyConfig, i: int, ps: PointSet) -> int:
    if cfg.degrees:
        return cfg.degrees[i]
    ell = degree_from_points(ps.n, ps.dim, cfg.degree_scale or None)
    if cfg.degree_cap:
        ell = min(ell, cfg.degree_cap)
    return ell


def _fit_mode_row(mode, ps, y, basis, eps, order, eval_ps, f_eval):
    """One (node set, mode) cell: fit, evaluate, measure."""
    row_kwargs = dict(
        n=ps.n, ell=basis.degree, m=basis.size, eps=eps, mode=mode,
        q=ps.sep, w=ps.diam, cond_est=float("nan"), nnz_a=0, rel_l2=float("nan"),
    )
    if mode == "pls":
        t0 = time.perf_counter()
        P = vandermonde(basis, ps.coords)
        qrf = cpqr_truncated(P)
        t1 = time.perf_counter()
        d = lstsq_coeffs(qrf, P, y)
        t2 = time.perf_counter()
        s = vandermonde(basis, eval_ps.coords) @ d
        t3 = time.perf_counter()
        row_kwargs.update(
            rel_l2=rel_l2_error(s, f_eval),
            t_assemble=0.0, t_factor=t1 - t0, t_solve=t2 - t1, t_eval=t3 - t2,
        )
        return ConvergenceRow(**row_kwargs)
    if mode == "diag":
        kernel = WendlandKernel(order=order, eps=2.0 / ps.sep)
        model = fit_diag(ps, y, kernel, basis)
        row_kwargs["eps"] = kernel.eps
        row_kwargs["cond_est"] = 1.0
    else:
        kernel = WendlandKernel(order=order, eps=eps)
        model = fit_auto(ps, y, kernel, basis, estimate_cond=True)
        row_kwargs["cond_est"] = model.report.cond
        row_kwargs["nnz_a"] = model.report.nnz_a
    t3 = time.perf_counter()
    s = evaluate(model, eval_ps)
    t4 = time.perf_counter()
    tm = model.report.timings
    row_kwargs.update(
        rel_l2=rel_l2_error(s, f_eval),
        t_assemble=tm.get("assemble", 0.0),
        t_factor=tm.get("factor", 0.0),
        t_solve=tm.get("solve", 0.0),
        t_eval=t4 - t3,
    )
    return ConvergenceRow(**row_kwargs)


def run_convergence(cfg: StudyConfig, out_csv=None) -> list[ConvergenceRow]:
    """Run a full study; optionally stream rows into a CSV file.

    A failure in any (node set, mode) cell records its exception class in
    the row's err_flag and the study moves on.
    """
    cfg.validate()
    target = registry_lookup(cfg.target)
    node_sets = _resolve_nodes(cfg)
    order = KERNEL_IDS[cfg.kernel]
    eval_ps = _resolve_eval(cfg, node_sets)
    f_eval = target(eval_ps.coords)

    if cfg.strategy == "explicit":
        strategy = ShapeStrategy(kind="explicit", eps=cfg.eps)
    else:
        strategy = ShapeStrategy(kind=cfg.strategy, target_cond=cfg.target_cond)
    eps_list = apply_strategy(strategy, node_sets, order)

    rows: list[ConvergenceRow] = []
    sink = open(out_csv, "w") if out_csv else None
    try:
        if sink:
            sink.write("# wendpoly convergence v1\n")
            for key, val in config_items(cfg):
                sink.write(f"# {key} = {val}\n")
            sink.write(CSV_SCHEMA + "\n")
        for i, ps in enumerate(node_sets):
            y = target(ps.coords)
            ell = _resolve_degree(cfg, i, ps)
            basis = build_basis(ps, ell)
            for mode in cfg.modes:
                try:
                    row = _fit_mode_row(
                        mode, ps, y, basis, eps_list[i], order, eval_ps, f_eval
                    )
                except Exception as exc:  # noqa: BLE001 - study must continue
                    row = ConvergenceRow(
                        n=ps.n, ell=ell, m=basis.size, eps=eps_list[i], mode=mode,
                        cond_est=float("nan"), q=ps.sep, w=ps.diam, nnz_a=0,
                        rel_l2=float("nan"), err_flag=type(exc).__name__,
                    )
                rows.append(row)
                if sink:
                    sink.write(row.csv_line() + "\n")
                    sink.flush()
    finally:
        if sink:
            sink.close()
    return rows
