"""Command-line experiment runner.

Configs are flat ``key = value`` files with dotted section keys::

    kind = solve
    domain.d = 2
    domain.n = 128
    domain.L = 6.283185307179586
    order.alpha_star = 0.5
    u0.kind = mode
    u0.k = 1, 0
    times = 0.1, 1, 10

Each run writes CSV outputs and ``manifest.json`` into a directory named by
a hash of the config, created atomically. Exit codes: 0 all checks passed,
1 a check or the suite failed (manifest still written), 2 invalid config.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import shutil
import sys
import tempfile
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import envelope_check, fit_slope, sample_decay, write_decay_csv
from .caputo_oracle import caputo_l1_march, mittag_leffler
from .complex_power import PolarPoint
from .contour import ContourSpec, default_theta, evaluate_solution
from .grid import Domain, GridFunction, l2_norm, read_grid_csv, support_margin, write_grid_csv
from .order_field import (Bump, OrderFieldError, build_order_field, read_kappa_csv,
                          region_from_spec, tabulated_region)
from .resolvent import (composed_norm, composed_symbol_max, empirical_r0, masked_resolvent_norm,
                        perturbation_norm, resolvent_bound, resolvent_norm, schatten_norm)

log = logging.getLogger("vord")

KINDS = ("solve", "decay", "verify-resolvent", "verify-lemma", "verify-schatten", "oracle-compare")
OUT_ENV = "VORD_OUT"
EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------- config

def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _geom(c: dict, prefix: str) -> list[float] | None:
    """``prefix`` as an explicit list or ``prefix_min/_max/_count`` as a
    geometric grid."""
    if prefix in c:
        return _floats(c[prefix])
    keys = [f"{prefix}_min", f"{prefix}_max", f"{prefix}_count"]
    if all(k in c for k in keys):
        lo, hi, n = float(c[keys[0]]), float(c[keys[1]]), int(c[keys[2]])
        return list(np.geomspace(lo, hi, n))
    return None


@dataclass
class ExperimentConfig:
    raw: dict
    kind: str
    domain: Domain
    seed: int = 0
    base_dir: Path = field(default_factory=Path.cwd)

    def get(self, key, default=None, cast=str):
        if key not in self.raw:
            return default
        try:
            return cast(self.raw[key])
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None

    def floats(self, key, default=None):
        return _floats(self.raw[key]) if key in self.raw else default

    def canonical(self) -> str:
        items = dict(self.raw)
        items["seed"] = str(self.seed)
        return "\n".join(f"{k}={items[k]}" for k in sorted(items))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    # built lazily so validation errors surface with the key name
    def order_field(self):
        c = self.raw
        if "order.alpha_star" not in c:
            raise ConfigError("missing order.alpha_star")
        a_star = self.get("order.alpha_star", cast=float)
        a_m = self.get("order.alpha_m", a_star, float)
        a_M = self.get("order.alpha_M", a_star, float)
        s = self.get("order.s", 8.0, float)
        kind = c.get("order.region", "none")
        region = None
        kappa = None
        if kind in ("ball", "box"):
            center = self.floats("order.center", [0.0] * self.domain.d)
            if len(center) != self.domain.d:
                raise ConfigError("order.center has the wrong dimension")
            size = self.floats("order.size")
            if not size:
                raise ConfigError("missing order.size")
            region = region_from_spec(kind, center, size[0] if kind == "ball" else size)
        elif kind == "tabulated":
            path = self._path(c.get("order.kappa_file"))
            mask, kappa = read_kappa_csv(path, self.domain)
            region = tabulated_region(mask)
        elif kind != "none":
            raise ConfigError(f"unknown order.region {kind!r}")
        if kind in ("ball", "box"):
            kstr = c.get("order.kappa", str(a_star))
            if kstr.startswith("bump:"):
                base, amp = _floats(kstr[5:])
                kappa = Bump(base, amp)
            else:
                kappa = float(kstr)
        return build_order_field(self.domain, a_star, a_m, a_M, region, kappa, s)

    def initial_data(self) -> GridFunction:
        c = self.raw
        kind = c.get("u0.kind", "gaussian")
        dom = self.domain
        if kind == "gaussian":
            center = self.floats("u0.center", [0.0] * dom.d)
            sigma = self.get("u0.sigma", 1.0, float)
            amp = self.get("u0.amplitude", 1.0, float)
            if sigma <= 0:
                raise ConfigError("u0.sigma must be positive")
            vals = amp * np.exp(-dom.radius(tuple(center)) ** 2 / (2 * sigma ** 2))
            margin = support_margin(dom, vals, rel=self.get("u0.support_tol", 1e-10, float))
            if margin < dom.L / 2:
                raise ConfigError(f"u0 support margin {margin:.3g} is below L/2 = {dom.L / 2:.3g}")
            return GridFunction(vals, dom)
        if kind == "mode":
            k = self.floats("u0.k")
            if not k or len(k) != dom.d:
                raise ConfigError("u0.k must give one wavenumber per dimension")
            idx = np.asarray(k) * dom.L / math.pi
            if not np.allclose(idx, np.round(idx), atol=1e-9):
                raise ConfigError("u0.k is not a periodic wavenumber of the box")
            phase = sum(ki * xi for ki, xi in zip(k, dom.coords()))
            return GridFunction(np.exp(1j * phase), dom)
        if kind == "csv":
            f = read_grid_csv(self._path(c.get("u0.file")))
            if f.domain != dom:
                raise ConfigError("u0.file grid does not match the configured domain")
            return f
        raise ConfigError(f"unknown u0.kind {kind!r}")

    def contour_spec(self, alpha_star: float, **override) -> ContourSpec:
        kw = {}
        for key, cast in (("n_arc", int), ("n_ray", int), ("quad_tol", float), ("refine_tol", float),
                          ("max_doublings", int), ("solver_tol", float), ("panel_order", int),
                          ("epsilon", float), ("epsilon_scale", float), ("r_max", float)):
            v = self.get(f"contour.{key}", None, cast)
            if v is not None:
                kw[key] = v
        theta = self.get("contour.theta", None, float)
        kw["theta"] = default_theta(alpha_star) if theta is None else theta
        kw.update(override)
        return ContourSpec(**kw)

    def _path(self, p) -> Path:
        if not p:
            raise ConfigError("missing file path")
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return build_config(parse_config_text(text), seed=seed, base_dir=path.parent)


def build_config(raw: dict, seed: int | None = None, base_dir=None) -> ExperimentConfig:
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {', '.join(KINDS)}; got {kind!r}")
    try:
        dom = Domain(int(raw.get("domain.d", 2)), float(raw.get("domain.L", 2 * math.pi)),
                     int(raw.get("domain.n", 64)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"domain: {exc}") from None
    if seed is None:
        seed = int(raw.get("seed", 0))
    cfg = ExperimentConfig(dict(raw), kind, dom, seed, Path(base_dir or Path.cwd()))
    for key, value in raw.items():
        if key.endswith("tol") or key.endswith("slack"):
            try:
                ok = float(value) > 0
            except ValueError:
                ok = False
            if not ok:
                raise ConfigError(f"{key} must be a positive number")
    # fail early on the pieces every suite needs
    try:
        cfg.order_field()
        if kind in ("solve", "decay", "oracle-compare"):
            cfg.initial_data()
    except OrderFieldError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


# --------------------------------------------------------------------------- outputs

@dataclass
class RunManifest:
    config: dict
    kind: str
    digest: str
    version: str
    started: float
    finished: float = 0.0
    outputs: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    status: str = "ok"
    error: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "ok" and all(c["passed"] for c in self.checks.values())

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


class Run:
    """Collects outputs and checks for one suite."""

    def __init__(self, cfg: ExperimentConfig, workdir: Path, threads: int):
        self.cfg = cfg
        self.dir = workdir
        self.threads = threads
        self.manifest = RunManifest(cfg.raw, cfg.kind, cfg.digest(), __version__, time.time())

    def csv(self, name, header, rows):
        write_rows(self.dir / name, header, rows)
        self.manifest.outputs.append(name)

    def grid(self, name, f: GridFunction):
        write_grid_csv(self.dir / name, f)
        self.manifest.outputs.append(name)

    def check(self, name, passed, **detail):
        self.manifest.checks[name] = {"passed": bool(passed), **detail}
        log.info("%s %s %s", "PASS" if passed else "FAIL", name, detail or "")


# --------------------------------------------------------------------------- suites

def _times(cfg):
    t = cfg.floats("times")
    if not t:
        raise ConfigError("missing times")
    if min(t) <= 0:
        raise ConfigError("times must be positive")
    return t


def suite_solve(run: Run):
    cfg = run.cfg
    fld = cfg.order_field()
    u0 = cfg.initial_data()
    spec = cfg.contour_spec(fld.alpha_star)
    rows = []
    mode = cfg.raw.get("u0.kind") == "mode" and fld.is_constant
    for t in _times(cfg):
        u, rep = evaluate_solution(cfg.domain, fld, u0, t, spec, workers=run.threads)
        run.grid(f"solution_t{t:.6g}.csv", u)
        norm = l2_norm(u)
        row = [t, norm, rep.n_nodes, rep.refinement_error]
        if mode:
            k2 = sum(k * k for k in cfg.floats("u0.k"))
            pred = mittag_leffler(fld.alpha_star, -k2 * t ** fld.alpha_star) * l2_norm(u0)
            err = float(np.linalg.norm(u.values - pred / l2_norm(u0) * u0.values) / np.linalg.norm(
                pred / l2_norm(u0) * u0.values))
            tol = cfg.get("check.tol", 1e-6, float)
            run.check(f"mittag_leffler_t{t:.6g}", err <= tol, relative_error=err, tol=tol)
            row += [pred, err]
        rows.append(row)
    header = ["t", "norm", "nodes", "refinement_error"] + (["predicted_norm", "relative_error"] if mode else [])
    run.csv("summary.csv", header, rows)


def suite_decay(run: Run):
    cfg = run.cfg
    fld = cfg.order_field()
    u0 = cfg.initial_data()
    spec = cfg.contour_spec(fld.alpha_star)
    regime = cfg.raw.get("decay.regime")
    rep = sample_decay(cfg.domain, fld, u0, _times(cfg), spec, regime=regime, workers=run.threads)
    env_slack = cfg.get("decay.envelope_slack", 0.10, float)
    slope_slack = cfg.get("decay.slope_slack", 0.05, float)
    res = envelope_check(rep, env_slack, slope_slack)
    write_decay_csv(rep, run.dir / "decay.csv")
    run.manifest.outputs.append("decay.csv")
    env = rep.envelope_values()
    run.manifest.summary.update(
        regime=rep.regime, exponent=rep.theoretical_exponent, fitted_slope=rep.fitted_slope,
        envelope_constant=rep.envelope_constant, envelope_ratio=float(env.max() / env.min()) if env.min() > 0 else math.inf,
        trivial=rep.trivial,
    )
    run.check("envelope", res.passed, margin=res.margin, worst_ratio=res.worst_ratio,
              slope_ok=res.slope_ok, envelope_slack=env_slack, slope_slack=slope_slack)


def _beta_list(cfg, theta):
    betas = cfg.floats("resolvent.beta")
    if betas is None:
        n = cfg.get("resolvent.n_beta", 9, int)
        betas = list(np.linspace(-theta, theta, n))
    return betas


def suite_verify_resolvent(run: Run):
    cfg = run.cfg
    fld = cfg.order_field()
    radii = _geom(cfg.raw, "resolvent.r") or list(np.geomspace(1e-3, 1e3, 5))
    theta = cfg.get("contour.theta", default_theta(fld.alpha_star), float)
    betas = cfg.floats("resolvent.beta") or [0.0, math.pi / 3, -math.pi / 3, 2 * math.pi / 3, -2 * math.pi / 3]
    rtol = cfg.get("resolvent.rtol", 1e-7, float)
    rows = []
    viol = 0
    for r in radii:
        for b in betas:
            p = PolarPoint(r, b)
            val = resolvent_norm(cfg.domain, fld, p, rtol=rtol, seed=cfg.seed).value
            bound = resolvent_bound(fld, p)
            ok = val <= bound
            viol += not ok
            rows.append([r, b, "resolvent_norm", val, bound, ok])
    composed_ok = 0
    for r in radii:
        for b in betas:
            if abs(b) > theta:
                continue
            p = PolarPoint(r, b)
            est = composed_norm(cfg.domain, fld.alpha_star, p, seed=cfg.seed).value
            exact = composed_symbol_max(cfg.domain, fld.alpha_star, p)
            val = max(est, exact)
            ok = val <= 3.0
            composed_ok += not ok
            rows.append([r, b, "composed_norm", val, 3.0, ok])
    run.csv("norms.csv", ["r", "beta", "quantity", "value", "bound", "pass"], rows)
    run.check("resolvent_bound", viol == 0, violations=viol)
    run.check("composed_bound", composed_ok == 0, violations=composed_ok)


def lemma_radii(r0: float, halvings: int = 16) -> list[float]:
    """``r0, r0/2, ..., r0 / 2^halvings``."""
    return [r0 * 0.5 ** k for k in range(halvings + 1)][::-1]


def sector_max_perturbation(domain, fld, radii, betas, seed=0):
    """Largest perturbation norm over the sampled angles, per radius."""
    out = []
    for r in radii:
        out.append(max(perturbation_norm(domain, fld, PolarPoint(r, float(b)), seed=seed).value for b in betas))
    return out


def suite_verify_lemma(run: Run):
    cfg = run.cfg
    fld = cfg.order_field()
    theta = cfg.get("lemma.theta", 2 * math.pi / 3, float)
    n_beta = cfg.get("lemma.n_beta", 9, int)
    betas = np.linspace(-theta, theta, n_beta)
    r0 = empirical_r0(cfg.domain, fld, theta, n_beta=n_beta)
    radii = _geom(cfg.raw, "lemma.r") or lemma_radii(r0)
    radii = [r for r in radii if r <= r0]
    rows, worst = [], []
    for r in radii:
        vals = []
        for b in betas:
            v = perturbation_norm(cfg.domain, fld, PolarPoint(r, float(b)), seed=cfg.seed).value
            vals.append(v)
            rows.append([r, b, "perturbation_norm", v, 0.5, v <= 0.5])
        worst.append(max(vals))
    run.csv("lemma.csv", ["r", "beta", "quantity", "value", "bound", "pass"], rows)
    target = fld.alpha_m - fld.alpha_star * (1 - fld.d / fld.s)
    slope = fit_slope(radii, worst)
    rel = abs(slope - target) / abs(target) if target else math.inf
    slope_tol = cfg.get("lemma.slope_rtol", 0.2, float)
    run.manifest.summary.update(r0=r0, slope=slope, target_slope=target)
    run.check("contraction", all(w <= 0.5 for w in worst), max_value=max(worst), r0=r0)
    run.check("slope", rel <= slope_tol, slope=slope, target=target, relative_deviation=rel)


def suite_verify_schatten(run: Run):
    cfg = run.cfg
    fld = cfg.order_field()
    if not fld.K_mask.any():
        raise ConfigError("verify-schatten needs a region K")
    order = fld.s / 2
    radii = _geom(cfg.raw, "schatten.r")
    if radii is None:
        radii = list(resolved_range(cfg.domain, fld, cfg.get("schatten.count", 9, int)))
    rows, svals = [], []
    viol = 0
    for r in radii:
        sn = schatten_norm(cfg.domain, fld.K_mask, r, fld.alpha_star, order)
        op = masked_resolvent_norm(cfg.domain, fld.K_mask, r, fld.alpha_star, seed=cfg.seed).value
        ok = op <= sn * (1 + 1e-12)
        viol += not ok
        svals.append(sn)
        rows.append([r, 0.0, "schatten_norm", sn, math.nan, True])
        rows.append([r, 0.0, "operator_norm", op, sn, ok])
    run.csv("schatten.csv", ["r", "beta", "quantity", "value", "bound", "pass"], rows)
    target = -fld.alpha_star * (1 - fld.d / fld.s)
    slope = fit_slope(radii, svals)
    rel = abs(slope - target) / abs(target)
    slope_tol = cfg.get("schatten.slope_rtol", 0.2, float)
    run.manifest.summary.update(slope=slope, target_slope=target, r_min=min(radii), r_max=max(radii))
    run.check("operator_le_schatten", viol == 0, violations=viol)
    run.check("slope", rel <= slope_tol, slope=slope, target=target, relative_deviation=rel)


def resolved_range(domain: Domain, fld, count: int = 9):
    """Geometric radii with ``rho^-2 <= r^alpha_star <= (k_max / 2)^2``.

    Below the lower end the shift is smaller than the inverse squared size
    of K and the norm saturates; above the upper end the shift exceeds the
    frequencies the grid resolves.
    """
    vol = fld.K_mask.sum() * domain.cell_volume
    rho = (vol / math.pi) ** 0.5 if domain.d == 2 else (vol ** (1 / domain.d)) / 2
    k_max = math.pi * domain.n / (2 * domain.L)
    lo = rho ** -2
    hi = (k_max / 2) ** 2
    a = fld.alpha_star
    return np.geomspace(lo ** (1 / a), hi ** (1 / a), count)


def suite_oracle_compare(run: Run):
    cfg = run.cfg
    fld = cfg.order_field()
    u0 = cfg.initial_data()
    spec = cfg.contour_spec(fld.alpha_star)
    times = _times(cfg)
    steps = [int(s) for s in cfg.floats("oracle.n_steps", [2048, 4096])]
    tol = cfg.get("oracle.tol", 0.02, float)
    T = max(times)
    contour = {}
    for t in times:
        u, _ = evaluate_solution(cfg.domain, fld, u0, t, spec, workers=run.threads)
        contour[t] = u
        run.grid(f"contour_t{t:.6g}.csv", u)
    rows = []
    disc = {}
    for ns in steps:
        traj = caputo_l1_march(cfg.domain, fld, u0, T, ns)
        for t in times:
            v = traj.at(t)
            d = l2_norm(GridFunction(v.values - contour[t].values, cfg.domain)) / l2_norm(contour[t])
            disc[(ns, t)] = d
            rows.append([t, ns, l2_norm(v), l2_norm(contour[t]), d])
    run.csv("oracle.csv", ["t", "n_steps", "l1_norm", "contour_norm", "discrepancy"], rows)
    finest = steps[-1]
    worst = max(disc[(finest, t)] for t in times)
    run.check("agreement", worst <= tol, worst=worst, tol=tol, n_steps=finest)
    dec = all(disc[(b, t)] < disc[(a, t)] for a, b in zip(steps, steps[1:]) for t in times)
    run.check("refinement_decreases", dec)


SUITES = {
    "solve": suite_solve,
    "decay": suite_decay,
    "verify-resolvent": suite_verify_resolvent,
    "verify-lemma": suite_verify_lemma,
    "verify-schatten": suite_verify_schatten,
    "oracle-compare": suite_oracle_compare,
}


# --------------------------------------------------------------------------- driver

def default_out_root() -> Path:
    return Path(os.environ.get(OUT_ENV, "runs"))


def execute(cfg: ExperimentConfig, out_root=None, threads: int = 1) -> tuple[int, Path]:
    """Run a validated config; returns ``(exit_code, run_dir)``."""
    out_root = Path(out_root) if out_root is not None else default_out_root()
    out_root.mkdir(parents=True, exist_ok=True)
    final = out_root / f"{cfg.kind}-{cfg.digest()[:16]}"
    tmp = Path(tempfile.mkdtemp(prefix=".tmp-", dir=out_root))
    run = Run(cfg, tmp, threads)
    try:
        (tmp / "config.txt").write_text(cfg.canonical() + "\n")
        SUITES[cfg.kind](run)
    except ConfigError:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    except Exception as exc:  # suite failure is reported, not raised
        run.manifest.status = "error"
        run.manifest.error = f"{type(exc).__name__}: {exc}"
        log.error("suite failed: %s", run.manifest.error)
        log.debug(traceback.format_exc())
    run.manifest.finished = time.time()
    (tmp / "manifest.json").write_text(run.manifest.to_json())
    _replace_dir(tmp, final)
    return (EXIT_OK if run.manifest.passed else EXIT_FAIL), final


def _replace_dir(src: Path, dst: Path):
    if dst.exists():
        old = dst.with_name(dst.name + f".old-{os.getpid()}")
        os.rename(dst, old)
        os.rename(src, dst)
        shutil.rmtree(old, ignore_errors=True)
    else:
        os.rename(src, dst)


# --------------------------------------------------------------------------- compare

def _read_numeric_csv(path: Path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    rows = list(reader)
    return header, rows


def _grid_values(path: Path):
    f = read_grid_csv(path)
    return f.domain, f.values


def _restrict(domain: Domain, values, n: int):
    """Samples of a grid function on the coarser grid with ``n`` points per axis."""
    step = domain.n // n
    sl = tuple(slice(None, None, step) for _ in range(domain.d))
    return values[sl]


def compare_runs(dir_a, dir_b) -> dict:
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    try:
        ma = json.loads((dir_a / "manifest.json").read_text())
        mb = json.loads((dir_b / "manifest.json").read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read manifests: {exc}") from None
    if ma["kind"] != mb["kind"] or sorted(ma["outputs"]) != sorted(mb["outputs"]):
        raise ConfigError("run schemas differ (kind or output files)")
    report = {"files": {}, "max_relative_deviation": 0.0, "identical": True}
    for name in sorted(ma["outputs"]):
        pa, pb = dir_a / name, dir_b / name
        same_bytes = pa.read_bytes() == pb.read_bytes()
        report["identical"] &= same_bytes
        ha, ra = _read_numeric_csv(pa)
        hb, rb = _read_numeric_csv(pb)
        if ha != hb:
            raise ConfigError(f"{name}: column mismatch")
        if ha == ["index", "re", "im"]:
            da, va = _grid_values(pa)
            db, vb = _grid_values(pb)
            if (da.d, da.L) != (db.d, db.L):
                raise ConfigError(f"{name}: grids cover different boxes")
            n = min(da.n, db.n)
            va, vb = _restrict(da, va, n), _restrict(db, vb, n)
            dev = float(np.linalg.norm(va - vb) / max(np.linalg.norm(vb), np.finfo(float).tiny))
        else:
            if len(ra) != len(rb):
                raise ConfigError(f"{name}: row counts differ")
            dev = 0.0
            for x, y in zip(ra, rb):
                for a, b in zip(x, y):
                    try:
                        fa, fb = float(a), float(b)
                    except ValueError:
                        continue
                    if fa == fb or (math.isnan(fa) and math.isnan(fb)):
                        continue
                    dev = max(dev, abs(fa - fb) / max(abs(fa), abs(fb)))
        report["files"][name] = {"max_relative_deviation": dev, "identical": same_bytes}
        report["max_relative_deviation"] = max(report["max_relative_deviation"], dev)
    return report


# --------------------------------------------------------------------------- entry point

def _parser():
    ap = argparse.ArgumentParser(prog="vord", description="variable-order fractional diffusion experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--out", default=None, help=f"output root (default ${OUT_ENV} or ./runs)")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--seed", type=int, default=None)
    c = sub.add_parser("compare", help="numeric diff of two run directories")
    c.add_argument("dir_a")
    c.add_argument("dir_b")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    if args.command == "run":
        try:
            cfg = load_config(args.config, seed=args.seed)
            if args.threads < 1:
                raise ConfigError("--threads must be at least 1")
            code, path = execute(cfg, args.out, args.threads)
        except ConfigError as exc:
            log.error("invalid config: %s", exc)
            return EXIT_INVALID
        print(path)
        return code
    try:
        rep = compare_runs(args.dir_a, args.dir_b)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    print(json.dumps(rep, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
