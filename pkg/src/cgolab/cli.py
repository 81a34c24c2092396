"""Command-line harness: configuration, sweeps, reports and run manifests.

Every subcommand reads a JSON configuration (a path or the name of a
bundled preset), writes its reports into the output directory and always
finishes by writing ``manifest.json`` listing each emitted file with its
SHA-256. Exit codes: 0 pass, 1 check failure, 2 usage or configuration
error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .averaging import AVERAGING_CSV_HEADER, average_slope_test, select_theta
from .estimates import EstimateConfig, list_checks, run_check
from .forms import (
    calibrate_phase,
    curl_test,
    frame_for,
    frequency_box,
    potential_from_gradient,
    reconstruct_field,
    recover_potential_transform,
    recover_q,
    recover_Q_component,
    transform_at,
)
from .frames import ProblemSpec
from .kernels import BACKEND
from .multipliers import coefficients_from_json
from .solver import CSV_HEADER, NonContraction, decay_study
from .spectral import GridFunction, make_grid, save_grid_function

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


# ---------------------------------------------------------------- configuration


@dataclasses.dataclass
class ExperimentConfig:
    """Parsed experiment configuration.

    ``raw`` keeps the decoded JSON so that the config serializes back
    exactly; ``base`` is the directory relative paths resolve against.
    """

    raw: dict
    base: Path

    def get(self, key: str, default: Any = None) -> Any:
        return self.raw.get(key, default)

    @property
    def grid(self):
        g = self.raw.get("grid", {})
        return make_grid(g.get("d", 3), g.get("N", 32), g.get("L", 2 * math.pi), g.get("R", 0.9))

    @property
    def problem(self) -> ProblemSpec:
        p = dict(self.raw.get("problem", {}))
        if "s" in p:
            return ProblemSpec(**p)
        return ProblemSpec.from_eps(**p)

    @property
    def hs(self) -> list[float]:
        sw = self.raw.get("h_sweep", {"start": 3, "count": 5})
        return [2.0 ** -(int(sw["start"]) + i) for i in range(int(sw["count"]))]

    @property
    def frames(self) -> list:
        return [frame_for(x) for x in self.raw.get("frames", [[1.0, 0.0, 0.0]])]

    @property
    def quadrature(self) -> tuple[int, int]:
        q = self.raw.get("quadrature", {})
        return int(q.get("n_tau", 16)), int(q.get("n_theta", 16))

    def coefficient_pair(self, which: str):
        """``(Q, q)`` for pair ``"1"`` or ``"2"``; missing pairs are zero."""
        spec = self.grid
        entry = self.raw.get("coefficients", {}).get(which, [])
        if isinstance(entry, str):
            entry = json.loads(self.resolve(entry).read_text())
        try:
            Q, q = coefficients_from_json(spec, entry)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"coefficient set {which}: {exc}") from exc
        try:
            Q.validate(self.problem.m)
            q.validate(self.problem.m)
        except ValueError as exc:
            raise ConfigError(f"coefficient set {which}: {exc}") from exc
        return Q, q

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base / p

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()


def preset_names() -> list[str]:
    root = resources.files("cgolab") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(ref: str) -> ExperimentConfig:
    """Read a config file path or a preset name.

    Raises
    ------
    ConfigError
        With line and column context on JSON syntax errors, or when a
        referenced file is missing.
    """
    path = Path(ref)
    if path.is_file():
        text, base = path.read_text(), path.parent
    elif ref in preset_names():
        text = (resources.files("cgolab") / "presets" / f"{ref}.json").read_text()
        base = Path(str(resources.files("cgolab") / "presets"))
    else:
        raise ConfigError(f"no config file or preset named {ref!r}; presets: {', '.join(preset_names())}")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno - 1 < len(text.splitlines()) else ""
        raise ConfigError(f"{ref}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}\n    {' ' * (exc.colno - 1)}^") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{ref}: top level must be an object")
    cfg = ExperimentConfig(raw, base)
    for which, entry in raw.get("coefficients", {}).items():
        if isinstance(entry, str) and not cfg.resolve(entry).exists():
            raise ConfigError(f"{ref}: coefficient file {entry!r} not found")
    return cfg


# ---------------------------------------------------------------- manifest


@dataclasses.dataclass
class RunManifest:
    """Reproducibility record written at the end of every run."""

    command: str
    config_hash: str
    seed: int
    artifact_version: str = __version__
    backend: str = BACKEND
    c_phase: list | None = None
    timings: dict = dataclasses.field(default_factory=dict)
    checks: dict = dataclasses.field(default_factory=dict)
    files: dict = dataclasses.field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(bool(v) for v in self.checks.values())

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d["passed"] = self.passed
        return json.dumps(d, indent=2, sort_keys=True, default=_jsonable) + "\n"


class Outputs:
    """Writes report files and records their hashes."""

    def __init__(self, root: Path, manifest: RunManifest):
        self.root = root
        self.manifest = manifest
        root.mkdir(parents=True, exist_ok=True)

    def _record(self, path: Path) -> None:
        self.manifest.files[str(path.relative_to(self.root))] = hashlib.sha256(path.read_bytes()).hexdigest()

    def json(self, name: str, obj: Any) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
        self._record(path)
        return path

    def csv(self, name: str, header: list, rows: list) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        path.write_text(buf.getvalue())
        self._record(path)
        return path

    def field(self, name: str, u: GridFunction) -> Path:
        (self.root / name).parent.mkdir(parents=True, exist_ok=True)
        data, side = save_grid_function(u, self.root / name)
        self._record(data)
        self._record(side)
        return data


def _fmt(v: Any) -> Any:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _jsonable(o: Any) -> Any:
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, (np.generic, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _cx(z: complex) -> list:
    return [float(np.real(z)), float(np.imag(z))]


# ---------------------------------------------------------------- subcommands


def cmd_verify_estimates(cfg: ExperimentConfig, out: Outputs, args) -> None:
    est = dict(cfg.get("estimates", {}))
    for key in ("xi0", "h_exponents"):
        if key in est:
            est[key] = tuple(est[key])
    econf = EstimateConfig(**est, seed=args.seed)
    names = cfg.get("checks") or list(list_checks())
    unknown = [n for n in names if n not in list_checks()]
    if unknown:
        raise ConfigError(f"unknown check(s): {', '.join(unknown)}; known: {', '.join(list_checks())}")
    rows = []
    for name in names:
        rep = run_check(name, econf)
        data = rep.to_json()
        out.manifest.timings[f"check:{name}"] = data.pop("runtime")
        out.json(f"estimates/{name}.json", data)
        out.manifest.checks[name] = bool(rep.passed)
        rows.append([name, rep.anchor, rep.mode, rep.statistic, rep.threshold, rep.passed])
    out.csv("estimates/summary.csv", ["check", "anchor", "mode", "statistic", "threshold", "passed"], rows)


def cmd_cgo_decay(cfg: ExperimentConfig, out: Outputs, args) -> None:
    hs = cfg.hs
    if len(hs) < 5:
        raise ConfigError(f"h sweep has {len(hs)} points; the slope fit needs at least 5")
    ps = cfg.problem
    Q, q = cfg.coefficient_pair("1")
    frame = cfg.frames[0]
    n_tau, n_theta = cfg.quadrature
    modes = cfg.get("decay", {}).get("modes", ["fixed"])
    zero = type(Q).zero
    summary = {}
    for mode in modes:
        if mode == "fixed":
            theta, bound = float(cfg.get("decay", {}).get("theta", 0.0)), 1.5 * ps.m - ps.s
        elif mode == "select":
            def theta(h, Q=Q, q=q):
                s = select_theta(Q, q, zero(Q.spec, "vector"), zero(Q.spec, "scalar"), h, frame, n_tau, n_theta, ps.m)
                return s.tau, s.theta
            bound = 1.5 * ps.m - ps.s + 1 - ps.eps
        else:
            raise ConfigError(f"unknown decay mode {mode!r}")
        t0 = time.perf_counter()
        rep = decay_study(Q, q, frame, hs, cfg.get("amplitude", "one"), ps.m, theta, bound=bound)
        out.manifest.timings[f"decay:{mode}"] = time.perf_counter() - t0
        out.csv(f"decay_{mode}.csv", CSV_HEADER, rep.csv_rows())
        summary[mode] = {"slope": None if rep.fit is None else rep.fit.slope, "bound": bound,
                         "slack": 0.2, "degenerate": rep.degenerate, "error": rep.error, "passed": rep.passed}
        out.manifest.checks[f"decay:{mode}"] = bool(rep.passed)
        if rep.error:
            out.manifest.error = rep.error
            break
    out.json("decay.json", summary)


def cmd_averaging_slope(cfg: ExperimentConfig, out: Outputs, args) -> None:
    ps = cfg.problem
    Q, q = cfg.coefficient_pair("1")
    f = q.field(0) if not q.is_zero else Q.field(0)
    frame = cfg.frames[0]
    n_tau, n_theta = cfg.quadrature
    av = cfg.get("averaging", {})
    lam = float(av.get("lam", ps.m / 2))
    t0 = time.perf_counter()
    rep = average_slope_test(f, lam, ps.s, ps.eps, frame, cfg.hs, n_tau, n_theta)
    out.manifest.timings["averaging"] = time.perf_counter() - t0
    rows = [[h, a, rep.bound] for h, a in zip(rep.hs, rep.averaged)]
    out.csv("averaging.csv", ["h", "averaged_norm", "bound_exponent"], rows)
    fixed = [[i, fit.slope] for i, fit in enumerate(rep.fixed_fits)]
    out.csv("averaging_fixed.csv", ["theta_index", "slope"], fixed)
    out.json("averaging.json", {"slope": None if rep.fit is None else rep.fit.slope, "bound": rep.bound,
                                "worst_fixed_slope": rep.worst_fixed_slope, "passed": rep.passed,
                                "beats_worst_fixed": rep.beats_worst_fixed, "degenerate": rep.degenerate,
                                "header": AVERAGING_CSV_HEADER})
    out.manifest.checks["averaging:bound"] = bool(rep.passed)
    out.manifest.checks["averaging:beats_fixed"] = bool(rep.beats_worst_fixed)


def _zero_tol(run) -> float:
    return max(3 * run.error, 1e-8)


def _judge_run(run, tol: float) -> bool:
    if run.oracle is None:
        return True
    if run.oracle == 0:
        return abs(run.estimate) <= _zero_tol(run)
    return run.relative_error <= tol


def cmd_recover(cfg: ExperimentConfig, out: Outputs, args) -> None:
    ps = cfg.problem
    spec = cfg.grid
    Q1, q1 = cfg.coefficient_pair("1")
    Q2, q2 = cfg.coefficient_pair("2")
    rc = cfg.get("recover", {})
    tol = float(rc.get("tolerance", 0.1))
    theta = rc.get("theta", "select")
    n_tau, n_theta = cfg.quadrature
    hs = cfg.hs
    t0 = time.perf_counter()
    if "c_phase" in rc:
        c_phase = complex(*rc["c_phase"])
        out.json("calibration.json", {"c_phase": _cx(c_phase), "source": "config"})
    else:
        cal = calibrate_phase(spec, m=ps.m)
        c_phase = cal.c_phase
        out.json("calibration.json", dict(cal.to_json(), source="calibration run"))
    out.manifest.c_phase = _cx(c_phase)
    out.manifest.timings["calibration"] = time.perf_counter() - t0
    dQ = [GridFunction(spec, Q1.field(j).spectral() - Q2.field(j).spectral(), "spectral") for j in range(spec.d)]
    Q_differs = any(np.any(f.spectral()) for f in dQ)
    for i, frame in enumerate(cfg.frames):
        tag = f"frame{i}"
        t0 = time.perf_counter()
        if Q_differs:
            sup = max(float(np.max(np.abs(f.physical()))) for f in dQ)
            curl = curl_test(dQ)
            rel = curl / sup
            gradient = rel <= float(rc.get("curl_tol", 1e-10))
            info = {"curl": curl, "curl_relative": rel, "gradient": gradient}
            comps = {}
            for name, fr in (("plus", frame), ("minus", frame.conjugate())):
                run = recover_Q_component(Q1, q1, Q2, q2, fr, hs, c_phase=c_phase, theta=theta, m=ps.m,
                                          n_tau=n_tau, n_theta=n_theta)
                comps[name] = run
                out.json(f"{tag}/Q_{name}.json", run.to_json())
                out.manifest.checks[f"{tag}:Q_{name}"] = bool(_judge_run(run, tol))
            total = comps["plus"].estimate + comps["minus"].estimate
            oracle = 2 * sum(frame.mu1[j] * transform_at(dQ[j], frame.xi0) for j in range(spec.d))
            info["sum_estimate"] = _cx(total)
            info["sum_oracle"] = _cx(oracle)
            if abs(oracle) > 0:
                out.manifest.checks[f"{tag}:Q_sum"] = bool(abs(total - oracle) <= tol * abs(oracle))
            if gradient:
                g = potential_from_gradient(dQ)
                out.field(f"{tag}/potential.c64", g)
                res = math.sqrt(sum(float(np.sum(np.abs(ax * g.spectral() - f.spectral()) ** 2))
                                    for ax, f in zip(spec.freq_axes(), dQ)))
                ref = math.sqrt(sum(float(np.sum(np.abs(f.spectral()) ** 2)) for f in dQ))
                info["potential_residual"] = res / ref
                out.manifest.checks[f"{tag}:potential"] = bool(res / ref <= 1e-8)
                grun = recover_potential_transform(Q1, q1, Q2, q2, frame, hs, c_phase=c_phase, m=ps.m)
                grun.oracle = transform_at(g, frame.xi0)
                out.json(f"{tag}/g_hat.json", grun.to_json())
                out.manifest.checks[f"{tag}:g_hat"] = bool(_judge_run(grun, tol))
            out.json(f"{tag}/Q_summary.json", info)
        else:
            run = recover_q(Q1, q1, q2, frame, hs, theta=0.0 if theta == "select" else theta, m=ps.m,
                            with_terms=True)
            out.json(f"{tag}/q.json", run.to_json())
            out.manifest.checks[f"{tag}:q"] = bool(_judge_run(run, tol))
        out.manifest.timings[tag] = time.perf_counter() - t0


def cmd_reconstruct(cfg: ExperimentConfig, out: Outputs, args) -> None:
    ps = cfg.problem
    spec = cfg.grid
    Q1, q1 = cfg.coefficient_pair("1")
    Q2, q2 = cfg.coefficient_pair("2")
    if any(np.any(Q1.field(j).spectral() - Q2.field(j).spectral()) for j in range(spec.d)):
        raise ConfigError("reconstruction assumes a shared first-order coefficient")
    rc = cfg.get("reconstruct", {})
    if "frequencies" in rc:
        freqs = [tuple(int(c) for c in k) for k in rc["frequencies"]]
        for k in freqs:
            if max(abs(c) for c in k) > spec.N // 8:
                raise ConfigError(f"frequency {k} outside band N/8")
    else:
        freqs = frequency_box(spec, int(rc.get("box_radius", 3)))
    t0 = time.perf_counter()
    rec = reconstruct_field(Q1, q1, q2, freqs, cfg.hs, ps.m, jobs=args.jobs)
    out.manifest.timings["reconstruct"] = time.perf_counter() - t0
    out.field("field.c64", rec.field)
    out.field("truth.c64", rec.truth)
    rows = []
    for r in rec.frequencies:
        est = r.estimate if r.estimate is not None else complex("nan")
        rows.append(list(r.k) + [est.real, est.imag, r.oracle.real, r.oracle.imag,
                                 abs(est - r.oracle), "" if r.error is None else r.error, r.message])
    head = [f"k{j + 1}" for j in range(spec.d)] + ["estimate_re", "estimate_im", "oracle_re", "oracle_im",
                                                   "abs_error", "error_bar", "message"]
    out.csv("frequencies.csv", head, rows)
    out.json("reconstruction.json", {"relative_error": rec.relative_error, "failed": rec.failed,
                                     "frequencies": len(freqs)})
    out.manifest.checks["reconstruct:error"] = bool(rec.relative_error <= float(rc.get("tolerance", 0.15)))
    out.manifest.checks["reconstruct:complete"] = bool(not rec.failed)


COMMANDS = {
    "verify-estimates": cmd_verify_estimates,
    "cgo-decay": cmd_cgo_decay,
    "averaging-slope": cmd_averaging_slope,
    "recover": cmd_recover,
    "reconstruct": cmd_reconstruct,
}


COMMAND_HELP = {
    "verify-estimates": "run the estimate registry and write one JSON report per check",
    "cgo-decay": "fit the h-exponent of the CGO remainder norm",
    "averaging-slope": "compare averaged and fixed-angle norm exponents",
    "recover": "recover single Fourier coefficients of a coefficient difference",
    "reconstruct": "assemble a scalar coefficient difference over a frequency box",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cgolab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=COMMAND_HELP[name])
        sp.add_argument("--config", required=True, help="config file path or preset name")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--jobs", type=int, default=None, help="worker processes")
        sp.add_argument("--out", default=None, help="output directory")
    sub.add_parser("presets", help="list bundled presets")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_PASS
    if args.command == "presets":
        print("\n".join(preset_names()))
        return EXIT_PASS
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    args.seed = int(cfg.get("seed", 0)) if args.seed is None else args.seed
    args.jobs = int(cfg.get("jobs", 1)) if args.jobs is None else args.jobs
    root = Path(args.out or cfg.get("out", f"runs/{args.command}"))
    manifest = RunManifest(args.command, cfg.digest, args.seed)
    out = Outputs(root, manifest)
    out.json("config.json", cfg.raw)
    code = EXIT_PASS
    try:
        COMMANDS[args.command](cfg, out, args)
        code = EXIT_PASS if manifest.passed else EXIT_FAIL
    except ConfigError as exc:
        manifest.error = f"config: {exc}"
        print(f"config error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except NonContraction as exc:
        manifest.error = f"non-contraction at h={exc.h:g}"
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_FAIL
    finally:
        (root / "manifest.json").write_text(manifest.to_json())
    status = "PASS" if code == EXIT_PASS else "FAIL"
    print(f"{args.command}: {status} ({sum(manifest.checks.values())}/{len(manifest.checks)} checks) -> {root}")
    return code


if __name__ == "__main__":
    sys.exit(main())
