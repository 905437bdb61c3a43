"""Command line entry point and end-to-end pipeline.

Subcommands: ``certificate``, ``audit``, ``continue``, ``solve``, ``rcl`` and
``run``.  Settings come from an optional TOML file, overridden by flags.
Environment: ``HOPF_CONLEY_THREADS`` (worker processes for multistart
solves) and ``HOPF_CONLEY_OUTDIR`` (directory for relative output paths).

Exit codes: 0 when the run's claim holds, 1 when the rest-point count falls
short of the cohomological bound, 2 for invalid configuration, 3 when the
hypotheses (certificate or continuation) are not met.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .action import ChiCutoff, condition_a_certificate
from .cohomology import (cup_length, index_report, model, relative_cup_length,
                         relative_cup_length_closed_form, theorem2_bound)
from .dynamics import (TruncationLevel, audit_isolating_neighborhood, continuation_sweep,
                       find_families, first_failure, merge_audits)
from .hamiltonian import (HamiltonianSpec, HamiltonianTerm, counterexample_spec,
                          hopf_height_form, lift, small_spec, unit_form, zero_spec)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA = "hopf-conley-report/1"
AUTO_R_PROBE = 4.0

EXIT_OK, EXIT_SHORT, EXIT_CONFIG, EXIT_UNMET = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _form(value, n: int) -> np.ndarray:
    if isinstance(value, str):
        if value == "unit":
            return unit_form(n)
        if value == "hopf_height":
            return hopf_height_form(np.linspace(1.0, -1.0, n + 1))
        raise ConfigError(f"unknown form {value!r}")
    return np.array(value, dtype=float)


def build_hamiltonian(table: dict, m: int, n: int) -> HamiltonianSpec:
    """HamiltonianSpec from a config table with ``preset`` in
    {zero, small, counterexample, custom}."""
    preset = table.get("preset", "small")
    if preset == "zero":
        return zero_spec(m, n)
    if preset == "small":
        c = float(table.get("c", 0.2))
        if c < 0:
            raise ConfigError("hamiltonian.c must be non-negative")
        return small_spec(c, m, n)
    if preset == "counterexample":
        return counterexample_spec(m, n)
    if preset == "custom":
        terms = []
        for t in table.get("terms", []):
            try:
                terms.append(HamiltonianTerm(
                    float(t["amplitude"]), _form(t.get("form", "unit"), n),
                    tuple(t["freq_x"]), int(t.get("freq_t", 0)), t.get("kind", "cos"),
                    float(t.get("phase", 0.0))))
            except KeyError as exc:
                raise ConfigError(f"hamiltonian term missing {exc}") from exc
        try:
            return HamiltonianSpec(m, n, tuple(terms))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown hamiltonian preset {preset!r}")


@dataclass
class RunConfig:
    m: int = 1
    n: int = 1
    K: int = 8
    hamiltonian: dict = field(default_factory=lambda: {"preset": "small", "c": 0.2})
    eps: float = 0.05
    R: float | str = "auto"
    multistart: int = 200
    seed: int = 0
    perturbation: float = 0.1
    solver_tol: float = 1e-10
    cluster_radius: float = 1e-3
    constraint_tol: float = 1e-8
    max_iters: int = 200
    s_steps: int = 10
    certificate_samples: int = 10000
    shell_samples: int = 96
    audit_starts: int = 12
    output: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.m < 1 or self.n < 0:
            raise ConfigError("need m >= 1 and n >= 0")
        if self.K < 2:
            raise ConfigError("truncation K must be at least 2")
        for name in ("solver_tol", "cluster_radius", "constraint_tol", "perturbation"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 < self.eps < 0.25:
            raise ConfigError("eps must lie in (0, 1/4)")
        if self.R != "auto" and not (isinstance(self.R, (int, float)) and self.R > 0):
            raise ConfigError("R must be a positive number or 'auto'")
        if self.s_steps < 2:
            raise ConfigError("s_steps must be at least 2")
        if self.multistart < 1 or self.max_iters < 1:
            raise ConfigError("multistart and max_iters must be positive")
        self.spec()

    def spec(self) -> HamiltonianSpec:
        return build_hamiltonian(self.hamiltonian, self.m, self.n)

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        flat = {k: v for k, v in d.items() if not isinstance(v, dict) or k == "hamiltonian"}
        ms = d.get("multistart", {})
        if isinstance(ms, dict):
            flat.pop("multistart", None)
            if "count" in ms:
                flat["multistart"] = ms["count"]
            for key in ("seed", "perturbation"):
                if key in ms:
                    flat[key] = ms[key]
        tol = d.get("tolerances", {})
        for src, dst in (("solver", "solver_tol"), ("cluster_radius", "cluster_radius"),
                         ("constraint", "constraint_tol"), ("max_iters", "max_iters")):
            if src in tol:
                flat[dst] = tol[src]
        for section, keys in (("certificate", {"samples": "certificate_samples"}),
                              ("audit", {"shell_samples": "shell_samples",
                                         "starts": "audit_starts"})):
            for src, dst in keys.items():
                if src in d.get(section, {}):
                    flat[dst] = d[section][src]
        known = set(cls.__dataclass_fields__)
        unknown = set(flat) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**flat)

    @classmethod
    def from_toml(cls, path: str) -> RunConfig:
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d.pop("output")
        return d


# ---------------------------------------------------------------------------
# reporting helpers
# ---------------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _output_path(path: str | None) -> str | None:
    if path is None:
        return None
    outdir = os.environ.get("HOPF_CONLEY_OUTDIR")
    if outdir and not os.path.isabs(path):
        os.makedirs(outdir, exist_ok=True)
        return os.path.join(outdir, path)
    return path


def emit(report: dict, path: str | None) -> None:
    text = dumps(report)
    target = _output_path(path)
    if target is None:
        sys.stdout.write(text)
    else:
        with open(target, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


def resolve_R(cfg: RunConfig, chi: ChiCutoff, level: TruncationLevel) -> tuple[float, dict]:
    """Numeric R, or twice the radius certified by an H=0 audit for ``auto``."""
    if cfg.R != "auto":
        return float(cfg.R), {"mode": "fixed"}
    H0 = lift(zero_spec(cfg.m, cfg.n))
    audit = audit_isolating_neighborhood(H0, chi, level, AUTO_R_PROBE, [0.0],
                                         shell_samples=cfg.shell_samples, seed=cfg.seed,
                                         starts=cfg.audit_starts, tol=cfg.solver_tol,
                                         constraint_tol=cfg.constraint_tol)
    if not audit.verdict:
        raise RuntimeError("H=0 audit failed; cannot choose R automatically")
    return 2.0 * audit.required_R, {"mode": "auto", "probe_R": AUTO_R_PROBE,
                                    "zero_audit": audit.to_dict()}


def run_pipeline(cfg: RunConfig) -> dict:
    """lift -> certificate -> R -> continuation sweep -> multistart -> clusters
    -> cohomological bound.  Returns the report as a dict."""
    timings = {}
    clock = time.perf_counter()

    def lap(name):
        nonlocal clock
        now = time.perf_counter()
        timings[name] = now - clock
        clock = now

    spec = cfg.spec()
    H = lift(spec)
    chi = ChiCutoff(cfg.eps)
    level = TruncationLevel.symmetric(cfg.K)
    cert = condition_a_certificate(H, cfg.eps, cfg.certificate_samples, cfg.seed, K=cfg.K,
                                   sharp=True)
    lap("certificate")
    R, R_info = resolve_R(cfg, chi, level)
    lap("radius")
    sweep = continuation_sweep(H, chi, level, R, cfg.s_steps,
                               shell_samples=cfg.shell_samples, seed=cfg.seed,
                               starts=cfg.audit_starts, tol=cfg.solver_tol,
                               constraint_tol=cfg.constraint_tol)
    merged = merge_audits(R, [a.per_s[0] for a in sweep])
    sweep_pass = all(a.verdict for a in sweep)
    lap("continuation")
    families, results = find_families(H, chi, level, cfg.multistart, cfg.seed,
                                      cfg.solver_tol, cfg.cluster_radius, cfg.max_iters,
                                      R, cfg.perturbation, cfg.constraint_tol)
    lap("multistart")
    product = model(f"product {cfg.m} {cfg.n}")
    bound = theorem2_bound(product)
    lap("cohomology")

    statuses: dict[str, int] = {}
    for r in results:
        statuses[r.status] = statuses.get(r.status, 0) + 1
    hypotheses = bool(cert.verdict and sweep_pass)
    notes = []
    if H.is_zero:
        notes.append("H = 0: critical points form the manifold T^{2m} x CP^n, so the "
                     "family count reflects the multistart sampling, not isolated orbits")
    if not cert.verdict:
        notes.append("smallness certificate failed: hypotheses of the fixed-point bound unmet")
    if not sweep_pass:
        notes.append(f"continuation sweep failed first at s = {first_failure(sweep)}")
    report = {
        "schema": SCHEMA,
        "version": __version__,
        "backend": BACKEND,
        "config": cfg.to_dict(),
        "hamiltonian": spec.to_dict(),
        "certificate": cert.to_dict(),
        "R": R,
        "R_selection": R_info,
        "audit": merged.to_dict(),
        "continuation": {"verdict": "pass" if sweep_pass else "fail",
                         "first_failure": first_failure(sweep),
                         "audits": [a.to_dict() for a in sweep]},
        "multistart": {"starts": len(results), "statuses": dict(sorted(statuses.items()))},
        "families": [f.to_dict() for f in families],
        "family_count": len(families),
        "cohomology": index_report(product).to_dict(),
        "lower_bound": bound,
        "verdict": "pass" if len(families) >= bound else "fail",
        "hypotheses_met": hypotheses,
        "notes": notes,
        "timings": timings,
    }
    return report


def exit_code(report: dict) -> int:
    if not report.get("hypotheses_met", True):
        return EXIT_UNMET
    return EXIT_OK if report["verdict"] == "pass" else EXIT_SHORT


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_toml(args.config) if args.config else RunConfig()
    overrides = {}
    for key in ("m", "n", "K", "eps", "seed", "s_steps", "multistart", "shell_samples",
                "certificate_samples", "output"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if args.R is not None:
        overrides["R"] = args.R if args.R == "auto" else float(args.R)
    if args.tol is not None:
        overrides["solver_tol"] = args.tol
    if args.radius is not None:
        overrides["cluster_radius"] = args.radius
    ham = dict(cfg.hamiltonian)
    if args.preset is not None:
        ham = {"preset": args.preset}
    if args.c is not None:
        ham["c"] = args.c
    overrides["hamiltonian"] = ham
    return replace(cfg, **overrides)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--m", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--K", type=int, help="Galerkin truncation (modes -K..K)")
    common.add_argument("--preset", choices=["zero", "small", "counterexample"])
    common.add_argument("--c", type=float, help="smallness target for the 'small' preset")
    common.add_argument("--eps", type=float)
    common.add_argument("--R", help="outer radius or 'auto'")
    common.add_argument("--seed", type=int)
    common.add_argument("--multistart", type=int, help="number of solver starts")
    common.add_argument("--tol", type=float, help="solver tolerance")
    common.add_argument("--radius", type=float, help="clustering radius")
    common.add_argument("--s-steps", dest="s_steps", type=int)
    common.add_argument("--shell-samples", dest="shell_samples", type=int)
    common.add_argument("--certificate-samples", dest="certificate_samples", type=int)
    common.add_argument("-o", "--output", help="write the JSON report here")

    parser = argparse.ArgumentParser(prog="hopf-conley", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("certificate", parents=[common], help="smallness certificate")
    p = sub.add_parser("audit", parents=[common], help="isolating-neighbourhood audit")
    p.add_argument("--s", type=float, nargs="+", default=[0.0, 0.5, 1.0])
    sub.add_parser("continue", parents=[common], help="continuation sweep over s")
    sub.add_parser("solve", parents=[common], help="multistart search and clustering")
    p = sub.add_parser("rcl", help="relative cup-length of a named model")
    p.add_argument("model", nargs="+", help='e.g. "product 1 1" or: product 1 1')
    p.add_argument("-o", "--output")
    sub.add_parser("run", parents=[common], help="full pipeline")
    return parser


def _cmd_certificate(cfg):
    cert = condition_a_certificate(lift(cfg.spec()), cfg.eps, cfg.certificate_samples,
                                   cfg.seed, K=cfg.K, sharp=True)
    return {"schema": SCHEMA, "certificate": cert.to_dict()}, \
        EXIT_OK if cert.verdict else EXIT_UNMET


def _cmd_audit(cfg, s_grid):
    chi, level = ChiCutoff(cfg.eps), TruncationLevel.symmetric(cfg.K)
    R, info = resolve_R(cfg, chi, level)
    audit = audit_isolating_neighborhood(lift(cfg.spec()), chi, level, R, s_grid,
                                         shell_samples=cfg.shell_samples, seed=cfg.seed,
                                         starts=cfg.audit_starts, tol=cfg.solver_tol)
    return {"schema": SCHEMA, "R_selection": info, "audit": audit.to_dict()}, \
        EXIT_OK if audit.verdict else EXIT_UNMET


def _cmd_continue(cfg):
    chi, level = ChiCutoff(cfg.eps), TruncationLevel.symmetric(cfg.K)
    R, info = resolve_R(cfg, chi, level)
    sweep = continuation_sweep(lift(cfg.spec()), chi, level, R, cfg.s_steps,
                               shell_samples=cfg.shell_samples, seed=cfg.seed,
                               starts=cfg.audit_starts, tol=cfg.solver_tol)
    ok = all(a.verdict for a in sweep)
    return {"schema": SCHEMA, "R": R, "R_selection": info,
            "verdict": "pass" if ok else "fail", "first_failure": first_failure(sweep),
            "audits": [a.to_dict() for a in sweep]}, EXIT_OK if ok else EXIT_UNMET


def _cmd_solve(cfg):
    chi, level = ChiCutoff(cfg.eps), TruncationLevel.symmetric(cfg.K)
    R = 10.0 if cfg.R == "auto" else float(cfg.R)
    families, results = find_families(lift(cfg.spec()), chi, level, cfg.multistart,
                                      cfg.seed, cfg.solver_tol, cfg.cluster_radius,
                                      cfg.max_iters, R, cfg.perturbation, cfg.constraint_tol)
    bound = theorem2_bound(f"product {cfg.m} {cfg.n}")
    return {"schema": SCHEMA, "families": [f.to_dict() for f in families],
            "family_count": len(families), "lower_bound": bound,
            "starts": [{"status": r.status, "residual": r.residual, "iterations": r.iterations}
                       for r in results]}, \
        EXIT_OK if len(families) >= bound else EXIT_SHORT


def _cmd_rcl(name):
    M = model(name)
    rep = index_report(M).to_dict()
    rep["exhaustive"] = relative_cup_length(M)
    rep["closed_form"] = relative_cup_length_closed_form(M) if M.rcl_closed_form is not None \
        else None
    rep["cup_length_algebra"] = cup_length(M.algebra)
    return {"schema": SCHEMA, "model": rep}, EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rcl":
            report, code = _cmd_rcl(" ".join(args.model))
            emit(report, args.output)
            return code
        cfg = _config_from_args(args)
        if args.command == "certificate":
            report, code = _cmd_certificate(cfg)
        elif args.command == "audit":
            report, code = _cmd_audit(cfg, args.s)
        elif args.command == "continue":
            report, code = _cmd_continue(cfg)
        elif args.command == "solve":
            report, code = _cmd_solve(cfg)
        else:
            report = run_pipeline(cfg)
            code = exit_code(report)
    except (ConfigError, ValueError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"hopf-conley: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    emit(report, cfg.output)
    return code


if __name__ == "__main__":
    sys.exit(main())
