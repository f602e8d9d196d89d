"""Command-line front end: ``verify``, ``simulate`` and ``degenerate``.

Configuration is a single JSON file::

    {
      "model": {"N": 2, "M": 2, "n": 2, "marked_points": [[0, 0], [0.37, 0.29]]},
      "elliptic": {"tau": [0, 1], "trunc": 30, "pole_eps": 1e-6, "fd_step": 1e-4},
      "seeds": [0],
      "suites": ["torus-basis"],
      "flow": {"which": "h0", "t_end": 1.0, "dt": 0.001},
      "output_dir": "out"
    }

Complex numbers are written as [re, im] pairs.  ``marked_points`` and
``flow`` are optional.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .errors import ConfigError, IntegrationAborted
from .flows import Flow
from .state import ModelSpec, default_marked_points
from .suites import SUITE_NAMES, FlowSettings, build_checks, drift_summary, flow_run, run_checks

SPEC_VERSION = "1.0"
REPORT_NAME = "report.json"


def _complex(value, where: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 \
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return complex(value[0], value[1])
    raise ConfigError(f"{where}: expected a number or [re, im] pair, got {value!r}")


def _pair(z: complex) -> list:
    return [z.real, z.imag]


def _int(value, where: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{where}: expected an integer >= {minimum}, got {value!r}")
    return value


def _positive(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(f"{where}: expected a positive number, got {value!r}")
    return float(value)


def _section(d: dict, key: str, where: str = "") -> dict:
    val = d.get(key, {})
    if not isinstance(val, dict):
        raise ConfigError(f"{where}{key}: expected an object")
    return val


def _check_keys(d: dict, allowed, where: str) -> None:
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(extra)}")


@dataclass(frozen=True)
class RunConfig:
    n_inner: int = 2
    m_blocks: int = 2
    n_poles: int = 2
    marked_points: tuple | None = None
    tau: complex = 1j
    trunc: int = 30
    pole_eps: float = 1e-6
    fd_step: float = 1e-4
    seeds: tuple = (0,)
    suites: tuple = ()
    flow: FlowSettings | None = None
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: expected a JSON object at top level")
        _check_keys(d, ("model", "elliptic", "seeds", "suites", "flow", "output_dir"), "config")
        model = _section(d, "model")
        _check_keys(model, ("N", "M", "n", "tau", "marked_points"), "model")
        ell = _section(d, "elliptic")
        _check_keys(ell, ("tau", "trunc", "pole_eps", "fd_step"), "elliptic")

        tau = _complex(ell.get("tau", [0.0, 1.0]), "elliptic.tau")
        if "tau" in model and _complex(model["tau"], "model.tau") != tau:
            raise ConfigError("model.tau: differs from elliptic.tau")
        if not tau.imag > 0:
            raise ConfigError(f"elliptic.tau: Im(tau) must be positive, got {tau}")
        n_poles = _int(model.get("n", 2), "model.n")
        marks = model.get("marked_points")
        if marks is not None:
            if not isinstance(marks, list) or len(marks) != n_poles:
                raise ConfigError(f"model.marked_points: expected a list of {n_poles} points")
            marks = tuple(_complex(z, f"model.marked_points[{k}]") for k, z in enumerate(marks))

        seeds = d.get("seeds", [0])
        if not isinstance(seeds, list) or not seeds:
            raise ConfigError("seeds: expected a non-empty list of integers")
        seeds = tuple(_int(s, f"seeds[{k}]", 0) for k, s in enumerate(seeds))

        suites = d.get("suites", [])
        if not isinstance(suites, list):
            raise ConfigError("suites: expected a list of suite names")
        for k, s in enumerate(suites):
            if s not in SUITE_NAMES:
                raise ConfigError(f"suites[{k}]: unknown suite {s!r}; known: {', '.join(SUITE_NAMES)}")

        flow = d.get("flow")
        if flow is not None:
            if not isinstance(flow, dict):
                raise ConfigError("flow: expected an object")
            _check_keys(flow, ("which", "t_end", "dt"), "flow")
            which = flow.get("which", "h0")
            try:
                Flow.parse(str(which))
            except ValueError as exc:
                raise ConfigError(f"flow.which: {exc}") from None
            t_end = flow.get("t_end", 1.0)
            if isinstance(t_end, bool) or not isinstance(t_end, (int, float)) or t_end < 0:
                raise ConfigError(f"flow.t_end: expected a non-negative number, got {t_end!r}")
            flow = FlowSettings(str(which), float(t_end), _positive(flow.get("dt", 1e-3), "flow.dt"))

        out = d.get("output_dir", "out")
        if not isinstance(out, str) or not out:
            raise ConfigError("output_dir: expected a non-empty string")

        cfg = cls(
            n_inner=_int(model.get("N", 2), "model.N"),
            m_blocks=_int(model.get("M", 2), "model.M"),
            n_poles=n_poles,
            marked_points=marks,
            tau=tau,
            trunc=_int(ell.get("trunc", 30), "elliptic.trunc"),
            pole_eps=_positive(ell.get("pole_eps", 1e-6), "elliptic.pole_eps"),
            fd_step=_positive(ell.get("fd_step", 1e-4), "elliptic.fd_step"),
            seeds=seeds,
            suites=tuple(suites),
            flow=flow,
            output_dir=out,
        )
        try:
            cfg.spec()
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from None
        return cfg

    def to_dict(self) -> dict:
        model = {"N": self.n_inner, "M": self.m_blocks, "n": self.n_poles}
        if self.marked_points is not None:
            model["marked_points"] = [_pair(z) for z in self.marked_points]
        d = {
            "model": model,
            "elliptic": {"tau": _pair(self.tau), "trunc": self.trunc, "pole_eps": self.pole_eps,
                         "fd_step": self.fd_step},
            "seeds": list(self.seeds),
            "suites": list(self.suites),
            "output_dir": self.output_dir,
        }
        if self.flow is not None:
            d["flow"] = {"which": self.flow.which, "t_end": self.flow.t_end, "dt": self.flow.dt}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str, source: str = "<config>") -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        try:
            return cls.from_dict(data)
        except ConfigError as exc:
            raise ConfigError(f"{source}: {exc}") from None

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        return cls.from_json(text, str(path))

    def spec(self) -> ModelSpec:
        marks = self.marked_points or default_marked_points(self.n_poles, self.tau)
        return ModelSpec(self.n_inner, self.m_blocks, self.n_poles, marks, self.tau,
                         self.trunc, self.pole_eps, self.fd_step)

    def config_hash(self) -> str:
        """SHA-256 of the canonical config; the output location is excluded."""
        d = self.to_dict()
        d.pop("output_dir")
        text = json.dumps(d, sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def replace(self, **kw) -> "RunConfig":
        d = self.to_dict()
        if "suites" in kw:
            d["suites"] = list(kw["suites"])
        if "seeds" in kw:
            d["seeds"] = list(kw["seeds"])
        if "output_dir" in kw:
            d["output_dir"] = kw["output_dir"]
        return RunConfig.from_dict(d)


# ---------------------------------------------------------------------------
# operations


def manifest(cfg: RunConfig) -> dict:
    return {"spec_version": SPEC_VERSION, "config_hash": cfg.config_hash(), "package_version": __version__}


def run_suite(cfg: RunConfig, suites=None) -> dict:
    """Run the named suites; entries sorted by (suite, name)."""
    names = cfg.suites if suites is None else tuple(suites)
    checks = build_checks(names, cfg.spec(), cfg.seeds, cfg.flow)
    entries = sorted(run_checks(checks), key=lambda e: (e["suite"], e["name"]))
    return {"manifest": manifest(cfg), "entries": entries,
            "all_pass": all(e["pass"] for e in entries)}


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_report(report: dict, out_dir, name: str = REPORT_NAME) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(report_json(report), encoding="utf-8")
    return path


def run_flow(cfg: RunConfig, out_dir=None) -> dict:
    """Integrate the configured flow for the first seed; write CSV and JSON summary."""
    if cfg.flow is None:
        raise ConfigError("flow: section required for simulate")
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj = flow_run(cfg.spec(), cfg.seeds[0], cfg.flow)
    (out / "trajectory.csv").write_text(traj.to_csv(), encoding="utf-8", newline="")
    summary = {**drift_summary(traj), "flow": cfg.flow.which, "t_end": cfg.flow.t_end, "dt": cfg.flow.dt,
               "seed": cfg.seeds[0], "min_clearance": traj.extra["min_clearance"], "manifest": manifest(cfg)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def _print_report(report: dict, stream) -> None:
    for e in report["entries"]:
        flag = "PASS" if e["pass"] else "FAIL"
        print(f"{flag} {e['suite']:20s} {e['name']:60s} {e['max_residual']:.2e} (tol {e['tolerance']:.0e})",
              file=stream)
    n_fail = sum(not e["pass"] for e in report["entries"])
    print(f"{len(report['entries'])} checks, {n_fail} failed", file=stream)


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    kw = {}
    if getattr(args, "suite", None):
        kw["suites"] = args.suite
    if args.seed is not None:
        kw["seeds"] = [args.seed]
    if args.out:
        kw["output_dir"] = args.out
    return cfg.replace(**kw) if kw else cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ellgaudin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="single seed (overrides seeds)")

    v = sub.add_parser("verify", help="run verification suites and write report.json")
    common(v)
    v.add_argument("--suite", action="append", help="suite name (repeatable, overrides suites)")
    s = sub.add_parser("simulate", help="integrate the configured flow")
    common(s)
    d = sub.add_parser("degenerate", help="run the degeneration cross-checks")
    common(d)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "verify":
            report = run_suite(cfg)
            path = write_report(report, cfg.output_dir)
            _print_report(report, sys.stdout)
            print(f"report written to {path}")
            return 0 if report["all_pass"] else 1
        if args.command == "degenerate":
            report = run_suite(cfg, ("degenerations",))
            path = write_report(report, cfg.output_dir, "degenerations.json")
            _print_report(report, sys.stdout)
            print(f"report written to {path}")
            return 0 if report["all_pass"] else 1
        summary = run_flow(cfg)
        print(json.dumps({k: summary[k] for k in ("H0_drift", "H1_drifts", "casimir_drifts",
                                                  "specpoly_drifts")}, indent=2))
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except IntegrationAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
