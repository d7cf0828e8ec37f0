"""Command line entry point: run-kam, check-nonresonance, scheme-report, verify-lemmas.

Exit codes: 0 success, 1 verdict failure, 2 usage or configuration error,
3 numeric precondition error (smallness, resonance, Neumann divergence, ...).
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .engine import IterationConfig, IterationError, kam_iterate, write_trace_csv
from .errors import ConfigError, KamError, SmallnessError
from .fourier import FourierField, dumps_field
from .lemmas import run_lemma_suite
from .nonresonance import diophantine_verify, parse_diophantine, parse_frequency
from .norms import make_weight, parse_index_norm
from .schemes import make_scheme, parse_scheme, rho_weight_check, series_condition_I

EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    """Everything that determines a run's outputs. Output paths are recorded
    but excluded from the digest so relocated runs stay byte-identical."""
    command: str
    params: dict
    inputs: dict = field(default_factory=dict)
    seed: int | None = None
    version: str = __version__
    outputs: dict = field(default_factory=dict)

    def content(self) -> dict:
        return {"command": self.command, "params": self.params, "inputs": self.inputs,
                "seed": self.seed, "version": self.version}

    @property
    def digest(self) -> str:
        text = json.dumps(self.content(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def to_json(self) -> str:
        data = {**self.content(), "digest": self.digest, "outputs": self.outputs}
        return json.dumps(_clean(data), indent=2, sort_keys=True) + "\n"


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def atomic_write(path: str | Path, text: str) -> None:
    """Write via a temp file in the target directory followed by rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def dumps_report(data: dict) -> str:
    return json.dumps(_clean(data), indent=2) + "\n"


def thread_limit(environ=None) -> int:
    """KAM_THREADS as a positive integer (default: all cores)."""
    environ = os.environ if environ is None else environ
    raw = environ.get("KAM_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"KAM_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise UsageError(f"KAM_THREADS must be a positive integer, got {raw!r}")
    return value


def _emit(report: dict, out: str | None, manifest: RunManifest | None, stdout) -> None:
    text = dumps_report(report)
    if out:
        atomic_write(out, text)
        if manifest is not None:
            atomic_write(f"{out}.manifest.json", manifest.to_json())
    else:
        stdout.write(text)


# -- subcommands ------------------------------------------------------------------

def cmd_run_kam(args, stdout) -> int:
    omega = parse_frequency(args.omega)
    pert = Path(args.perturbation)
    if not pert.is_file():
        raise UsageError(f"perturbation file not found: {pert}")
    P = FourierField.load(pert)
    if P.window.size != omega.window.size:
        raise ConfigError(f"perturbation has {P.window.size} coordinates, omega has {omega.window.size}")
    P = FourierField(omega.window, P.modes, P.coeffs, real=P.real)

    base = parse_scheme(args.scheme)
    params = dict(base.params)
    if args.b is not None:
        params["b"] = args.b
    params["q"] = args.q if args.q is not None else base.q
    params["r"] = args.r if args.r is not None else base.r
    scheme = make_scheme(base.tag, params)
    norm = scheme.index_norm(omega.window)
    enforce = not args.allow_violations
    cfg = IterationConfig(scheme.b, scheme.r, scheme.q, scheme.balancing, args.nu_max, args.tol,
                          enforce_smallness=False, defect_points=args.defect_points)
    if enforce and cfg.contraction_margin > cfg.q:
        raise SmallnessError(f"12 exp(-gamma r) = {cfg.contraction_margin:.6g} exceeds q = {cfg.q}"
                             " (use --allow-violations to run anyway)")
    cfg = IterationConfig(scheme.b, scheme.r, scheme.q, scheme.balancing, args.nu_max, args.tol,
                          enforce_smallness=enforce, defect_points=args.defect_points)

    manifest = RunManifest(
        "run-kam",
        {"omega": list(omega.values), "scheme": scheme.summary(), "nu_max": args.nu_max,
         "tol": args.tol, "allow_violations": args.allow_violations,
         "defect_points": args.defect_points, "norm": scheme.norm_spec},
        inputs={"perturbation": file_digest(pert)},
    )
    digest = manifest.digest
    psi_path = Path(f"{args.out}.psi_hat.json")
    manifest.outputs = {"trace": args.trace, "out": args.out, "psi_hat": str(psi_path)}

    status = EXIT_OK
    error = None
    try:
        result = kam_iterate(P, omega, cfg, scheme.weight, norm)
        trace = result.trace
    except IterationError as exc:
        trace, result, error, status = exc.trace, None, exc, EXIT_NUMERIC

    buf = io.StringIO()
    write_trace_csv(trace, buf, digest)
    atomic_write(args.trace, buf.getvalue())
    report = {"manifest": digest, "trace": Path(args.trace).name, "C": trace.C,
              "warnings": trace.warnings, "checks": trace.checks()}
    if result is not None:
        text = dumps_field(result.psi_hat)
        text = text.replace("{\n", f'{{\n  "manifest": "{digest}",\n', 1)
        atomic_write(psi_path, text)
        report.update(omega_tilde=result.omega_tilde.tolist(), psi_hat=psi_path.name,
                      final_defect=result.final_defect)
    else:
        report.update(omega_tilde=None, psi_hat=None, final_defect=None, error=str(error))
    atomic_write(args.out, dumps_report(report))
    atomic_write(f"{args.out}.manifest.json", manifest.to_json())
    if error is not None:
        raise error
    return status


def cmd_check_nonresonance(args, stdout) -> int:
    omega = parse_frequency(args.omega)
    spec = parse_diophantine(args.spec)
    norm = parse_index_norm(args.norm, omega.window)
    rep = diophantine_verify(omega, spec, args.kmax, norm)
    inputs = {"omega": file_digest(args.omega)} if Path(args.omega).is_file() else {}
    manifest = RunManifest("check-nonresonance",
                           {"omega": list(omega.values), "spec": args.spec, "kmax": args.kmax,
                            "norm": args.norm}, inputs=inputs)
    manifest.outputs = {"out": args.out}
    report = {"manifest": manifest.digest, **rep.to_dict()}
    _emit(report, args.out, manifest, stdout)
    return EXIT_OK if rep.passed else EXIT_VERDICT


def cmd_scheme_report(args, stdout) -> int:
    scheme = parse_scheme(args.scheme)
    omega = parse_frequency(args.omega)
    m = make_weight(args.weight) if args.weight else scheme.weight
    series = series_condition_I(scheme, omega, args.horizon)
    rho = rho_weight_check(scheme, omega, m, args.horizon)
    inputs = {"omega": file_digest(args.omega)} if Path(args.omega).is_file() else {}
    manifest = RunManifest("scheme-report",
                           {"scheme": scheme.summary(), "omega": list(omega.values),
                            "weight": str(m), "horizon": args.horizon}, inputs=inputs)
    manifest.outputs = {"out": args.out}
    report = {"manifest": manifest.digest, "scheme": scheme.summary(),
              "series_condition_I": {k: v for k, v in series.items() if k != "scheme"},
              "rho_weight_check": {k: v for k, v in rho.items() if k != "scheme"}}
    _emit(report, args.out, manifest, stdout)
    return EXIT_OK


def cmd_verify_lemmas(args, stdout) -> int:
    res = run_lemma_suite(seed=args.seed, cases=args.cases, slack=args.slack)
    manifest = RunManifest("verify-lemmas", {"cases": args.cases, "slack": args.slack}, seed=args.seed)
    manifest.outputs = {"out": args.out}
    report = {"manifest": manifest.digest, **res.to_dict()}
    _emit(report, args.out, manifest, stdout)
    return EXIT_OK if res.passed else EXIT_VERDICT


# -- parser -----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kamtorus", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("run-kam", help="run the KAM iteration and write a trace CSV")
    s.add_argument("--omega", required=True, help="comma list (e.g. 1,phi) or file")
    s.add_argument("--perturbation", required=True, help="Fourier field JSON file")
    s.add_argument("--scheme", required=True, help="tag:key=value,... e.g. dio_4_1_i:beta=1")
    s.add_argument("--b", type=float, default=None)
    s.add_argument("--r", type=float, default=None)
    s.add_argument("--q", type=float, default=None)
    s.add_argument("--nu-max", type=_positive_int, default=8)
    s.add_argument("--tol", type=float, default=None, help="step fixed-point tolerance")
    s.add_argument("--trace", required=True, help="trace CSV path")
    s.add_argument("--out", required=True, help="result JSON path")
    s.add_argument("--defect-points", type=_positive_int, default=64)
    s.add_argument("--allow-violations", action="store_true",
                   help="record smallness violations as warnings instead of failing")
    s.set_defaults(func=cmd_run_kam)

    s = sub.add_parser("check-nonresonance", help="brute-force Diophantine check")
    s.add_argument("--omega", required=True)
    s.add_argument("--spec", required=True, help="ratio:<approx>:<gamma> or product:<gamma>:<mu>")
    s.add_argument("--kmax", type=float, required=True)
    s.add_argument("--norm", default="sup")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_check_nonresonance)

    s = sub.add_parser("scheme-report", help="series and weight diagnostics for a scheme")
    s.add_argument("--scheme", required=True)
    s.add_argument("--omega", required=True)
    s.add_argument("--weight", default=None, help="e.g. weight:poly:1 (default: the scheme's weight)")
    s.add_argument("--horizon", type=_positive_int, default=10)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_scheme_report)

    s = sub.add_parser("verify-lemmas", help="seeded property suite for the norm lemmas")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--cases", type=_positive_int, default=200)
    s.add_argument("--slack", type=float, default=1e-9)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_verify_lemmas)
    return p


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        thread_limit()
        args = build_parser().parse_args(argv)
        return args.func(args, stdout)
    except UsageError as exc:
        print(f"kamtorus: usage error: {exc}", file=stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"kamtorus: configuration error: {exc}", file=stderr)
        return EXIT_USAGE
    except KamError as exc:
        print(f"kamtorus: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"kamtorus: I/O error: {exc}", file=stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
