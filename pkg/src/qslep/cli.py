"""Command-line experiment harness.

Every command reads a key-value config file (``key = value`` per line, ``#``
comments), runs seeded trials for each accuracy in ``eps`` and writes one CSV
row per trial plus a closing summary row. ``--seed`` and ``--out`` override
the config; ``--set key=value`` overrides any other key.

Exit codes: 0 success, 2 malformed config, 3 register budget exceeded,
4 instance promise violated.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .blockenc import dilate_exact, sparse_access_from_dense
from .errors import PromiseError, RegisterBudgetError
from .estimate import bevhm_plan, exact_expectation, sevhm_plan
from .oracle import Counter, QueryCountedUnitary
from .reduce import am_instance, end_to_end_plan, exact_mean_via_encoding, SAMInstance
from .simkern import X, Z, make_rng, random_hermitian, random_unitary
from .slep import (
    bslep_plan,
    build_instance,
    classical_solve,
    random_spectrum_matrix,
    read_instance,
)
from .sparsemat import MatrixEncoding, read_encoding, write_encoding
from .oracle import FunctionOracle

COMMANDS = ("evhm", "sevhm", "slep", "encode", "reduce", "scaling")

QUERY_LABELS = ("U_M", "V", "U_A", "U_b", "O_val", "O_loc", "f")

COLUMNS = (
    "row_type",
    "seed",
    "trial",
    "eps",
    "estimate",
    "truth",
    "abs_error",
    "success",
    *(f"queries_{label}" for label in QUERY_LABELS),
    "success_rate",
    "median_abs_error",
    "slope",
    "intercept",
    "r2",
)

DEFAULTS: dict[str, str] = {
    "seed": "0",
    "trials": "100",
    "eps": "0.1",
    "mode": "auto",
    "instance": "",
    "instance_seed": "1",
    "n": "2",
    "d": "2",
    "N": "",
    "beta": "1.0",
    "kappa": "2.0",
    "alpha_a": "1.0",
    "alpha_m": "1.0",
    "target": "evhm",
    "save": "",
}

# Oracle whose counts drive the scaling fit for each experiment.
PRIMARY_LABEL = {"evhm": "U_M", "sevhm": "O_val", "slep": "U_M", "reduce": "f", "encode": "f"}


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


# ----------------------------------------------------------------------------
# Configuration


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"config line {number}: expected 'key = value', got {raw!r}")
        out[key.strip()] = value.strip()
    return out


@dataclass
class ExperimentConfig:
    command: str
    values: dict[str, str] = field(default_factory=dict)
    base_dir: Path = Path(".")

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        unknown = set(self.values) - set(DEFAULTS) - {"command"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if self.values.get("command", self.command) != self.command:
            raise ConfigError(
                f"config is for command {self.values['command']!r}, not {self.command!r}"
            )
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if any(e <= 0 for e in self.eps):
            raise ConfigError("eps values must be positive")
        if self.get_float("kappa") < 1:
            raise ConfigError("kappa must be >= 1")

    def raw(self, key: str) -> str:
        return self.values.get(key, DEFAULTS[key])

    def get_int(self, key: str) -> int:
        try:
            return int(self.raw(key))
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {self.raw(key)!r}") from None

    def get_float(self, key: str) -> float:
        try:
            return float(self.raw(key))
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {self.raw(key)!r}") from None

    @property
    def seed(self) -> int:
        seed = self.get_int("seed")
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return seed

    @property
    def trials(self) -> int:
        return self.get_int("trials")

    @property
    def eps(self) -> list[float]:
        try:
            values = [float(v) for v in self.raw("eps").replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"eps must be a list of numbers, got {self.raw('eps')!r}") from None
        if not values:
            raise ConfigError("eps list is empty")
        return values

    def path(self, key: str) -> Path | None:
        raw = self.raw(key)
        if not raw:
            return None
        p = Path(raw)
        return p if p.is_absolute() else self.base_dir / p


def load_config(command: str, path: str | None, overrides: Mapping[str, str]) -> ExperimentConfig:
    values: dict[str, str] = {}
    base = Path(".")
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values.update(parse_config_text(text))
        base = Path(path).parent
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(command, values, base)


# ----------------------------------------------------------------------------
# Scaling fit


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r2: float


def fit_scaling(rows: Iterable, column: str = "queries_U_M") -> ScalingFit:
    """Least squares of ``log(queries)`` on ``log(1/eps)``.

    ``rows`` holds mappings with ``eps`` and ``column`` keys or plain
    ``(eps, queries)`` pairs. Needs at least three distinct ``eps`` values.
    """
    points = []
    for row in rows:
        if isinstance(row, Mapping):
            eps, queries = float(row["eps"]), float(row[column])
        else:
            eps, queries = (float(v) for v in row)
        if eps <= 0 or queries <= 0:
            raise ValueError("eps and query counts must be positive")
        points.append((math.log(1 / eps), math.log(queries)))
    if len({x for x, _ in points}) < 3:
        raise ValueError("fit_scaling needs at least 3 distinct eps values")
    x, y = np.array(points).T
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return ScalingFit(float(slope), float(intercept), r2)


# ----------------------------------------------------------------------------
# Experiments


@dataclass
class Experiment:
    """One eps point: a sampler of estimates, the truth and the success window."""

    eps: float
    truth: float
    run_trials: Callable[[int, int], list]


def _random_evhm(cfg: ExperimentConfig):
    rng = make_rng(cfg.get_int("instance_seed"), 0)
    n, alpha_m = cfg.get_int("n"), cfg.get_float("alpha_m")
    if n < 1 or alpha_m <= 0:
        raise ConfigError("evhm needs n >= 1 and alpha_m > 0")
    m = random_hermitian(1 << n, rng, alpha_m)
    v = random_unitary(1 << n, rng)
    return n, m, v, alpha_m


def _evhm_experiments(cfg: ExperimentConfig) -> list[Experiment]:
    n, m, v_mat, alpha_m = _random_evhm(cfg)
    truth = exact_expectation(m, v_mat)
    out = []
    for eps in cfg.eps:
        block = dilate_exact(m, alpha_m, "U_M", Counter("U_M"))
        v = QueryCountedUnitary.primitive("V", v_mat)
        plan = bevhm_plan(n, block, eps, v, cfg.raw("mode"))
        out.append(Experiment(eps, truth, plan.trials))
    return out


def banded_hermitian(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Random Hermitian matrix with nonzeros on the cyclic band ``|j - k| <= (d-1)//2``."""
    size, width = 1 << n, (d - 1) // 2
    h = np.zeros((size, size), dtype=complex)
    for offset in range(-width, width + 1):
        rows = np.arange(size)
        h[rows, (rows + offset) % size] += rng.standard_normal(size) + 1j * rng.standard_normal(size)
    h = (h + h.conj().T) / 2
    return h / np.max(np.abs(h))


def _sevhm_experiments(cfg: ExperimentConfig) -> list[Experiment]:
    rng = make_rng(cfg.get_int("instance_seed"), 0)
    n, d = cfg.get_int("n"), cfg.get_int("d")
    if n < 1 or not 1 <= d <= 1 << n:
        raise ConfigError("sevhm needs n >= 1 and 1 <= d <= 2^n")
    h = banded_hermitian(n, d, rng)
    v_mat = random_unitary(1 << n, rng)
    truth = exact_expectation(h, v_mat)
    out = []
    for eps in cfg.eps:
        sparse = sparse_access_from_dense(h, d, 1.0)
        v = QueryCountedUnitary.primitive("V", v_mat)
        plan = sevhm_plan(n, sparse, eps, v, cfg.raw("mode"))
        out.append(Experiment(eps, truth, plan.trials))
    return out


def _slep_source(cfg: ExperimentConfig):
    path = cfg.path("instance")
    if cfg.raw("instance") == "zx-plus":
        return Z, X, np.array([1, 1]) / math.sqrt(2), 1.0, 1.0, 1.0
    if path is not None:
        inst = read_instance(path)
        a, m, b = inst.matrices()
        return a, m, b, inst.kappa, inst.alpha_a, inst.alpha_m
    rng = make_rng(cfg.get_int("instance_seed"), 0)
    n, kappa, alpha_m = cfg.get_int("n"), cfg.get_float("kappa"), cfg.get_float("alpha_m")
    dim = 1 << n
    a = random_spectrum_matrix(dim, kappa, rng)
    m = random_hermitian(dim, rng, alpha_m)
    b = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return a, m, b / np.linalg.norm(b), kappa, 1.0, alpha_m


def _slep_experiments(cfg: ExperimentConfig) -> list[Experiment]:
    a, m, b, kappa, alpha_a, alpha_m = _slep_source(cfg)
    out = []
    for eps in cfg.eps:
        inst = build_instance(a, m, b, kappa, eps, alpha_a, alpha_m)
        truth = classical_solve(inst).value
        plan = bslep_plan(inst, cfg.raw("mode"))
        out.append(Experiment(eps, truth, plan.trials))
    return out


def _reduction_source(cfg: ExperimentConfig):
    path = cfg.path("instance")
    if path is not None:
        enc = read_encoding(path)
        return enc.g.values / enc.beta, enc.n, enc.d
    n, d = cfg.get_int("n"), cfg.get_int("d")
    size = d << (n - 1) if n >= 1 else 0
    N = cfg.get_int("N") if cfg.raw("N") else size
    if n < 1 or not 1 <= d <= 1 << n or not 1 <= N <= size:
        raise ConfigError("reduction needs n >= 1, 1 <= d <= 2^n and 1 <= N <= d 2^(n-1)")
    rng = make_rng(cfg.get_int("instance_seed"), 0)
    return rng.uniform(0.0, 1.0, N), n, d


def _reduce_experiments(cfg: ExperimentConfig) -> list[Experiment]:
    values, n, d = _reduction_source(cfg)
    beta = cfg.get_float("beta")
    if beta <= 0:
        raise ConfigError("beta must be positive")
    out = []
    for eps in cfg.eps:
        if eps > 1:
            raise ConfigError("mean estimation needs eps <= 1")
        am = am_instance(values, eps)
        plan = end_to_end_plan(am, n, d, beta, cfg.raw("mode"))
        out.append(Experiment(eps, am.f.mean(), plan.trials))
    return out


@dataclass
class _Exact:
    value: float
    query_counts: dict


def _encode_experiments(cfg: ExperimentConfig) -> list[Experiment]:
    """Exact tier: mean recovered from ``<+|M|+>`` of the encoding; optionally saved."""
    path = cfg.path("instance")
    if path is not None:
        enc = read_encoding(path)
    else:
        values, n, d = _reduction_source(cfg)
        beta = cfg.get_float("beta")
        if len(values) != d << (n - 1):
            raise ConfigError("encode needs N = d 2^(n-1)")
        g = FunctionOracle.from_values(np.asarray(values) * beta, beta, label="g")
        enc = MatrixEncoding(n, d, beta, g)
    save = cfg.path("save")
    if save is not None:
        write_encoding(save, enc)
    sam = SAMInstance(enc.g.N, cfg.eps[0] * enc.beta, enc.beta, enc.g)
    recovered = exact_mean_via_encoding(sam, enc.n, enc.d) / enc.beta
    truth = enc.g.mean() / enc.beta

    def trials(seed: int, count: int) -> list:
        return [_Exact(recovered, {}) for _ in range(count)]

    return [Experiment(eps, truth, trials) for eps in cfg.eps]


BUILDERS = {
    "evhm": _evhm_experiments,
    "sevhm": _sevhm_experiments,
    "slep": _slep_experiments,
    "reduce": _reduce_experiments,
    "encode": _encode_experiments,
}


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def run(cfg: ExperimentConfig) -> list[dict[str, str]]:
    """Execute ``cfg`` and return CSV rows (per-trial rows, then the summary)."""
    target = cfg.raw("target") if cfg.command == "scaling" else cfg.command
    if target not in BUILDERS:
        raise ConfigError(f"scaling target must be one of {', '.join(BUILDERS)}")
    experiments = BUILDERS[target](cfg)
    rows: list[dict[str, str]] = []
    errors, hits = [], []
    fit_points = []
    for exp in experiments:
        results = exp.run_trials(cfg.seed, cfg.trials)
        for k, res in enumerate(results):
            err = abs(res.value - exp.truth)
            ok = err <= exp.eps
            errors.append(err)
            hits.append(ok)
            row = {
                "row_type": "trial",
                "seed": _fmt(cfg.seed),
                "trial": _fmt(k),
                "eps": _fmt(exp.eps),
                "estimate": _fmt(res.value),
                "truth": _fmt(exp.truth),
                "abs_error": _fmt(err),
                "success": _fmt(ok),
            }
            for label in QUERY_LABELS:
                row[f"queries_{label}"] = _fmt(res.query_counts.get(label, 0))
            rows.append(row)
            primary = res.query_counts.get(PRIMARY_LABEL[target], 0)
            if primary > 0:
                fit_points.append((exp.eps, primary))
    summary = {
        "row_type": "summary",
        "seed": _fmt(cfg.seed),
        "success_rate": _fmt(float(np.mean(hits))),
        "median_abs_error": _fmt(float(np.median(errors))),
    }
    if len({e for e, _ in fit_points}) >= 3:
        fit = fit_scaling(fit_points)
        summary.update(slope=_fmt(fit.slope), intercept=_fmt(fit.intercept), r2=_fmt(fit.r2))
    elif cfg.command == "scaling":
        raise ConfigError("scaling needs at least 3 distinct eps values")
    rows.append(summary)
    return [{c: row.get(c, "") for c in COLUMNS} for row in rows]


def write_csv(rows: Sequence[Mapping[str, str]], stream) -> None:
    writer = csv.DictWriter(stream, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ----------------------------------------------------------------------------
# Entry point


def _parse_set(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    defaults = "\n".join(f"  {k} = {v or '(unset)'}" for k, v in DEFAULTS.items())
    epilog = (
        "config keys and defaults:\n"
        f"{defaults}\n\n"
        "instance: a file path (slep instance / matrix-encoding format) or 'zx-plus' for slep.\n"
        "target: experiment whose counts the scaling command fits (evhm, sevhm, slep, reduce).\n"
        "CSV columns: " + ", ".join(COLUMNS) + "\n"
        "exit codes: 0 ok, 2 malformed config, 3 register budget, 4 promise violation"
    )
    parser = argparse.ArgumentParser(
        prog="qslep",
        description="Seeded expectation-value, linear-system and reduction experiments.",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(
            name, epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter
        )
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", help="trial seed (unsigned 64-bit), overrides the config")
        p.add_argument("--out", help="CSV output path (default: stdout)")
        p.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key"
        )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        overrides = _parse_set(args.set)
        overrides["seed"] = args.seed
        cfg = load_config(args.command, args.config, overrides)
        rows = run(cfg)
    except RegisterBudgetError as exc:
        print(f"error: register budget exceeded: {exc}", file=sys.stderr)
        return 3
    except PromiseError as exc:
        print(f"error: instance promise violated: {exc}", file=sys.stderr)
        return 4
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    buffer = io.StringIO()
    write_csv(rows, buffer)
    if args.out:
        Path(args.out).write_text(buffer.getvalue(), encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(buffer.getvalue())
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
