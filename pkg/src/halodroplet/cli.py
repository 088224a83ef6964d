"""Reproducible command-line experiments over the droplet library.

Each subcommand assembles an ExperimentConfig from three layers (built-in
defaults, then a JSON config file, then flag overrides), validates it, and
runs a pure function of that config: the same config and seed produce
byte-identical CSV files. Every table is CSV with a header row and a
trailing manifest reference; each run also writes manifest.json echoing
the full config next to a content-derived build identifier and the
interpreter/dependency versions, and deliberately nothing else (no
timestamps, no hostnames), so reruns are comparable byte for byte.

Exit codes: 0 on success, 2 on configuration errors, 3 on numeric
failures raised by the library. Both error paths print a single-line
machine-readable JSON description to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

import halodroplet
from halodroplet import contours as ct
from halodroplet import estimators as est
from halodroplet import torus_geometry as tg
from halodroplet.model_constants import (
    critical_radius,
    derived_constants,
    renewal_law,
)

TWO_PI = 2.0 * math.pi

EXPERIMENTS = (
    "constants",
    "expansion-sweep",
    "locality-agreement",
    "renewal-asymptotics",
    "membership",
    "gibbs-validate",
)

_HELP = {
    "constants": "one-row table of the derived model constants",
    "expansion-sweep": "second-order expansion residuals over an eps grid",
    "locality-agreement": "local vs definitional extremality agreement counts",
    "renewal-asymptotics": "scaled renewal log-expectations over a beta grid",
    "membership": "contour membership probabilities and slope diagnostics",
    "gibbs-validate": "birth-death chain occupation vs quadrature reference",
    "validate": "check a config file and print the report without running",
}


class ConfigError(ValueError):
    """Invalid experiment configuration; carries itemized violations."""

    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete, serializable description of one experiment run.

    A run reads nothing but this object and the installed build, so the
    pair (config, build) determines every emitted number.
    """

    experiment: str
    kappa: float = 2.0
    side: float = 40.0
    seed: int = 0
    beta_grid: tuple[float, ...] = ()
    eps_grid: tuple[float, ...] = ()
    m_grid: tuple[float, ...] = ()
    delta_grid: tuple[float, ...] = (0.1,)
    replicas: int = 400
    contours_per_eps: int = 64
    steps: int = 650_000
    burn_in: int = 20_000
    nodes_per_mean: int = 64
    out_dir: str = "runs"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in _GRID_FIELDS:
            d[key] = list(d[key])
        return d


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    violations: tuple[str, ...]
    config: ExperimentConfig | None


_FLOAT_FIELDS = ("kappa", "side")
_INT_FIELDS = (
    "seed",
    "replicas",
    "contours_per_eps",
    "steps",
    "burn_in",
    "nodes_per_mean",
)
_GRID_FIELDS = ("beta_grid", "eps_grid", "m_grid", "delta_grid")
_STR_FIELDS = ("experiment", "out_dir")

# Grids an experiment actually consumes; only these must be nonempty.
_REQUIRED_GRIDS = {
    "expansion-sweep": ("eps_grid",),
    "renewal-asymptotics": ("beta_grid",),
    "membership": ("beta_grid", "m_grid", "delta_grid"),
    "gibbs-validate": ("beta_grid",),
}

# Per-experiment defaults layered over the dataclass defaults.
_EXPERIMENT_DEFAULTS = {
    "expansion-sweep": {"eps_grid": (0.1, 0.05, 0.025)},
    "renewal-asymptotics": {"beta_grid": (1e3, 1e4, 1e5, 1e6)},
    "membership": {"beta_grid": (100.0, 1000.0), "m_grid": (0.25, 0.5)},
    "gibbs-validate": {"beta_grid": (0.05,), "side": 10.0},
}


def _coerce_mapping(mapping) -> tuple[dict, list[str]]:
    """Type-check a raw JSON mapping, returning typed values + violations."""
    out: dict = {}
    bad: list[str] = []
    for key, value in mapping.items():
        if key in _FLOAT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                bad.append(f"{key} must be a number, got {value!r}")
            else:
                out[key] = float(value)
        elif key in _INT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, int):
                bad.append(f"{key} must be an integer, got {value!r}")
            else:
                out[key] = int(value)
        elif key in _GRID_FIELDS:
            ok = isinstance(value, (list, tuple)) and all(
                isinstance(x, (int, float)) and not isinstance(x, bool)
                for x in value
            )
            if not ok:
                bad.append(f"{key} must be a list of numbers, got {value!r}")
            else:
                out[key] = tuple(float(x) for x in value)
        elif key in _STR_FIELDS:
            if not isinstance(value, str):
                bad.append(f"{key} must be a string, got {value!r}")
            else:
                out[key] = value
        else:
            bad.append(f"unknown config key {key!r}")
    return out, bad


def _validate_assembled(d: dict) -> list[str]:
    bad: list[str] = []
    kappa = d["kappa"]
    if not kappa > 1.0:
        bad.append(f"kappa must exceed 1, got {kappa!r}")
    else:
        r_c = critical_radius(kappa)
        if not d["side"] > 2.0 * r_c:
            bad.append(
                "half the box side must exceed the critical radius "
                f"{r_c!r}, got side {d['side']!r}"
            )
    if d["seed"] < 0:
        bad.append(f"seed must be nonnegative, got {d['seed']!r}")
    for key in ("replicas", "contours_per_eps", "steps", "nodes_per_mean"):
        if d[key] < 1:
            bad.append(f"{key} must be at least 1, got {d[key]!r}")
    if d["burn_in"] < 0:
        bad.append(f"burn_in must be nonnegative, got {d['burn_in']!r}")
    for key in ("beta_grid", "eps_grid", "delta_grid"):
        if any(x <= 0.0 for x in d[key]):
            bad.append(f"{key} entries must be positive, got {d[key]!r}")
    exp = d["experiment"]
    for key in _REQUIRED_GRIDS.get(exp, ()):
        if not d[key]:
            bad.append(f"{key} must be nonempty for {exp}")
    if exp == "renewal-asymptotics" and 0 < len(d["beta_grid"]) < 4:
        bad.append("beta_grid needs at least 4 entries for the extrapolation")
    if exp == "membership" and d["beta_grid"]:
        window = 2.0 * min(d["beta_grid"]) ** (1.0 / 6.0)
        for m in d["m_grid"]:
            if abs(m) > window:
                bad.append(
                    f"radial shift {m!r} outside the window |m| <= "
                    f"2 beta^(1/6) = {window!r} at the smallest beta"
                )
    if exp == "gibbs-validate":
        if d["side"] < 8.0:
            bad.append(
                "gibbs-validate needs side at least 8 for the quadrature "
                f"reference, got {d['side']!r}"
            )
        if d["steps"] < 20:
            bad.append(f"steps must be at least 20, got {d['steps']!r}")
    return bad


def assemble_config(
    experiment: str, file_mapping: dict, overrides: dict
) -> ExperimentConfig:
    """Merge defaults, config-file entries, and flag overrides.

    Raises ConfigError with every violation found, not just the first.
    Overrides with value None are treated as absent.
    """
    if experiment not in EXPERIMENTS:
        raise ConfigError([f"unknown experiment {experiment!r}"])
    coerced, violations = _coerce_mapping(file_mapping)
    file_exp = coerced.pop("experiment", None)
    if file_exp is not None and file_exp != experiment:
        violations.append(
            f"config names experiment {file_exp!r} but {experiment!r} "
            "was requested"
        )
    base = {f.name: f.default for f in dataclasses.fields(ExperimentConfig)}
    base["experiment"] = experiment
    base.update(_EXPERIMENT_DEFAULTS.get(experiment, {}))
    base.update(coerced)
    base.update({k: v for k, v in overrides.items() if v is not None})
    violations.extend(_validate_assembled(base))
    if violations:
        raise ConfigError(violations)
    return ExperimentConfig(**base)


def _load_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError([f"config file not found: {path}"])
    try:
        mapping = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError([f"config file is not valid JSON: {e}"]) from e
    if not isinstance(mapping, dict):
        raise ConfigError(["config file must hold a JSON object"])
    return mapping


def validate_config(path) -> ValidationReport:
    """Schema and invariant check of a JSON config file; never writes."""
    try:
        mapping = _load_config_file(path)
    except ConfigError as e:
        return ValidationReport(False, tuple(e.violations), None)
    experiment = mapping.get("experiment")
    if not isinstance(experiment, str):
        return ValidationReport(
            False, ("config must name an experiment to validate against",), None
        )
    try:
        config = assemble_config(experiment, mapping, {})
    except ConfigError as e:
        return ValidationReport(False, tuple(e.violations), None)
    return ValidationReport(True, (), config)


# ---------------------------------------------------------------------------
# deterministic artifact writers


def _cell(value) -> str:
    # repr-based floats keep reruns byte-identical and round-trippable
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _render_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_cell(c) for c in row) for row in rows)
    lines.append("# manifest: manifest.json")
    return "\n".join(lines) + "\n"


def _build_identifier() -> str:
    """Content hash of the installed package sources, git-style.

    Stable for a given build, changes whenever any module changes.
    """
    root = Path(halodroplet.__file__).parent
    digest = hashlib.sha1()
    for source in sorted(root.glob("*.py")):
        digest.update(source.name.encode())
        digest.update(source.read_bytes())
    return digest.hexdigest()[:12]


def _manifest(config: ExperimentConfig, outputs: list[str]) -> dict:
    return {
        "config": config.to_dict(),
        "seed": config.seed,
        "package": "halodroplet",
        "version": halodroplet.__version__,
        "build": _build_identifier(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "outputs": outputs,
    }


# ---------------------------------------------------------------------------
# experiment runners; each returns [(filename, header, rows)]


def _run_constants(cfg: ExperimentConfig):
    d = derived_constants(cfg.kappa)
    law = renewal_law()
    header = [
        "kappa",
        "critical_radius",
        "profile_minimum",
        "c1",
        "c2",
        "c3",
        "intensity_coefficient",
        "tau_star",
        "renewal_mean",
        "renewal_variance",
    ]
    row = [
        cfg.kappa,
        d.r_c,
        d.phi_star,
        d.c1,
        d.c2,
        d.c3,
        d.g,
        law.tau_star,
        law.mu,
        law.sigma_sq,
    ]
    return [("constants.csv", header, [row])]


def _run_expansion_sweep(cfg: ExperimentConfig):
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for eps in cfg.eps_grid:
        worst = 0.0
        total = 0.0
        for _ in range(cfg.contours_per_eps):
            pts = ct.noisy_polygon_contour(cfg.kappa, eps, rng)
            rep = ct.delta_and_volume_expansion(pts, cfg.kappa)
            f = rep.functionals
            scale = f.y1 + f.y2 + f.y3
            scaled = (
                max(abs(rep.delta_residual), abs(rep.volume_residual)) / scale
            )
            worst = max(worst, scaled)
            total += scaled
        rows.append(
            [eps, cfg.contours_per_eps, worst, total / cfg.contours_per_eps]
        )
    header = ["eps", "contours", "max_scaled_residual", "mean_scaled_residual"]
    return [("expansion_sweep.csv", header, rows)]


def _run_locality_agreement(cfg: ExperimentConfig):
    d = derived_constants(cfg.kappa)
    rng = np.random.default_rng(cfg.seed)
    base = d.r_c - 2.0

    # route 1: angular criterion vs definitional region check on triplets
    checked = agree = skipped = 0
    for _ in range(cfg.replicas):
        eps = rng.uniform(0.02, 0.3)
        th1, th2 = rng.uniform(0.02, 0.5, 2)
        t = np.array([0.0, th1, th1 + th2])
        rho = rng.uniform(-eps, eps, 3)
        pts = np.c_[(base + rho) * np.cos(t), (base + rho) * np.sin(t)]
        try:
            ang = ct.triplet_is_extremal(pts[0], pts[1], pts[2], d.r_c, eps)
        except ct.ContourPreconditionError:
            skipped += 1  # draw leaves the hypothesis class, not a failure
            continue
        reg = ct.triplet_extremal_region_check(
            pts[0], pts[1], pts[2], d.r_c, eps
        )
        checked += 1
        agree += int(ang == reg)

    # route 2: whole-contour locality vs extraction from the actual halo,
    # on rings with one randomly dipped point straddling the burial depth
    eps_ring = 0.12
    n_ring = max(48, int(math.ceil(24.0 * base)))
    t_ring = TWO_PI * np.arange(n_ring) / n_ring
    side = max(cfg.side, 4.0 * d.r_c + 4.0)
    c_checked = c_agree = c_skipped = 0
    n_contours = max(1, cfg.replicas // 20)
    for _ in range(n_contours):
        rho = np.zeros(n_ring)
        rho[int(rng.integers(0, n_ring))] = -rng.uniform(0.0, 0.75 * eps_ring)
        pts = np.c_[
            (base + rho) * np.cos(t_ring), (base + rho) * np.sin(t_ring)
        ]
        try:
            local = ct.is_outer_contour(pts, d.r_c, eps_ring)
        except ct.ContourPreconditionError:
            c_skipped += 1
            continue
        halo_obj = tg.halo(tg.Configuration(pts, side=side))
        res = ct.extract_boundary_points(halo_obj, d.r_c, eps_ring)
        c_checked += 1
        c_agree += int(local == res.all_extremal)

    header = ["route", "cases", "agreements", "skipped", "all_agree"]
    rows = [
        ["angular-vs-region", checked, agree, skipped, agree == checked],
        [
            "angular-vs-extraction",
            c_checked,
            c_agree,
            c_skipped,
            c_agree == c_checked,
        ],
    ]
    return [("locality_agreement.csv", header, rows)]


def _run_renewal_asymptotics(cfg: ExperimentConfig):
    res = est.renewal_expectation_series(
        cfg.kappa, cfg.beta_grid, nodes_per_mean=cfg.nodes_per_mean
    )
    rows = [
        [
            beta,
            beta ** (-1.0 / 3.0),
            scaled,
            res.extrapolated_limit,
            res.predicted_limit,
            res.refinement_defect,
        ]
        for beta, scaled in zip(res.beta_grid, res.scaled_log)
    ]
    header = [
        "beta",
        "inv_cbrt_beta",
        "scaled_log_expectation",
        "extrapolated_limit",
        "predicted_limit",
        "refinement_defect",
    ]
    return [("renewal_asymptotics.csv", header, rows)]


def _run_membership(cfg: ExperimentConfig):
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for beta in cfg.beta_grid:
        for delta in cfg.delta_grid:
            m_est = est.contour_membership_prob(
                cfg.kappa,
                beta,
                m=0.0,
                replicas=cfg.replicas,
                rng=rng,
                delta=delta,
            )
            rows.append(
                [
                    beta,
                    delta,
                    m_est.mean_count,
                    m_est.replicas,
                    m_est.hits,
                    m_est.estimate,
                    m_est.upper_95,
                    m_est.tau_hat,
                    m_est.c3_scaled_log,
                    m_est.ess,
                ]
            )
    header = [
        "beta",
        "delta",
        "mean_count",
        "replicas",
        "hits",
        "estimate",
        "upper_95",
        "tau_hat",
        "c3_scaled_log",
        "ess",
    ]

    shift_rows = []
    for beta in cfg.beta_grid:
        for m in cfg.m_grid:
            diag = est.membership_shift_ratio(
                cfg.kappa, beta, m, cfg.replicas, cfg.seed
            )
            shift_rows.append(
                [
                    beta,
                    m,
                    diag.replicas,
                    diag.hits_shifted,
                    diag.hits_base,
                    diag.p_shifted,
                    diag.p_base,
                    diag.scaled_abs_log_ratio,
                ]
            )
    shift_header = [
        "beta",
        "m",
        "replicas",
        "hits_shifted",
        "hits_base",
        "p_shifted",
        "p_base",
        "scaled_abs_log_ratio",
    ]
    return [
        ("membership.csv", header, rows),
        ("membership_shift.csv", shift_header, shift_rows),
    ]


def _run_gibbs_validate(cfg: ExperimentConfig):
    beta = cfg.beta_grid[0]
    oracle = est.small_system_oracle(
        cfg.kappa, beta, cfg.side, n_max=2, mode="conditional"
    )
    rng = np.random.default_rng(cfg.seed)
    state = est.gibbs_state(cfg.kappa, beta, cfg.side)
    for _ in range(cfg.burn_in):
        est.gibbs_step(state, rng)
    n_batches = 20
    per_batch = cfg.steps // n_batches
    tallies = np.zeros(3, dtype=np.int64)
    batch_probs = []
    for _ in range(n_batches):
        tally = np.zeros(3, dtype=np.int64)
        for _ in range(per_batch):
            est.gibbs_step(state, rng)
            if state.n <= 2:
                tally[state.n] += 1
        tallies += tally
        if tally.sum() > 0:
            batch_probs.append(tally / tally.sum())
    if not batch_probs:
        raise est.EstimatorError(
            "chain never visited counts 0..2; lengthen the run or lower beta"
        )
    probs = np.array(batch_probs)
    mean = probs.mean(axis=0)
    if len(batch_probs) > 1:
        stderr = probs.std(axis=0, ddof=1) / math.sqrt(len(batch_probs))
    else:
        stderr = np.full(3, math.nan)
    rows = []
    for n in range(3):
        ref = oracle.probabilities[n]
        z = (mean[n] - ref) / stderr[n] if stderr[n] > 0 else math.nan
        rows.append([n, int(tallies[n]), mean[n], stderr[n], ref, z])
    header = [
        "count",
        "visits",
        "chain_probability",
        "chain_stderr",
        "oracle_probability",
        "oracle_z",
    ]
    return [("gibbs_validate.csv", header, rows)]


_RUNNERS = {
    "constants": _run_constants,
    "expansion-sweep": _run_expansion_sweep,
    "locality-agreement": _run_locality_agreement,
    "renewal-asymptotics": _run_renewal_asymptotics,
    "membership": _run_membership,
    "gibbs-validate": _run_gibbs_validate,
}


def run(config: ExperimentConfig) -> list[Path]:
    """Execute one experiment, write its artifacts, return their paths."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables = _RUNNERS[config.experiment](config)
    written = []
    for name, header, rows in tables:
        path = out / name
        path.write_text(_render_csv(header, rows), encoding="utf-8")
        written.append(path)
        body = [",".join(header)]
        body.extend(",".join(_cell(c) for c in row) for row in rows)
        sys.stdout.write(f"# {name}\n" + "\n".join(body) + "\n")
    manifest = _manifest(config, [name for name, _, _ in tables])
    manifest_path = out / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    written.append(manifest_path)
    return written


# ---------------------------------------------------------------------------
# argument parsing and entry point


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got {text!r}"
        ) from e


_OVERRIDE_FIELDS = (
    "kappa",
    "side",
    "seed",
    "beta_grid",
    "eps_grid",
    "m_grid",
    "delta_grid",
    "replicas",
    "contours_per_eps",
    "steps",
    "burn_in",
    "nodes_per_mean",
    "out_dir",
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="halodroplet",
        description=(
            "Droplet-geometry experiment runner; writes CSV tables plus a "
            "manifest into the output directory"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=_HELP[name])
        sp.add_argument(
            "--config", default=None, help="JSON config file; flags override it"
        )
        sp.add_argument("--seed", type=int, default=None, help="master RNG seed")
        sp.add_argument(
            "--out", dest="out_dir", default=None, help="output directory"
        )
        sp.add_argument("--kappa", type=float, default=None)
        sp.add_argument("--side", type=float, default=None, help="torus side")
        sp.add_argument(
            "--beta-grid", dest="beta_grid", type=_float_list, default=None,
            help="comma-separated inverse temperatures",
        )
        sp.add_argument(
            "--eps-grid", "--eps", dest="eps_grid", type=_float_list,
            default=None, help="comma-separated contour scales",
        )
        sp.add_argument(
            "--m-grid", dest="m_grid", type=_float_list, default=None,
            help="comma-separated radial shifts",
        )
        sp.add_argument(
            "--delta-grid", dest="delta_grid", type=_float_list, default=None,
            help="comma-separated tilt exponents for the energy diagnostic",
        )
        sp.add_argument("--replicas", type=int, default=None)
        sp.add_argument(
            "--n", dest="contours_per_eps", type=int, default=None,
            help="contours drawn per eps value",
        )
        sp.add_argument("--steps", type=int, default=None)
        sp.add_argument("--burn-in", dest="burn_in", type=int, default=None)
        sp.add_argument(
            "--nodes", dest="nodes_per_mean", type=int, default=None,
            help="convolution nodes per renewal mean",
        )
    sp = sub.add_parser("validate", help=_HELP["validate"])
    sp.add_argument("--config", required=True, help="JSON config file to check")
    return parser


def _emit_error(code: int, kind: str, messages) -> None:
    payload = {"error": kind, "exit_code": code, "messages": list(messages)}
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "validate":
        report = validate_config(args.config)
        print(
            json.dumps(
                {"valid": report.valid, "violations": list(report.violations)},
                sort_keys=True,
            )
        )
        return 0 if report.valid else 2
    overrides = {k: getattr(args, k) for k in _OVERRIDE_FIELDS}
    try:
        mapping = _load_config_file(args.config) if args.config else {}
        config = assemble_config(args.command, mapping, overrides)
    except ConfigError as e:
        _emit_error(2, "config", e.violations)
        return 2
    try:
        run(config)
    except (
        est.EstimatorError,
        tg.GeometryError,
        ct.ContourPreconditionError,
        ValueError,
        ArithmeticError,
    ) as e:
        _emit_error(3, "numeric", [f"{type(e).__name__}: {e}"])
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
