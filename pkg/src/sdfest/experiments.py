"""Scenario generation, Monte Carlo studies, and plot-ready CSV output.

A scenario fixes (M, n, parent, estimators, replicates, seed).  Each
replicate draws one multinomial sample on a private child stream keyed by
(seed, "rep", r), so results do not depend on execution order and a single
replicate can be recomputed in isolation.  Distances are recorded both to
the finite target F_M and to the limit curve F of the configured parent.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    CellProbabilities,
    GroupingScheme,
    KernelSpec,
    StepCdf,
    StepDensity,
    grouped_estimator,
    grouped_parent_estimate,
    kernel_estimator,
    kernel_parent_estimate,
    l1_distance,
    make_cell_probs_from_cdf,
    natural_estimator,
    poisson_mixture_expectation,
    poissonized_estimator,
    second_moment,
    structural_df,
)
from .parents import (
    QuinticLimit,
    TabulatedCdf,
    l1_to_limit,
    quintic_cdf,
    sup_to_limit,
    uniform_cdf,
)
from .sampling import (
    CouplingCheck,
    SeededRng,
    coupling_l1_bound,
    derive_seed,
    sample_coupled,
    sample_multinomial,
    sample_poisson,
)

__all__ = [
    "ConfigError",
    "NaturalSpec",
    "GroupedSpec",
    "KernelEstimatorSpec",
    "ScenarioConfig",
    "ReplicateRecord",
    "ScenarioResult",
    "SweepRow",
    "DiagnosticRow",
    "DiagnosticsResult",
    "build_parent",
    "run_scenario",
    "consistency_sweep",
    "inconsistency_diagnostics",
    "emit_csv",
    "emit_sweep_csv",
    "emit_diagnostics_csv",
    "format_float",
]

PARENTS = ("paper-quintic", "uniform", "tabulated")


class ConfigError(ValueError):
    """A scenario or CLI configuration problem, reported before any sampling."""


def _rule_value(rule: str, denominator, M: int) -> int:
    if rule == "sqrt":
        return math.ceil(math.sqrt(M))
    if rule == "fraction":
        if denominator is None:
            raise ConfigError("rule 'fraction' needs a 'denominator'")
        return max(1, math.ceil(M / denominator))
    raise ConfigError(f"unknown rule {rule!r}; choose 'sqrt' or 'fraction'")


@dataclass(frozen=True)
class NaturalSpec:
    label: str = "natural"

    def resolve(self, M: int):
        return None


@dataclass(frozen=True)
class GroupedSpec:
    """Grouping by explicit breaks, a fixed group size, or a size rule that
    tracks M across sweep scales ('sqrt' -> ceil(sqrt(M)), 'fraction' ->
    ceil(M/denominator))."""

    size: int | None = None
    breaks: tuple[int, ...] | None = None
    size_rule: str | None = None
    denominator: int | None = None

    def __post_init__(self) -> None:
        given = sum(x is not None for x in (self.size, self.breaks, self.size_rule))
        if given != 1:
            raise ConfigError(
                "grouped estimator needs exactly one of size / breaks / size_rule"
            )
        if self.size is not None and self.size < 1:
            raise ConfigError("group size must be a positive integer")
        if self.denominator is not None and self.denominator < 1:
            raise ConfigError("rule denominator must be a positive integer")

    @property
    def label(self) -> str:
        if self.breaks is not None:
            return "grouped:breaks"
        if self.size is not None:
            return f"grouped:{self.size}"
        if self.size_rule == "fraction":
            return f"grouped:M/{self.denominator}"
        return f"grouped:{self.size_rule}"

    def group_size(self, M: int) -> int:
        if self.size is not None:
            return self.size
        return _rule_value(self.size_rule, self.denominator, M)

    def resolve(self, M: int) -> GroupingScheme:
        if self.breaks is not None:
            scheme = GroupingScheme(np.asarray(self.breaks))
            if scheme.M != M:
                raise ConfigError(
                    f"grouping breaks end at {scheme.M}, expected M = {M}"
                )
            return scheme
        return GroupingScheme.equal_size(M, self.group_size(M))


@dataclass(frozen=True)
class KernelEstimatorSpec:
    """Kernel smoothing with a fixed bandwidth or a bandwidth rule."""

    kernel: str = "box"
    bandwidth: int | None = None
    bandwidth_rule: str | None = None
    denominator: int | None = None

    def __post_init__(self) -> None:
        if (self.bandwidth is None) == (self.bandwidth_rule is None):
            raise ConfigError(
                "kernel estimator needs exactly one of bandwidth / bandwidth_rule"
            )

    @property
    def label(self) -> str:
        if self.bandwidth is not None:
            return f"kernel:{self.kernel}:{self.bandwidth}"
        if self.bandwidth_rule == "fraction":
            return f"kernel:{self.kernel}:M/{self.denominator}"
        return f"kernel:{self.kernel}:{self.bandwidth_rule}"

    def resolve(self, M: int) -> KernelSpec:
        if self.bandwidth is not None:
            return KernelSpec(self.kernel, self.bandwidth)
        return KernelSpec(
            self.kernel, _rule_value(self.bandwidth_rule, self.denominator, M)
        )


EstimatorSpec = NaturalSpec | GroupedSpec | KernelEstimatorSpec


@dataclass(frozen=True)
class ScenarioConfig:
    M: int
    n: int
    parent: str
    estimators: tuple[EstimatorSpec, ...]
    replicates: int
    seed: int
    eval_grid: tuple[float, ...] = ()
    coupling: bool = False
    table: TabulatedCdf | None = None

    def __post_init__(self) -> None:
        if self.M < 1 or self.n < 1 or self.replicates < 1:
            raise ConfigError("M, n and replicates must all be >= 1")
        if self.parent not in PARENTS:
            raise ConfigError(f"unknown parent {self.parent!r}; choose from {PARENTS}")
        if self.parent == "tabulated" and self.table is None:
            raise ConfigError("parent 'tabulated' needs a CDF table")
        if not self.estimators:
            raise ConfigError("at least one estimator is required")
        labels = [spec.label for spec in self.estimators]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate estimator labels: {labels}")


def build_parent(cfg: ScenarioConfig):
    """The cell probabilities and the limit target for a scenario."""
    if cfg.parent == "paper-quintic":
        return make_cell_probs_from_cdf(quintic_cdf, cfg.M), QuinticLimit()
    if cfg.parent == "uniform":
        return make_cell_probs_from_cdf(uniform_cdf, cfg.M), StepCdf.point_mass(1.0)
    return make_cell_probs_from_cdf(cfg.table, cfg.M), cfg.table.limit_sdf()


def _resolve_estimators(cfg: ScenarioConfig):
    resolved = []
    for spec in cfg.estimators:
        resolved.append((spec.label, spec, spec.resolve(cfg.M)))
    return resolved


def _apply_estimator(spec, params, counts, n: int) -> tuple[StepCdf, StepDensity]:
    if isinstance(spec, NaturalSpec):
        cdf = natural_estimator(counts, n)
        density = grouped_parent_estimate(counts, n, GroupingScheme.unit(counts.size))
        return cdf, density
    if isinstance(spec, GroupedSpec):
        return (
            grouped_estimator(counts, n, params),
            grouped_parent_estimate(counts, n, params),
        )
    return (
        kernel_estimator(counts, n, params),
        kernel_parent_estimate(counts, n, params),
    )


@dataclass(frozen=True)
class ReplicateRecord:
    replicate: int
    estimator: str
    l1_to_fm: float
    l1_to_f: float
    sup_to_f: float
    second_moment: float


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    records: list[ReplicateRecord]
    sdf_knots: dict[str, StepCdf]
    densities: dict[str, StepDensity]
    grid_means: dict[str, np.ndarray] = field(default_factory=dict)
    grid_stderrs: dict[str, np.ndarray] = field(default_factory=dict)
    coupling: list[CouplingCheck] | None = None

    def aggregates(self) -> dict[str, dict[str, float]]:
        """Median/mean/standard error per estimator, recomputed from the
        per-replicate records."""
        out: dict[str, dict[str, float]] = {}
        for label in [s.label for s in self.config.estimators]:
            rows = sorted(
                (r for r in self.records if r.estimator == label),
                key=lambda r: r.replicate,
            )
            out[label] = {}
            for metric in ("l1_to_fm", "l1_to_f", "sup_to_f", "second_moment"):
                vals = np.asarray([getattr(r, metric) for r in rows])
                out[label][f"median_{metric}"] = float(np.median(vals))
                out[label][f"mean_{metric}"] = float(np.mean(vals))
                out[label][f"stderr_{metric}"] = _stderr(vals)
        return out


def _stderr(vals: np.ndarray) -> float:
    if vals.size < 2:
        return 0.0
    return float(np.std(vals, ddof=1) / math.sqrt(vals.size))


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    """Run all replicates of a scenario; deterministic given cfg.seed."""
    resolved = _resolve_estimators(cfg)  # fail on config errors before sampling
    p, limit = build_parent(cfg)
    f_m = structural_df(p)
    grid = np.asarray(cfg.eval_grid, dtype=np.float64)

    records: list[ReplicateRecord] = []
    sdf_knots: dict[str, StepCdf] = {}
    densities: dict[str, StepDensity] = {}
    grid_rows: dict[str, list[np.ndarray]] = {label: [] for label, _, _ in resolved}
    coupling: list[CouplingCheck] | None = [] if cfg.coupling else None

    root = SeededRng(cfg.seed)
    for r in range(cfg.replicates):
        counts = sample_multinomial(p, cfg.n, root.child("rep", r))
        for label, spec, params in resolved:
            cdf, density = _apply_estimator(spec, params, counts, cfg.n)
            records.append(
                ReplicateRecord(
                    replicate=r,
                    estimator=label,
                    l1_to_fm=l1_distance(cdf, f_m),
                    l1_to_f=l1_to_limit(cdf, limit),
                    sup_to_f=sup_to_limit(cdf, limit),
                    second_moment=second_moment(cdf),
                )
            )
            if r == 0:
                sdf_knots[label] = cdf
                densities[label] = density
            if grid.size:
                grid_rows[label].append(cdf.evaluate(grid))
        if cfg.coupling:
            coupling.append(
                coupling_l1_bound(sample_coupled(p, cfg.n, root.child("couple", r)))
            )

    result = ScenarioResult(
        config=cfg,
        records=records,
        sdf_knots=sdf_knots,
        densities=densities,
        coupling=coupling,
    )
    if grid.size:
        for label, rows in grid_rows.items():
            stacked = np.vstack(rows)
            result.grid_means[label] = stacked.mean(axis=0)
            result.grid_stderrs[label] = (
                np.std(stacked, axis=0, ddof=1) / math.sqrt(stacked.shape[0])
                if stacked.shape[0] > 1
                else np.zeros(stacked.shape[1])
            )
    return result


@dataclass(frozen=True)
class SweepRow:
    scale: int
    M: int
    n: int
    estimator: str
    median_l1: float
    mean_l1: float
    stderr_l1: float


def _check_sweep_directions(cfg: ScenarioConfig, scales: list[int]) -> None:
    """Reject scale schedules under which the smoothed estimators' consistency
    conditions stop moving the right way (groups: m/n down, max group
    share down; kernel: bandwidth up, k/M not up, M/(nk) down)."""
    Ms = [cfg.M * s for s in scales]
    ns = [cfg.n * s for s in scales]
    for spec in cfg.estimators:
        if isinstance(spec, GroupedSpec):
            schemes = [spec.resolve(M) for M in Ms]
            m_over_n = [sch.m / n for sch, n in zip(schemes, ns)]
            share = [int(sch.sizes.max()) / M for sch, M in zip(schemes, Ms)]
            if any(b > a for a, b in zip(m_over_n, m_over_n[1:])) or not (
                m_over_n[-1] < m_over_n[0]
            ):
                raise ConfigError(
                    f"{spec.label}: group count / n must shrink across scales, got {m_over_n}"
                )
            if any(b > a for a, b in zip(share, share[1:])):
                raise ConfigError(
                    f"{spec.label}: max group share of M must not grow, got {share}"
                )
        elif isinstance(spec, KernelEstimatorSpec):
            ks = [spec.resolve(M).bandwidth for M in Ms]
            k_over_m = [k / M for k, M in zip(ks, Ms)]
            m_over_nk = [M / (n * k) for M, n, k in zip(Ms, ns, ks)]
            if any(b < a for a, b in zip(ks, ks[1:])) or not ks[-1] > ks[0]:
                raise ConfigError(
                    f"{spec.label}: bandwidth must grow across scales, got {ks}"
                )
            if any(b > a for a, b in zip(k_over_m, k_over_m[1:])):
                raise ConfigError(
                    f"{spec.label}: bandwidth/M must not grow across scales, got {k_over_m}"
                )
            if any(b > a for a, b in zip(m_over_nk, m_over_nk[1:])) or not (
                m_over_nk[-1] < m_over_nk[0]
            ):
                raise ConfigError(
                    f"{spec.label}: M/(n*bandwidth) must shrink across scales, got {m_over_nk}"
                )


def consistency_sweep(base: ScenarioConfig, scales) -> list[SweepRow]:
    """Scale (M, n) by each multiplier and record per-estimator L1-to-F
    aggregates; each scale runs on its own derived seed."""
    scales = [int(s) for s in scales]
    if not scales or any(s < 1 for s in scales):
        raise ConfigError("scales must be positive integers")
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise ConfigError("scales must be strictly increasing")
    _check_sweep_directions(base, scales)

    rows: list[SweepRow] = []
    for idx, s in enumerate(scales):
        cfg = replace(
            base,
            M=base.M * s,
            n=base.n * s,
            seed=derive_seed(base.seed, "sweep", idx),
        )
        agg = run_scenario(cfg).aggregates()
        for spec in base.estimators:
            stats = agg[spec.label]
            rows.append(
                SweepRow(
                    scale=s,
                    M=cfg.M,
                    n=cfg.n,
                    estimator=spec.label,
                    median_l1=stats["median_l1_to_f"],
                    mean_l1=stats["mean_l1_to_f"],
                    stderr_l1=stats["stderr_l1_to_f"],
                )
            )
    return rows


@dataclass(frozen=True)
class DiagnosticRow:
    check: str
    x_or_label: str
    monte_carlo_value: float
    exact_value: float
    stderr: float

    def within(self, k: float = 4.0) -> bool:
        return abs(self.monte_carlo_value - self.exact_value) <= k * self.stderr


@dataclass
class DiagnosticsResult:
    rows: list[DiagnosticRow]
    coupling_violations: int

    def rows_for(self, check: str) -> list[DiagnosticRow]:
        return [r for r in self.rows if r.check == check]


def _default_grid(f_m: StepCdf, points: int = 20) -> np.ndarray:
    return np.linspace(0.0, 1.1 * float(f_m.knots[-1]), points)


def inconsistency_diagnostics(cfg: ScenarioConfig) -> DiagnosticsResult:
    """Monte Carlo checks of the Poissonized natural estimator's exact
    expectation identities plus a coupling-bound summary.

    Per replicate the Y_i are drawn as independent Poisson(n p_i).  The
    'second_moment' row compares the mean of int x^2 dFtilde with
    M/n + int x^2 dF_M; 'poisson_mixture' rows compare mean Ftilde(x) with
    the Poisson-mixture expectation at each grid point.
    """
    p, _ = build_parent(cfg)
    f_m = structural_df(p)
    grid = (
        np.asarray(cfg.eval_grid, dtype=np.float64)
        if cfg.eval_grid
        else _default_grid(f_m)
    )
    B = cfg.replicates
    means = cfg.n * p.probs

    sms = np.empty(B)
    grid_vals = np.empty((B, grid.size))
    bounds = np.empty(B)
    violations = 0
    root = SeededRng(cfg.seed)
    for b in range(B):
        rng = root.child("pois", b)
        y = np.fromiter(
            (sample_poisson(mu, rng) for mu in means), dtype=np.int64, count=p.M
        )
        ftilde = poissonized_estimator(y, cfg.n)
        sms[b] = second_moment(ftilde)
        grid_vals[b] = ftilde.evaluate(grid)
        try:
            bounds[b] = coupling_l1_bound(
                sample_coupled(p, cfg.n, root.child("couple", b))
            ).bound
        except AssertionError:
            bounds[b] = math.nan
            violations += 1

    rows = [
        DiagnosticRow(
            check="second_moment",
            x_or_label="",
            monte_carlo_value=float(sms.mean()),
            exact_value=cfg.M / cfg.n + second_moment(f_m),
            stderr=_stderr(sms),
        )
    ]
    for j, x in enumerate(grid):
        col = grid_vals[:, j]
        rows.append(
            DiagnosticRow(
                check="poisson_mixture",
                x_or_label=format_float(float(x)),
                monte_carlo_value=float(col.mean()),
                exact_value=poisson_mixture_expectation(p, cfg.n, float(x)),
                stderr=_stderr(col),
            )
        )
    # reference scale for |N - n| is sqrt(2n/pi), the folded-normal mean
    rows.append(
        DiagnosticRow(
            check="coupling_bound",
            x_or_label="median",
            monte_carlo_value=float(np.nanmedian(bounds)),
            exact_value=math.sqrt(2.0 * cfg.n / math.pi) / cfg.M,
            stderr=_stderr(bounds[~np.isnan(bounds)]),
        )
    )
    return DiagnosticsResult(rows=rows, coupling_violations=violations)


# ---------------------------------------------------------------------------
# CSV emission.  All floats are written with %.17g so that values round-trip
# exactly and repeated runs produce byte-identical files.
# ---------------------------------------------------------------------------


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _write_rows(path: str, header: list[str], rows) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_csv(result: ScenarioResult, out_dir: str) -> list[str]:
    """Write replicates/sdf_knots/density_knots (plus grid_eval when a grid
    was evaluated and diagnostics when coupling ran); returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    path = os.path.join(out_dir, "replicates.csv")
    _write_rows(
        path,
        ["replicate", "estimator", "l1_to_FM", "l1_to_F", "sup_to_F", "second_moment"],
        (
            [
                str(r.replicate),
                r.estimator,
                format_float(r.l1_to_fm),
                format_float(r.l1_to_f),
                format_float(r.sup_to_f),
                format_float(r.second_moment),
            ]
            for r in result.records
        ),
    )
    paths.append(path)

    path = os.path.join(out_dir, "sdf_knots.csv")
    _write_rows(
        path,
        ["estimator", "knot", "level"],
        (
            [label, format_float(k), format_float(lv)]
            for label, cdf in result.sdf_knots.items()
            for k, lv in zip(cdf.knots, cdf.levels)
        ),
    )
    paths.append(path)

    path = os.path.join(out_dir, "density_knots.csv")
    _write_rows(
        path,
        ["estimator", "break_lo", "break_hi", "height"],
        (
            [label, format_float(lo), format_float(hi), format_float(h)]
            for label, d in result.densities.items()
            for lo, hi, h in zip(d.breakpoints[:-1], d.breakpoints[1:], d.heights)
        ),
    )
    paths.append(path)

    if result.config.eval_grid:
        path = os.path.join(out_dir, "grid_eval.csv")
        _write_rows(
            path,
            ["estimator", "x", "mean_level", "stderr"],
            (
                [
                    label,
                    format_float(x),
                    format_float(m),
                    format_float(se),
                ]
                for label in result.grid_means
                for x, m, se in zip(
                    result.config.eval_grid,
                    result.grid_means[label],
                    result.grid_stderrs[label],
                )
            ),
        )
        paths.append(path)

    if result.coupling is not None:
        path = os.path.join(out_dir, "diagnostics.csv")
        _write_rows(
            path,
            ["check", "x_or_label", "monte_carlo_value", "exact_value", "stderr"],
            (
                [
                    "coupling_bound",
                    str(i),
                    format_float(chk.l1),
                    format_float(chk.bound),
                    "",
                ]
                for i, chk in enumerate(result.coupling)
            ),
        )
        paths.append(path)
    return paths


def emit_sweep_csv(rows: list[SweepRow], out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "sweep.csv")
    _write_rows(
        path,
        ["scale", "M", "n", "estimator", "median_l1", "mean_l1", "stderr_l1"],
        (
            [
                str(r.scale),
                str(r.M),
                str(r.n),
                r.estimator,
                format_float(r.median_l1),
                format_float(r.mean_l1),
                format_float(r.stderr_l1),
            ]
            for r in rows
        ),
    )
    return path


def emit_diagnostics_csv(result: DiagnosticsResult, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "diagnostics.csv")
    _write_rows(
        path,
        ["check", "x_or_label", "monte_carlo_value", "exact_value", "stderr"],
        (
            [
                r.check,
                r.x_or_label,
                format_float(r.monte_carlo_value),
                format_float(r.exact_value),
                format_float(r.stderr),
            ]
            for r in result.rows
        ),
    )
    return path
