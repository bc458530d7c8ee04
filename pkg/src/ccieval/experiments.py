"""Bootstrap robustness experiments and synthetic data generators.

Three protocols are implemented: stimulus subsampling over a logarithmic
size grid, rater-panel subsampling over linearly spaced panel sizes, and
restricted-range evaluation over rank-based MOS splits. Each replicate
draws without replacement inside the replicate; replicates are mutually
independent, so the same rater or stimulus recurs freely across them.

Determinism: every replicate owns the RNG stream seeded by
``SeedSequence([seed, grid_index, replicate_index])`` and result slots
are assembled by index, so serial and threaded runs produce identical
reports.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from .cci import cci_from_arrays
from .correlations import ktau, pcc, srcc
from .data import EvaluationItem, JoinedEvaluation, PredictionTable, RatingsDataset, Scale, ratings_from_rows
from .errors import DataValidationError, DegenerateStatisticError
from .mos import CiPolicy, t_quantile

METRIC_NAMES = ("PCC", "SRCC", "KTAU", "CCI")

EXPERIMENT_KINDS = ("sample_size", "rater_sampling", "restricted_range", "synthetic_correlation")

REGION_LABELS = ("Bad", "Excellent")

_SEED_MASK = (1 << 64) - 1


def replicate_rng(seed: int, grid_index: int, replicate: int) -> np.random.Generator:
    """The documented stream-splitting rule: one child per (grid point, replicate)."""
    return np.random.default_rng(np.random.SeedSequence([seed & _SEED_MASK, grid_index, replicate]))


def evaluate_metrics(metrics: Sequence[str], y, y_hat, ci) -> dict[str, float | None]:
    """Each configured metric, or None where it is undefined on this input."""
    out: dict[str, float | None] = {}
    for name in metrics:
        try:
            if name == "PCC":
                out[name] = pcc(y, y_hat).value
            elif name == "SRCC":
                out[name] = srcc(y, y_hat).value
            elif name == "KTAU":
                out[name] = ktau(y, y_hat).value
            elif name == "CCI":
                out[name] = cci_from_arrays(y, y_hat, ci).value
            else:
                raise ValueError(f"unknown metric {name!r}")
        except DegenerateStatisticError:
            out[name] = None
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int = 0
    replicates: int = 1000
    grid: tuple[int, ...] | None = None  # sample sizes or rater counts; None = protocol default
    split: int = 2  # restricted_range: 2 or 4 rank groups
    regions: tuple[str, ...] = REGION_LABELS
    metrics: tuple[str, ...] = METRIC_NAMES
    threads: int = 1
    population_n: int = 1000  # synthetic_correlation
    target_pcc: float = 0.8  # synthetic_correlation

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise DataValidationError(f"unknown experiment kind {self.kind!r}")
        if self.replicates < 1:
            raise DataValidationError("replicates must be >= 1")
        if self.grid is not None:
            if len(self.grid) == 0:
                raise DataValidationError("grid must be nonempty")
            if any(g < 2 for g in self.grid):
                raise DataValidationError("grid sizes must be >= 2")
        if self.split not in (2, 4):
            raise DataValidationError("split must be 2 or 4")
        bad_regions = [r for r in self.regions if r not in REGION_LABELS]
        if bad_regions or not self.regions:
            raise DataValidationError(f"regions must be drawn from {REGION_LABELS}")
        bad_metrics = [m for m in self.metrics if m not in METRIC_NAMES]
        if bad_metrics or not self.metrics:
            raise DataValidationError(f"metrics must be drawn from {METRIC_NAMES}")
        if self.threads < 1:
            raise DataValidationError("threads must be >= 1")


@dataclass(frozen=True)
class SummaryStats:
    """Deviation summary of replicate values against the population value."""

    mean_deviation: float | None  # |mean(values) - population|
    std: float | None  # sample std of values
    p5_deviation: float | None  # |5th percentile - population|
    p95_deviation: float | None  # |95th percentile - population|
    mean_abs_deviation: float | None  # mean of |value - population|
    n_missing: int


def summarize(values: Sequence[float | None], population: float | None) -> SummaryStats:
    present = np.array([v for v in values if v is not None], dtype=float)
    n_missing = len(values) - len(present)
    if len(present) == 0:
        return SummaryStats(None, None, None, None, None, n_missing)
    if np.all(present == present[0]):
        # exact statistics for a constant sample; summation rounding would
        # otherwise leave ulp-level residue in the all-equal case
        mean, std, p5, p95 = float(present[0]), 0.0, float(present[0]), float(present[0])
    else:
        mean = float(np.mean(present))
        std = float(np.std(present, ddof=1))
        p5 = float(np.percentile(present, 5))
        p95 = float(np.percentile(present, 95))
    if len(present) < 2:
        std = None
    if population is None:
        return SummaryStats(None, std, None, None, None, n_missing)
    return SummaryStats(
        mean_deviation=abs(mean - population),
        std=std,
        p5_deviation=abs(p5 - population),
        p95_deviation=abs(p95 - population),
        mean_abs_deviation=float(np.mean(np.abs(present - population))),
        n_missing=n_missing,
    )


@dataclass(frozen=True)
class ExperimentReport:
    """Replicate-level metric values plus per-grid-point summaries."""

    kind: str
    grid: tuple
    metrics: tuple[str, ...]
    population: dict[str, float | None]
    values: dict[str, dict[str, tuple[float | None, ...]]]  # grid label -> metric -> replicates
    summaries: dict[str, dict[str, SummaryStats]]
    config: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        results = {}
        for label in self.values:
            results[label] = {
                m: {
                    "population": self.population.get(m),
                    "values": list(self.values[label][m]),
                    "summary": asdict(self.summaries[label][m]),
                }
                for m in self.metrics
            }
        return {
            "kind": self.kind,
            "config": self.config,
            "grid": list(self.grid),
            "metrics": list(self.metrics),
            "population": self.population,
            "results": results,
        }

    def write_json(self, path_or_file) -> None:
        own = isinstance(path_or_file, (str, bytes))
        fh = open(path_or_file, "w", encoding="utf-8") if own else path_or_file
        try:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        finally:
            if own:
                fh.close()

    def write_replicates_csv(self, path_or_file) -> None:
        own = isinstance(path_or_file, (str, bytes))
        fh = open(path_or_file, "w", encoding="utf-8", newline="") if own else path_or_file
        try:
            fh.write("grid,metric,replicate,value\n")
            for label in self.values:
                for m in self.metrics:
                    for r, v in enumerate(self.values[label][m]):
                        fh.write(f"{label},{m},{r},{'' if v is None else repr(v)}\n")
        finally:
            if own:
                fh.close()


def _run_grid(
    task: Callable[[int, int], dict[str, float | None]],
    n_grid: int,
    replicates: int,
    threads: int,
) -> list[list[dict[str, float | None]]]:
    slots: list[list[dict[str, float | None] | None]] = [
        [None] * replicates for _ in range(n_grid)
    ]
    if threads <= 1:
        for gi in range(n_grid):
            for ri in range(replicates):
                slots[gi][ri] = task(gi, ri)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:

            def work(pair):
                gi, ri = pair
                slots[gi][ri] = task(gi, ri)

            list(pool.map(work, [(g, r) for g in range(n_grid) for r in range(replicates)]))
    return slots  # type: ignore[return-value]


def _assemble_report(
    kind: str,
    grid_labels: Sequence,
    metrics: Sequence[str],
    population: dict[str, float | None],
    slots: list[list[dict[str, float | None]]],
    config: dict,
) -> ExperimentReport:
    # Thread count is an execution detail with no effect on results; keep it
    # out of the report so runs at different parallelism are byte-identical.
    config = {k: v for k, v in config.items() if k != "threads"}
    values: dict[str, dict[str, tuple[float | None, ...]]] = {}
    summaries: dict[str, dict[str, SummaryStats]] = {}
    for gi, label in enumerate(grid_labels):
        key = str(label)
        values[key] = {m: tuple(slot[m] for slot in slots[gi]) for m in metrics}
        summaries[key] = {m: summarize(values[key][m], population.get(m)) for m in metrics}
    return ExperimentReport(
        kind=kind,
        grid=tuple(grid_labels),
        metrics=tuple(metrics),
        population=population,
        values=values,
        summaries=summaries,
        config=config,
    )


def sample_size_grid(population_n: int, points: int = 20, min_n: int = 10) -> tuple[int, ...]:
    """Logarithmically spaced sample sizes from ``min_n`` to ``population_n - 2``.

    Values are truncated to integers and deduplicated, so the grid can be
    shorter than ``points`` for small populations.
    """
    if points < 2:
        raise DataValidationError("need at least 2 grid points")
    if population_n < min_n + 2:
        raise DataValidationError(
            f"population of {population_n} is too small for a grid starting at {min_n}"
        )
    raw = np.logspace(math.log10(min_n), math.log10(population_n - 2), points)
    grid: list[int] = []
    for v in np.floor(raw + 1e-9).astype(int):
        if not grid or v != grid[-1]:
            grid.append(int(v))
    return tuple(grid)


def rater_size_grid(lo: int = 12, hi: int = 20, points: int = 8) -> tuple[int, ...]:
    """Linearly spaced rater-panel sizes, rounded and deduplicated."""
    raw = np.rint(np.linspace(lo, hi, points)).astype(int)
    grid: list[int] = []
    for v in raw:
        if not grid or v != grid[-1]:
            grid.append(int(v))
    return tuple(grid)


def run_sample_size_experiment(ev: JoinedEvaluation, cfg: ExperimentConfig) -> ExperimentReport:
    """Draw stimulus subsets of each grid size and track metric deviation.

    CI half-widths travel with the items (the rater panel per stimulus is
    unchanged by dropping stimuli), and the constrained set is re-filtered
    inside every subset. Degenerate replicates are recorded as missing.
    """
    y, y_hat, ci = ev.mos, ev.predictions, ev.ci_halfwidths
    n = len(ev)
    grid = cfg.grid if cfg.grid is not None else sample_size_grid(n)
    if any(g > n for g in grid):
        raise DataValidationError(f"grid size exceeds population of {n}")
    population = evaluate_metrics(cfg.metrics, y, y_hat, ci)

    def task(gi: int, ri: int) -> dict[str, float | None]:
        rng = replicate_rng(cfg.seed, gi, ri)
        # Sorted so float summation order is canonical; a full-size draw is
        # then bit-identical to the population computation.
        idx = np.sort(rng.choice(n, size=grid[gi], replace=False))
        return evaluate_metrics(cfg.metrics, y[idx], y_hat[idx], ci[idx])

    slots = _run_grid(task, len(grid), cfg.replicates, cfg.threads)
    return _assemble_report("sample_size", grid, cfg.metrics, population, slots, asdict(cfg))


def _t_lookup(max_votes: int, policy: CiPolicy) -> np.ndarray:
    table = np.zeros(max_votes + 1)
    for m in range(2, max_votes + 1):
        table[m] = t_quantile(m, policy)
    return table


def run_rater_sampling_experiment(
    dataset: RatingsDataset,
    preds: PredictionTable,
    cfg: ExperimentConfig,
    policy: CiPolicy = CiPolicy(),
) -> ExperimentReport:
    """Redraw the rater panel at each grid size and track metric spread.

    MOS, standard deviations and CIs are recomputed from the drawn panel
    only. No population comparison is reported: smaller panels are
    expected to shift MOS itself, so only the replicate spread (std) is
    meaningful here. Stimuli left with fewer than two votes drop out of
    the replicate.
    """
    matrix, stims, raters = dataset.votes_matrix()
    n_raters = len(raters)
    grid = cfg.grid if cfg.grid is not None else rater_size_grid()
    if any(g > n_raters for g in grid):
        raise DataValidationError(f"grid rater count exceeds the pool of {n_raters}")
    population = {m: None for m in cfg.metrics}

    if preds.granularity == "file":
        t_table = _t_lookup(max(n_raters, policy.large_sample_cutoff), policy)
        pred_vec = np.array([preds.rows.get(s, np.nan) for s in stims])
        has_pred = np.isfinite(pred_vec)

        def task(gi: int, ri: int) -> dict[str, float | None]:
            rng = replicate_rng(cfg.seed, gi, ri)
            cols = np.sort(rng.choice(n_raters, size=grid[gi], replace=False))
            sub = matrix[:, cols]
            counts = np.sum(np.isfinite(sub), axis=1)
            keep = (counts >= 2) & has_pred
            if int(keep.sum()) < 2:
                return {m: None for m in cfg.metrics}
            kept = sub[keep]
            with np.errstate(invalid="ignore"):
                mos = np.nanmean(kept, axis=1)
                std = np.nanstd(kept, axis=1, ddof=1)
            kc = counts[keep]
            denom = np.sqrt(kc) if policy.divisor == "standard" else kc
            ci = t_table[kc] * std / denom
            return evaluate_metrics(cfg.metrics, mos, pred_vec[keep], ci)

    else:
        conditions = dataset.conditions
        cond_rows = [
            np.array([i for i, s in enumerate(stims) if dataset.condition_of[s] == c])
            for c in conditions
        ]
        cond_pred = np.array([preds.rows.get(c, np.nan) for c in conditions])
        max_votes = max(len(rows) for rows in cond_rows) * n_raters
        t_table = _t_lookup(max(max_votes, policy.large_sample_cutoff), policy)

        def task(gi: int, ri: int) -> dict[str, float | None]:
            rng = replicate_rng(cfg.seed, gi, ri)
            cols = np.sort(rng.choice(n_raters, size=grid[gi], replace=False))
            sub = matrix[:, cols]
            counts = np.sum(np.isfinite(sub), axis=1)
            with np.errstate(invalid="ignore"):
                sums = np.nansum(sub, axis=1)
                var = np.nanvar(sub, axis=1, ddof=1)
            mos_list, ci_list, pred_list = [], [], []
            for k, rows in enumerate(cond_rows):
                if not np.isfinite(cond_pred[k]):
                    continue
                ok = rows[counts[rows] >= 2]  # files need 2 votes for a variance
                n_votes = int(counts[ok].sum())
                if len(ok) == 0 or n_votes < 2:
                    continue
                std = math.sqrt(float(np.sum((counts[ok] - 1) * var[ok])) / (n_votes - 1))
                denom = math.sqrt(n_votes) if policy.divisor == "standard" else n_votes
                mos_list.append(float(np.sum(sums[ok])) / n_votes)
                ci_list.append(t_table[n_votes] * std / denom)
                pred_list.append(float(cond_pred[k]))
            if len(mos_list) < 2:
                return {m: None for m in cfg.metrics}
            return evaluate_metrics(cfg.metrics, mos_list, pred_list, ci_list)

    slots = _run_grid(task, len(grid), cfg.replicates, cfg.threads)
    return _assemble_report("rater_sampling", grid, cfg.metrics, population, slots, asdict(cfg))


def split_regions(ev: JoinedEvaluation, split: int) -> dict[str, np.ndarray]:
    """Rank-based MOS groups; 'Bad' is the lowest group, 'Excellent' the highest.

    Boundaries sit at ceil(k*N/split); ties in MOS break by id order.
    """
    n = len(ev)
    if n < 2 * split:
        raise DataValidationError(f"need at least {2 * split} items for a {split}-split")
    order = sorted(range(n), key=lambda i: (ev.mos[i], ev.ids[i]))
    bounds = [math.ceil(k * n / split) for k in range(split + 1)]
    groups = [np.array(order[bounds[k] : bounds[k + 1]]) for k in range(split)]
    return {"Bad": groups[0], "Excellent": groups[-1]}


def run_restricted_range_experiment(ev: JoinedEvaluation, cfg: ExperimentConfig) -> ExperimentReport:
    """Evaluate metrics inside a low- or high-MOS region against the full set."""
    y, y_hat, ci = ev.mos, ev.predictions, ev.ci_halfwidths
    population = evaluate_metrics(cfg.metrics, y, y_hat, ci)
    regions = split_regions(ev, cfg.split)
    slots = []
    for label in cfg.regions:
        idx = regions[label]
        if len(idx) < 2:
            slots.append([{m: None for m in cfg.metrics}])
        else:
            slots.append([evaluate_metrics(cfg.metrics, y[idx], y_hat[idx], ci[idx])])
    return _assemble_report(
        "restricted_range", list(cfg.regions), cfg.metrics, population, slots, asdict(cfg)
    )


def run_synthetic_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Stimulus-subsampling robustness on simulated correlated pairs."""
    ev = simulate_correlated_pairs(cfg.population_n, cfg.target_pcc, cfg.seed)
    return run_sample_size_experiment(ev, cfg)


def simulate_correlated_pairs(n: int, target_pcc: float, seed: int) -> JoinedEvaluation:
    """Draw n points from a standard bivariate normal with the requested
    correlation; the first coordinate plays MOS, the second the model
    prediction. CI half-widths are zero, so every distinct-MOS pair is a
    valid CCI pair."""
    if not abs(target_pcc) < 1:
        raise DataValidationError(f"target PCC must satisfy |r| < 1, got {target_pcc}")
    if n < 3:
        raise DataValidationError("need at least 3 points")
    rng = np.random.default_rng(np.random.SeedSequence(seed & _SEED_MASK))
    z = rng.standard_normal((2, n))
    y = z[0]
    y_hat = target_pcc * z[0] + math.sqrt(1.0 - target_pcc**2) * z[1]
    width = len(str(n - 1))
    items = tuple(
        EvaluationItem(f"item{i:0{width}d}", float(y[i]), 0.0, float(y_hat[i])) for i in range(n)
    )
    return JoinedEvaluation(items=items, granularity="file")


def simulate_uncertain_pairs(
    n: int,
    target_pcc: float,
    seed: int,
    prediction_noise_ratio: float = 0.5,
    precise_fraction: float = 0.7,
    precise_scale: float = 0.1,
    quality_range: tuple[float, float] = (1.0, 5.0),
) -> JoinedEvaluation:
    """MOS-like correlated pairs with a per-item uncertainty channel.

    Each item has a latent quality (uniform over ``quality_range``) and an
    uncertainty level: a ``precise_fraction`` majority with small rating
    noise, the rest contentious with large noise. The observed MOS adds
    rating noise at the item's level, the prediction adds noise at
    ``prediction_noise_ratio`` times that level (contentious items are
    also the ones models misjudge), and the CI half-width is the exact
    95% half-width of the item's rating-noise distribution. Noise levels
    are calibrated so the expected overall PCC equals ``target_pcc``.
    """
    if not 0 < target_pcc < 1:
        raise DataValidationError("target PCC must be in (0, 1) for the uncertainty model")
    if n < 3:
        raise DataValidationError("need at least 3 points")
    q_lo, q_hi = quality_range
    var_q = (q_hi - q_lo) ** 2 / 12.0
    eta = prediction_noise_ratio
    t2 = target_pcc**2
    # E[u^2] such that corr(q + u*z, q + eta*u*w) = target in expectation.
    a = t2 * eta**2
    b = t2 * var_q * (1 + eta**2)
    c = var_q**2 * (t2 - 1)
    mean_u2 = (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)
    noisy_scale = math.sqrt((1 - precise_fraction * precise_scale**2) / (1 - precise_fraction))
    rng = np.random.default_rng(np.random.SeedSequence(seed & _SEED_MASK))
    quality = rng.uniform(q_lo, q_hi, n)
    contentious = rng.random(n) >= precise_fraction
    u = math.sqrt(mean_u2) * np.where(contentious, noisy_scale, precise_scale)
    y = quality + u * rng.standard_normal(n)
    y_hat = quality + eta * u * rng.standard_normal(n)
    ci = float(norm.ppf(0.975)) * u
    width = len(str(n - 1))
    items = tuple(
        EvaluationItem(f"item{i:0{width}d}", float(y[i]), float(ci[i]), float(y_hat[i]))
        for i in range(n)
    )
    return JoinedEvaluation(items=items, granularity="file")


@dataclass(frozen=True)
class RegionMetricTable:
    """Per-region metric values for an equal-count split on the MOS axis."""

    region_labels: tuple[str, ...]
    region_bounds: tuple[tuple[float, float], ...]
    region_sizes: tuple[int, ...]
    per_region: dict[str, dict[str, float | None]]
    full: dict[str, float | None]
    metrics: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "full": self.full,
            "metrics": list(self.metrics),
            "regions": [
                {
                    "label": label,
                    "bounds": list(self.region_bounds[k]),
                    "size": self.region_sizes[k],
                    "values": self.per_region[label],
                }
                for k, label in enumerate(self.region_labels)
            ],
        }


def simulate_restricted_range_regions(
    n: int = 1000,
    target_pcc: float = 0.8,
    regions: int = 3,
    seed: int = 0,
    metrics: Sequence[str] = METRIC_NAMES,
) -> RegionMetricTable:
    """Split simulated data into equal-count MOS regions and evaluate each.

    Uses the uncertainty-channel generator so that the CCI's confidence
    gate is meaningful: classical correlations collapse inside a region
    while the CCI stays close to its full-data value.
    """
    if regions < 1:
        raise DataValidationError("need at least 1 region")
    ev = simulate_uncertain_pairs(n, target_pcc, seed)
    y, y_hat, ci = ev.mos, ev.predictions, ev.ci_halfwidths
    full = evaluate_metrics(metrics, y, y_hat, ci)
    order = np.argsort(y, kind="stable")
    labels, bounds, sizes = [], [], []
    per_region: dict[str, dict[str, float | None]] = {}
    for k, idx in enumerate(np.array_split(order, regions)):
        label = f"region{k + 1}"
        labels.append(label)
        bounds.append((float(y[idx].min()), float(y[idx].max())))
        sizes.append(len(idx))
        per_region[label] = evaluate_metrics(metrics, y[idx], y_hat[idx], ci[idx])
    return RegionMetricTable(
        region_labels=tuple(labels),
        region_bounds=tuple(bounds),
        region_sizes=tuple(sizes),
        per_region=per_region,
        full=full,
        metrics=tuple(metrics),
    )


def simulate_rater_dataset(
    n_stimuli: int,
    n_raters: int,
    rater_bias_sd: float,
    rater_noise_sd: float,
    scale: Scale,
    seed: int,
) -> tuple[RatingsDataset, np.ndarray]:
    """Full-panel synthetic ratings: every rater scores every stimulus.

    Latent quality is uniform over the interior of the scale (a 10% margin
    per side keeps clamping rare); each rater carries a fixed additive
    bias plus i.i.d. noise per vote. Discrete scales round votes to
    integers before clamping. Returns the dataset and the latent quality
    vector aligned with the sorted stimulus ids.
    """
    if n_stimuli < 1 or n_raters < 2:
        raise DataValidationError("need at least 1 stimulus and 2 raters")
    if rater_bias_sd < 0 or rater_noise_sd < 0:
        raise DataValidationError("standard deviations must be >= 0")
    margin = 0.1 * (scale.max - scale.min)
    rng = np.random.default_rng(np.random.SeedSequence(seed & _SEED_MASK))
    latent = rng.uniform(scale.min + margin, scale.max - margin, n_stimuli)
    bias = rater_bias_sd * rng.standard_normal(n_raters)
    noise = rater_noise_sd * rng.standard_normal((n_stimuli, n_raters))
    votes = latent[:, None] + bias[None, :] + noise
    if scale.kind == "discrete":
        votes = np.rint(votes)
    votes = np.clip(votes, scale.min, scale.max)
    s_width = len(str(n_stimuli - 1))
    r_width = len(str(n_raters - 1))
    rows = []
    for i in range(n_stimuli):
        sid = f"s{i:0{s_width}d}"
        for m in range(n_raters):
            rows.append((f"c{i:0{s_width}d}", sid, f"r{m:0{r_width}d}", float(votes[i, m])))
    return ratings_from_rows(rows, scale), latent
