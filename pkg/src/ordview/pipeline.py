"""Data generation/ingestion, experiment orchestration, and persistence.

An experiment crosses methods x view-configurations x seeds on one dataset:

* one stratified train/test split derives from the run-level base seed and is
  shared by every method, view configuration, and seed;
* each seed resamples the training partition per class (bootstrap), carves a
  stratified validation subset used only for ensemble weight search, tunes
  (optionally) and trains one model per view on the remainder;
* single-view rows score those models on the test partition; multi-view rows
  aggregate the per-view test probabilities with weights fitted on the
  validation carve-out. Test labels never reach tuning or weight search.

Results persist as a raw grid CSV (one row per method/view-config/seed),
mean +- std markdown summaries, and ANOVA/Tukey reports per metric. Reruns
with an identical config are byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path

import numpy as np

from .core import MultiViewDataset, apportion_counts, stratified_resample, stratified_split
from .metrics import evaluate
from .model import METHODS, method_config, predict_proba_batch, search_space, train, tune
from .ensemble import optimize_weights
from .stats import ResultsTable, anova2, tukey_hsd

__all__ = [
    "SynthConfig",
    "ExperimentConfig",
    "ExperimentResult",
    "ExperimentError",
    "generate_synthetic",
    "write_views_csv",
    "load_views_csv",
    "view_config_names",
    "grid_header",
    "run_experiment",
    "read_grid_csv",
]

DEFAULT_PROPORTIONS = (0.1356, 0.3458, 0.3593, 0.1593)
DEFAULT_VIEWS = ("crown", "north", "south")

METRIC_COLUMNS = ("qwk", "amae", "accuracy")


class ExperimentError(RuntimeError):
    """A module error wrapped with its (method, view_config, seed) context."""


def _subseed(*parts: int) -> int:
    """Stable derived seed for one role in the experiment tree."""
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1)[0])


# ----------------------------------------------------------- synthetic data


@dataclass(frozen=True)
class SynthConfig:
    """Latent-driven stand-in for the multi-view imagery.

    Each sample has a scalar severity score; labels are the score's rank
    blocks sized to class_proportions. Every view sees the score along one
    direction plus Gaussian noise of scale view_noise[v]; a
    latent_correlation fraction of that noise variance is shared across
    views (0 = independent views, 1 = one common nuisance).
    """

    n_samples: int = 295
    n_features_per_view: int = 10
    n_classes: int = 4
    class_proportions: tuple[float, ...] = DEFAULT_PROPORTIONS
    view_names: tuple[str, ...] = DEFAULT_VIEWS
    view_noise: tuple[float, ...] = (1.0, 1.0, 1.0)
    latent_correlation: float = 0.1

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if self.n_features_per_view < 1:
            raise ValueError("n_features_per_view must be >= 1")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if len(self.class_proportions) != self.n_classes:
            raise ValueError("class_proportions length must equal n_classes")
        if any(p <= 0 for p in self.class_proportions):
            raise ValueError("class proportions must be positive")
        if abs(sum(self.class_proportions) - 1.0) > 1e-6:
            raise ValueError("class proportions must sum to 1")
        if not self.view_names:
            raise ValueError("need at least one view name")
        if len(set(self.view_names)) != len(self.view_names):
            raise ValueError("view names must be unique")
        if len(self.view_noise) != len(self.view_names):
            raise ValueError("view_noise length must match view_names")
        if any(s < 0 for s in self.view_noise):
            raise ValueError("view_noise entries must be >= 0")
        if not 0.0 <= self.latent_correlation <= 1.0:
            raise ValueError("latent_correlation must lie in [0, 1]")


def generate_synthetic(cfg: SynthConfig, seed: int) -> MultiViewDataset:
    """Deterministic multi-view dataset with exact per-class counts."""
    quotas = np.asarray(cfg.class_proportions) * cfg.n_samples
    counts = apportion_counts(quotas, cfg.n_samples)
    if np.any(counts == 0):
        raise ValueError(
            f"infeasible proportions: class counts {counts.tolist()} "
            f"for n_samples={cfg.n_samples}"
        )
    rng = np.random.default_rng(seed)
    z = rng.normal(size=cfg.n_samples)
    labels = np.empty(cfg.n_samples, dtype=np.int64)
    order = np.argsort(z)
    start = 0
    for q, c in enumerate(counts):
        labels[order[start : start + c]] = q
        start += c

    d = cfg.n_features_per_view
    rho = cfg.latent_correlation
    shared = rng.normal(size=(cfg.n_samples, d))
    views = {}
    for name, noise_scale in zip(cfg.view_names, cfg.view_noise):
        direction = rng.normal(size=d)
        direction /= np.linalg.norm(direction)
        own = rng.normal(size=(cfg.n_samples, d))
        noise = math.sqrt(rho) * shared + math.sqrt(1.0 - rho) * own
        views[name] = z[:, None] * direction[None, :] + noise_scale * noise
    return MultiViewDataset(views=views, labels=labels, n_classes=cfg.n_classes)


def write_views_csv(
    data: MultiViewDataset,
    out_dir,
    label_column: str = "label",
    id_column: str = "sample_id",
) -> dict[str, Path]:
    """One CSV per view: id, features f0.., label. Returns view -> path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, block in data.views.items():
        path = out_dir / f"{name}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            header = [id_column] + [f"f{i}" for i in range(block.shape[1])] + [label_column]
            writer.writerow(header)
            for i in range(data.n_samples):
                writer.writerow(
                    [i, *[repr(float(v)) for v in block[i]], int(data.labels[i])]
                )
        paths[name] = path
    return paths


# --------------------------------------------------------------- csv loader


def _parse_view_csv(path: Path, label_column: str, id_column: str):
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"file {path}: empty file") from None
        for col in (id_column, label_column):
            if col not in header:
                raise ValueError(f"file {path}: missing required column {col!r}")
        id_pos = header.index(id_column)
        label_pos = header.index(label_column)
        feature_pos = [
            i for i in range(len(header)) if i not in (id_pos, label_pos)
        ]
        rows: dict[str, tuple[float, ...]] = {}
        labels: dict[str, int] = {}
        for line_no, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise ValueError(
                    f"file {path}: line {line_no} has {len(rec)} fields, "
                    f"expected {len(header)}"
                )
            sid = rec[id_pos]
            if sid in rows:
                raise ValueError(f"file {path}: duplicate sample id {sid!r}")
            raw_label = rec[label_pos]
            try:
                label = int(raw_label)
            except ValueError:
                raise ValueError(
                    f"file {path}: line {line_no}: label {raw_label!r} "
                    "is not an integer"
                ) from None
            if label < 0:
                raise ValueError(
                    f"file {path}: line {line_no}: label {label} is negative"
                )
            feats = []
            for i in feature_pos:
                try:
                    feats.append(float(rec[i]))
                except ValueError:
                    raise ValueError(
                        f"file {path}: line {line_no}: cannot parse feature "
                        f"value {rec[i]!r} in column {header[i]!r}"
                    ) from None
            rows[sid] = tuple(feats)
            labels[sid] = label
    if not rows:
        raise ValueError(f"file {path}: no data rows")
    return rows, labels


def _id_sort_key(ids):
    try:
        as_int = {sid: int(sid) for sid in ids}
    except ValueError:
        return sorted(ids)
    return sorted(ids, key=as_int.__getitem__)


def load_views_csv(
    paths,
    label_column: str = "label",
    id_column: str = "sample_id",
    n_classes: int | None = None,
) -> MultiViewDataset:
    """Aligned multi-view dataset from one CSV per view.

    Views must agree on the sample-id set and on every sample's label; rows
    are ordered by ascending sample id (numeric when all ids parse as
    integers). When ``n_classes`` is omitted it is inferred as max label + 1.
    """
    if not paths:
        raise ValueError("need at least one view path")
    parsed = {}
    for view, path in paths.items():
        parsed[view] = _parse_view_csv(Path(path), label_column, id_column)

    names = list(parsed)
    first = names[0]
    base_ids = set(parsed[first][0])
    for view in names[1:]:
        ids = set(parsed[view][0])
        if ids != base_ids:
            off = sorted(ids.symmetric_difference(base_ids))[0]
            raise ValueError(
                f"view {first!r} and view {view!r}: sample ids differ "
                f"(first offending id: {off!r})"
            )
    ordered = _id_sort_key(base_ids)

    labels = []
    for sid in ordered:
        vals = {view: parsed[view][1][sid] for view in names}
        uniq = set(vals.values())
        if len(uniq) > 1:
            raise ValueError(
                f"sample id {sid!r}: conflicting labels across views: {vals}"
            )
        labels.append(vals[first])
    labels = np.array(labels, dtype=np.int64)
    j = int(labels.max()) + 1 if n_classes is None else int(n_classes)
    if labels.max() >= j:
        raise ValueError(
            f"label {int(labels.max())} outside [0, {j - 1}]"
        )
    views = {}
    for view in names:
        rows = parsed[view][0]
        lengths = {len(rows[sid]) for sid in ordered}
        if len(lengths) != 1:
            raise ValueError(f"view {view!r}: inconsistent feature counts")
        views[view] = np.array([rows[sid] for sid in ordered], dtype=np.float64)
    return MultiViewDataset(views=views, labels=labels, n_classes=j)


# ------------------------------------------------------------ configuration


@dataclass(frozen=True)
class ExperimentConfig:
    output_dir: Path
    methods: tuple[str, ...] = METHODS
    views: tuple[str, ...] = DEFAULT_VIEWS
    n_seeds: int = 20
    test_fraction: float = 0.2
    tuning: bool = True
    base_seed: int = 0
    synth: SynthConfig | None = field(default_factory=SynthConfig)
    csv_paths: dict | None = None
    label_column: str = "label"
    id_column: str = "sample_id"
    csv_n_classes: int | None = None
    data_seed: int = 0
    val_fraction: float = 0.25
    n_candidates: int = 1000
    folds: int = 3
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-2
    backbone: str = "linear"
    hidden_width: int = 16
    qwk_exponent: int = 2
    e_normalization: str = "n"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "views", tuple(self.views))
        if not self.methods:
            raise ValueError("need at least one method")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods: {unknown}")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("duplicate methods")
        if not self.views or len(set(self.views)) != len(self.views):
            raise ValueError("views must be nonempty and unique")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if (self.synth is None) == (self.csv_paths is None):
            raise ValueError("configure exactly one of synth or csv_paths")
        if self.qwk_exponent < 1:
            raise ValueError("qwk_exponent must be >= 1")
        if self.e_normalization not in ("n", "j"):
            raise ValueError("e_normalization must be 'n' or 'j'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class ExperimentResult:
    grid_path: Path
    config_path: Path
    summary_paths: dict[str, Path]
    stats_paths: dict[str, Path]
    header: tuple[str, ...]
    rows: tuple[tuple, ...]


def view_config_names(views) -> list[tuple[str, tuple[str, ...]]]:
    """All nonempty view combinations: singles, then pairs, ... in the given
    view order; each named by joining members with '+'."""
    views = list(views)
    out = []
    for size in range(1, len(views) + 1):
        for combo in combinations(range(len(views)), size):
            members = tuple(views[i] for i in combo)
            out.append(("+".join(members), members))
    return out


def grid_header(n_classes: int) -> tuple[str, ...]:
    return (
        "method",
        "view_config",
        "seed",
        "qwk",
        "amae",
        "accuracy",
        *[f"sens_{q}" for q in range(n_classes)],
        *[f"mae_{q}" for q in range(n_classes)],
    )


# -------------------------------------------------------------- orchestration


def _load_data(cfg: ExperimentConfig) -> MultiViewDataset:
    if cfg.synth is not None:
        return generate_synthetic(cfg.synth, cfg.data_seed)
    return load_views_csv(
        cfg.csv_paths,
        label_column=cfg.label_column,
        id_column=cfg.id_column,
        n_classes=cfg.csv_n_classes,
    )


def _train_view_models(cfg, fit_part, seed, mi, method):
    """One model per view for (seed, method); returns view -> TrainedModel."""
    models = {}
    for vi, view in enumerate(cfg.views):
        x_fit = fit_part.views[view]
        y_fit = fit_part.labels
        train_seed = _subseed(cfg.base_seed, seed, 4, mi, vi)
        base = dict(
            backbone=cfg.backbone,
            hidden_width=cfg.hidden_width,
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            learning_rate=cfg.learning_rate,
        )
        try:
            if cfg.tuning:
                tuned = tune(
                    search_space(method),
                    x_fit,
                    y_fit,
                    n_classes=fit_part.n_classes,
                    seed=_subseed(cfg.base_seed, seed, 3, mi, vi),
                    folds=cfg.folds,
                    **base,
                )
                config = replace(tuned, seed=train_seed)
            else:
                config = method_config(
                    method, fit_part.n_classes, None, seed=train_seed, **base
                )
            models[view] = train(config, x_fit, y_fit)
        except Exception as exc:
            raise ExperimentError(
                f"method={method} view={view} seed={seed}: {exc}"
            ) from exc
    return models


def _run_seed(cfg: ExperimentConfig, train_base, test, configs, seed) -> list[tuple]:
    j = train_base.n_classes
    resampled = stratified_resample(train_base, _subseed(cfg.base_seed, seed, 1))
    fit_part, val_part = stratified_split(
        resampled, cfg.val_fraction, _subseed(cfg.base_seed, seed, 2)
    )
    rows = []
    for mi, method in enumerate(cfg.methods):
        models = _train_view_models(cfg, fit_part, seed, mi, method)
        p_test = {v: predict_proba_batch(models[v], test.views[v]) for v in cfg.views}
        p_val = {v: predict_proba_batch(models[v], val_part.views[v]) for v in cfg.views}
        for ci, (name, members) in enumerate(configs):
            try:
                if len(members) == 1:
                    probs = p_test[members[0]]
                else:
                    w = optimize_weights(
                        [p_val[v] for v in members],
                        val_part.labels,
                        n_candidates=cfg.n_candidates,
                        seed=_subseed(cfg.base_seed, seed, 5, mi, ci),
                    )
                    probs = np.tensordot(
                        w.w, np.stack([p_test[v] for v in members]), axes=(0, 0)
                    )
                preds = np.argmax(probs, axis=1)
                report = evaluate(
                    test.labels, preds, j, cfg.qwk_exponent, cfg.e_normalization
                )
            except ExperimentError:
                raise
            except Exception as exc:
                raise ExperimentError(
                    f"method={method} view={name} seed={seed}: {exc}"
                ) from exc
            rows.append(
                (
                    method,
                    name,
                    seed,
                    report.qwk,
                    report.amae,
                    report.accuracy,
                    *report.sens.tolist(),
                    *report.mae_per_class.tolist(),
                )
            )
    return rows


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _config_json(cfg: ExperimentConfig) -> str:
    def default(obj):
        if isinstance(obj, Path):
            return str(obj)
        raise TypeError(type(obj))

    payload = dataclasses.asdict(cfg)
    return json.dumps(payload, indent=2, sort_keys=True, default=default)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    data = _load_data(cfg)
    missing = [v for v in cfg.views if v not in data.view_names]
    if missing:
        raise ValueError(f"views not in dataset: {missing}")
    train_base, test = stratified_split(data, cfg.test_fraction, cfg.base_seed)
    configs = view_config_names(cfg.views)
    header = grid_header(data.n_classes)

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    config_path = out / "config.json"
    config_path.write_text(_config_json(cfg) + "\n")
    grid_path = out / "grid.csv"

    all_rows: list[tuple] = []
    with grid_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        fh.flush()

        def job(seed: int) -> list[tuple]:
            return _run_seed(cfg, train_base, test, configs, seed)

        if cfg.workers == 1:
            futures = None
        else:
            pool = ThreadPoolExecutor(max_workers=cfg.workers)
            futures = [pool.submit(job, s) for s in range(cfg.n_seeds)]
        try:
            for s in range(cfg.n_seeds):
                rows = job(s) if futures is None else futures[s].result()
                for row in rows:
                    writer.writerow([_format_cell(v) for v in row])
                fh.flush()
                all_rows.extend(rows)
        finally:
            if futures is not None:
                pool.shutdown(wait=False, cancel_futures=True)

    summary_paths = {}
    stats_paths = {}
    for metric in METRIC_COLUMNS:
        summary_paths[metric] = _write_summary(out, header, all_rows, metric)
        stats_paths[metric] = _write_stats_report(out, header, all_rows, metric)
    return ExperimentResult(
        grid_path=grid_path,
        config_path=config_path,
        summary_paths=summary_paths,
        stats_paths=stats_paths,
        header=header,
        rows=tuple(all_rows),
    )


# ------------------------------------------------------------------ reports


def _collect(header, rows, metric):
    col = header.index(metric)
    per_cell: dict[tuple[str, str], list[float]] = {}
    methods: list[str] = []
    view_cfgs: list[str] = []
    for row in rows:
        m, v = row[0], row[1]
        if m not in methods:
            methods.append(m)
        if v not in view_cfgs:
            view_cfgs.append(v)
        per_cell.setdefault((m, v), []).append(float(row[col]))
    return methods, view_cfgs, per_cell


def _write_summary(out: Path, header, rows, metric: str) -> Path:
    """Mean +- std of one metric per (method, view_config) cell."""
    methods, view_cfgs, per_cell = _collect(header, rows, metric)
    lines = [f"# Mean {metric.upper()} per method and view configuration", ""]
    lines.append("| method | " + " | ".join(view_cfgs) + " |")
    lines.append("|---" * (len(view_cfgs) + 1) + "|")
    for m in methods:
        cells = []
        for v in view_cfgs:
            vals = np.array(per_cell.get((m, v), []))
            if vals.size == 0:
                cells.append("-")
            else:
                std = vals.std(ddof=1) if vals.size > 1 else 0.0
                cells.append(f"{vals.mean():.3f} +- {std:.3f}")
        lines.append(f"| {m} | " + " | ".join(cells) + " |")
    path = out / f"summary_{metric}.md"
    path.write_text("\n".join(lines) + "\n")
    return path


def _tukey_section(table: ResultsTable, factor: str, alpha: float) -> list[str]:
    groups = table.values_by(factor)
    lines = [f"## Tukey HSD over {factor} (alpha={alpha:g})", ""]
    if len(groups) < 2 or any(v.size < 2 for v in groups.values()):
        lines.append("Not enough groups/replicates for Tukey comparisons.")
        lines.append("")
        return lines
    try:
        grouping = tukey_hsd(groups, alpha=alpha)
    except ValueError as exc:
        lines.append(f"Skipped: {exc}")
        lines.append("")
        return lines
    subset_names = [f"S{i + 1}" for i in range(len(grouping.subsets))]
    lines.append("| level | mean | " + " | ".join(subset_names) + " |")
    lines.append("|---" * (len(subset_names) + 2) + "|")
    for i, level in enumerate(grouping.levels):
        cells = [
            f"{grouping.means[i]:.3f}" if name in grouping.letters[level] else ""
            for name in subset_names
        ]
        lines.append(f"| {level} | {grouping.means[i]:.3f} | " + " | ".join(cells) + " |")
    lines.append("")
    lines.append(
        f"q critical: {grouping.q_critical:.4f} "
        f"(k={len(grouping.levels)}, df={grouping.df})"
    )
    lines.append("")
    return lines


def _write_stats_report(out: Path, header, rows, metric: str) -> Path:
    table = ResultsTable.from_rows(
        [(r[0], r[1], r[2], r[header.index(metric)]) for r in rows], metric=metric
    )
    lines = [f"# Factorial analysis of {metric.upper()}", ""]
    try:
        tbl = anova2(table)
        lines.append("| effect | SS | DF | F | p |")
        lines.append("|---|---|---|---|---|")
        for name, row in tbl.rows().items():
            f_txt = "" if math.isnan(row.f) else f"{row.f:.4f}"
            p_txt = "" if math.isnan(row.p) else f"{row.p:.3e}"
            lines.append(f"| {name} | {row.ss:.6f} | {row.df} | {f_txt} | {p_txt} |")
        lines.append(f"| Total | {tbl.ss_total:.6f} | {tbl.df_total} |  |  |")
        if tbl.degenerate:
            lines.append("")
            lines.append("Degenerate table: residual mean square is zero.")
    except ValueError as exc:
        lines.append(f"ANOVA skipped: {exc}")
    lines.append("")
    for factor in ("method", "view_config"):
        lines.extend(_tukey_section(table, factor, alpha=0.05))
    path = out / f"stats_{metric}.md"
    path.write_text("\n".join(lines) + "\n")
    return path


def read_grid_csv(path) -> tuple[tuple[str, ...], list[tuple]]:
    """Parse a grid CSV back into typed rows (strings, int seed, floats)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header[:3] != ("method", "view_config", "seed"):
            raise ValueError(f"file {path}: not a grid CSV (header {header[:3]})")
        rows = []
        for rec in reader:
            if len(rec) != len(header):
                raise ValueError(f"file {path}: ragged row {rec!r}")
            rows.append(
                (rec[0], rec[1], int(rec[2]), *[float(v) for v in rec[3:]])
            )
    return header, rows
