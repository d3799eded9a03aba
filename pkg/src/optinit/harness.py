"""Multi-run experiments comparing initialization strategies.

An experiment is a grid of cells ``(strategy, alpha, run)``. Every cell gets
its own seed derived from the base seed, so results do not depend on how
many workers run the grid or in which order.

Files written by :func:`write_records` (the records directory):

``spec.json``
    The experiment specification.
``records.csv``
    ``strategy,alpha,run,seed,episode,score``; one row per episode, raw
    (untransformed) scores, episodes numbered from 1.

Files written by :func:`aggregate_and_emit`:

``curve_<env>_<strategy>_alpha<alpha>.csv``
    ``episode,mean_score,std_error``: sliding-window score averaged over runs
    and its standard error across runs.
``summary.csv``
    ``env,strategy,alpha,n_runs,median_first_reward_episode,final_window_mean``.
    A run that never scores counts as ``inf`` for the first-reward episode.
``plot_<env>_alpha<alpha>.svg``
    The curves of every strategy for one step size.
"""

import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_count, check_positive
from .agent import INIT_STRATEGIES, SarsaAgent, feature_norm_for
from .envs import make_env

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ["strategy", "alpha", "run", "seed", "episode", "score"]
CURVE_COLUMNS = ["episode", "mean_score", "std_error"]
SUMMARY_COLUMNS = ["env", "strategy", "alpha", "n_runs",
                   "median_first_reward_episode", "final_window_mean"]
AGENT_PARAMS = ("gamma", "lam", "epsilon", "trace_kind", "trace_cutoff")


class IncompleteRecordsError(ValueError):
    """The record set does not cover every cell of the experiment."""


@dataclass
class ExperimentSpec:
    """Declarative description of an experiment.

    ``agent_params`` may set any of ``gamma``, ``lam``, ``epsilon``,
    ``trace_kind`` and ``trace_cutoff``; ``env_params`` go to the environment
    constructor.
    """

    env: str
    strategies: list
    alphas: list
    n_runs: int = 30
    episodes: int = 100
    window: int = 10
    base_seed: int = 0
    env_params: dict = field(default_factory=dict)
    agent_params: dict = field(default_factory=dict)
    output_dir: str = "results"

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self):
        return asdict(self)

    def cells(self):
        """All ``(strategy, alpha, run)`` triples in canonical order."""
        return [(s, a, r) for s in self.strategies for a in self.alphas
                for r in range(self.n_runs)]

    def validate(self):
        """Raise on any bad parameter before a single episode runs."""
        check_count(self.n_runs, "n_runs")
        check_count(self.episodes, "episodes")
        check_count(self.window, "window")
        check_count(self.base_seed, "base_seed", min_val=0)
        if not self.strategies or not self.alphas:
            raise ValueError("need at least one strategy and one alpha")
        if len(set(self.strategies)) != len(self.strategies):
            raise ValueError("duplicate strategies")
        if len(set(map(float, self.alphas))) != len(self.alphas):
            raise ValueError("duplicate alphas")
        bad = set(self.agent_params) - set(AGENT_PARAMS)
        if bad:
            raise ValueError(f"unsupported agent_params {sorted(bad)}; allowed: {AGENT_PARAMS}")
        env = make_env(self.env, random_state=0, **self.env_params)
        for strategy in self.strategies:
            if strategy not in INIT_STRATEGIES:
                raise ValueError(f"unknown strategy {strategy!r}")
            for alpha in self.alphas:
                check_positive(alpha, "alpha")
                _make_agent(self, env, strategy, alpha, 0)._check_params()
        return self


@dataclass(frozen=True)
class RunRecord:
    strategy: str
    alpha: float
    run: int
    seed: int
    scores: tuple

    @property
    def first_reward_episode(self):
        """1-based episode at which the cumulative score first becomes nonzero, else inf."""
        nonzero = np.flatnonzero(np.cumsum(self.scores) != 0)
        return float(nonzero[0] + 1) if nonzero.size else float("inf")


def derive_seed(base_seed, strategy, alpha, run):
    """Stable 63-bit seed from SHA-256 of ``base_seed:strategy:alpha.hex():run``."""
    key = f"{int(base_seed)}:{strategy}:{float(alpha).hex()}:{int(run)}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") >> 1


def _make_agent(spec, env, strategy, alpha, seed):
    return SarsaAgent(alpha=float(alpha), init_strategy=strategy,
                      feature_norm=feature_norm_for(env, strategy),
                      random_state=seed, **spec.agent_params)


def run_cell(spec, strategy, alpha, run):
    """Run one cell from its derived seed."""
    seed = derive_seed(spec.base_seed, strategy, alpha, run)
    env_seed, agent_seed = np.random.SeedSequence(seed).spawn(2)
    env = make_env(spec.env, random_state=np.random.default_rng(env_seed), **spec.env_params)
    agent = _make_agent(spec, env, strategy, alpha, np.random.default_rng(agent_seed))
    agent.fit(env, spec.episodes)
    return RunRecord(strategy, float(alpha), run, seed, tuple(agent.episode_scores_))


def _run_cell_args(args):
    return run_cell(*args)


def run_experiment(spec, workers=1):
    """Run every cell; returns records in canonical cell order."""
    spec.validate()
    tasks = [(spec, *cell) for cell in spec.cells()]
    logger.info("running %d cells on %d worker(s)", len(tasks), workers)
    if workers <= 1:
        return [run_cell(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell_args, tasks))


def sliding_window_curve(scores, window):
    """Mean of the last ``window`` scores at every episode (fewer at the start)."""
    window = check_count(window, "window")
    if isinstance(scores, RunRecord):
        scores = scores.scores
    scores = np.asarray(scores, dtype=float)
    # Direct window means rather than cumsum differences: no cancellation error.
    return np.array([scores[max(0, e - window + 1):e + 1].mean() for e in range(scores.size)])


def _fmt(x):
    return repr(float(x))


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_records(records, spec, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    rows = [(r.strategy, _fmt(r.alpha), r.run, r.seed, e + 1, _fmt(score))
            for r in records for e, score in enumerate(r.scores)]
    (directory / "records.csv").write_text(_csv_text(RECORD_COLUMNS, rows))


def read_records(directory):
    """Inverse of :func:`write_records`; returns ``(records, spec)``."""
    directory = Path(directory)
    spec = ExperimentSpec.from_dict(json.loads((directory / "spec.json").read_text()))
    grouped = {}
    with open(directory / "records.csv", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RECORD_COLUMNS:
            raise ValueError(f"records.csv columns {reader.fieldnames} != {RECORD_COLUMNS}")
        for row in reader:
            key = (row["strategy"], float(row["alpha"]), int(row["run"]), int(row["seed"]))
            grouped.setdefault(key, []).append((int(row["episode"]), float(row["score"])))
    records = []
    for (strategy, alpha, run, seed), rows in grouped.items():
        rows.sort()
        records.append(RunRecord(strategy, alpha, run, seed, tuple(s for _, s in rows)))
    return records, spec


def _group(records, spec):
    groups = {}
    for r in records:
        groups.setdefault((r.strategy, float(r.alpha)), []).append(r)
    expected = {(s, float(a)) for s in spec.strategies for a in spec.alphas}
    if set(groups) != expected:
        raise IncompleteRecordsError(f"record cells {sorted(groups)} != expected {sorted(expected)}")
    for key, group in groups.items():
        runs = sorted(r.run for r in group)
        if runs != list(range(spec.n_runs)):
            raise IncompleteRecordsError(f"cell {key} has runs {runs}, expected {spec.n_runs}")
        if any(len(r.scores) != spec.episodes for r in group):
            raise IncompleteRecordsError(f"cell {key} has runs with != {spec.episodes} episodes")
        group.sort(key=lambda r: r.run)
    return groups


def curve_statistics(group, window):
    """Per-episode mean and standard error of the sliding-window curves of ``group``."""
    curves = np.array([sliding_window_curve(r.scores, window) for r in group])
    mean = curves.mean(axis=0)
    if len(group) > 1:
        stderr = curves.std(axis=0, ddof=1) / np.sqrt(len(group))
    else:
        stderr = np.zeros_like(mean)
    return mean, stderr


def _alpha_tag(alpha):
    return f"{float(alpha):g}"


def curve_filename(env, strategy, alpha):
    return f"curve_{env}_{strategy}_alpha{_alpha_tag(alpha)}.csv"


def plot_filename(env, alpha):
    return f"plot_{env}_alpha{_alpha_tag(alpha)}.svg"


def aggregate_and_emit(records, spec, directory, plots=True):
    """Write curve CSVs, the summary CSV and (optionally) one SVG per step size.

    Returns the list of written paths.

    Raises
    ------
    IncompleteRecordsError
        If any cell is missing runs or episodes. Nothing is written then.
    """
    groups = _group(records, spec)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    summary = []
    stats = {}
    for strategy in spec.strategies:
        for alpha in spec.alphas:
            group = groups[(strategy, float(alpha))]
            mean, stderr = curve_statistics(group, spec.window)
            stats[(strategy, float(alpha))] = mean, stderr
            rows = [(e + 1, _fmt(m), _fmt(s)) for e, (m, s) in enumerate(zip(mean, stderr))]
            path = directory / curve_filename(spec.env, strategy, alpha)
            path.write_text(_csv_text(CURVE_COLUMNS, rows))
            written.append(path)
            firsts = [r.first_reward_episode for r in group]
            summary.append((spec.env, strategy, _fmt(alpha), len(group),
                            _fmt(np.median(firsts)), _fmt(mean[-1])))
    path = directory / "summary.csv"
    path.write_text(_csv_text(SUMMARY_COLUMNS, summary))
    written.append(path)
    if plots:
        for alpha in spec.alphas:
            path = directory / plot_filename(spec.env, alpha)
            _plot(path, spec, alpha, {s: stats[(s, float(alpha))] for s in spec.strategies})
            written.append(path)
    return written


def _plot(path, spec, alpha, curves):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # Fixed salt keeps the SVG element ids stable between runs.
    with matplotlib.rc_context({"svg.hashsalt": "optinit"}):
        _draw(path, spec, alpha, curves, plt)


def _draw(path, spec, alpha, curves, plt):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for strategy, (mean, stderr) in curves.items():
        episodes = np.arange(1, mean.size + 1)
        ax.plot(episodes, mean, label=strategy)
        ax.fill_between(episodes, mean - stderr, mean + stderr, alpha=0.2)
    ax.set_xlabel("episode")
    ax.set_ylabel(f"score (mean of last {spec.window} episodes)")
    ax.set_title(f"{spec.env}; alpha = {_alpha_tag(alpha)}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
