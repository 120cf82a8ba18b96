"""Random hyperparameter search with dev-only model selection."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import clone

from .exceptions import ContractError, SwrnliError

logger = logging.getLogger(__name__)

METHODS = ("uniform", "log-uniform")


@dataclass(frozen=True)
class Range:
    """One searchable field.

    For ``log-uniform`` the bounds are base-10 exponents: ``Range(-6, 0, "log-uniform")``
    draws ``lr = 10**u`` with ``u ~ U(-6, 0)``.  ``integer`` rounds uniform draws
    to the nearest whole number, each endpoint included.
    """

    low: float
    high: float
    method: str = "uniform"
    integer: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ContractError(f"sampling method must be one of {METHODS}, got {self.method!r}")
        if not self.low < self.high:
            raise ContractError(f"degenerate range [{self.low}, {self.high}]")
        if self.integer and self.method != "uniform":
            raise ContractError("integer ranges must be sampled uniformly")

    @property
    def support(self) -> tuple[float, float]:
        if self.method == "log-uniform":
            return 10.0 ** self.low, 10.0 ** self.high
        return self.low, self.high

    def sample(self, rng: np.random.Generator):
        if self.integer:
            return int(rng.integers(int(math.ceil(self.low)), int(math.floor(self.high)) + 1))
        u = rng.uniform(self.low, self.high)
        return float(10.0 ** u) if self.method == "log-uniform" else float(u)

    @classmethod
    def parse(cls, text) -> Range:
        """``"100, 300, uniform"`` or a ``(low, high, method)`` tuple from a config file."""
        parts = [p.strip() for p in text.split(",")] if isinstance(text, str) else list(text)
        if len(parts) not in (2, 3):
            raise ContractError(f"cannot read a range from {text!r}")
        low, high = float(parts[0]), float(parts[1])
        method = str(parts[2]) if len(parts) == 3 else "uniform"
        integer = method == "int"
        return cls(low, high, "uniform" if integer else method, integer)


@dataclass(frozen=True)
class HyperparamSpace:
    ranges: dict[str, Range]

    def __post_init__(self):
        if not self.ranges:
            raise ContractError("search space is empty")

    def sample(self, rng: np.random.Generator) -> dict:
        return {name: self.ranges[name].sample(rng) for name in sorted(self.ranges)}

    def with_ranges(self, **updates: Range) -> HyperparamSpace:
        return replace(self, ranges={**self.ranges, **updates})


DA_SPACE = HyperparamSpace({
    "lr": Range(-6, 0, "log-uniform"),
    "attend_hidden": Range(100, 300, integer=True),
    "compare_hidden": Range(100, 400, integer=True),
    "aggregate_hidden": Range(100, 400, integer=True),
    "attend_dropout": Range(0.2, 0.7),
    "compare_dropout": Range(0.2, 0.7),
    "aggregate_dropout": Range(0.2, 0.7),
})

ESIM_SPACE = HyperparamSpace({
    "lr": Range(-4, -1, "log-uniform"),
    "model_dropout": Range(0.2, 0.7),
    "output_dropout": Range(0.2, 0.7),
})

SPACES = {"da": DA_SPACE, "esim": ESIM_SPACE}
DEFAULT_TRIALS = {"da": 30, "esim": 10}


@dataclass
class Trial:
    index: int
    config: dict
    seed: int
    dev_accuracy: float | None = None
    test_accuracy: float | None = None
    wall_time: float = 0.0
    error: str | None = None

    def __post_init__(self):
        for name in ("dev_accuracy", "test_accuracy"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ContractError(f"{name} must lie in [0, 1], got {v}")

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class SearchResult:
    best: Trial | None
    trials: list[Trial] = field(default_factory=list)
    best_model: object = None


def trial_seeds(seed: int, k: int) -> tuple[np.random.Generator, list[int]]:
    """A sampler generator plus one training seed per trial, all derived from ``seed``."""
    sample_seq, train_seq = np.random.SeedSequence(seed).spawn(2)
    seeds = [int(s) for s in train_seq.generate_state(k)]
    return np.random.default_rng(sample_seq), seeds


def random_search(estimator, space: HyperparamSpace, k: int, train, dev, test=None,
                  seed: int = 0, keep_best: bool = True) -> SearchResult:
    """Sample ``k`` configurations, train each on ``train`` and rank by ``dev`` accuracy.

    ``test`` is scored for every trial only after its dev accuracy is fixed and
    plays no part in selection.  Trials whose training raises are recorded as
    failed and the search moves on.
    """
    if k < 1:
        raise ContractError("k must be at least 1")
    sampler, seeds = trial_seeds(seed, k)
    configs = [space.sample(sampler) for _ in range(k)]
    trials, best, best_model = [], None, None
    for i, (config, trial_seed) in enumerate(zip(configs, seeds)):
        trial = Trial(i, config, trial_seed)
        start = time.perf_counter()
        try:
            model = clone(estimator).set_params(**config, random_state=trial_seed)
            model.fit(train, validation_data=dev)
            trial.dev_accuracy = model.score(dev)
        except (SwrnliError, ValueError, FloatingPointError) as exc:
            trial.error = f"{type(exc).__name__}: {exc}"
            logger.warning("trial %d failed: %s", i, trial.error)
            model = None
        trial.wall_time = time.perf_counter() - start
        if model is not None and (best is None or trial.dev_accuracy > best.dev_accuracy):
            best, best_model = trial, (model if keep_best else None)
        trials.append(trial)
        if model is not None and test is not None:
            trial.test_accuracy = model.score(test)
    return SearchResult(best, trials, best_model)


TRIAL_COLUMNS = ("trial", "seed", "dev_accuracy", "test_accuracy", "status")


def trials_tsv(result: SearchResult) -> str:
    names = sorted({k for t in result.trials for k in t.config})
    rows = ["\t".join(TRIAL_COLUMNS + tuple(names))]
    for t in result.trials:
        status = "failed" if t.failed else ("best" if t is result.best else "ok")
        cells = [str(t.index), str(t.seed), _fmt(t.dev_accuracy), _fmt(t.test_accuracy), status]
        cells += [repr(t.config.get(n, "")) for n in names]
        rows.append("\t".join(cells))
    return "\n".join(rows) + "\n"


def _fmt(x):
    return "" if x is None else repr(float(x))
