"""Five-way fusion ablations and their comparison tables."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from sklearn.base import clone

from .exceptions import ContractError
from .nli.estimator import as_pairs
from .nli.fusion import FusionMode

logger = logging.getLogger(__name__)

# row order of the comparison table
ABLATION_MODES = (FusionMode.BASELINE, FusionMode.LATE_FUSION, FusionMode.LATE_FUSION_NOISE,
                  FusionMode.SYNTACTIC_ATTENTION, FusionMode.SYNTACTIC_ATTENTION_NOISE)

# the run each noise variant is compared against
SWR_COUNTERPART = {FusionMode.LATE_FUSION_NOISE: FusionMode.LATE_FUSION,
                   FusionMode.SYNTACTIC_ATTENTION_NOISE: FusionMode.SYNTACTIC_ATTENTION}


@dataclass
class EvalReport:
    """Raw counts per split; accuracies and deltas are always derived from them."""

    model: str
    fusion: FusionMode
    dataset: str
    counts: dict[str, tuple[int, int]] = field(default_factory=dict)
    baseline: str = ""

    def __post_init__(self):
        self.fusion = FusionMode(self.fusion)
        for split, (correct, total) in self.counts.items():
            if total <= 0 or not 0 <= correct <= total:
                raise ContractError(f"bad counts for split {split!r}: {correct}/{total}")

    @property
    def name(self) -> str:
        return self.model.upper() + self.fusion.label

    def accuracy(self, split: str) -> float:
        correct, total = self.counts[split]
        return correct / total

    def delta(self, other: EvalReport, split: str) -> float:
        if other.model != self.model or other.dataset != self.dataset:
            raise ContractError(f"cannot compare {self.name} on {self.dataset} with "
                                f"{other.name} on {other.dataset}")
        return self.accuracy(split) - other.accuracy(split)


def count_correct(model, X) -> tuple[int, int]:
    pairs, labels = as_pairs(X)
    if not pairs:
        raise ContractError("cannot score an empty split")
    predicted = model.predict(pairs)
    return int(sum(p == y for p, y in zip(predicted, labels))), len(labels)


def ablation_suite(estimator, train, dev, test, parser, seed: int = 0, dataset: str = "data",
                   modes=ABLATION_MODES, return_models: bool = False):
    """Train ``estimator`` once per fusion mode with shared seed and hyperparameters.

    Noise variants reuse the configuration of their parser-fed counterpart, so
    differences isolate the representations.
    """
    if parser is None or not parser.frozen_:
        raise ContractError("ablations need a trained, frozen parser")
    reports, models = [], {}
    arch = estimator.architecture
    for mode in map(FusionMode, modes):
        model = clone(estimator).set_params(fusion=mode.value, parser=parser, random_state=seed)
        model.fit(list(train), validation_data=list(dev))
        counts = {"dev": count_correct(model, dev), "test": count_correct(model, test)}
        reports.append(EvalReport(arch, mode, dataset, counts, baseline=arch.upper()))
        models[mode] = model
        logger.info("%s: dev %.4f test %.4f", reports[-1].name, reports[-1].accuracy("dev"),
                    reports[-1].accuracy("test"))
    return (reports, models) if return_models else reports


ABLATION_COLUMNS = ("model", "dataset", "dev", "test", "delta_vs_baseline", "delta_vs_swr")


def _by_mode(reports):
    return {(r.dataset, r.fusion): r for r in reports}


def _deltas(report, index, split):
    base = index.get((report.dataset, FusionMode.BASELINE))
    vs_base = report.delta(base, split) if base is not None else None
    partner = SWR_COUNTERPART.get(report.fusion)
    vs_swr = (report.delta(index[(report.dataset, partner)], split)
              if partner is not None and (report.dataset, partner) in index else None)
    return vs_base, vs_swr


def ablation_tsv(reports: list[EvalReport], split: str = "test") -> str:
    """Full-precision TSV, one row per model and dataset."""
    index = _by_mode(reports)
    lines = ["\t".join(ABLATION_COLUMNS)]
    for r in reports:
        vs_base, vs_swr = _deltas(r, index, split)
        lines.append("\t".join([r.name, r.dataset, repr(r.accuracy("dev")), repr(r.accuracy("test")),
                                "" if vs_base is None else repr(vs_base),
                                "" if vs_swr is None else repr(vs_swr)]))
    return "\n".join(lines) + "\n"


def _pct(x: float) -> str:
    return f"{100 * x:.1f}"


def _signed(x: float | None) -> str:
    return "" if x is None else f"({100 * x:+.1f})"


def ablation_table(reports: list[EvalReport], split: str = "test") -> str:
    """Aligned plain-text table in percent with one decimal."""
    index = _by_mode(reports)
    rows = [("Model", "Dataset", "dev", "test", "vs base", "vs SWR")]
    for r in reports:
        vs_base, vs_swr = _deltas(r, index, split)
        rows.append((r.name, r.dataset, _pct(r.accuracy("dev")), _pct(r.accuracy("test")),
                     _signed(vs_base), _signed(vs_swr)))
    return align(rows)


def align(rows) -> str:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    out = []
    for j, row in enumerate(rows):
        cells = [c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))]
        out.append("  ".join(cells).rstrip())
        if j == 0:
            out.append("-" * len(out[0]))
    return "\n".join(out) + "\n"


def read_ablation_tsv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split("\t")
    if tuple(header) != ABLATION_COLUMNS:
        raise ContractError(f"not an ablation table; header is {header}")
    return [dict(zip(header, ln.split("\t"))) for ln in lines[1:]]
