"""Templated heuristic probes in the style of HANS, and per-heuristic scoring."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .data import tokenize
from .exceptions import ContractError, GenerationError

ENTAILMENT, NON_ENTAILMENT = "entailment", "non-entailment"
BINARY_LABELS = (ENTAILMENT, NON_ENTAILMENT)


class HeuristicClass(str, enum.Enum):
    LEXICAL_OVERLAP = "lexical_overlap"
    SUBSEQUENCE = "subsequence"
    CONSTITUENT = "constituent"


HEURISTICS = tuple(HeuristicClass)


@dataclass(frozen=True)
class ProbeExample:
    premise: str
    hypothesis: str
    label: str
    heuristic: HeuristicClass
    template: str

    def to_json(self) -> dict:
        return {"sentence1": self.premise, "sentence2": self.hypothesis, "gold_label": self.label,
                "heuristic": self.heuristic.value, "template": self.template}


@dataclass(frozen=True)
class Lexicon:
    singular_nouns: tuple[str, ...]
    plural_nouns: tuple[str, ...]
    transitive_verbs: tuple[str, ...]
    intransitive_verbs: tuple[str, ...]
    adverbs: tuple[str, ...]
    prepositions: tuple[str, ...]
    entailing_markers: tuple[str, ...]
    nonentailing_markers: tuple[str, ...]
    factive_verbs: tuple[str, ...]
    nonfactive_verbs: tuple[str, ...]

    def __post_init__(self):
        seen: dict[str, str] = {}
        for role, words in self.roles().items():
            if not words:
                raise GenerationError(f"lexicon role {role!r} is empty")
            for w in words:
                if w in seen and seen[w] != role:
                    raise GenerationError(f"{w!r} appears under both {seen[w]!r} and {role!r}")
                seen[w] = role

    def roles(self) -> dict[str, tuple[str, ...]]:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    def words(self) -> set[str]:
        return {w for words in self.roles().values() for w in words}

    @classmethod
    def from_json(cls, path) -> Lexicon:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(**{k: tuple(v) for k, v in raw.items()})


# Transitive verbs share their past and participle forms so passives reuse the same word.
DEFAULT_LEXICON = Lexicon(
    singular_nouns=("judge", "actor", "doctor", "lawyer", "senator", "artist", "student",
                    "manager", "banker", "author", "athlete", "scientist", "tourist",
                    "secretary", "president", "professor"),
    plural_nouns=("judges", "actors", "doctors", "lawyers", "senators", "artists", "students",
                  "managers"),
    transitive_verbs=("helped", "called", "admired", "thanked", "avoided", "supported",
                      "recommended", "contacted", "advised", "encouraged", "introduced",
                      "mentioned"),
    intransitive_verbs=("slept", "danced", "waited", "laughed", "arrived", "shouted",
                        "resigned", "ran"),
    adverbs=("quickly", "happily", "quietly", "slowly", "loudly"),
    prepositions=("near", "behind", "beside"),
    entailing_markers=("since", "because"),
    nonentailing_markers=("if", "unless"),
    factive_verbs=("knew", "realized", "forgot"),
    nonfactive_verbs=("believed", "hoped", "thought"),
)


# -- templates ---------------------------------------------------------------------
@dataclass(frozen=True)
class Template:
    name: str
    heuristic: HeuristicClass
    label: str
    slots: tuple[tuple[str, str], ...]  # (slot name, lexicon role)
    render: Callable[[dict], tuple[str, str]] = field(compare=False)
    distinct: tuple[str, ...] = ()  # slots that must take pairwise different values

    def capacity(self, lex: Lexicon) -> int:
        total = 1
        by_role: dict[str, int] = {}
        for slot, role in self.slots:
            size = len(getattr(lex, role))
            if slot in self.distinct:
                used = by_role.get(role, 0)
                by_role[role] = used + 1
                size -= used
            total *= max(size, 0)
        return total

    def sample(self, lex: Lexicon, rng: np.random.Generator) -> dict:
        fill: dict[str, str] = {}
        taken: set[str] = set()
        for slot, role in self.slots:
            choices = [w for w in getattr(lex, role) if slot not in self.distinct or w not in taken]
            word = choices[int(rng.integers(len(choices)))]
            fill[slot] = word
            if slot in self.distinct:
                taken.add(word)
        return fill


LO, SS, CN = HeuristicClass.LEXICAL_OVERLAP, HeuristicClass.SUBSEQUENCE, HeuristicClass.CONSTITUENT
_NOUNS3 = (("n1", "singular_nouns"), ("n2", "singular_nouns"), ("n3", "singular_nouns"))

TEMPLATES = (
    Template("lo_subject_object_swap", LO, NON_ENTAILMENT,
             _NOUNS3[:2] + (("v", "transitive_verbs"),),
             lambda f: (f"the {f['n1']} {f['v']} the {f['n2']}", f"the {f['n2']} {f['v']} the {f['n1']}"),
             ("n1", "n2")),
    Template("lo_passive_reversed", LO, NON_ENTAILMENT,
             _NOUNS3[:2] + (("v", "transitive_verbs"),),
             lambda f: (f"the {f['n1']} was {f['v']} by the {f['n2']}", f"the {f['n1']} {f['v']} the {f['n2']}"),
             ("n1", "n2")),
    Template("lo_relative_clause_wrong", LO, NON_ENTAILMENT,
             _NOUNS3 + (("v1", "transitive_verbs"), ("v2", "transitive_verbs")),
             lambda f: (f"the {f['n1']} who the {f['n2']} {f['v1']} {f['v2']} the {f['n3']}",
                        f"the {f['n1']} {f['v1']} the {f['n2']}"),
             ("n1", "n2", "n3", "v1", "v2")),
    Template("lo_passive", LO, ENTAILMENT,
             _NOUNS3[:2] + (("v", "transitive_verbs"),),
             lambda f: (f"the {f['n1']} was {f['v']} by the {f['n2']}", f"the {f['n2']} {f['v']} the {f['n1']}"),
             ("n1", "n2")),
    Template("lo_relative_clause", LO, ENTAILMENT,
             _NOUNS3 + (("v1", "transitive_verbs"), ("v2", "transitive_verbs")),
             lambda f: (f"the {f['n1']} who the {f['n2']} {f['v1']} {f['v2']} the {f['n3']}",
                        f"the {f['n2']} {f['v1']} the {f['n1']}"),
             ("n1", "n2", "n3", "v1", "v2")),
    Template("ss_pp_on_subject", SS, NON_ENTAILMENT,
             _NOUNS3[:2] + (("p", "prepositions"), ("v", "intransitive_verbs")),
             lambda f: (f"the {f['n1']} {f['p']} the {f['n2']} {f['v']}", f"the {f['n2']} {f['v']}"),
             ("n1", "n2")),
    Template("ss_relative_on_subject", SS, NON_ENTAILMENT,
             _NOUNS3[:2] + (("vt", "transitive_verbs"), ("v", "intransitive_verbs")),
             lambda f: (f"the {f['n1']} who {f['vt']} the {f['n2']} {f['v']}", f"the {f['n2']} {f['v']}"),
             ("n1", "n2")),
    Template("ss_conjunction_drop", SS, ENTAILMENT,
             _NOUNS3 + (("v", "transitive_verbs"),),
             lambda f: (f"the {f['n1']} and the {f['n2']} {f['v']} the {f['n3']}",
                        f"the {f['n2']} {f['v']} the {f['n3']}"),
             ("n1", "n2", "n3")),
    Template("ss_adverb_drop", SS, ENTAILMENT,
             _NOUNS3[:2] + (("v", "transitive_verbs"), ("adv", "adverbs")),
             lambda f: (f"the {f['n1']} {f['v']} the {f['n2']} {f['adv']}",
                        f"the {f['n1']} {f['v']} the {f['n2']}"),
             ("n1", "n2")),
    Template("cn_conditional", CN, NON_ENTAILMENT,
             _NOUNS3[:2] + (("m", "nonentailing_markers"), ("v1", "intransitive_verbs"),
                            ("v2", "intransitive_verbs")),
             lambda f: (f"{f['m']} the {f['n1']} {f['v1']}, the {f['n2']} {f['v2']}", f"the {f['n1']} {f['v1']}"),
             ("n1", "n2")),
    Template("cn_nonfactive_embedding", CN, NON_ENTAILMENT,
             _NOUNS3[:2] + (("b", "nonfactive_verbs"), ("v", "intransitive_verbs")),
             lambda f: (f"the {f['n1']} {f['b']} that the {f['n2']} {f['v']}", f"the {f['n2']} {f['v']}"),
             ("n1", "n2")),
    Template("cn_causal", CN, ENTAILMENT,
             _NOUNS3[:2] + (("m", "entailing_markers"), ("v1", "intransitive_verbs"),
                            ("v2", "intransitive_verbs")),
             lambda f: (f"{f['m']} the {f['n1']} {f['v1']}, the {f['n2']} {f['v2']}", f"the {f['n1']} {f['v1']}"),
             ("n1", "n2")),
    Template("cn_factive_embedding", CN, ENTAILMENT,
             _NOUNS3[:2] + (("b", "factive_verbs"), ("v", "intransitive_verbs")),
             lambda f: (f"the {f['n1']} {f['b']} that the {f['n2']} {f['v']}", f"the {f['n2']} {f['v']}"),
             ("n1", "n2")),
)


def _contiguous(needle: Sequence[str], haystack: Sequence[str]) -> bool:
    n = len(needle)
    return any(list(haystack[i:i + n]) == list(needle) for i in range(len(haystack) - n + 1))


def satisfies_heuristic(example: ProbeExample) -> bool:
    """Mechanical check of the premise/hypothesis relation the heuristic relies on."""
    p, h = tokenize(example.premise), tokenize(example.hypothesis)
    if example.heuristic is LO:
        return set(h) <= set(p)
    return _contiguous(h, p)


def generate_probes(lexicon: Lexicon = DEFAULT_LEXICON, n_per_cell: int = 500,
                    seed: int = 0) -> list[ProbeExample]:
    """Exactly ``n_per_cell`` distinct examples for each (heuristic, label) cell."""
    if n_per_cell < 1:
        raise GenerationError("n_per_cell must be at least 1")
    rng = np.random.default_rng(seed)
    probes: list[ProbeExample] = []
    for heuristic in HEURISTICS:
        for label in BINARY_LABELS:
            templates = [t for t in TEMPLATES if t.heuristic is heuristic and t.label == label]
            capacity = sum(t.capacity(lexicon) for t in templates)
            if capacity < n_per_cell:
                raise GenerationError(
                    f"lexicon supports only {capacity} distinct {heuristic.value}/{label} "
                    f"examples, {n_per_cell} requested")
            seen: set[tuple[str, str]] = set()
            attempts = 0
            while len(seen) < n_per_cell:
                attempts += 1
                if attempts > 100 * n_per_cell + 1000:
                    raise GenerationError(f"could not draw {n_per_cell} distinct "
                                          f"{heuristic.value}/{label} examples")
                template = templates[len(seen) % len(templates)]
                pair = template.render(template.sample(lexicon, rng))
                if pair in seen:
                    continue
                seen.add(pair)
                probes.append(ProbeExample(pair[0], pair[1], label, heuristic, template.name))
    return probes


def write_probes(probes: Iterable[ProbeExample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in probes:
            fh.write(json.dumps(p.to_json(), sort_keys=True) + "\n")


def read_probes(path) -> list[ProbeExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                r = json.loads(line)
                out.append(ProbeExample(r["sentence1"], r["sentence2"], r["gold_label"],
                                        HeuristicClass(r["heuristic"]), r.get("template", "")))
    return out


# -- scoring -----------------------------------------------------------------------
def relabel_binary(prediction: str) -> str:
    """Collapse a three-way (or two-way) NLI label onto entailment / non-entailment."""
    if prediction == ENTAILMENT:
        return ENTAILMENT
    if prediction in ("contradiction", "neutral", NON_ENTAILMENT):
        return NON_ENTAILMENT
    raise ContractError(f"cannot map label {prediction!r} to a binary probe label")


@dataclass
class ProbeReport:
    """Accuracy (in [0, 1]) for each (heuristic, gold label) cell."""
    model: str
    train_data: str
    cells: dict[tuple[HeuristicClass, str], float]

    @property
    def average(self) -> float:
        return float(np.mean([self.cells[(h, lab)] for h in HEURISTICS for lab in BINARY_LABELS]))

    def row(self) -> list[float]:
        """Cell accuracies in percent, entailment cells first, then the average."""
        values = [self.cells[(h, lab)] for lab in BINARY_LABELS for h in HEURISTICS]
        return [100.0 * v for v in values] + [100.0 * self.average]


def evaluate_probes(model, probes: Sequence[ProbeExample], name: str = "model",
                    train_data: str = "") -> ProbeReport:
    """Score ``model.predict`` (pairs of strings -> labels) cell by cell."""
    predictions = model.predict([(p.premise, p.hypothesis) for p in probes])
    correct: dict[tuple, list[bool]] = {(h, lab): [] for h in HEURISTICS for lab in BINARY_LABELS}
    for probe, pred in zip(probes, predictions, strict=True):
        correct[(probe.heuristic, probe.label)].append(relabel_binary(pred) == probe.label)
    empty = [k for k, v in correct.items() if not v]
    if empty:
        raise ContractError(f"probe cells without examples: {[(h.value, lab) for h, lab in empty]}")
    return ProbeReport(name, train_data, {k: float(np.mean(v)) for k, v in correct.items()})


def summarize_table(reports: Sequence[ProbeReport], fmt: str = "text") -> str:
    """Render reports as rows of 3 entailment cells, 3 non-entailment cells and the average."""
    if not reports:
        raise ContractError("need at least one report")
    heads = ["Model", "Train Data"] + [f"{lab[:3].upper()}-{h.value}" for lab in ("entailment", "non-entailment")
                                       for h in HEURISTICS] + ["Avg."]
    ordered = sorted(reports, key=lambda r: (r.model, r.train_data))
    if fmt == "tsv":
        rows = [[r.model, r.train_data] + [repr(v) for v in r.row()] for r in ordered]
        return "\n".join("\t".join(r) for r in [heads] + rows) + "\n"
    rows = [[r.model, r.train_data] + [f"{v:.1f}" for v in r.row()] for r in ordered]
    widths = [max(len(r[i]) for r in [heads] + rows) for i in range(len(heads))]
    lines = ["  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in [heads] + rows]
    return "\n".join(lines) + "\n"


def read_probe_tsv(text: str) -> list[ProbeReport]:
    """Inverse of ``summarize_table(..., fmt="tsv")``."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("Model\tTrain Data"):
        raise ContractError("not a probe table")
    reports = []
    for ln in lines[1:]:
        model, train_data, *values = ln.split("\t")
        cells = {}
        for k, (lab, h) in enumerate((lab, h) for lab in BINARY_LABELS for h in HEURISTICS):
            cells[(h, lab)] = float(values[k]) / 100.0
        reports.append(ProbeReport(model, train_data, cells))
    return reports
