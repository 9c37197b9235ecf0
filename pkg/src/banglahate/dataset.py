"""Labeled corpus ingestion, label schemes, distribution audits, stratified splits.

Corpora are TSV files with a ``id<TAB>text<TAB>label`` header, UTF-8, one
example per row.  Texts are stored raw; normalization happens downstream so
the loaded corpus stays auditable.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path


class DatasetError(ValueError):
    """Base class for corpus-format and corpus-content failures."""


class MalformedRow(DatasetError):
    def __init__(self, path: str, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"{path}, line {line_no}: {reason}")


class UnknownLabel(DatasetError):
    def __init__(self, path: str, line_no: int, value: str, subtask: str):
        self.line_no = line_no
        self.value = value
        super().__init__(f"{path}, line {line_no}: label {value!r} is not in the {subtask} scheme")


class DuplicateId(DatasetError):
    def __init__(self, path: str, line_no: int, example_id: str):
        self.example_id = example_id
        super().__init__(f"{path}, line {line_no}: duplicate id {example_id!r}")


class EmptyDataset(DatasetError):
    pass


class EmptyClass(DatasetError):
    def __init__(self, class_name: str):
        self.class_name = class_name
        super().__init__(f"class {class_name!r} would have no training examples left")


class ZeroCount(DatasetError):
    def __init__(self, class_name: str):
        self.class_name = class_name
        super().__init__(f"class {class_name!r} has zero examples; weights undefined")


@dataclass(frozen=True)
class LabelScheme:
    """Closed class vocabulary for one subtask; ids are positions in ``names``."""

    subtask: str
    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("class names must be unique")

    @property
    def num_classes(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def name_of(self, class_id: int) -> str:
        return self.names[class_id]


SCHEME_1A = LabelScheme("1A", ("None", "Abusive", "Political Hate", "Profane", "Religious Hate", "Sexism"))
SCHEME_1B = LabelScheme("1B", ("None", "Individual", "Organization", "Community", "Society"))

_SCHEMES = {"1A": SCHEME_1A, "1B": SCHEME_1B}


def scheme_for(subtask: str) -> LabelScheme:
    try:
        return _SCHEMES[subtask.upper()]
    except KeyError:
        raise ValueError(f"unknown subtask {subtask!r}; expected one of {sorted(_SCHEMES)}") from None


@dataclass(frozen=True)
class Example:
    id: str
    text: str
    label: int


@dataclass(frozen=True)
class UnlabeledExample:
    id: str
    text: str


@dataclass(frozen=True)
class ClassDistribution:
    """Per-class counts and fractions for one dataset under one scheme."""

    scheme: LabelScheme
    counts: tuple[int, ...]

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def fractions(self) -> tuple[float, ...]:
        total = self.n
        return tuple(c / total for c in self.counts)

    def as_dict(self) -> dict[str, dict[str, float]]:
        return {
            name: {"count": count, "fraction": frac}
            for name, count, frac in zip(self.scheme.names, self.counts, self.fractions)
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), ensure_ascii=False, sort_keys=False, indent=2)

    def format_table(self) -> str:
        width = max(len(n) for n in self.scheme.names)
        lines = [f"{'class':<{width}}  {'count':>8}  fraction"]
        for name, count, frac in zip(self.scheme.names, self.counts, self.fractions):
            lines.append(f"{name:<{width}}  {count:>8}  {frac:8.4f}")
        lines.append(f"{'total':<{width}}  {self.n:>8}  {1.0:8.4f}")
        return "\n".join(lines)


def _read_rows(path: str | Path, expected_header: tuple[str, ...]):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"dataset file not found: {p}")
    text = p.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MalformedRow(str(p), 1, "empty file, expected a header row")
    header = tuple(lines[0].rstrip("\r").split("\t"))
    if header != expected_header:
        raise MalformedRow(str(p), 1, f"expected header {expected_header}, got {header}")
    for line_no, line in enumerate(lines[1:], start=2):
        fields = line.rstrip("\r").split("\t")
        if len(fields) != len(expected_header):
            raise MalformedRow(str(p), line_no, f"expected {len(expected_header)} fields, got {len(fields)}")
        yield line_no, fields


def load_dataset(path: str | Path, scheme: LabelScheme) -> list[Example]:
    """Load a labeled TSV corpus, mapping label names through the scheme."""
    examples: list[Example] = []
    seen: set[str] = set()
    for line_no, (example_id, text, label_name) in _read_rows(path, ("id", "text", "label")):
        if example_id in seen:
            raise DuplicateId(str(path), line_no, example_id)
        seen.add(example_id)
        try:
            label = scheme.id_of(label_name)
        except KeyError:
            raise UnknownLabel(str(path), line_no, label_name, scheme.subtask) from None
        examples.append(Example(example_id, text, label))
    return examples


def load_unlabeled(path: str | Path) -> list[UnlabeledExample]:
    """Load an ``id<TAB>text`` TSV (labels, if present, are ignored)."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"dataset file not found: {p}")
    first = p.read_text(encoding="utf-8").split("\n", 1)[0].rstrip("\r")
    header = tuple(first.split("\t"))
    rows: list[UnlabeledExample] = []
    seen: set[str] = set()
    if header == ("id", "text", "label"):
        for line_no, (example_id, text, _) in _read_rows(p, ("id", "text", "label")):
            if example_id in seen:
                raise DuplicateId(str(p), line_no, example_id)
            seen.add(example_id)
            rows.append(UnlabeledExample(example_id, text))
    else:
        for line_no, (example_id, text) in _read_rows(p, ("id", "text")):
            if example_id in seen:
                raise DuplicateId(str(p), line_no, example_id)
            seen.add(example_id)
            rows.append(UnlabeledExample(example_id, text))
    return rows


def distribution(data: list[Example], scheme: LabelScheme) -> ClassDistribution:
    if not data:
        raise EmptyDataset("cannot compute a class distribution over zero examples")
    counts = [0] * scheme.num_classes
    for ex in data:
        counts[ex.label] += 1
    return ClassDistribution(scheme, tuple(counts))


@dataclass(frozen=True)
class SplitSpec:
    dev_fraction: float = 0.1
    seed: int = 42

    def __post_init__(self):
        if not (0.0 < self.dev_fraction < 1.0):
            raise ValueError(f"dev_fraction must be in (0, 1), got {self.dev_fraction}")


def round_half_up(x: float) -> int:
    """Round with .5 going up; pinned so splits are platform-independent."""
    return int(x + 0.5) if x >= 0 else -int(-x + 0.5)


def stratified_split(
    data: list[Example],
    spec: SplitSpec,
    scheme: LabelScheme | None = None,
) -> tuple[list[Example], list[Example]]:
    """Deterministic per-class split; dev gets round(count * dev_fraction).

    Classes with >= 2 examples contribute at least one dev example.  Both
    returned lists preserve the original data order.  Raises EmptyClass if a
    class would lose all its training examples.
    """
    by_class: dict[int, list[int]] = {}
    for i, ex in enumerate(data):
        by_class.setdefault(ex.label, []).append(i)

    rng = random.Random(spec.seed)
    dev_indices: set[int] = set()
    for label in sorted(by_class):
        idxs = by_class[label]
        n_dev = round_half_up(len(idxs) * spec.dev_fraction)
        if len(idxs) >= 2:
            n_dev = max(1, n_dev)
        if n_dev >= len(idxs):
            name = scheme.name_of(label) if scheme is not None else str(label)
            raise EmptyClass(name)
        shuffled = list(idxs)
        rng.shuffle(shuffled)
        dev_indices.update(shuffled[:n_dev])

    train = [ex for i, ex in enumerate(data) if i not in dev_indices]
    dev = [ex for i, ex in enumerate(data) if i in dev_indices]
    return train, dev


def class_weights(dist: ClassDistribution) -> tuple[float, ...]:
    """Inverse-frequency weights, mean-normalized so the average weight is 1."""
    for name, count in zip(dist.scheme.names, dist.counts):
        if count == 0:
            raise ZeroCount(name)
    n = dist.n
    k = dist.scheme.num_classes
    raw = [n / (k * c) for c in dist.counts]
    mean = sum(raw) / k
    return tuple(w / mean for w in raw)


def write_dataset(path: str | Path, data: list[Example], scheme: LabelScheme) -> None:
    """Write examples back out in the canonical TSV shape."""
    lines = ["id\ttext\tlabel"]
    for ex in data:
        lines.append(f"{ex.id}\t{ex.text}\t{scheme.name_of(ex.label)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
