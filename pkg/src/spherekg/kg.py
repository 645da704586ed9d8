"""Triple ingestion, vocabularies, answer index and relation mapping properties."""
from __future__ import annotations

import hashlib
import io
import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

log = logging.getLogger(__name__)

TAIL_QUERY = "tail_query"
HEAD_QUERY = "head_query"

ONE_TO_ONE = "one-to-one"
ONE_TO_MANY = "one-to-many"
MANY_TO_ONE = "many-to-one"
MANY_TO_MANY = "many-to-many"
CATEGORIES = (ONE_TO_ONE, ONE_TO_MANY, MANY_TO_ONE, MANY_TO_MANY)


class TripleParseError(ValueError):
    """Raised on a malformed line in a triple file."""

    def __init__(self, message: str, line_number: int, source: str = "<stream>"):
        super().__init__(f"{source}:{line_number}: {message}")
        self.line_number = line_number
        self.source = source


class Triple(NamedTuple):
    head: int
    rel: int
    tail: int


class _Bijection:
    def __init__(self) -> None:
        self._to_id: Dict[str, int] = {}
        self._names: List[str] = []

    def add(self, name: str) -> int:
        idx = self._to_id.get(name)
        if idx is None:
            idx = len(self._names)
            self._to_id[name] = idx
            self._names.append(name)
        return idx

    def id(self, name: str) -> int:
        return self._to_id[name]

    def name(self, idx: int) -> str:
        return self._names[idx]

    def __contains__(self, name: object) -> bool:
        return name in self._to_id

    def __len__(self) -> int:
        return len(self._names)

    @property
    def names(self) -> List[str]:
        return list(self._names)


class Vocabulary:
    """Dense name <-> id maps for entities and relations."""

    def __init__(self) -> None:
        self.entities = _Bijection()
        self.relations = _Bijection()

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def copy(self) -> "Vocabulary":
        other = Vocabulary()
        for n in self.entities.names:
            other.entities.add(n)
        for n in self.relations.names:
            other.relations.add(n)
        return other

    def digest(self) -> str:
        """Stable 64-bit hash over sorted (kind, name, id) records, hex encoded."""
        h = hashlib.blake2b(digest_size=8)
        for kind, table in (("E", self.entities), ("R", self.relations)):
            for name in sorted(table.names):
                h.update(f"{kind}\t{name}\t{table.id(name)}\n".encode("utf-8"))
        return h.hexdigest()

    def dump(self, out: io.TextIOBase, kind: str = "entity") -> None:
        """Write ``name<TAB>id`` rows for entities or relations."""
        table = self.entities if kind == "entity" else self.relations
        for i, name in enumerate(table.names):
            out.write(f"{name}\t{i}\n")


def _iter_lines(text) -> Iterable[str]:
    if isinstance(text, str):
        text = io.StringIO(text)
    for line in text:
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        yield line


def parse_triples(text, vocab: Vocabulary, source: str = "<stream>") -> Tuple[List[Triple], int]:
    """Parse ``head<TAB>relation<TAB>tail`` lines, extending ``vocab`` in place.

    Returns the deduplicated triples (first occurrence order) and the number of
    duplicate lines dropped. Blank lines are ignored; LF and CRLF both work.
    """
    triples: List[Triple] = []
    seen = set()
    duplicates = 0
    for lineno, line in enumerate(_iter_lines(text), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise TripleParseError(f"expected 3 tab-separated fields, got {len(fields)}", lineno, source)
        h, r, t = fields
        triple = Triple(vocab.entities.add(h), vocab.relations.add(r), vocab.entities.add(t))
        if triple in seen:
            duplicates += 1
            continue
        seen.add(triple)
        triples.append(triple)
    if duplicates:
        log.warning("%s: dropped %d duplicate triple(s)", source, duplicates)
    return triples, duplicates


def build_answer_index(*splits: Sequence[Tuple[int, int, int]]) -> Dict[Tuple[str, int, int], frozenset]:
    """Map ``(direction, anchor, rel)`` to the set of answers across all splits."""
    acc: Dict[Tuple[str, int, int], set] = defaultdict(set)
    for split in splits:
        for h, r, t in split:
            acc[(TAIL_QUERY, h, r)].add(t)
            acc[(HEAD_QUERY, t, r)].add(h)
    return {key: frozenset(v) for key, v in acc.items()}


@dataclass(frozen=True)
class RelationCategory:
    rel: int
    category: str
    tails_per_head: float
    heads_per_tail: float
    absent: bool = False


def classify_relations(train: Sequence[Tuple[int, int, int]], n_relations: int,
                       threshold: float = 1.5) -> List[RelationCategory]:
    """Assign each relation a mapping category from average answer multiplicity.

    A side counts as "many" when its average ratio exceeds ``threshold``.
    Relations without training triples are reported one-to-one with zero
    ratios and ``absent=True``.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    facts: Dict[int, set] = defaultdict(set)
    for h, r, t in train:
        facts[r].add((h, t))
    out = []
    for r in range(n_relations):
        pairs = facts.get(r)
        if not pairs:
            out.append(RelationCategory(r, ONE_TO_ONE, 0.0, 0.0, absent=True))
            continue
        n = len(pairs)
        tph = n / len({h for h, _ in pairs})
        hpt = n / len({t for _, t in pairs})
        many_tails = tph > threshold
        many_heads = hpt > threshold
        if many_tails and many_heads:
            cat = MANY_TO_MANY
        elif many_tails:
            cat = ONE_TO_MANY
        elif many_heads:
            cat = MANY_TO_ONE
        else:
            cat = ONE_TO_ONE
        out.append(RelationCategory(r, cat, tph, hpt))
    return out


@dataclass
class KnowledgeGraph:
    vocab: Vocabulary
    train: List[Triple]
    valid: List[Triple] = field(default_factory=list)
    test: List[Triple] = field(default_factory=list)
    answer_index: Mapping[Tuple[str, int, int], frozenset] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.answer_index:
            self.answer_index = build_answer_index(self.train, self.valid, self.test)

    @property
    def n_entities(self) -> int:
        return self.vocab.n_entities

    @property
    def n_relations(self) -> int:
        return self.vocab.n_relations

    def answers(self, direction: str, anchor: int, rel: int) -> frozenset:
        return self.answer_index.get((direction, anchor, rel), frozenset())

    def all_triples(self) -> List[Triple]:
        return list(self.train) + list(self.valid) + list(self.test)

    @classmethod
    def from_ids(cls, train, valid=(), test=(), n_entities: Optional[int] = None,
                 n_relations: Optional[int] = None) -> "KnowledgeGraph":
        """Build a graph from integer triples, naming entities ``e<i>`` and relations ``r<i>``."""
        splits = [[Triple(*map(int, x)) for x in s] for s in (train, valid, test)]
        every = [x for s in splits for x in s]
        ne = n_entities if n_entities is not None else 1 + max((max(h, t) for h, _, t in every), default=-1)
        nr = n_relations if n_relations is not None else 1 + max((r for _, r, _ in every), default=-1)
        vocab = Vocabulary()
        for i in range(ne):
            vocab.entities.add(f"e{i}")
        for i in range(nr):
            vocab.relations.add(f"r{i}")
        for h, r, t in every:
            if not (0 <= h < ne and 0 <= t < ne and 0 <= r < nr):
                raise ValueError(f"triple {(h, r, t)} out of vocabulary range")
        return cls(vocab, *splits)


SPLIT_NAMES = ("train", "valid", "test")


def _split_path(data_dir: str, split: str) -> Optional[str]:
    for ext in (".txt", ".tsv"):
        p = os.path.join(data_dir, split + ext)
        if os.path.exists(p):
            return p
    return None


def load_dataset(data_dir: str) -> KnowledgeGraph:
    """Load ``train``/``valid``/``test`` (``.txt`` or ``.tsv``) from ``data_dir``.

    Ids are assigned in first-seen order across train, valid, test. Missing
    valid/test files are treated as empty; a missing train file is an error.
    """
    vocab = Vocabulary()
    splits = {}
    for split in SPLIT_NAMES:
        path = _split_path(data_dir, split)
        if path is None:
            if split == "train":
                raise FileNotFoundError(f"no train.txt or train.tsv in {data_dir}")
            splits[split] = []
            continue
        with open(path, encoding="utf-8", newline="") as fh:
            splits[split], _ = parse_triples(fh, vocab, source=path)
    train_set = set(splits["train"])
    for split in ("valid", "test"):
        overlap = sum(1 for x in splits[split] if x in train_set)
        if overlap:
            log.warning("%d %s triple(s) also appear in train; keeping both", overlap, split)
    return KnowledgeGraph(vocab, splits["train"], splits["valid"], splits["test"])


def write_triples(triples: Iterable[Tuple[int, int, int]], vocab: Vocabulary, out) -> None:
    for h, r, t in triples:
        out.write(f"{vocab.entities.name(h)}\t{vocab.relations.name(r)}\t{vocab.entities.name(t)}\n")


def occurrence_counts(kg: KnowledgeGraph) -> List[int]:
    """Number of appearances of each entity as head or tail across all splits."""
    counts = [0] * kg.n_entities
    for h, _, t in kg.all_triples():
        counts[h] += 1
        counts[t] += 1
    return counts
