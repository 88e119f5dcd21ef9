"""Document ingestion: tokenization, vocabulary and the time-ordered store."""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

_URL = re.compile(r"^(https?://|www\.)", re.IGNORECASE)
_NON_WORD = re.compile(r"[^\w]+")


def tokenize(text: str) -> list[str]:
    """Split microblog text into normalized tokens.

    Tokens are whitespace-delimited, lowercased and stripped of punctuation.
    URLs and @-mentions are dropped; hashtags keep their word without ``#``.

    >>> tokenize("MH370 search resumes! http://t.co/x")
    ['mh370', 'search', 'resumes']
    >>> tokenize("@cnn #MH370 MH370")
    ['mh370', 'mh370']
    """
    tokens = []
    for raw in text.split():
        if raw.startswith("@") or _URL.match(raw):
            continue
        tok = _NON_WORD.sub("", raw.lower())
        if tok:
            tokens.append(tok)
    return tokens


class Record(NamedTuple):
    id: str
    timestamp: int
    text: str


class RecordError(ValueError):
    """A single malformed input record; ingestion skips it and continues."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class DuplicateIdError(ValueError):
    pass


@dataclass(frozen=True)
class Document:
    id: str
    timestamp: int
    counts: Mapping[int, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def is_empty(self) -> bool:
        return not self.counts


@dataclass(frozen=True)
class Vocabulary:
    """Word/id bijection plus corpus-wide unigram statistics.

    Ids are assigned in lexicographic word order, so they do not depend on
    record order.
    """

    words: tuple[str, ...]
    frequencies: np.ndarray

    @classmethod
    def from_tokens(cls, token_lists: Iterable[Iterable[str]]) -> Vocabulary:
        freq: Counter[str] = Counter()
        for tokens in token_lists:
            freq.update(tokens)
        words = tuple(sorted(freq))
        return cls(words, np.array([freq[w] for w in words], dtype=np.int64))

    def __post_init__(self):
        object.__setattr__(self, "_ids", {w: i for i, w in enumerate(self.words)})

    def __len__(self) -> int:
        return len(self.words)

    @property
    def size(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._ids

    def id(self, word: str) -> int:
        return self._ids[word]

    @property
    def unigram(self) -> np.ndarray:
        total = self.frequencies.sum()
        if total == 0:
            return np.zeros(0)
        return self.frequencies / total

    @property
    def singleton_count(self) -> int:
        return int(np.count_nonzero(self.frequencies == 1))

    def encode(self, tokens: Iterable[str]) -> dict[int, int]:
        """Sparse count vector for ``tokens``; out-of-vocabulary words are dropped."""
        counts: dict[int, int] = {}
        for tok in tokens:
            wid = self._ids.get(tok)
            if wid is not None:
                counts[wid] = counts.get(wid, 0) + 1
        return counts


class DocumentStore:
    """Documents in (timestamp, id) order with lookup by id."""

    def __init__(self, documents: Iterable[Document] = ()):
        docs = sorted(documents, key=lambda d: (d.timestamp, d.id))
        self._index: dict[str, int] = {}
        for pos, doc in enumerate(docs):
            if doc.id in self._index:
                raise DuplicateIdError(f"duplicate document id {doc.id!r}")
            self._index[doc.id] = pos
        self._docs = tuple(docs)
        self.timestamps = np.array([d.timestamp for d in docs], dtype=np.float64)

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._docs)

    def __getitem__(self, pos: int) -> Document:
        return self._docs[pos]

    def position(self, doc_id: str) -> int:
        return self._index[doc_id]

    def by_id(self, doc_id: str) -> Document:
        return self._docs[self._index[doc_id]]

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self._docs]

    @property
    def empty_documents(self) -> list[str]:
        """Ids of documents that tokenized to nothing (kept, but flagged)."""
        return [d.id for d in self._docs if d.is_empty]


def _as_timestamp(value) -> int:
    if isinstance(value, bool):
        raise TypeError("boolean timestamp")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str) and re.fullmatch(r"-?\d+", value.strip()):
        return int(value)
    raise TypeError(f"timestamp must be an integer, got {value!r}")


def to_record(obj, line: int) -> Record:
    """Validate a mapping (or ``Record``) into a ``Record``; raises ``RecordError``."""
    if isinstance(obj, Record):
        return obj
    if not isinstance(obj, Mapping):
        raise RecordError(line, "record is not an object")
    missing = [k for k in ("id", "timestamp", "text") if k not in obj]
    if missing:
        raise RecordError(line, f"missing field(s) {', '.join(missing)}")
    doc_id, text = obj["id"], obj["text"]
    if not isinstance(doc_id, str) or not doc_id:
        raise RecordError(line, "id must be a non-empty string")
    if not isinstance(text, str):
        raise RecordError(line, "text must be a string")
    try:
        ts = _as_timestamp(obj["timestamp"])
    except TypeError as exc:
        raise RecordError(line, str(exc)) from None
    return Record(doc_id, ts, text)


def parse_line(line: str, lineno: int, fmt: str = "jsonl") -> Record:
    if fmt == "jsonl":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordError(lineno, f"invalid JSON ({exc.msg})") from None
        return to_record(obj, lineno)
    if fmt == "tsv":
        parts = line.rstrip("\r\n").split("\t", 2)
        if len(parts) != 3:
            raise RecordError(lineno, "expected id<TAB>timestamp<TAB>text")
        return to_record({"id": parts[0], "timestamp": parts[1], "text": parts[2]}, lineno)
    raise ValueError(f"unknown input format {fmt!r}")


def iter_records(lines: Iterable[str], fmt: str = "jsonl",
                 errors: list[RecordError] | None = None) -> Iterator[Record]:
    """Parse lines lazily, skipping blanks. Malformed lines are logged and
    appended to ``errors`` rather than raised."""
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            yield parse_line(line, lineno, fmt)
        except RecordError as exc:
            logger.warning("skipping malformed record: %s", exc)
            if errors is not None:
                errors.append(exc)


def ingest(records: Iterable, errors: list[RecordError] | None = None,
           ) -> tuple[DocumentStore, Vocabulary]:
    """Build the document store and vocabulary from raw records.

    ``records`` may be ``Record`` tuples or mappings with ``id``, ``timestamp``
    and ``text``. Malformed mappings are skipped (reported through ``errors``
    with their 1-based position); a repeated id raises ``DuplicateIdError``.
    """
    parsed: list[tuple[Record, list[str]]] = []
    seen: set[str] = set()
    for pos, obj in enumerate(records, start=1):
        try:
            rec = to_record(obj, pos)
        except RecordError as exc:
            logger.warning("skipping malformed record: %s", exc)
            if errors is not None:
                errors.append(exc)
            continue
        if rec.id in seen:
            raise DuplicateIdError(f"duplicate document id {rec.id!r} (record {pos})")
        seen.add(rec.id)
        parsed.append((rec, tokenize(rec.text)))

    vocab = Vocabulary.from_tokens(tokens for _, tokens in parsed)
    store = DocumentStore(
        Document(rec.id, rec.timestamp, vocab.encode(tokens)) for rec, tokens in parsed
    )
    if store.empty_documents:
        logger.info("%d document(s) have no tokens", len(store.empty_documents))
    return store, vocab


def load_corpus(path, fmt: str = "jsonl", errors: list[RecordError] | None = None,
                ) -> tuple[DocumentStore, Vocabulary]:
    with open(path, encoding="utf-8") as fh:
        return ingest(iter_records(fh, fmt, errors))
