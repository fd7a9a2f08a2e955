"""Monogram archive with exhaustive top-k search.

Entries keep both the 64-bit monogram and its real code so the archive can
answer Hamming queries on bits and Euclidean or cosine queries on real codes.
Searches run over an immutable snapshot of the entries; inserts take the
archive lock and invalidate the snapshot.

Archive file layout:

    #patientcode-archive version=1 bits=64 threshold=zero
    case_id,label,<16 uppercase hex digits>,<64 comma-separated reals>
"""

import logging
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from patientcode.archive.kernels import hamming_scan, popcount64
from patientcode.data.dataset import check_identifier, format_values, iter_lines
from patientcode.errors import DataError, IngestionError, ParseError, SchemaError, ShapeError
from patientcode.fusion.fusion_network import CODE_BITS, CODE_CAPACITY, Monogram, ThresholdMode, binarize

logger = logging.getLogger(__name__)

ARCHIVE_HEADER = "#patientcode-archive"
ARCHIVE_VERSION = 1


class Metric(str, Enum):
    HAMMING = "hamming"
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"

    @property
    def on_bits(self) -> bool:
        return self is Metric.HAMMING


def _check_word(word: int) -> int:
    word = int(word)
    if not 0 <= word < CODE_CAPACITY:
        raise ShapeError(f"code word out of 64-bit range: {word}")
    return word


def hamming(a: int, b: int) -> int:
    """Number of differing bits between two 64-bit words."""
    return int(popcount64(np.uint64(_check_word(a) ^ _check_word(b))))


def _check_code(code: np.ndarray, name: str) -> np.ndarray:
    code = np.asarray(code, dtype=np.float64)
    if code.shape != (CODE_BITS,):
        raise ShapeError(f"{name} must have length {CODE_BITS}, got {code.shape}")
    return code


def euclidean_code(a: np.ndarray, b: np.ndarray) -> float:
    """L2 distance between two real codes."""
    diff = _check_code(a, "a") - _check_code(b, "b")
    return float(np.sqrt(np.dot(diff, diff)))


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cosine similarity; a zero-norm code is at distance 1 from everything."""
    a = _check_code(a, "a")
    b = _check_code(b, "b")
    norm = float(np.linalg.norm(a) * np.linalg.norm(b))
    if norm == 0.0:
        return 1.0
    return float(1.0 - np.dot(a, b) / norm)


@dataclass(frozen=True)
class ArchiveEntry:
    case_id: str
    label: str
    bits: int
    real_code: np.ndarray

    def __post_init__(self) -> None:
        check_identifier(self.case_id, "case_id")
        check_identifier(self.label, "label")
        object.__setattr__(self, "bits", _check_word(self.bits))
        code = np.array(_check_code(self.real_code, "real_code"))
        if not np.all(np.isfinite(code)):
            raise DataError(f"real code of case {self.case_id} is not finite")
        code.setflags(write=False)
        object.__setattr__(self, "real_code", code)

    @classmethod
    def from_monogram(cls, case_id: str, label: str, monogram: Monogram) -> "ArchiveEntry":
        return cls(case_id, label, monogram.bits, monogram.real_code)

    @property
    def monogram(self) -> Monogram:
        return Monogram(self.bits, self.real_code)


@dataclass(frozen=True)
class RetrievalHit:
    case_id: str
    label: str
    distance: Union[int, float]


@dataclass(frozen=True)
class _Snapshot:
    case_ids: np.ndarray
    labels: np.ndarray
    bits: np.ndarray
    codes: np.ndarray
    id_rank: np.ndarray


Query = Union[Monogram, int, np.ndarray]


class Archive:
    """Case-id keyed store of monograms, safe for concurrent readers."""

    def __init__(self, threshold: ThresholdMode = ThresholdMode.ZERO) -> None:
        self.threshold = ThresholdMode(threshold)
        self._entries: Dict[str, ArchiveEntry] = {}
        self._lock = threading.RLock()
        self._snapshot: Optional[_Snapshot] = None

    @classmethod
    def build(cls, entries: Iterable[ArchiveEntry], threshold: ThresholdMode = ThresholdMode.ZERO) -> "Archive":
        archive = cls(threshold)
        for entry in entries:
            archive.insert(entry)
        return archive

    @classmethod
    def from_monograms(cls, case_ids: Sequence[str], labels: Sequence[str], monograms: Sequence[Monogram],
                       threshold: ThresholdMode = ThresholdMode.ZERO) -> "Archive":
        if not len(case_ids) == len(labels) == len(monograms):
            raise ShapeError("case ids, labels and monograms must be row-aligned")
        return cls.build(
            (ArchiveEntry.from_monogram(cid, label, m) for cid, label, m in zip(case_ids, labels, monograms)),
            threshold,
        )

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, case_id: str) -> bool:
        return case_id in self._entries

    def get(self, case_id: str) -> ArchiveEntry:
        try:
            return self._entries[case_id]
        except KeyError as e:
            raise DataError(f"case {case_id!r} is not in the archive") from e

    def entries(self) -> List[ArchiveEntry]:
        with self._lock:
            return list(self._entries.values())

    def insert(self, entry: ArchiveEntry) -> None:
        """Add one entry.

        Raises:
            IngestionError: The case id is already archived; the archive is unchanged.
            DataError: The bits disagree with the real code under this archive's threshold.
        """
        expected = binarize(entry.real_code, self.threshold.value_threshold)
        if expected != entry.bits:
            raise DataError(f"case {entry.case_id}: bits {entry.bits:016X} do not match its real code "
                            f"under threshold {self.threshold.value} ({expected:016X})")
        with self._lock:
            if entry.case_id in self._entries:
                raise IngestionError(f"case {entry.case_id!r} is already archived")
            self._entries[entry.case_id] = entry
            self._snapshot = None

    def snapshot(self) -> _Snapshot:
        with self._lock:
            if self._snapshot is None:
                entries = list(self._entries.values())
                case_ids = np.array([e.case_id for e in entries], dtype=str)
                id_rank = np.empty(len(entries), dtype=np.int64)
                id_rank[np.argsort(case_ids, kind="stable")] = np.arange(len(entries))
                codes = np.stack([e.real_code for e in entries]) if entries else np.zeros((0, CODE_BITS))
                self._snapshot = _Snapshot(
                    case_ids,
                    np.array([e.label for e in entries], dtype=object),
                    np.array([e.bits for e in entries], dtype=np.uint64),
                    codes,
                    id_rank,
                )
            return self._snapshot

    def _distances(self, snap: _Snapshot, query: Query, metric: Metric) -> np.ndarray:
        if metric.on_bits:
            if isinstance(query, Monogram):
                word = query.bits
            elif isinstance(query, (int, np.integer)):
                word = _check_word(query)
            else:
                word = binarize(_check_code(query, "query"), self.threshold.value_threshold)
            return hamming_scan(snap.bits, np.uint64(word))
        if isinstance(query, (int, np.integer)):
            raise DataError(f"{metric.value} search needs a real code, not a bare code word")
        code = _check_code(query.real_code if isinstance(query, Monogram) else query, "query")
        if metric is Metric.EUCLIDEAN:
            diff = snap.codes - code
            return np.sqrt(np.sum(diff * diff, axis=1))
        norms = np.linalg.norm(snap.codes, axis=1) * np.linalg.norm(code)
        cosines = np.divide(snap.codes @ code, norms, out=np.zeros(len(norms)), where=norms > 0)
        return np.where(norms > 0, 1.0 - cosines, 1.0)

    def search_topk(self, query: Query, k: int, metric: Metric = Metric.HAMMING,
                    exclude: Optional[str] = None) -> List[RetrievalHit]:
        """The k nearest entries, ordered by distance then case id.

        Args:
            query: A monogram, a bare 64-bit word (Hamming only) or a real code.
            k: Number of hits wanted, at least 1.
            metric: Hamming on bits, Euclidean or cosine on real codes.
            exclude: Case id to leave out, for leave-one-out queries.

        Returns:
            Up to k hits; fewer, with a warning, when the archive holds fewer
            candidates. Empty, with a warning, when nothing is left after exclusion.
        """
        if k < 1:
            raise DataError(f"k must be >= 1, got {k}")
        metric = Metric(metric)
        snap = self.snapshot()
        keep = np.ones(len(snap.case_ids), dtype=bool)
        if exclude is not None:
            keep &= snap.case_ids != exclude
        available = int(keep.sum())
        if available == 0:
            logger.warning("Archive is empty after excluding %r; no hits", exclude)
            return []
        if k > available:
            logger.warning("Requested k=%d but only %d candidate(s) available", k, available)
            k = available

        distances = self._distances(snap, query, metric)
        candidates = np.flatnonzero(keep)
        order = candidates[np.lexsort((snap.id_rank[candidates], distances[candidates]))][:k]
        if metric.on_bits:
            return [RetrievalHit(str(snap.case_ids[i]), snap.labels[i], int(distances[i])) for i in order]
        return [RetrievalHit(str(snap.case_ids[i]), snap.labels[i], float(distances[i])) for i in order]

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as handle:
            handle.write(f"{ARCHIVE_HEADER} version={ARCHIVE_VERSION} bits={CODE_BITS} threshold={self.threshold.value}\n")
            for entry in self.entries():
                handle.write(f"{entry.case_id},{entry.label},{entry.bits:016X},{format_values(entry.real_code)}\n")
        logger.info("Saved archive of %d entries to %s", len(self), path)
        return path

    @classmethod
    def load(cls, path: Path) -> "Archive":
        """Read an archive file written by save.

        Raises:
            ParseError: Missing or malformed header or row, with its line number.
            SchemaError: A row whose real code is not 64 values long.
        """
        path = Path(path)
        if not path.exists():
            raise IngestionError(f"archive file {path} does not exist")
        archive = None
        for line_no, line in iter_lines(path):
            if not line:
                continue
            if archive is None:
                archive = cls(_parse_archive_header(line, line_no))
                continue
            archive.insert(_parse_entry(line, line_no))
        if archive is None:
            raise ParseError(1, f"{path}: missing {ARCHIVE_HEADER} header")
        logger.info("Loaded archive of %d entries from %s", len(archive), path)
        return archive


def _parse_archive_header(line: str, line_no: int) -> ThresholdMode:
    if not line.startswith(ARCHIVE_HEADER):
        raise ParseError(line_no, f"expected {ARCHIVE_HEADER} header")
    fields = dict(token.partition("=")[::2] for token in line[len(ARCHIVE_HEADER):].split())
    if fields.get("version") != str(ARCHIVE_VERSION):
        raise ParseError(line_no, f"unsupported archive version {fields.get('version')!r}")
    if fields.get("bits") != str(CODE_BITS):
        raise ParseError(line_no, f"unsupported code width {fields.get('bits')!r}")
    try:
        return ThresholdMode(fields.get("threshold", ThresholdMode.ZERO.value))
    except ValueError as e:
        raise ParseError(line_no, f"unknown threshold {fields.get('threshold')!r}") from e


def _parse_entry(line: str, line_no: int) -> ArchiveEntry:
    fields = line.split(",")
    if len(fields) < 4:
        raise ParseError(line_no, "expected case_id,label,code followed by real values")
    case_id, label, code = fields[:3]
    if len(code) != 16:
        raise ParseError(line_no, f"code {code!r} is not 16 hex digits")
    try:
        bits = int(code, 16)
        real_code = np.array([float(v) for v in fields[3:]], dtype=np.float64)
    except ValueError as e:
        raise ParseError(line_no, f"malformed code or real value for case {case_id!r}") from e
    if real_code.shape[0] != CODE_BITS:
        raise SchemaError(f"case {case_id!r} has {real_code.shape[0]} real values, expected {CODE_BITS}", line_no)
    return ArchiveEntry(case_id, label, bits, real_code)
