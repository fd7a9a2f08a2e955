"""Case records and the embedding dump format.

An embedding dump is UTF-8 text. Header lines start with '#' and declare the
vector length per modality tag:

    #dims image=768 sequence=768

Every other non-blank line holds one vector of one case:

    case_id,label,tag,v1,v2,...,vl

The same layout is used for latent dumps (tags latent-u / latent-v) and for
PCA exports.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from patientcode.errors import IngestionError, ParseError, SchemaError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_DIM = 768
HEADER_PREFIX = "#dims"
_FORBIDDEN_ID_CHARS = (",", "\n", "\r")


class Modality(str, Enum):
    """Embedding modality tags used in dumps."""

    IMAGE = "image"
    SEQUENCE = "sequence"


@dataclass(frozen=True)
class Embedding:
    """One modality vector of one case."""

    values: np.ndarray
    modality: Modality

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ShapeError(f"{self.modality.value} embedding must be a vector, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise SchemaError(f"{self.modality.value} embedding contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CaseRecord:
    """One patient with both modality embeddings."""

    case_id: str
    label: str
    f: Embedding
    g: Embedding

    def __post_init__(self) -> None:
        check_identifier(self.case_id, "case_id")
        check_identifier(self.label, "label")
        if self.f.modality is not Modality.IMAGE:
            raise IngestionError(f"case {self.case_id}: f must be an image embedding")
        if self.g.modality is not Modality.SEQUENCE:
            raise IngestionError(f"case {self.case_id}: g must be a sequence embedding")


@dataclass(frozen=True)
class DatasetSchema:
    """Declared vector length per modality."""

    image_dim: int = DEFAULT_DIM
    sequence_dim: int = DEFAULT_DIM

    def dim_for(self, modality: Modality) -> int:
        return self.image_dim if modality is Modality.IMAGE else self.sequence_dim


@dataclass(frozen=True)
class Dataset:
    """An ordered, immutable collection of complete cases."""

    cases: Tuple[CaseRecord, ...]
    schema: DatasetSchema = field(default_factory=DatasetSchema)
    rejected: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "cases", tuple(self.cases))
        seen = set()
        for case in self.cases:
            if case.case_id in seen:
                raise IngestionError(f"duplicate case_id {case.case_id!r}")
            seen.add(case.case_id)
            for emb in (case.f, case.g):
                expected = self.schema.dim_for(emb.modality)
                if len(emb) != expected:
                    raise SchemaError(
                        f"case {case.case_id}: {emb.modality.value} embedding has {len(emb)} values, expected {expected}"
                    )

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self) -> Iterator[CaseRecord]:
        return iter(self.cases)

    @property
    def case_ids(self) -> List[str]:
        return [case.case_id for case in self.cases]

    @property
    def labels(self) -> List[str]:
        return [case.label for case in self.cases]

    @property
    def classes(self) -> List[str]:
        return sorted(set(self.labels))

    def matrix(self, modality: Modality) -> np.ndarray:
        """Stack one modality into an (n, l) array."""
        dim = self.schema.dim_for(modality)
        if not self.cases:
            return np.zeros((0, dim))
        attr = "f" if modality is Modality.IMAGE else "g"
        return np.stack([getattr(case, attr).values for case in self.cases])

    def subset(self, case_ids: Iterable[str]) -> "Dataset":
        """Return the cases named in case_ids, kept in dataset order."""
        wanted = set(case_ids)
        missing = wanted.difference(self.case_ids)
        if missing:
            raise IngestionError(f"unknown case ids: {sorted(missing)[:5]}")
        return Dataset(tuple(c for c in self.cases if c.case_id in wanted), self.schema)

    def with_matrices(self, image: np.ndarray, sequence: np.ndarray, schema: Optional[DatasetSchema] = None) -> "Dataset":
        """Rebuild the dataset with replaced embedding matrices, row-aligned with the cases."""
        if image.shape[0] != len(self) or sequence.shape[0] != len(self):
            raise ShapeError("replacement matrices must have one row per case")
        schema = schema or DatasetSchema(image.shape[1], sequence.shape[1])
        cases = tuple(
            CaseRecord(c.case_id, c.label, Embedding(f, Modality.IMAGE), Embedding(g, Modality.SEQUENCE))
            for c, f, g in zip(self.cases, image, sequence)
        )
        return Dataset(cases, schema, self.rejected)


def check_identifier(value: str, name: str) -> None:
    """Reject identifiers that cannot round-trip through the line formats."""
    if not isinstance(value, str) or not value.strip():
        raise IngestionError(f"{name} must be a non-empty string")
    if any(ch in value for ch in _FORBIDDEN_ID_CHARS):
        raise IngestionError(f"{name} {value!r} contains a comma or newline")
    if value != value.strip():
        raise IngestionError(f"{name} {value!r} has leading or trailing whitespace")
    if value.startswith("#"):
        raise IngestionError(f"{name} {value!r} would be read back as a comment")


def iter_lines(path: Path) -> Iterator[Tuple[int, str]]:
    """Yield (line number, stripped text) for every line of a UTF-8 file.

    Raises:
        ParseError: A line is not valid UTF-8.
    """
    with Path(path).open("rb") as handle:
        for line_no, raw in enumerate(handle, start=1):
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise ParseError(line_no, f"not valid UTF-8 at byte {e.start}") from e
            yield line_no, text.strip()


@dataclass
class DumpContents:
    """Parsed embedding dump: declared dims and per-case vectors by tag."""

    dims: Dict[str, int]
    labels: Dict[str, str] = field(default_factory=dict)
    vectors: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)


def _parse_header(line: str, line_no: int) -> Dict[str, int]:
    dims = {}
    for token in line[len(HEADER_PREFIX):].split():
        tag, sep, value = token.partition("=")
        if not sep:
            raise ParseError(line_no, f"malformed header token {token!r}")
        try:
            dims[tag] = int(value)
        except ValueError as e:
            raise ParseError(line_no, f"header dimension for {tag!r} is not an integer") from e
        if dims[tag] <= 0:
            raise ParseError(line_no, f"header dimension for {tag!r} must be positive")
    return dims


def read_dump(path: Path, dims: Optional[Mapping[str, int]] = None) -> DumpContents:
    """Parse an embedding dump.

    Args:
        path: File to read.
        dims: Declared dimension per tag. When given, it overrides the header
            and rows are checked against it; a disagreeing header is a schema error.

    Returns:
        The parsed contents, cases in first-appearance order.

    Raises:
        ParseError: Malformed line, with its line number.
        SchemaError: Vector length differs from the declared dimension.
        IngestionError: Same (case, tag) twice or conflicting labels.
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"embedding dump {path} does not exist")
    contents = DumpContents(dims=dict(dims or {}))
    header_seen = False
    for line_no, line in iter_lines(path):
        if not line:
            continue
        if line.startswith(HEADER_PREFIX):
            declared = _parse_header(line, line_no)
            if dims is not None:
                for tag, dim in declared.items():
                    if tag in dims and dims[tag] != dim:
                        raise SchemaError(f"header declares {tag}={dim}, expected {dims[tag]}", line_no)
            else:
                contents.dims.update(declared)
            header_seen = True
            continue
        if line.startswith("#"):
            continue
        _parse_row(line, line_no, contents)
    if not header_seen and contents.vectors and dims is None:
        raise ParseError(1, "missing #dims header")
    return contents


def _parse_row(line: str, line_no: int, contents: DumpContents) -> None:
    fields = line.split(",")
    if len(fields) < 4:
        raise ParseError(line_no, "expected case_id,label,tag followed by values")
    case_id, label, tag = (f.strip() for f in fields[:3])
    if not case_id or not label:
        raise ParseError(line_no, "empty case_id or label")
    if tag not in contents.dims:
        raise ParseError(line_no, f"unknown modality tag {tag!r}")
    try:
        values = np.array([float(v) for v in fields[3:]], dtype=np.float64)
    except ValueError as e:
        raise ParseError(line_no, f"non-numeric value in row for case {case_id!r}") from e
    if not np.all(np.isfinite(values)):
        raise ParseError(line_no, f"non-finite value in row for case {case_id!r}")
    expected = contents.dims[tag]
    if values.shape[0] != expected:
        raise SchemaError(f"case {case_id!r} {tag} row has {values.shape[0]} values, expected {expected}", line_no)
    previous = contents.labels.setdefault(case_id, label)
    if previous != label:
        raise IngestionError(f"line {line_no}: case {case_id!r} has conflicting labels {previous!r} and {label!r}")
    per_case = contents.vectors.setdefault(case_id, {})
    if tag in per_case:
        raise IngestionError(f"line {line_no}: duplicate {tag} row for case_id {case_id!r}")
    per_case[tag] = values


def load_dataset(path: Path, schema: Optional[DatasetSchema] = None) -> Dataset:
    """Load complete cases from an embedding dump.

    Cases missing either modality are rejected and counted.

    Args:
        path: Embedding dump to read.
        schema: Declared dimensions; taken from the file header when omitted.

    Returns:
        Dataset of complete cases with the rejection count in ``rejected``.
    """
    dims = None
    if schema is not None:
        dims = {Modality.IMAGE.value: schema.image_dim, Modality.SEQUENCE.value: schema.sequence_dim}
    contents = read_dump(path, dims)
    if schema is None:
        schema = DatasetSchema(
            contents.dims.get(Modality.IMAGE.value, DEFAULT_DIM),
            contents.dims.get(Modality.SEQUENCE.value, DEFAULT_DIM),
        )
    cases = []
    rejected = 0
    for case_id, per_case in contents.vectors.items():
        if Modality.IMAGE.value not in per_case or Modality.SEQUENCE.value not in per_case:
            rejected += 1
            continue
        cases.append(CaseRecord(
            case_id,
            contents.labels[case_id],
            Embedding(per_case[Modality.IMAGE.value], Modality.IMAGE),
            Embedding(per_case[Modality.SEQUENCE.value], Modality.SEQUENCE),
        ))
    if rejected:
        logger.warning("%s: rejected %d case(s) missing a modality", path, rejected)
    logger.info("Loaded %d complete case(s) from %s", len(cases), path)
    return Dataset(tuple(cases), schema, rejected)


def format_values(values: Sequence[float]) -> str:
    """Render reals so that parsing them back yields the same doubles."""
    return ",".join(repr(float(v)) for v in values)


def write_dump(path: Path, dims: Mapping[str, int], rows: Iterable[Tuple[str, str, str, Sequence[float]]]) -> Path:
    """Write (case_id, label, tag, values) rows in the embedding dump format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = " ".join(f"{tag}={dim}" for tag, dim in dims.items())
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"{HEADER_PREFIX} {header}\n")
        for case_id, label, tag, values in rows:
            handle.write(f"{case_id},{label},{tag},{format_values(values)}\n")
    return path


def write_dataset(path: Path, dataset: Dataset) -> Path:
    """Write a dataset as an embedding dump, image row then sequence row per case."""
    dims = {Modality.IMAGE.value: dataset.schema.image_dim, Modality.SEQUENCE.value: dataset.schema.sequence_dim}

    def rows():
        for case in dataset:
            yield case.case_id, case.label, Modality.IMAGE.value, case.f.values
            yield case.case_id, case.label, Modality.SEQUENCE.value, case.g.values

    return write_dump(path, dims, rows())

