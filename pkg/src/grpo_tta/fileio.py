"""Binary embedding-file reader/writer (magic "GTEB1", little-endian).

Layout: 30-byte header, then C text embeddings, then per sample one original
embedding, n view embeddings, and a u32 label when has_labels is set. All
embeddings are float32 on disk and float64 in memory, so a write/read
round-trip is lossless at float32 precision. Error messages name byte
offsets; nothing is ever guessed from a malformed file.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidArgument
from .policy import EmbeddingTable, SampleViews

MAGIC = b"GTEB1"
_HEADER = struct.Struct("<5sIIIIdB")
HEADER_SIZE = _HEADER.size  # 30 bytes


@dataclass(frozen=True)
class EmbeddingFileHeader:
    dim: int
    num_classes: int
    num_samples: int
    views_per_sample: int
    temperature: float
    has_labels: bool

    def payload_size(self) -> int:
        per_sample = 4 * self.dim * (1 + self.views_per_sample) + (4 if self.has_labels else 0)
        return 4 * self.num_classes * self.dim + self.num_samples * per_sample


def _f32_rows(array: np.ndarray) -> bytes:
    return np.ascontiguousarray(array, dtype="<f4").tobytes()


def write_embedding_file(
    path: str | Path, table: EmbeddingTable, samples: list[SampleViews]
) -> EmbeddingFileHeader:
    """Serialize a table plus samples; all samples must share one view count.

    Labels are all-or-none: the header has a single has_labels flag. Class
    names are not stored; the format carries geometry only.
    """
    if not samples:
        raise InvalidArgument("refusing to write a file with zero samples")
    views_per_sample = samples[0].num_views
    labelled = samples[0].label is not None
    for s in samples:
        if s.dim != table.dim:
            raise InvalidArgument(
                f"sample {s.sample_id}: dim {s.dim} does not match table dim {table.dim}"
            )
        if s.num_views != views_per_sample:
            raise InvalidArgument(
                f"sample {s.sample_id}: {s.num_views} views, expected {views_per_sample}"
            )
        if (s.label is not None) != labelled:
            raise InvalidArgument("labels must be present on all samples or none")
        if s.label is not None and s.label < 0:
            raise InvalidArgument(f"sample {s.sample_id}: negative label {s.label}")
    header = EmbeddingFileHeader(
        dim=table.dim,
        num_classes=table.num_classes,
        num_samples=len(samples),
        views_per_sample=views_per_sample,
        temperature=table.temperature,
        has_labels=labelled,
    )
    parts = [
        _HEADER.pack(
            MAGIC,
            header.dim,
            header.num_classes,
            header.num_samples,
            header.views_per_sample,
            header.temperature,
            1 if header.has_labels else 0,
        ),
        _f32_rows(table.text_embeddings),
    ]
    for s in samples:
        parts.append(_f32_rows(s.original))
        if views_per_sample:
            parts.append(_f32_rows(s.views))
        if labelled:
            parts.append(struct.pack("<I", s.label))
    Path(path).write_bytes(b"".join(parts))
    return header


def read_header(raw: bytes) -> EmbeddingFileHeader:
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"truncated header: need {HEADER_SIZE} bytes, file has {len(raw)}")
    magic, dim, num_classes, num_samples, views, temperature, has_labels = _HEADER.unpack_from(
        raw, 0
    )
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at byte offset 0, expected {MAGIC!r}")
    if dim < 1:
        raise FormatError(f"dim must be >= 1, got {dim} (header byte offset 5)")
    if num_classes < 2:
        raise FormatError(f"num_classes must be >= 2, got {num_classes} (header byte offset 9)")
    if num_samples < 1:
        raise FormatError(f"num_samples must be >= 1, got {num_samples} (header byte offset 13)")
    if not (temperature > 0.0 and np.isfinite(temperature)):
        raise FormatError(
            f"temperature must be finite and > 0, got {temperature!r} (header byte offset 21)"
        )
    if has_labels not in (0, 1):
        raise FormatError(f"has_labels must be 0 or 1, got {has_labels} (header byte offset 29)")
    return EmbeddingFileHeader(
        dim=dim,
        num_classes=num_classes,
        num_samples=num_samples,
        views_per_sample=views,
        temperature=temperature,
        has_labels=bool(has_labels),
    )


def read_embedding_file(
    path: str | Path,
) -> tuple[EmbeddingTable, list[SampleViews], EmbeddingFileHeader]:
    """Parse a file back into a table and samples, validating sizes exactly.

    Sample ids are positional (0..N-1) and class names are synthesized as
    "class_<i>" since the format does not carry them.
    """
    raw = Path(path).read_bytes()
    header = read_header(raw)
    expected = HEADER_SIZE + header.payload_size()
    if len(raw) != expected:
        kind = "truncated" if len(raw) < expected else "oversized"
        raise FormatError(
            f"{kind} payload: expected {expected} bytes total, file has {len(raw)} "
            f"(header at offset 0 declares dim={header.dim}, classes={header.num_classes}, "
            f"samples={header.num_samples}, views={header.views_per_sample})"
        )
    dim, n_views = header.dim, header.views_per_sample
    offset = HEADER_SIZE

    def take_floats(count: int) -> np.ndarray:
        nonlocal offset
        block = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        offset += 4 * count
        return block.astype(np.float64)

    text = take_floats(header.num_classes * dim).reshape(header.num_classes, dim)
    table = EmbeddingTable(
        text,
        tuple(f"class_{i}" for i in range(header.num_classes)),
        header.temperature,
    )
    samples = []
    for i in range(header.num_samples):
        original = take_floats(dim)
        views = take_floats(n_views * dim).reshape(n_views, dim)
        label = None
        if header.has_labels:
            (value,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            if value >= header.num_classes:
                raise FormatError(
                    f"sample {i}: label {value} out of range for {header.num_classes} classes "
                    f"(byte offset {offset - 4})"
                )
            label = int(value)
        samples.append(SampleViews(sample_id=i, original=original, views=views, label=label))
    return table, samples, header
