"""Score file and speaker metadata parsing, subgroup assignment and validation.

Trials are kept column-wise (ids as lists, labels and scores as numpy arrays)
so million-trial score files stay cheap; :class:`TrialList` still behaves as a
read-only sequence of :class:`TrialRecord`.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import IO, Union

import numpy as np

from .errors import GroupingError, ParseError

SCORES_HEADER = ("enroll_id", "test_id", "label", "score")

SubgroupKey = tuple[str, ...]

Source = Union[bytes, str, IO[bytes], IO[str]]


def subgroup_name(key: SubgroupKey) -> str:
    """Canonical display form of a subgroup key, e.g. ``("india", "f") -> "india_f"``."""
    return "_".join(key)


@dataclass(frozen=True)
class TrialRecord:
    enroll_id: str
    test_id: str
    label: int
    score: float


class TrialList(Sequence):
    """Immutable column store of scored trials."""

    __slots__ = ("enroll_ids", "test_ids", "labels", "scores")

    def __init__(self, enroll_ids, test_ids, labels, scores):
        self.enroll_ids = tuple(enroll_ids)
        self.test_ids = tuple(test_ids)
        self.labels = np.asarray(labels, dtype=np.int8)
        self.scores = np.asarray(scores, dtype=np.float64)
        self.labels.setflags(write=False)
        self.scores.setflags(write=False)
        n = len(self.enroll_ids)
        if not (len(self.test_ids) == n == self.labels.shape[0] == self.scores.shape[0]):
            raise ValueError("trial columns have different lengths")

    @classmethod
    def from_records(cls, records: Iterable[TrialRecord]) -> "TrialList":
        records = list(records)
        return cls(
            [r.enroll_id for r in records],
            [r.test_id for r in records],
            [r.label for r in records],
            [r.score for r in records],
        )

    def __len__(self) -> int:
        return len(self.enroll_ids)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return self.take(np.arange(len(self))[index])
        return TrialRecord(
            self.enroll_ids[index],
            self.test_ids[index],
            int(self.labels[index]),
            float(self.scores[index]),
        )

    def take(self, indices) -> "TrialList":
        idx = np.asarray(indices, dtype=np.intp)
        enroll, test = self.enroll_ids, self.test_ids
        return TrialList(
            [enroll[i] for i in idx.tolist()],
            [test[i] for i in idx.tolist()],
            self.labels[idx],
            self.scores[idx],
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrialList):
            return NotImplemented
        return (
            self.enroll_ids == other.enroll_ids
            and self.test_ids == other.test_ids
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.scores, other.scores)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"TrialList(n={len(self)}, targets={self.n_target})"

    @property
    def n_target(self) -> int:
        return int(np.count_nonzero(self.labels == 1))

    @property
    def n_nontarget(self) -> int:
        return len(self) - self.n_target

    def target_scores(self) -> np.ndarray:
        return self.scores[self.labels == 1]

    def nontarget_scores(self) -> np.ndarray:
        return self.scores[self.labels == 0]


@dataclass(frozen=True)
class SpeakerAttributes:
    speaker_id: str
    attributes: dict[str, str]


class Metadata(dict):
    """``speaker_id -> SpeakerAttributes`` with the attribute names of the header."""

    def __init__(self, attribute_names: Sequence[str], entries=()):
        super().__init__(entries)
        self.attribute_names = tuple(attribute_names)

    def subgroup_of(self, speaker_id: str, group_by: Sequence[str]) -> SubgroupKey | None:
        entry = self.get(speaker_id)
        if entry is None:
            return None
        return tuple(entry.attributes[a] for a in group_by)


class Policy(str, Enum):
    ENROLL_SPEAKER = "enroll_speaker"
    REQUIRE_SAME = "require_same"
    EXCLUDE_MIXED = "exclude_mixed"


@dataclass(frozen=True)
class GroupedTrials:
    overall: TrialList
    by_subgroup: dict[SubgroupKey, TrialList]
    excluded_count: int
    group_by: tuple[str, ...] = ()


@dataclass(frozen=True)
class SubgroupCounts:
    n_speakers: int
    n_target: int
    n_nontarget: int


@dataclass(frozen=True)
class DatasetSummary:
    subgroups: dict[SubgroupKey, SubgroupCounts]
    overall: SubgroupCounts
    excluded_count: int
    warnings: list[str]


def _read_text(source: Source) -> tuple[str, str | None]:
    name = None
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, str):
        return source, None
    else:
        name = getattr(source, "name", None)
        data = source.read()
        if isinstance(data, str):
            return data, name
    try:
        return data.decode("utf-8-sig"), name
    except UnicodeDecodeError as exc:
        raise ParseError(f"input is not valid UTF-8: {exc.reason}", source=name) from None


def _parse_label(text: str, line: int, name) -> int:
    text = text.strip()
    if text == "1":
        return 1
    if text == "0":
        return 0
    raise ParseError("label must be 0 or 1", line=line, source=name)


def _parse_score(text: str, line: int, name) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"score is not a number: {text.strip()!r}", line=line, source=name) from None
    if not math.isfinite(value):
        raise ParseError("score must be finite", line=line, source=name)
    return value


def _speaker_from_path(path: str) -> str:
    return path.split("/", 1)[0]


def parse_scores(source: Source, format: str = "csv") -> TrialList:
    """Parse a scores file into trials, preserving file order.

    ``csv`` expects the header ``enroll_id,test_id,label,score``; ``voxceleb``
    expects whitespace-separated ``label enroll_path test_path score`` lines and
    takes each speaker id from the path segment before the first ``/``.
    Blank lines are skipped. Errors carry the 1-based line number.
    """
    text, name = _read_text(source)
    enroll: list[str] = []
    test: list[str] = []
    labels: list[int] = []
    scores: list[float] = []

    if format == "csv":
        reader = csv.reader(io.StringIO(text, newline=""))
        header = None
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            header = tuple(c.strip() for c in row)
            break
        if header is None:
            raise ParseError("empty scores file", source=name)
        if header != SCORES_HEADER:
            raise ParseError(
                f"expected header {','.join(SCORES_HEADER)}, got {','.join(header)}",
                line=reader.line_num,
                source=name,
            )
        for row in reader:
            if len(row) != 4:
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                raise ParseError(f"expected 4 fields, got {len(row)}", line=reader.line_num, source=name)
            e, t, lab, sc = row
            e = e.strip()
            t = t.strip()
            if not e or not t:
                raise ParseError("empty speaker id", line=reader.line_num, source=name)
            labels.append(_parse_label(lab, reader.line_num, name))
            scores.append(_parse_score(sc, reader.line_num, name))
            enroll.append(e)
            test.append(t)
    elif format == "voxceleb":
        for lineno, line in enumerate(text.splitlines(), start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ParseError(f"expected 4 fields, got {len(parts)}", line=lineno, source=name)
            lab, ep, tp, sc = parts
            labels.append(_parse_label(lab, lineno, name))
            scores.append(_parse_score(sc, lineno, name))
            enroll.append(_speaker_from_path(ep))
            test.append(_speaker_from_path(tp))
    else:
        raise ValueError(f"unknown scores format: {format!r}")

    if not labels:
        raise ParseError("scores file contains no trials", source=name)
    return TrialList(enroll, test, labels, scores)


def write_scores(trials: Iterable[TrialRecord] | TrialList) -> bytes:
    """Serialize trials as scores CSV; floats use their shortest round-trip repr."""
    if not isinstance(trials, TrialList):
        trials = TrialList.from_records(trials)
    out = io.StringIO(newline="")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SCORES_HEADER)
    writer.writerows(
        zip(trials.enroll_ids, trials.test_ids, trials.labels.tolist(), map(repr, trials.scores.tolist()))
    )
    return out.getvalue().encode("utf-8")


def parse_metadata(source: Source) -> Metadata:
    """Parse ``speaker_id,<attr>...`` CSV; attribute values are lowercased."""
    text, name = _read_text(source)
    reader = csv.reader(io.StringIO(text, newline=""))
    header = None
    for row in reader:
        if row and any(c.strip() for c in row):
            header = [c.strip() for c in row]
            break
    if header is None:
        raise ParseError("empty metadata file", source=name)
    if header[0] != "speaker_id":
        raise ParseError("metadata header must start with speaker_id", line=reader.line_num, source=name)
    attrs = header[1:]
    if not attrs:
        raise ParseError("no attribute columns", line=reader.line_num, source=name)
    if len(set(attrs)) != len(attrs) or any(not a for a in attrs):
        raise ParseError("attribute column names must be nonempty and unique", line=reader.line_num, source=name)

    meta = Metadata(attrs)
    for row in reader:
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=reader.line_num, source=name)
        speaker = row[0].strip()
        if not speaker:
            raise ParseError("empty speaker_id", line=reader.line_num, source=name)
        if speaker in meta:
            raise ParseError(f"duplicate speaker_id {speaker!r}", line=reader.line_num, source=name)
        values = {}
        for attr, cell in zip(attrs, row[1:]):
            cell = cell.strip()
            if not cell:
                raise ParseError(f"missing value for {attr!r}", line=reader.line_num, source=name)
            values[attr] = cell.lower()
        meta[speaker] = SpeakerAttributes(speaker, values)
    return meta


def write_metadata(meta: Metadata) -> bytes:
    out = io.StringIO(newline="")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["speaker_id", *meta.attribute_names])
    for speaker, entry in meta.items():
        writer.writerow([speaker, *(entry.attributes[a] for a in meta.attribute_names)])
    return out.getvalue().encode("utf-8")


def assign_subgroups(
    trials: TrialList,
    meta: Metadata,
    group_by: Sequence[str],
    policy: Policy | str = Policy.ENROLL_SPEAKER,
) -> GroupedTrials:
    """Partition trials into demographic subgroups.

    Trials with a speaker missing from ``meta`` are always excluded and counted.
    Mixed trials (speakers from different subgroups) follow ``policy``.
    """
    policy = Policy(policy)
    group_by = tuple(group_by)
    if not group_by:
        raise GroupingError("group_by must name at least one attribute")
    unknown = [a for a in group_by if a not in meta.attribute_names]
    if unknown:
        raise GroupingError(
            f"unknown grouping attribute(s): {', '.join(unknown)} "
            f"(available: {', '.join(meta.attribute_names)})"
        )

    lookup: dict[str, SubgroupKey] = {
        sid: tuple(entry.attributes[a] for a in group_by) for sid, entry in meta.items()
    }
    members: dict[SubgroupKey, list[int]] = {}
    kept: list[int] = []
    excluded = 0
    for i, (e, t) in enumerate(zip(trials.enroll_ids, trials.test_ids)):
        ke = lookup.get(e)
        kt = lookup.get(t)
        if ke is None or kt is None:
            excluded += 1
            continue
        if ke != kt:
            if policy is Policy.REQUIRE_SAME:
                raise GroupingError(
                    f"trial {i + 1} ({e}, {t}) pairs subgroups "
                    f"{subgroup_name(ke)} and {subgroup_name(kt)}"
                )
            if policy is Policy.EXCLUDE_MIXED:
                excluded += 1
                continue
        members.setdefault(ke, []).append(i)
        kept.append(i)

    by_subgroup = {key: trials.take(members[key]) for key in sorted(members)}
    overall = trials if len(kept) == len(trials) else trials.take(kept)
    return GroupedTrials(overall, by_subgroup, excluded, group_by)


def validate_dataset(grouped: GroupedTrials, meta: Metadata, min_speakers: int = 5) -> DatasetSummary:
    """Count speakers and trials per subgroup and collect warnings.

    A speaker counts towards a subgroup when it appears in one of that
    subgroup's trials and its own attributes map to that subgroup.
    """
    if not grouped.by_subgroup:
        raise GroupingError("no trials could be assigned to a subgroup")
    warnings: list[str] = []
    if grouped.excluded_count:
        warnings.append(f"{grouped.excluded_count} trial(s) excluded from subgroup assignment")

    own = {sid: tuple(entry.attributes[a] for a in grouped.group_by) for sid, entry in meta.items()}
    counts: dict[SubgroupKey, SubgroupCounts] = {}
    all_speakers: set[str] = set()
    for key, trials in grouped.by_subgroup.items():
        speakers = {s for s in (*trials.enroll_ids, *trials.test_ids) if own.get(s) == key}
        all_speakers.update(trials.enroll_ids)
        all_speakers.update(trials.test_ids)
        c = SubgroupCounts(len(speakers), trials.n_target, trials.n_nontarget)
        counts[key] = c
        name = subgroup_name(key)
        if c.n_speakers < min_speakers:
            warnings.append(f"{name}: only {c.n_speakers} unique speaker(s) (minimum {min_speakers})")
        if c.n_target == 0:
            warnings.append(f"{name}: no target trials")
        if c.n_nontarget == 0:
            warnings.append(f"{name}: no nontarget trials")
    overall = SubgroupCounts(len(all_speakers), grouped.overall.n_target, grouped.overall.n_nontarget)
    return DatasetSummary(counts, overall, grouped.excluded_count, warnings)
