"""Student training set: records, text file format, synthetic generation.

A :class:`StudentSet` bundles, per sample, a teacher-extracted feature vector
and ``N`` degraded input vectors standing in for low-resolution observations
of the same identity. Degradation is modeled abstractly as a fixed lossy
linear projection of the teacher feature plus per-version noise; no image
handling happens anywhere in this package.

The line-oriented ``SKD1`` text format round-trips sets exactly (floats are
written with shortest round-trip precision). The synthetic generator plants
labeled outliers whose teacher feature sits near a wrong class centroid,
emulating samples the teacher embedded incorrectly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "FaceRecord",
    "StudentSet",
    "SynthConfig",
    "FormatError",
    "load_student_set",
    "save_student_set",
    "synthesize",
    "subset_records",
    "subset_classes",
]

# Per-version degradation noise, as a fraction of the projected signal's RMS
# coordinate magnitude. Deliberately independent of SynthConfig.noise_scale:
# input difficulty must not collapse when teacher clusters are tight.
DEGRADATION_NOISE_FACTOR = 1.0

# Synthetic class centroids are sparse nonnegative directions with supports of
# this size; near-disjoint supports keep cross-class cosine similarity near 0.
def _support_size(dim: int) -> int:
    return max(2, dim // 32)


class FormatError(ValueError):
    """Malformed data file. ``line`` is the 1-based offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass
class FaceRecord:
    """One training identity sample.

    ``teacher_feature`` is the D-dimensional embedding produced by the (out of
    scope) teacher; ``degraded_inputs`` holds the N student-input vectors of
    dimension d_in. ``outlier_flag`` is ground truth for synthetic data only.
    """

    id: int
    label: int
    teacher_feature: np.ndarray
    degraded_inputs: list[np.ndarray]
    outlier_flag: bool | None = None


@dataclass
class StudentSet:
    """The student training set plus its shape parameters."""

    records: list[FaceRecord]
    C: int
    D: int
    d_in: int
    N: int

    def __len__(self) -> int:
        return len(self.records)

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    def feature_matrix(self) -> np.ndarray:
        """(n, D) teacher features in record-id order."""
        return np.stack([r.teacher_feature for r in self.records]).astype(np.float64)

    def class_members(self, label: int) -> list[int]:
        return [r.id for r in self.records if r.label == label]

    def class_sizes(self) -> np.ndarray:
        sizes = np.zeros(self.C, dtype=np.int64)
        for r in self.records:
            sizes[r.label - 1] += 1
        return sizes

    def validate(self) -> None:
        """Raise ValueError on any invariant violation."""
        if not self.records:
            raise ValueError("student set has no records (C classes required)")
        if self.C < 1 or self.D < 1 or self.d_in < 1 or self.N < 1:
            raise ValueError("C, D, d_in, N must all be >= 1")
        for pos, r in enumerate(self.records):
            if r.id != pos:
                raise ValueError(f"record ids must be dense 0..n-1; got id {r.id} at position {pos}")
            if not (1 <= r.label <= self.C):
                raise ValueError(f"record {r.id}: label {r.label} outside 1..{self.C}")
            f = np.asarray(r.teacher_feature)
            if f.shape != (self.D,):
                raise ValueError(f"record {r.id}: teacher feature has shape {f.shape}, expected ({self.D},)")
            if not np.all(np.isfinite(f)):
                raise ValueError(f"record {r.id}: non-finite teacher feature")
            if not np.any(f != 0.0):
                raise ValueError(f"record {r.id}: all-zero teacher feature")
            if len(r.degraded_inputs) != self.N:
                raise ValueError(
                    f"record {r.id}: {len(r.degraded_inputs)} degraded inputs, expected {self.N}"
                )
            for j, x in enumerate(r.degraded_inputs):
                x = np.asarray(x)
                if x.shape != (self.d_in,):
                    raise ValueError(f"record {r.id}: degraded input {j} has shape {x.shape}")
                if not np.all(np.isfinite(x)):
                    raise ValueError(f"record {r.id}: non-finite degraded input {j}")
        sizes = self.class_sizes()
        if np.any(sizes == 0):
            missing = int(np.argmin(sizes)) + 1
            raise ValueError(f"class {missing} has no records (every class in 1..C must be nonempty)")


@dataclass
class SynthConfig:
    """Parameters of the synthetic generator."""

    C: int
    per_class_count: int
    D: int = 16
    d_in: int = 8
    N: int = 16
    noise_scale: float = 0.05
    outlier_fraction: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.C < 1 or self.per_class_count < 1:
            raise ValueError("C and per_class_count must be >= 1")
        if not (self.D >= self.d_in >= 1):
            raise ValueError("require D >= d_in >= 1")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")
        if not (0.0 <= self.outlier_fraction < 1.0):
            raise ValueError("outlier_fraction must be in [0, 1)")


def _fmt(v: float) -> str:
    return repr(float(v))


def save_student_set(sset: StudentSet, path: str | Path) -> None:
    """Write ``sset`` in the SKD1 text format. Round-trips exactly."""
    sset.validate()
    lines = [f"SKD1 {len(sset)} {sset.C} {sset.D} {sset.d_in} {sset.N}"]
    for r in sset.records:
        flag = "-" if r.outlier_flag is None else ("1" if r.outlier_flag else "0")
        head = [str(r.id), str(r.label), flag]
        lines.append(",".join(head + [_fmt(v) for v in r.teacher_feature]))
        for j, x in enumerate(r.degraded_inputs, start=1):
            lines.append(",".join([str(j)] + [_fmt(v) for v in x]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _parse_floats(fields: list[str], lineno: int) -> np.ndarray:
    try:
        arr = np.array([float(v) for v in fields], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"unparseable float field ({exc})", line=lineno) from None
    if not np.all(np.isfinite(arr)):
        raise FormatError("non-finite value", line=lineno)
    return arr


def load_student_set(path: str | Path) -> StudentSet:
    """Parse an SKD1 file. Raises FormatError naming the offending line."""
    text = Path(path).read_text(encoding="ascii")
    raw = text.split("\n")
    # Trailing blank lines are tolerated; blank lines elsewhere are not.
    while raw and raw[-1] == "":
        raw.pop()
    if not raw:
        raise FormatError("empty file", line=1)

    header = raw[0].split()
    if len(header) != 6 or header[0] != "SKD1":
        raise FormatError("malformed header (expected 'SKD1 n C D d_in N')", line=1)
    try:
        n, C, D, d_in, N = (int(v) for v in header[1:])
    except ValueError:
        raise FormatError("malformed header (non-integer field)", line=1) from None
    if min(n, C, D, d_in, N) < 1:
        raise FormatError("malformed header (all counts must be >= 1)", line=1)

    expected_lines = 1 + n * (1 + N)
    if len(raw) != expected_lines:
        raise FormatError(
            f"expected {expected_lines} lines for {n} records, found {len(raw)}",
            line=min(len(raw), expected_lines),
        )

    records: list[FaceRecord] = []
    lineno = 1
    for _ in range(n):
        lineno += 1
        fields = raw[lineno - 1].split(",")
        if len(fields) != 3 + D:
            raise FormatError(
                f"dimension mismatch: {len(fields) - 3} feature values, expected {D}",
                line=lineno,
            )
        try:
            rid = int(fields[0])
            label = int(fields[1])
        except ValueError:
            raise FormatError("non-integer id or label", line=lineno) from None
        if fields[2] == "-":
            flag: bool | None = None
        elif fields[2] in ("0", "1"):
            flag = fields[2] == "1"
        else:
            raise FormatError(f"bad outlier flag {fields[2]!r} (expected 0, 1 or -)", line=lineno)
        feature = _parse_floats(fields[3:], lineno)

        degraded: list[np.ndarray] = []
        for j in range(1, N + 1):
            lineno += 1
            fields = raw[lineno - 1].split(",")
            if len(fields) != 1 + d_in:
                raise FormatError(
                    f"dimension mismatch: {len(fields) - 1} input values, expected {d_in}",
                    line=lineno,
                )
            if fields[0] != str(j):
                raise FormatError(f"degraded version index {fields[0]!r}, expected {j}", line=lineno)
            degraded.append(_parse_floats(fields[1:], lineno))
        records.append(FaceRecord(rid, label, feature, degraded, flag))

    sset = StudentSet(records=records, C=C, D=D, d_in=d_in, N=N)
    try:
        sset.validate()
    except ValueError as exc:
        # Set-level violations (missing class, non-dense ids) are anchored to
        # the header line that declared the shape.
        raise FormatError(str(exc), line=1) from None
    return sset


def synthesize(config: SynthConfig) -> StudentSet:
    """Generate a deterministic synthetic StudentSet with planted outliers.

    Per class, inlier teacher features are the class centroid direction plus
    Gaussian noise, clamped elementwise to nonnegative; their degraded inputs
    are a fixed random linear projection of the teacher feature plus
    per-version noise. An outlier_fraction share of each class models a
    teacher failure: the record's degraded inputs still project from a latent
    own-class appearance, but its teacher feature is drawn near a different
    class's centroid and the record is flagged. Regressing such a feature is
    therefore genuinely misleading supervision.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    C, K, D, d_in, N = config.C, config.per_class_count, config.D, config.d_in, config.N

    n_out = int(round(config.outlier_fraction * K))
    if n_out >= K:
        raise ValueError(
            f"outlier_fraction {config.outlier_fraction} leaves no inliers per class"
        )
    if n_out > 0 and C < 2:
        raise ValueError("outliers need at least two classes")

    projection = rng.normal(size=(d_in, D)) / np.sqrt(D)

    k = _support_size(D)
    centroids = np.zeros((C, D))
    for c in range(C):
        support = rng.choice(D, size=k, replace=False)
        vals = np.abs(rng.normal(size=k)) + 1e-3
        centroids[c, support] = vals
        centroids[c] /= np.linalg.norm(centroids[c])

    def draw_feature(center: np.ndarray, scale: float) -> np.ndarray:
        for _ in range(100):
            f = np.maximum(center + scale * rng.normal(size=D), 0.0)
            if np.any(f > 0.0):
                return f
        raise RuntimeError("could not draw a nonzero teacher feature; noise_scale too large")

    records: list[FaceRecord] = []
    rid = 0
    for c in range(C):
        others = [o for o in range(C) if o != c]
        if n_out > 0:
            replace = n_out > len(others)
            wrong = rng.choice(np.array(others), size=n_out, replace=replace)
        else:
            wrong = np.array([], dtype=np.int64)
        for i in range(K):
            if i < K - n_out:
                feature = draw_feature(centroids[c], config.noise_scale)
                appearance = feature
                flag = False
            else:
                feature = draw_feature(centroids[wrong[i - (K - n_out)]], config.noise_scale)
                appearance = draw_feature(centroids[c], config.noise_scale)
                flag = True
            proj = projection @ appearance
            sigma = DEGRADATION_NOISE_FACTOR * np.linalg.norm(proj) / np.sqrt(d_in)
            degraded = [proj + sigma * rng.normal(size=d_in) for _ in range(N)]
            records.append(FaceRecord(rid, c + 1, feature, degraded, flag))
            rid += 1

    sset = StudentSet(records=records, C=C, D=D, d_in=d_in, N=N)
    sset.validate()
    return sset


def subset_records(sset: StudentSet, record_ids: list[int]) -> StudentSet:
    """New StudentSet containing only ``record_ids``, reindexed densely.

    Labels are kept; every class of the parent must remain represented.
    """
    chosen = sorted(set(record_ids))
    records = []
    for new_id, old_id in enumerate(chosen):
        r = sset.records[old_id]
        records.append(
            FaceRecord(new_id, r.label, r.teacher_feature.copy(),
                       [x.copy() for x in r.degraded_inputs], r.outlier_flag)
        )
    out = StudentSet(records=records, C=sset.C, D=sset.D, d_in=sset.d_in, N=sset.N)
    out.validate()
    return out


def subset_classes(sset: StudentSet, class_labels: list[int]) -> StudentSet:
    """New StudentSet restricted to ``class_labels``, relabeled densely 1..k."""
    relabel = {old: new + 1 for new, old in enumerate(class_labels)}
    records = []
    new_id = 0
    for r in sset.records:
        if r.label in relabel:
            records.append(
                FaceRecord(new_id, relabel[r.label], r.teacher_feature.copy(),
                           [x.copy() for x in r.degraded_inputs], r.outlier_flag)
            )
            new_id += 1
    out = StudentSet(records=records, C=len(class_labels), D=sset.D, d_in=sset.d_in, N=sset.N)
    out.validate()
    return out
