"""
KAR Learner - Synthetic data generators and CSV ingestion

Generators build the regression, XOR and three-spiral sets; load_csv encodes the
UCI benchmark files according to the plain-text plans under plans/.
"""
import logging
import shlex
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.errors import ParseError, ShapeMismatch, UnknownCategory, UnknownLabel
from src.persistence import atomic_write_frame

logger = logging.getLogger(__name__)

PLANS_DIR = Path(__file__).resolve().parent.parent / "plans"

NURSERY_CLASSES = ("not_recom", "recommend", "very_recom", "priority", "spec_prior")
NURSERY_MERGE = {"recommend": "very_recom"}

ORDINAL = "ordinal"
NUMERIC = "numeric"

PathLike = Union[str, Path]


@dataclass
class Dataset:
    """
    X: m x d features; Y: m x q targets
    labels: class index per row when the task is classification
    meta: provenance (source, seed, flags such as clean_rows)
    """
    X: np.ndarray
    Y: np.ndarray
    labels: Optional[np.ndarray] = None
    class_names: Optional[Tuple[str, ...]] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(len(self.X), -1)
        self.Y = np.asarray(self.Y, dtype=np.float64).reshape(len(self.Y), -1)
        if self.X.shape[0] < 1 or self.X.shape[0] != self.Y.shape[0]:
            raise ShapeMismatch(f"X has {self.X.shape[0]} rows, Y has {self.Y.shape[0]}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            n_classes = len(self.class_names) if self.class_names else int(self.labels.max()) + 1
            if not _targets_encode_labels(self.Y, self.labels, n_classes):
                raise ValueError("Y is not the indicator encoding of labels")

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Y.shape[1]

    @property
    def is_classification(self) -> bool:
        return self.labels is not None

    def class_counts(self) -> Dict[str, int]:
        counts = np.bincount(self.labels, minlength=len(self.class_names))
        return {name: int(c) for name, c in zip(self.class_names, counts)}

    def subset(self, indices) -> "Dataset":
        """Rows at indices; meta['row_indices'] maps back to the full set"""
        indices = np.asarray(indices, dtype=np.int64)
        parent = self.meta.get("row_indices")
        meta = dict(self.meta)
        meta["row_indices"] = np.asarray(parent)[indices] if parent is not None else indices
        return Dataset(
            X=self.X[indices],
            Y=self.Y[indices],
            labels=None if self.labels is None else self.labels[indices],
            class_names=self.class_names,
            meta=meta,
        )

    def to_frame(self) -> pd.DataFrame:
        """Features x1..xd, then label (classification) or y1..yq (regression)"""
        frame = pd.DataFrame(self.X, columns=[f"x{i + 1}" for i in range(self.d)])
        if self.is_classification:
            frame["label"] = [self.class_names[i] for i in self.labels]
        else:
            for j in range(self.q):
                frame[f"y{j + 1}"] = self.Y[:, j]
        return frame


def indicator(labels, n_classes: int) -> np.ndarray:
    """0/1 matrix with a single 1 per row in the label's column"""
    labels = np.asarray(labels, dtype=np.int64)
    Y = np.zeros((labels.size, n_classes))
    Y[np.arange(labels.size), labels] = 1.0
    return Y


def _targets_encode_labels(Y: np.ndarray, labels: np.ndarray, n_classes: int) -> bool:
    if Y.shape[1] == 1 and n_classes == 2:
        # binary sets may use one 0/1 output column
        return np.array_equal(Y[:, 0], labels.astype(np.float64))
    return Y.shape[1] == n_classes and np.array_equal(Y, indicator(labels, n_classes))


# ---------------------------------------------------------------------------
# Synthetic generators
# ---------------------------------------------------------------------------

SINC_X = np.arange(1, 9, dtype=np.float64)


@dataclass(frozen=True)
class SincConfig:
    """Noisy copies of the 8 clean points use y (1 + u), u ~ U(-noise_fraction, noise_fraction)"""
    noise_fraction: float = 0.2
    noisy_replicas: int = 10
    seed: int = 0
    clean_only: bool = False

    def __post_init__(self):
        if not 0 <= self.noise_fraction < 1:
            raise ValueError(f"noise_fraction must lie in [0, 1), got {self.noise_fraction}")
        if self.noisy_replicas < 0:
            raise ValueError(f"noisy_replicas must be >= 0, got {self.noisy_replicas}")


def sinc(x):
    """y = sin(2x) / (2x)"""
    x = np.asarray(x, dtype=np.float64)
    return np.sin(2 * x) / (2 * x)


def gen_sinc(cfg: Optional[SincConfig] = None) -> Dataset:
    """
    Regression set on x = 1..8.

    The 8 clean rows come first (meta['clean_rows']), followed by
    noisy_replicas noisy copies unless clean_only is set.
    """
    cfg = cfg or SincConfig()
    clean = sinc(SINC_X)
    xs = [SINC_X]
    ys = [clean]
    if not cfg.clean_only and cfg.noisy_replicas:
        rng = np.random.default_rng(cfg.seed)
        u = rng.uniform(-cfg.noise_fraction, cfg.noise_fraction, size=(cfg.noisy_replicas, SINC_X.size))
        xs.append(np.tile(SINC_X, cfg.noisy_replicas))
        ys.append((clean * (1.0 + u)).ravel())
    return Dataset(
        X=np.concatenate(xs).reshape(-1, 1),
        Y=np.concatenate(ys).reshape(-1, 1),
        meta={
            "source": "sinc",
            "seed": cfg.seed,
            "noise_fraction": cfg.noise_fraction,
            "noisy_replicas": 0 if cfg.clean_only else cfg.noisy_replicas,
            "clean_rows": list(range(SINC_X.size)),
        },
    )


XOR_INPUTS = ((0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.001, 1.001))
XOR_LABELS = (0, 0, 1, 1)


def gen_xor() -> Dataset:
    """The four XOR points, the last one perturbed off the lattice"""
    labels = np.array(XOR_LABELS)
    return Dataset(
        X=np.array(XOR_INPUTS),
        Y=labels.reshape(-1, 1).astype(np.float64),
        labels=labels,
        class_names=("0", "1"),
        meta={"source": "xor"},
    )


@dataclass(frozen=True)
class SpiralConfig:
    points_per_arm: int = 500
    arms: int = 3
    noise_std: float = 0.02
    turns: float = 1.5
    r_max: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.points_per_arm < 1 or self.arms < 2:
            raise ValueError("need points_per_arm >= 1 and arms >= 2")
        if self.noise_std < 0 or self.turns <= 0 or self.r_max <= 0:
            raise ValueError("noise_std must be >= 0, turns and r_max > 0")


def gen_spiral(cfg: Optional[SpiralConfig] = None) -> Dataset:
    """
    Interleaved Archimedean spiral arms, one class per arm.

    Arm a: r = r_max t, theta = 2 pi turns t + 2 pi a / arms, t ~ U[0, 1],
    plus isotropic Gaussian noise.
    """
    cfg = cfg or SpiralConfig()
    rng = np.random.default_rng(cfg.seed)
    points = []
    labels = []
    for arm in range(cfg.arms):
        t = rng.uniform(0.0, 1.0, size=cfg.points_per_arm)
        r = cfg.r_max * t
        theta = 2 * np.pi * cfg.turns * t + arm * (2 * np.pi / cfg.arms)
        xy = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        if cfg.noise_std > 0:
            xy = xy + rng.normal(0.0, cfg.noise_std, size=xy.shape)
        points.append(xy)
        labels.append(np.full(cfg.points_per_arm, arm))
    labels = np.concatenate(labels)
    return Dataset(
        X=np.vstack(points),
        Y=indicator(labels, cfg.arms),
        labels=labels,
        class_names=tuple(str(a) for a in range(cfg.arms)),
        meta={
            "source": "spiral",
            "seed": cfg.seed,
            "turns": cfg.turns,
            "r_max": cfg.r_max,
            "noise_std": cfg.noise_std,
        },
    )


# ---------------------------------------------------------------------------
# Encoding plans and CSV ingestion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ColumnPlan:
    """ordinal columns map the i-th category (1-based) to i / K; numeric columns min-max scale"""
    name: str
    kind: str
    categories: Tuple[str, ...] = ()
    lo: Optional[float] = None
    hi: Optional[float] = None


@dataclass(frozen=True)
class EncodingPlan:
    name: str
    columns: Tuple[ColumnPlan, ...]
    label_column: int = -1
    header: bool = False
    files: Tuple[str, ...] = ()
    classes: Tuple[str, ...] = ()
    merge: Tuple[Tuple[str, str], ...] = ()
    relabel: Optional[str] = None

    @property
    def n_columns(self) -> int:
        """Columns in the file, label included"""
        return len(self.columns) + 1

    def label_index(self) -> int:
        return self.label_column % self.n_columns

    def without_merge(self) -> "EncodingPlan":
        return replace(self, merge=(), relabel=None)

    @classmethod
    def from_file(cls, path: PathLike) -> "EncodingPlan":
        """
        Parse a plan manifest. One directive per line, '#' starts a comment:

            name <name>
            files <file>[,<file>...]
            header yes|no
            label <column index>          (negative counts from the end)
            classes <c1>,<c2>,...
            merge <from> <to>
            relabel <rule>                (a named rule from LABEL_RULES; replaces merges)
            ordinal <column> <c1>,<c2>,...
            numeric <column> [<lo> <hi>]
            numeric_block <prefix> <count> [<lo> <hi>]
        """
        path = Path(path)
        fields: Dict[str, Any] = {"name": path.stem, "columns": [], "merge": []}
        for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = shlex.split(line)
            key, args = parts[0], parts[1:]
            try:
                _apply_plan_directive(fields, key, args)
            except (IndexError, ValueError) as e:
                raise ParseError(lineno, 0, f"bad plan directive {line!r} in {path}: {e}") from e
        return cls(
            name=fields["name"],
            columns=tuple(fields["columns"]),
            label_column=fields.get("label", -1),
            header=fields.get("header", False),
            files=tuple(fields.get("files", ())),
            classes=tuple(fields.get("classes", ())),
            merge=tuple(fields["merge"]),
            relabel=fields.get("relabel"),
        )


def _range_args(args: List[str]) -> Tuple[Optional[float], Optional[float]]:
    if not args:
        return None, None
    lo, hi = float(args[0]), float(args[1])
    if not hi > lo:
        raise ValueError(f"empty numeric range [{lo}, {hi}]")
    return lo, hi


def _apply_plan_directive(fields: Dict[str, Any], key: str, args: List[str]):
    if key == "name":
        fields["name"] = args[0]
    elif key == "files":
        fields["files"] = [f for f in ",".join(args).split(",") if f]
    elif key == "header":
        fields["header"] = args[0].lower() in ("yes", "true", "1")
    elif key == "label":
        fields["label"] = int(args[0])
    elif key == "classes":
        fields["classes"] = args[0].split(",")
    elif key == "merge":
        fields["merge"].append((args[0], args[1]))
    elif key == "relabel":
        if args[0] not in LABEL_RULES:
            raise ValueError(f"unknown relabel rule {args[0]!r}, expected one of {sorted(LABEL_RULES)}")
        fields["relabel"] = args[0]
    elif key == "ordinal":
        fields["columns"].append(ColumnPlan(args[0], ORDINAL, tuple(args[1].split(","))))
    elif key == "numeric":
        lo, hi = _range_args(args[1:])
        fields["columns"].append(ColumnPlan(args[0], NUMERIC, lo=lo, hi=hi))
    elif key == "numeric_block":
        lo, hi = _range_args(args[2:])
        for i in range(int(args[1])):
            fields["columns"].append(ColumnPlan(f"{args[0]}{i + 1}", NUMERIC, lo=lo, hi=hi))
    else:
        raise ValueError(f"unknown directive {key!r}")


def load_plan(name: str) -> EncodingPlan:
    """Plan shipped under plans/<name>.plan"""
    return EncodingPlan.from_file(PLANS_DIR / f"{name}.plan")


def apply_merge(labels: Sequence[str], merge) -> np.ndarray:
    """Relabel every value found in the merge mapping"""
    mapping = dict(merge)
    return np.array([mapping.get(label, label) for label in labels], dtype=object)


def nursery_merge(labels: Sequence[str]) -> np.ndarray:
    """
    Fold the 2-instance 'recommend' class into 'very_recom'.

    Raises:
        UnknownLabel: a label outside the five Nursery classes
    """
    labels = [str(label) for label in labels]
    unknown = sorted(set(labels) - set(NURSERY_CLASSES))
    if unknown:
        raise UnknownLabel(f"not Nursery labels: {unknown}")
    return apply_merge(labels, NURSERY_MERGE)


LABEL_RULES = {"nursery": nursery_merge}


def relabel(labels: Sequence[str], plan: EncodingPlan) -> np.ndarray:
    """Apply the plan's named relabel rule, or else its merge pairs"""
    if plan.relabel is not None:
        return LABEL_RULES[plan.relabel](labels)
    return apply_merge(labels, plan.merge)


def _encode_ordinal(values: pd.Series, col: int, plan: ColumnPlan, row_offset: int) -> np.ndarray:
    codes = {category: (i + 1) / len(plan.categories) for i, category in enumerate(plan.categories)}
    encoded = values.map(codes)
    missing = encoded.isna()
    if missing.any():
        row = int(np.flatnonzero(missing.to_numpy())[0])
        raise UnknownCategory(row + row_offset, col, values.iloc[row])
    return encoded.to_numpy(dtype=np.float64)


def _encode_numeric(values: pd.Series, col: int, plan: ColumnPlan, row_offset: int) -> np.ndarray:
    numbers = pd.to_numeric(values, errors="coerce")
    bad = numbers.isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(row + row_offset, col, f"not a number: {values.iloc[row]!r}")
    numbers = numbers.to_numpy(dtype=np.float64)
    lo = plan.lo if plan.lo is not None else numbers.min()
    hi = plan.hi if plan.hi is not None else numbers.max()
    if hi == lo:
        return np.zeros_like(numbers)
    return (numbers - lo) / (hi - lo)


def _read_raw(paths: Sequence[Path], plan: EncodingPlan) -> pd.DataFrame:
    frames = []
    for path in paths:
        frame = pd.read_csv(
            path,
            header=0 if plan.header else None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
        )
        if frame.shape[1] != plan.n_columns:
            raise ParseError(1, frame.shape[1], f"{path} has {frame.shape[1]} columns, plan expects {plan.n_columns}")
        frame.columns = range(plan.n_columns)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def load_csv(path: Union[PathLike, Sequence[PathLike]], plan: EncodingPlan) -> Dataset:
    """
    Read one or more CSV files and encode them per plan.

    Args:
        path: a file, or a list of files concatenated in order
        plan: column encodings, label column, class merges or relabel rule

    Returns:
        Dataset with encoded features and indicator targets

    Raises:
        OSError: unreadable file
        ParseError: wrong column count or non-numeric cell (row, col)
        UnknownCategory: categorical value missing from the plan (row, col)
        UnknownLabel: a label outside the plan's classes or its relabel rule
    """
    paths = [Path(p) for p in path] if isinstance(path, (list, tuple)) else [Path(path)]
    raw = _read_raw(paths, plan).apply(lambda s: s.str.strip())
    # 1-based file rows for error messages
    row_offset = 2 if plan.header else 1

    label_col = plan.label_index()
    feature_cols = [c for c in range(plan.n_columns) if c != label_col]
    features = []
    for col, col_plan in zip(feature_cols, plan.columns):
        encode = _encode_ordinal if col_plan.kind == ORDINAL else _encode_numeric
        features.append(encode(raw[col], col, col_plan, row_offset))

    names = relabel(raw[label_col].tolist(), plan)
    if plan.classes:
        # classes relabeled into another one drop out of the list
        class_names = tuple(c for c, kept in zip(plan.classes, relabel(plan.classes, plan)) if c == kept)
    else:
        class_names = tuple(sorted(set(names)))
    index = {name: i for i, name in enumerate(class_names)}
    unknown = sorted(set(names) - set(index))
    if unknown:
        raise UnknownLabel(f"labels {unknown} are not in the plan's classes")
    labels = np.array([index[name] for name in names], dtype=np.int64)

    logger.info("Loaded %s: %d rows, %d features, %d classes", plan.name, len(labels),
                len(features), len(class_names))
    return Dataset(
        X=np.column_stack(features),
        Y=indicator(labels, len(class_names)),
        labels=labels,
        class_names=class_names,
        meta={"source": plan.name, "files": [str(p) for p in paths]},
    )


def load_benchmark(name: str, data_dir: PathLike, merge: bool = True) -> Dataset:
    """Load a shipped benchmark plan's files from data_dir"""
    plan = load_plan(name)
    if not merge:
        plan = plan.without_merge()
    return load_csv([Path(data_dir) / f for f in plan.files], plan)


def load_table(path: PathLike) -> Dataset:
    """
    Read the repo's own CSV layout (see FORMATS.md).

    A 'label' column makes a classification set: two classes keep a single 0/1
    output column, more classes get an indicator matrix.
    """
    frame = pd.read_csv(path, float_precision="round_trip")
    x_cols = [c for c in frame.columns if str(c).startswith("x")]
    if not x_cols:
        raise ParseError(1, 0, f"{path} has no feature columns x1..xd")
    X = frame[x_cols].to_numpy(dtype=np.float64)
    if "label" in frame.columns:
        values = frame["label"].tolist()
        ordered = sorted(set(values))
        class_names = tuple(str(v) for v in ordered)
        labels = np.array([ordered.index(v) for v in values], dtype=np.int64)
        Y = labels.reshape(-1, 1) if len(ordered) == 2 else indicator(labels, len(ordered))
        return Dataset(X, Y, labels, class_names, meta={"source": str(path)})
    y_cols = [c for c in frame.columns if str(c).startswith("y")]
    if not y_cols:
        raise ParseError(1, len(x_cols), f"{path} has neither a label nor y columns")
    return Dataset(X, frame[y_cols].to_numpy(dtype=np.float64), meta={"source": str(path)})


def save_dataset(path: PathLike, dataset: Dataset):
    """Write dataset.to_frame() atomically in the layout load_table reads"""
    atomic_write_frame(path, dataset.to_frame())
