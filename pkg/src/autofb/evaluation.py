"""Segmentation and biometry evaluation: IoU, class weights, error stats, folds."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateClass, EmptyInput, ShapeMismatch, TooFewSubjects
from .geometry import N_CLASSES, AnatomyClass, validate_mask

CLINICAL_TOLERANCE = 0.15
WHISKER_IQR = 1.5


def class_weights(counts) -> dict[AnatomyClass, float]:
    """Inverse-frequency weights ``max(c) / c_i``; the commonest class gets 1.

    ``counts`` maps class (or label int) to pixel total.
    """
    counts = {AnatomyClass(k): v for k, v in dict(counts).items()}
    if not counts:
        raise EmptyInput("no class counts")
    zero = [k.name for k, v in counts.items() if v <= 0]
    if zero:
        raise DegenerateClass(f"zero pixel count for {', '.join(zero)}; weight undefined")
    top = max(counts.values())
    return {k: top / v for k, v in counts.items()}


def _check_pair(pred, gt):
    pred, gt = validate_mask(pred), validate_mask(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs ground truth {gt.shape}")
    return pred, gt


def iou(pred, gt, cls) -> float:
    pred, gt = _check_pair(pred, gt)
    p, g = pred == int(cls), gt == int(cls)
    union = np.count_nonzero(p | g)
    if union == 0:
        return 1.0
    return np.count_nonzero(p & g) / union


def confusion_matrix(pred, gt) -> np.ndarray:
    """4x4 counts, rows = ground truth, columns = prediction."""
    pred, gt = _check_pair(pred, gt)
    idx = gt.astype(np.int64).ravel() * N_CLASSES + pred.astype(np.int64).ravel()
    return np.bincount(idx, minlength=N_CLASSES * N_CLASSES).reshape(N_CLASSES, N_CLASSES)


@dataclass
class SegMetrics:
    per_class_iou: dict[AnatomyClass, float]
    miou: float
    confusion: np.ndarray
    present: list[AnatomyClass] = field(default_factory=list)
    mode: str = "aggregate"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "miou": self.miou,
            "per_class_iou": {k.short: v for k, v in self.per_class_iou.items()},
            "present_classes": [k.short for k in self.present],
            "confusion": self.confusion.astype(int).tolist(),
        }


def metrics_from_confusion(conf: np.ndarray) -> SegMetrics:
    conf = np.asarray(conf, dtype=np.int64)
    inter = np.diag(conf)
    gt_tot = conf.sum(axis=1)
    pred_tot = conf.sum(axis=0)
    union = gt_tot + pred_tot - inter
    per_class, present = {}, []
    for k in AnatomyClass:
        if union[k] == 0:
            per_class[k] = 1.0
        else:
            per_class[k] = float(inter[k] / union[k])
            present.append(k)
    miou = float(np.mean([per_class[k] for k in present])) if present else 1.0
    return SegMetrics(per_class, miou, conf, present)


def aggregate_miou(pairs, per_image: bool = False) -> SegMetrics:
    """mIoU over a set of (prediction, ground truth) mask pairs.

    By default one confusion matrix is accumulated over every pixel of every
    pair and IoU is read from it. With ``per_image`` the per-class IoU and
    mIoU are averaged over images instead (the confusion is still summed).
    The mean runs over classes occurring in either prediction or ground
    truth; absent classes report IoU 1.0 and do not count.
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptyInput("no mask pairs")
    confs = [confusion_matrix(p, g) for p, g in pairs]
    total = np.sum(confs, axis=0)
    if not per_image:
        return metrics_from_confusion(total)
    each = [metrics_from_confusion(c) for c in confs]
    per_class = {k: float(np.mean([m.per_class_iou[k] for m in each])) for k in AnatomyClass}
    present = metrics_from_confusion(total).present
    return SegMetrics(per_class, float(np.mean([m.miou for m in each])), total, present, "per-image")


def tukey_hinges(values) -> tuple[float, float, float]:
    """Lower hinge, median, upper hinge.

    Hinges are the medians of the lower and upper halves; with an odd count
    the median belongs to both halves (Tukey's original rule), so
    ``{1, 2, 3, 4, 5}`` gives hinges 2 and 4.
    """
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    half = (n + 1) // 2
    return float(np.median(x[:half])), float(np.median(x)), float(np.median(x[n - half:]))


@dataclass
class ErrorStats:
    measurement: str
    n: int
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: list[float]
    within_tolerance_rate: float
    mean: float = 0.0

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1

    def to_dict(self) -> dict:
        return {
            "measurement": self.measurement,
            "n": self.n,
            "median": self.median,
            "q1": self.q1,
            "q3": self.q3,
            "whisker_low": self.whisker_low,
            "whisker_high": self.whisker_high,
            "outliers": list(self.outliers),
            "within_tolerance_rate": self.within_tolerance_rate,
            "mean": self.mean,
        }


def within_tolerance(predicted: float, clinical: float, tolerance: float = CLINICAL_TOLERANCE) -> bool:
    return abs(predicted - clinical) <= tolerance * clinical


def error_stats(pairs, measurement: str, tolerance: float = CLINICAL_TOLERANCE) -> ErrorStats:
    """Boxplot summary of |predicted - clinical| in mm for one measurement."""
    pairs = [(float(p), float(c)) for p, c in pairs]
    if not pairs:
        raise EmptyInput(f"no value pairs for {measurement}")
    if any(c <= 0 for _, c in pairs):
        raise ValueError("clinical values must be positive")
    err = np.array([abs(p - c) for p, c in pairs])
    q1, med, q3 = tukey_hinges(err)
    lo_fence = q1 - WHISKER_IQR * (q3 - q1)
    hi_fence = q3 + WHISKER_IQR * (q3 - q1)
    inside = err[(err >= lo_fence) & (err <= hi_fence)]
    outliers = sorted(float(v) for v in err[(err < lo_fence) | (err > hi_fence)])
    ok = sum(within_tolerance(p, c, tolerance) for p, c in pairs)
    return ErrorStats(
        measurement=measurement,
        n=len(pairs),
        median=med,
        q1=q1,
        q3=q3,
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=outliers,
        within_tolerance_rate=ok / len(pairs),
        mean=float(err.mean()),
    )


@dataclass
class FoldAssignment:
    k: int
    mapping: dict  # subject id -> fold index
    fold_images: list[int]
    fold_subjects: list[int]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "mapping": dict(self.mapping),
            "fold_images": list(self.fold_images),
            "fold_subjects": list(self.fold_subjects),
        }


def assign_folds(manifest, k: int = 4, seed: int = 0) -> FoldAssignment:
    """Subject-disjoint greedy fold split balancing image counts.

    Subjects are placed largest first, each into the fold with the fewest
    images so far (lowest index on ties). Subjects with equal counts are
    ordered by a seeded shuffle, so the split is reproducible for a seed.
    """
    manifest = [(str(s), int(n)) for s, n in manifest]
    if k < 1:
        raise ValueError("k must be positive")
    ids = [s for s, _ in manifest]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate subject ids in manifest")
    if len(manifest) < k:
        raise TooFewSubjects(f"{len(manifest)} subjects cannot fill {k} folds")
    if any(n < 0 for _, n in manifest):
        raise ValueError("image counts must be non-negative")
    rng = np.random.default_rng(seed)
    shuffled = [manifest[i] for i in rng.permutation(len(manifest))]
    ordered = sorted(shuffled, key=lambda sn: -sn[1])  # stable: shuffle breaks ties
    totals = [0] * k
    members = [0] * k
    mapping = {}
    for subject, n in ordered:
        # empty folds first so every fold gets a subject even with zero counts
        f = min(range(k), key=lambda i: (members[i] > 0, totals[i], i))
        mapping[subject] = f
        totals[f] += n
        members[f] += 1
    return FoldAssignment(k, mapping, totals, members)
