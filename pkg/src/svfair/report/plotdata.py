"""Plot-ready data: DET curve points, score distributions and ratio scatter."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from ..ingest import SubgroupKey
from ..metrics import ComparisonRow, ErrorCurve, equal_error_rate
from .probit import clamp_rates, probit, probit_array

MARKER_KINDS = ("overall_min", "sg_min", "eer")


@dataclass(frozen=True)
class DetMarker:
    kind: str
    threshold: float
    fpr: float
    fnr: float
    x: float
    y: float

    @property
    def label(self) -> str:
        return format_rates(self.fpr, self.fnr)


@dataclass(frozen=True, eq=False)
class DetCurvePoints:
    x: np.ndarray
    y: np.ndarray
    markers: list[DetMarker] = field(default_factory=list)
    name: str = ""

    def __len__(self) -> int:
        return self.x.shape[0]


def format_rates(fpr: float, fnr: float) -> str:
    """``"0.27% / 10.36%"`` style label (FPR first)."""
    return f"{100 * fpr:.2f}% / {100 * fnr:.2f}%"


def _clamped_xy(curve: ErrorCurve, fpr, fnr):
    x = probit_array(clamp_rates(fpr, curve.n_nontarget))
    y = probit_array(clamp_rates(fnr, curve.n_target))
    return x, y


def det_curve_points(
    curve: ErrorCurve,
    markers: Mapping[str, float] | None = None,
    *,
    name: str = "",
) -> DetCurvePoints:
    """Probit-transformed operating points of ``curve``.

    Rates of 0 and 1 are clamped half a trial away from the boundary. Points
    sharing an FPR are collapsed to the one with the lowest FNR, leaving x
    strictly increasing. ``markers`` maps a marker kind (``overall_min``,
    ``sg_min``) to its threshold, and surfaces the raw rates there. An
    ``eer`` entry (its value is ignored) adds a marker on the diagonal at the
    curve's interpolated EER.
    """
    # reverse threshold order makes FPR ascending and FNR descending
    x, y = _clamped_xy(curve, curve.fpr[::-1], curve.fnr[::-1])
    # collapse after clamping: with one trial per side, 0 and 1 both clamp to 1/2
    last_of_run = np.ones(x.shape[0], dtype=bool)
    last_of_run[:-1] = x[1:] != x[:-1]
    x = x[last_of_run]
    y = y[last_of_run]

    out: list[DetMarker] = []
    for kind, theta in (markers or {}).items():
        if kind not in MARKER_KINDS:
            raise ValueError(f"unknown marker kind {kind!r}")
        if kind == "eer":
            out.append(_eer_marker(curve))
            continue
        m_fnr, m_fpr = curve.rates_at(theta)
        mx, my = _clamped_xy(curve, np.array([m_fpr]), np.array([m_fnr]))
        out.append(DetMarker(kind, float(theta), m_fpr, m_fnr, float(mx[0]), float(my[0])))
    return DetCurvePoints(x, y, out, name)


def _eer_marker(curve: ErrorCurve) -> DetMarker:
    eer, threshold = equal_error_rate(curve)
    half = 1.0 / (2 * min(curve.n_target, curve.n_nontarget))
    rate = min(max(eer, half), 1.0 - half)
    z = probit(rate)
    return DetMarker("eer", threshold, eer, eer, z, z)


@dataclass(frozen=True, eq=False)
class DistributionSummary:
    subgroup: SubgroupKey
    label: int
    n: int
    bin_edges: np.ndarray
    density: np.ndarray
    kde_grid: np.ndarray | None
    kde: np.ndarray | None
    mean: float
    sd: float
    skewness: float | None
    excess_kurtosis: float | None
    note: str = ""


# above this size the KDE is computed from linearly binned counts
EXACT_KDE_LIMIT = 20_000
KDE_GRID_POINTS = 256
_BINNED_GRID = 4096


def silverman_bandwidth(x: np.ndarray) -> float:
    n = x.shape[0]
    sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * n ** (-0.2)


def _gaussian_kde(x: np.ndarray, grid: np.ndarray, bw: float) -> np.ndarray:
    norm = 1.0 / (x.shape[0] * bw * np.sqrt(2.0 * np.pi))
    if x.shape[0] <= EXACT_KDE_LIMIT:
        out = np.empty_like(grid)
        for start in range(0, grid.shape[0], 64):
            g = grid[start:start + 64]
            z = (g[:, None] - x[None, :]) / bw
            with np.errstate(over="ignore"):  # far tails: exp(-inf) = 0
                out[start:start + 64] = np.exp(-0.5 * z * z).sum(axis=1)
        return out * norm
    # linear binning onto a fine grid, then kernel sums over bin centres
    lo, hi = float(grid[0]), float(grid[-1])
    step = (hi - lo) / (_BINNED_GRID - 1)
    pos = (x - lo) / step
    left = np.clip(np.floor(pos).astype(np.int64), 0, _BINNED_GRID - 2)
    frac = pos - left
    weights = np.bincount(left, 1.0 - frac, _BINNED_GRID) + np.bincount(left + 1, frac, _BINNED_GRID)
    centres = lo + step * np.arange(_BINNED_GRID)
    z = (grid[:, None] - centres[None, :]) / bw
    with np.errstate(over="ignore"):
        return np.exp(-0.5 * z * z) @ weights * norm


def score_distribution(
    scores,
    label: int,
    subgroup: SubgroupKey = (),
    bins: int = 50,
    bandwidth: float | str = "auto",
) -> DistributionSummary:
    """Histogram, Gaussian KDE and sample moments of one score population.

    Moments are population moments (``ddof=0``). A sample with a single
    distinct value gets a one-bin histogram and no KDE.
    """
    x = np.asarray(scores, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("score_distribution needs at least one score")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    mean = float(np.mean(x))
    dev = x - mean
    # moments of dev / scale, so squares neither overflow nor underflow
    scale = float(np.max(np.abs(dev)))
    u = dev / scale if scale > 0 else dev
    rms = float(np.sqrt(np.mean(u**2)))
    sd = scale * rms
    lo, hi = float(x.min()), float(x.max())

    # a range too narrow for finite bin densities is treated as one value
    if lo == hi or not np.isfinite(bins / (hi - lo)):
        pad = max(0.5, 4 * float(np.spacing(max(abs(lo), abs(hi)))))
        edges = np.array([lo - pad, hi + pad])
        note = "single distinct value" if lo == hi else "spread below floating-point resolution"
        return DistributionSummary(
            tuple(subgroup), int(label), int(x.size), edges, 1.0 / np.diff(edges),
            None, None, mean, sd, None, None, note=f"{note}; KDE skipped",
        )

    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    density = counts / (x.size * np.diff(edges))
    skew = kurt = None
    if rms > 0:
        z = u / rms
        skew = float(np.mean(z**3))
        kurt = float(np.mean(z**4)) - 3.0

    if bandwidth == "auto":
        bw = silverman_bandwidth(x)
        if not bw > 0:
            bw = 1.06 * sd * x.size ** (-0.2)
    else:
        bw = float(bandwidth)
        if not bw > 0:
            raise ValueError("bandwidth must be positive")
    if not (bw > 0 and np.isfinite(1.0 / bw)):
        # spread below floating-point resolution
        return DistributionSummary(
            tuple(subgroup), int(label), int(x.size), edges, density,
            None, None, mean, sd, skew, kurt, note="spread too small; KDE skipped",
        )
    pad = 3.0 * bw
    grid = np.linspace(lo - pad, hi + pad, KDE_GRID_POINTS)
    kde = np.maximum(_gaussian_kde(x, grid, bw), 0.0)
    return DistributionSummary(
        tuple(subgroup), int(label), int(x.size), edges, density, grid, kde, mean, sd, skew, kurt
    )


@dataclass(frozen=True)
class ScatterPoint:
    name: str
    x: float
    y: float
    shape: str
    side: str  # "above" (model A better), "below" (model B better) or "on"


@dataclass(frozen=True)
class ScatterData:
    points: list[ScatterPoint]
    label_a: str = "model A"
    label_b: str = "model B"
    legend: tuple[str, ...] = ()


# female triangles, male crosses; anything else a circle
SEX_SHAPES = {"f": "triangle", "m": "cross"}


def ratio_scatter(
    rows: Sequence[ComparisonRow],
    *,
    label_a: str = "model A",
    label_b: str = "model B",
    shape_by: Mapping[str, str] | None = None,
) -> ScatterData:
    """One point per subgroup at (ratio under A, ratio under B).

    ``shape_by`` maps subgroup names to the value that selects the marker
    shape (normally the sex attribute).
    """
    if not rows:
        raise ValueError("ratio_scatter needs at least one row")
    points = []
    for row in rows:
        if row.ratio_b > row.ratio_a:
            side = "above"
        elif row.ratio_b < row.ratio_a:
            side = "below"
        else:
            side = "on"
        value = (shape_by or {}).get(row.name)
        points.append(ScatterPoint(row.name, row.ratio_a, row.ratio_b, SEX_SHAPES.get(value, "circle"), side))
    points.sort(key=lambda p: p.name)
    legend = (
        f"above the diagonal: {label_a} fairer",
        f"below the diagonal: {label_b} fairer",
        "bottom left: best for both models",
    )
    return ScatterData(points, label_a, label_b, legend)


def shape_attribute_values(keys: Mapping[str, SubgroupKey], group_by: Sequence[str], attribute: str = "sex") -> dict[str, str]:
    """Map subgroup name to its ``attribute`` value when that attribute was grouped on."""
    group_by = list(group_by)
    if attribute not in group_by:
        return {}
    pos = group_by.index(attribute)
    return {name: key[pos] for name, key in keys.items() if len(key) == len(group_by)}
