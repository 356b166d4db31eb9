"""Keypoint heatmaps: rendering, peak finding, and per-view uncertainty.

A heatmap is a small non-negative grid (default 64x64) holding one
keypoint's predicted location likelihood in one view. Peaks are strict
local maxima; the two uncertainty scores consume the peak list: the
best-vs-second-best margin on max-normalized values, and the entropy of a
softmax over raw peak values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyHeatmap, InvariantViolation


@dataclass(frozen=True)
class HeatmapSpec:
    """Grid geometry for rendered heatmaps."""

    width: int = 64
    height: int = 64
    sigma_px: float = 2.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvariantViolation("heatmap grid must be at least 1x1")
        if self.sigma_px <= 0:
            raise InvariantViolation("heatmap sigma_px must be positive")


@dataclass(frozen=True)
class PeakParams:
    """Peak-finding knobs: odd NMS window, relative floor, list cap."""

    window: int = 3
    min_frac: float = 0.1
    max_peaks: int = 5

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise InvariantViolation("peak window must be odd and >= 3")
        if not 0.0 <= self.min_frac < 1.0:
            raise InvariantViolation("min_frac must be in [0, 1)")
        if self.max_peaks < 1:
            raise InvariantViolation("max_peaks must be >= 1")


class Heatmap:
    """Non-negative (height, width) grid of float values."""

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray):
        v = np.asarray(values, dtype=float)
        if v.ndim != 2:
            raise DimensionMismatch(f"heatmap must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or v.min() < 0:
            raise InvariantViolation("heatmap values must be finite and >= 0")
        self.values = v

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def render_gaussian(
    center: np.ndarray,
    spec: HeatmapSpec = HeatmapSpec(),
    amplitude: float = 1.0,
) -> Heatmap:
    """Unnormalized isotropic Gaussian bump sampled on the grid.

    center is (u, v) in grid coordinates and may lie off-grid; the grid
    then just samples the tail. The kernel is separable, so the full grid
    costs width+height exponentials.
    """
    return Heatmap(gaussian_values(center, spec, amplitude))


def gaussian_values(
    center: np.ndarray, spec: HeatmapSpec, amplitude: float = 1.0
) -> np.ndarray:
    """Raw array form of render_gaussian, for composing multi-peak maps."""
    if amplitude <= 0:
        raise InvariantViolation("amplitude must be positive")
    u0, v0 = float(center[0]), float(center[1])
    du = np.arange(spec.width) - u0
    dv = np.arange(spec.height) - v0
    s2 = 2.0 * spec.sigma_px**2
    col = np.exp(-(dv**2) / s2)
    row = np.exp(-(du**2) / s2)
    return amplitude * np.outer(col, row)


def gaussian_values_stack(
    centers: np.ndarray, spec: HeatmapSpec, amplitudes: np.ndarray
) -> np.ndarray:
    """Many bumps at once: (M, 2) centers, (M,) amplitudes -> (M, H, W).

    Same separable kernel as gaussian_values, broadcast over the batch
    axis; slice m equals gaussian_values(centers[m], spec, amplitudes[m]).
    """
    c = np.asarray(centers, dtype=float)
    a = np.asarray(amplitudes, dtype=float)
    if c.ndim != 2 or c.shape[1] != 2 or a.shape != (c.shape[0],):
        raise DimensionMismatch(
            f"need (M, 2) centers and (M,) amplitudes, got {c.shape} and {a.shape}"
        )
    if np.any(a <= 0):
        raise InvariantViolation("amplitude must be positive")
    s2 = 2.0 * spec.sigma_px**2
    du = np.arange(spec.width)[None, :] - c[:, 0:1]
    dv = np.arange(spec.height)[None, :] - c[:, 1:2]
    rows = np.exp(-(du**2) / s2)
    cols = np.exp(-(dv**2) / s2)
    # Amplitude scales the finished outer product, in that order, so each
    # slice is bit-identical to gaussian_values on the same center.
    return a[:, None, None] * (cols[:, :, None] * rows[:, None, :])


@dataclass(frozen=True)
class Peak:
    """One detected peak: integer grid position and its raw value."""

    u: int
    v: int
    value: float


def local_peaks_grid(values: np.ndarray, params: PeakParams = PeakParams()) -> list:
    """Strict-local-maxima lists for a (S, H, W) stack of raw values.

    One Peak list per slice. Cells below min_frac of the slice max can
    never be peaks, so strictness (greater than every in-grid cell of the
    window x window neighborhood) is only checked at the sparse set of
    candidate cells above the floor; the full grids are touched once.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 3:
        raise DimensionMismatch(f"expected a (S, H, W) stack, got shape {v.shape}")
    n, h, w = v.shape
    flat_argmax = v.reshape(n, -1).argmax(axis=1)
    vmax = v.reshape(n, -1)[np.arange(n), flat_argmax]
    if np.any(vmax <= 0):
        raise EmptyHeatmap("heatmap has no strictly positive value")

    s_idx, vs, us = np.nonzero(v >= params.min_frac * vmax[:, None, None])
    vals = v[s_idx, vs, us]

    r = params.window // 2
    ok = np.ones(len(vals), dtype=bool)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dy == 0 and dx == 0:
                continue
            nv = vs + dy
            nu = us + dx
            inside = (nv >= 0) & (nv < h) & (nu >= 0) & (nu < w)
            nbr = v[s_idx[inside], nv[inside], nu[inside]]
            ok[inside] &= vals[inside] > nbr

    # First row-major cell attaining each slice max, plateau or not.
    # nonzero emits row-major order, so candidate keys are sorted and the
    # argmax cell (always above the floor) is found by bisection.
    keys = (s_idx * h + vs) * w + us
    argmax_keys = np.arange(n) * (h * w) + flat_argmax
    ok[np.searchsorted(keys, argmax_keys)] = True

    s_idx, vs, us, vals = s_idx[ok], vs[ok], us[ok], vals[ok]
    order = np.lexsort((us, vs, -vals, s_idx))
    starts = np.searchsorted(s_idx[order], np.arange(n + 1))
    out = []
    for m in range(n):
        lo = starts[m]
        hi = min(starts[m + 1], lo + params.max_peaks)
        out.append(
            [
                Peak(u=int(us[i]), v=int(vs[i]), value=float(vals[i]))
                for i in order[lo:hi]
            ]
        )
    return out


def local_peaks(heatmap: Heatmap, params: PeakParams = PeakParams()) -> list:
    """Strict local maxima, sorted by value descending.

    A cell is a peak when it strictly exceeds every other cell in its
    window x window neighborhood (grid border cells compare against
    in-grid neighbors only) and reaches min_frac of the global max. The
    global argmax cell is always included even on a plateau. Ties sort by
    (row, column); the list is truncated to max_peaks.
    """
    return local_peaks_grid(heatmap.values[None], params)[0]


def local_peaks_stack(heatmaps, params: PeakParams = PeakParams()) -> list:
    """local_peaks for many same-shape heatmaps with one filter pass.

    Accepts a sequence of Heatmaps or a raw (S, H, W) array. Returns one
    Peak list per input map, identical to calling local_peaks on each;
    stacking just amortizes the neighborhood-maximum pass.
    """
    if isinstance(heatmaps, np.ndarray):
        return local_peaks_grid(heatmaps, params)
    if len(heatmaps) == 0:
        raise DimensionMismatch("local_peaks_stack needs at least one heatmap")
    shapes = {hm.values.shape for hm in heatmaps}
    if len(shapes) != 1:
        raise DimensionMismatch("stacked heatmaps must share one shape")
    return local_peaks_grid(np.stack([hm.values for hm in heatmaps]), params)


def margin_from_peaks(peaks) -> float:
    """BSB margin of one peak list: 1 - second/top, or 1 for a single peak."""
    if len(peaks) < 2:
        return 1.0
    return 1.0 - peaks[1].value / peaks[0].value


def bsb_view(heatmaps, params: PeakParams = PeakParams()) -> float:
    """Best-vs-second-best margin for one view, averaged over keypoints.

    Per keypoint: 1 - second_peak/top_peak on max-normalized values, so a
    confident single-peak map contributes exactly 1 and two equal peaks
    contribute 0. heatmaps is one Heatmap per keypoint.
    """
    if len(heatmaps) == 0:
        raise DimensionMismatch("bsb_view needs at least one heatmap")
    return float(np.mean([margin_from_peaks(local_peaks(hm, params)) for hm in heatmaps]))


def peak_softmax_entropy(values) -> float:
    """Shannon entropy (nats) of a softmax over raw peak values."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DimensionMismatch("softmax entropy of an empty value list")
    z = np.exp(v - v.max())
    p = z / z.sum()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def mpe_view(heatmaps, params: PeakParams = PeakParams()) -> float:
    """Multi-peak entropy for one view, averaged over keypoints.

    Per keypoint: entropy of the softmax over raw values at the detected
    peaks. A single-peak map contributes exactly 0.
    """
    if len(heatmaps) == 0:
        raise DimensionMismatch("mpe_view needs at least one heatmap")
    ents = []
    for hm in heatmaps:
        peaks = local_peaks(hm, params)
        ents.append(peak_softmax_entropy([p.value for p in peaks]))
    return float(np.mean(ents))
