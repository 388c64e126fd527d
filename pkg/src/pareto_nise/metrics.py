"""Hypervolume (minimization) and the shared reference-point rule."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import ContractError, filter_nondominated

EXACT_MAX_M = 8
MC_SAMPLES = 200_000


@dataclass(frozen=True)
class HypervolumeResult:
    """A hypervolume value plus how it was obtained.

    ``mode`` is ``"exact"`` or ``"monte-carlo"``; the sampling fields are
    only meaningful for the latter.
    """

    value: float
    mode: str
    reference: np.ndarray
    clipped: int = 0
    samples: int = 0
    seed: int | None = None
    stderr: float = 0.0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "mode": self.mode,
            "reference": np.asarray(self.reference).tolist(),
            "clipped": self.clipped,
            "samples": self.samples,
            "seed": self.seed,
            "stderr": self.stderr,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HypervolumeResult":
        return cls(
            value=float(data["value"]),
            mode=data["mode"],
            reference=np.asarray(data["reference"], dtype=float),
            clipped=int(data.get("clipped", 0)),
            samples=int(data.get("samples", 0)),
            seed=data.get("seed"),
            stderr=float(data.get("stderr", 0.0)),
        )


def _prepare(points, reference):
    """Validate, then drop points that are not componentwise <= reference."""
    ref = np.asarray(reference, dtype=float)
    if ref.ndim != 1 or ref.size < 1:
        raise ContractError("reference must be a non-empty 1-D vector")
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.empty((0, ref.size)), ref, 0
    pts = np.atleast_2d(pts)
    if pts.shape[1] != ref.size:
        raise ContractError(f"points have m={pts.shape[1]}, reference has m={ref.size}")
    if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(ref)):
        raise ContractError("hypervolume needs finite points and reference")
    inside = np.all(pts <= ref, axis=1)
    return pts[inside], ref, int((~inside).sum())


def _hv2d(pts: np.ndarray, ref: np.ndarray) -> float:
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    area = 0.0
    y_floor = ref[1]
    for x, y in pts[order]:
        if y < y_floor:
            area += (ref[0] - x) * (y_floor - y)
            y_floor = y
    return area


def _hv_sweep(pts: np.ndarray, ref: np.ndarray) -> float:
    m = pts.shape[1]
    if len(pts) == 0:
        return 0.0
    if m == 1:
        return float(ref[0] - pts[:, 0].min())
    if m == 2:
        return _hv2d(pts, ref)
    pts = filter_nondominated(pts)
    # slice along the last objective; each slab is a (m-1)-D problem
    pts = pts[np.argsort(pts[:, -1], kind="stable")]
    cuts = np.append(pts[1:, -1], ref[-1])
    volume = 0.0
    for i in range(len(pts)):
        depth = cuts[i] - pts[i, -1]
        if depth > 0:
            volume += depth * _hv_sweep(pts[: i + 1, :-1], ref[:-1])
    return volume


def hypervolume(points, reference) -> float:
    """Exact Lebesgue measure of the union of boxes ``[p, reference]``.

    Points not dominated by the reference are left out and a warning
    reports how many. Exact computation is limited to m <= 8.
    """
    pts, ref, clipped = _prepare(points, reference)
    if ref.size > EXACT_MAX_M:
        raise ContractError(
            f"exact hypervolume is limited to m <= {EXACT_MAX_M}; "
            "use hypervolume_monte_carlo")
    if clipped:
        warnings.warn(f"{clipped} point(s) outside the reference box were ignored",
                      stacklevel=2)
    return float(_hv_sweep(pts, ref))


def hypervolume_monte_carlo(points, reference, samples: int = MC_SAMPLES,
                            seed: int = 0) -> HypervolumeResult:
    """Uniform sampling in the box spanned by the points' ideal and the reference."""
    if samples < 1:
        raise ContractError("samples must be >= 1")
    pts, ref, clipped = _prepare(points, reference)
    if len(pts) == 0:
        return HypervolumeResult(0.0, "monte-carlo", ref, clipped, samples, seed, 0.0)
    pts = filter_nondominated(pts)
    low = pts.min(axis=0)
    box = float(np.prod(ref - low))
    if box <= 0.0:
        return HypervolumeResult(0.0, "monte-carlo", ref, clipped, samples, seed, 0.0)
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    chunk = max(1, min(samples, 2_000_000 // max(1, pts.size)))
    while done < samples:
        k = min(chunk, samples - done)
        u = low + rng.random((k, ref.size)) * (ref - low)
        hits += int(np.any(np.all(pts[None, :, :] <= u[:, None, :], axis=2), axis=1).sum())
        done += k
    frac = hits / samples
    stderr = box * np.sqrt(frac * (1.0 - frac) / samples)
    return HypervolumeResult(box * frac, "monte-carlo", ref, clipped, samples, seed,
                             float(stderr))


def evaluate_hypervolume(points, reference, samples: int = MC_SAMPLES,
                         seed: int = 0) -> HypervolumeResult:
    """Exact for m <= 8, Monte-Carlo above."""
    pts, ref, clipped = _prepare(points, reference)
    if ref.size > EXACT_MAX_M:
        return hypervolume_monte_carlo(points, reference, samples, seed)
    return HypervolumeResult(float(_hv_sweep(pts, ref)), "exact", ref, clipped)


def incremental_contribution(point, archive, reference) -> float:
    """Volume ``point`` adds to ``archive``: HV(archive + point) - HV(archive)."""
    p = np.atleast_2d(np.asarray(point, dtype=float))
    arc = np.asarray(archive, dtype=float)
    arc = arc.reshape(-1, p.shape[1]) if arc.size else np.empty((0, p.shape[1]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        without = hypervolume(arc, reference)
        with_p = hypervolume(np.vstack([arc, p]), reference)
    return max(0.0, with_p - without)


def reference_point(fronts) -> np.ndarray:
    """Worst value of each objective over the fronts' non-dominated points.

    Each front is filtered on its own before the union, so every
    non-dominated point of every front lies inside the reference box.
    """
    arrays = [filter_nondominated(np.atleast_2d(np.asarray(f, dtype=float)))
              for f in fronts if np.asarray(f).size]
    if not arrays:
        raise ContractError("reference_point needs at least one non-empty front")
    return np.vstack(arrays).max(axis=0)
