"""Piecewise time-dependent Hamiltonians and their midpoint propagators."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError
from .linalg import as_hermitian, expm_hermitian, unitarity_error


@dataclass(frozen=True)
class Segment:
    """One piece of a schedule.

    The generator is ``start`` held constant, the linear interpolation
    ``start -> end`` when ``end`` is given, or ``fn(local_time)`` when a
    callable is supplied. ``fn`` segments cannot be serialised.
    """

    duration: float
    start: Optional[np.ndarray] = None
    end: Optional[np.ndarray] = None
    fn: Optional[Callable[[float], np.ndarray]] = None

    def __post_init__(self):
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise ValueError(f"segment duration must be positive, got {self.duration}")
        if self.fn is None and self.start is None:
            raise ValueError("segment needs a generator")
        if self.start is not None:
            object.__setattr__(self, "start", as_hermitian(self.start, name="segment start"))
        if self.end is not None:
            object.__setattr__(self, "end", as_hermitian(self.end, name="segment end"))
            if self.end.shape != self.start.shape:
                raise DimensionError("segment endpoints differ in dimension")

    @property
    def dim(self) -> int:
        if self.start is not None:
            return self.start.shape[0]
        return np.asarray(self.fn(0.0)).shape[0]

    def at(self, s: float) -> np.ndarray:
        if self.fn is not None:
            return np.asarray(self.fn(s), dtype=complex)
        if self.end is None:
            return self.start
        x = s / self.duration
        return (1.0 - x) * self.start + x * self.end

    def derivative(self, s: float, eps: float = 1e-6) -> np.ndarray:
        if self.fn is not None:
            h = eps * self.duration
            lo, hi = max(s - h, 0.0), min(s + h, self.duration)
            return (self.at(hi) - self.at(lo)) / (hi - lo)
        if self.end is None:
            return np.zeros_like(self.start)
        return (self.end - self.start) / self.duration


@dataclass(frozen=True)
class Schedule:
    segments: tuple = field(default_factory=tuple)

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("schedule needs at least one segment")
        dims = {s.dim for s in segs}
        if len(dims) != 1:
            raise DimensionError(f"schedule segments disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, H, duration):
        return cls((Segment(duration, H),))

    @classmethod
    def linear(cls, H0, H1, duration):
        return cls((Segment(duration, H0, H1),))

    @classmethod
    def function(cls, fn, duration):
        return cls((Segment(duration, fn=fn),))

    @property
    def dim(self) -> int:
        return self.segments[0].dim

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def start(self) -> np.ndarray:
        return self.segments[0].at(0.0)

    def end(self) -> np.ndarray:
        last = self.segments[-1]
        return last.at(last.duration)

    def at(self, t: float) -> np.ndarray:
        for seg in self.segments:
            if t <= seg.duration:
                return seg.at(max(t, 0.0))
            t -= seg.duration
        last = self.segments[-1]
        return last.at(last.duration)

    def step_counts(self, steps: int) -> list:
        """Split ``steps`` over segments in proportion to duration, at least one each."""
        if steps < 1:
            raise ValueError("steps must be >= 1")
        total = self.duration
        return [max(1, int(round(steps * s.duration / total))) for s in self.segments]

    def grid(self, steps: int):
        """Yield ``(segment_index, seg, t_start, dt)`` for every midpoint substep.

        Substeps never straddle a segment boundary, so jumps between segments
        land exactly on grid points.
        """
        t0 = 0.0
        for i, (seg, n) in enumerate(zip(self.segments, self.step_counts(steps))):
            dt = seg.duration / n
            for k in range(n):
                yield i, seg, k * dt, dt, t0
            t0 += seg.duration

    def to_dict(self) -> dict:
        from .scenario import encode_matrix

        out = []
        for seg in self.segments:
            if seg.fn is not None:
                raise TypeError("function-valued segments cannot be serialised")
            entry = {"duration": seg.duration, "H": encode_matrix(seg.start)}
            if seg.end is not None:
                entry["H_end"] = encode_matrix(seg.end)
            out.append(entry)
        return {"segments": out}


def propagate(schedule: Schedule, steps: int, hbar: float = 1.0, return_drift=False):
    """Ordered product of ``exp(-i H(t_mid) dt / hbar)`` over midpoint substeps.

    Steps are allocated per segment (see :meth:`Schedule.step_counts`). With
    ``return_drift`` the unitarity error of the accumulated product is also
    returned.
    """
    U = np.eye(schedule.dim, dtype=complex)
    for _, seg, s, dt, _ in schedule.grid(steps):
        U = expm_hermitian(seg.at(s + 0.5 * dt), dt, hbar) @ U
    if return_drift:
        return U, unitarity_error(U)
    return U
