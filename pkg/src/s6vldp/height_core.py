"""Height functions on the faces of the quadrant lattice.

A face is addressed by integer indices ``(i, j)`` standing for the unit square
centred at ``(i + 1/2, j + 1/2)``. A window of size ``M x N`` stores the faces
``0 <= i <= M``, ``0 <= j <= N``, which surround exactly the vertices
``1 <= x <= M``, ``1 <= y <= N``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
from scipy import ndimage


class Face(NamedTuple):
    i: int
    j: int

    @property
    def center(self) -> tuple[float, float]:
        return (self.i + 0.5, self.j + 0.5)


class Vertex(NamedTuple):
    x: int
    y: int

    @property
    def sw(self) -> Face:
        return Face(self.x - 1, self.y - 1)

    @property
    def se(self) -> Face:
        return Face(self.x, self.y - 1)

    @property
    def nw(self) -> Face:
        return Face(self.x - 1, self.y)

    @property
    def ne(self) -> Face:
        return Face(self.x, self.y)


def observable_face(M: int, N: int) -> Face:
    """Face carrying the height at vertex ``(M, N)``: the one to its north-west."""
    return Vertex(M, N).nw


class HeightField:
    """Immutable integer height function on an ``(M+1) x (N+1)`` face window."""

    __slots__ = ("_values",)

    def __init__(self, values):
        arr = np.array(values, dtype=np.int64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
            raise ValueError(f"height array must be 2-d with both sides >= 2, got {arr.shape}")
        arr.setflags(write=False)
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def M(self) -> int:
        return self._values.shape[0] - 1

    @property
    def N(self) -> int:
        return self._values.shape[1] - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape

    def __getitem__(self, face) -> int:
        i, j = face
        return int(self._values[i, j])

    def __eq__(self, other) -> bool:
        if not isinstance(other, HeightField):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._values, other._values))

    def __hash__(self) -> int:
        return hash((self.shape, self._values.tobytes()))

    def __repr__(self) -> str:
        return f"HeightField(M={self.M}, N={self.N})"

    def observable(self) -> int:
        return self[observable_face(self.M, self.N)]

    @classmethod
    def horizontal(cls, M: int, N: int) -> "HeightField":
        """Field with every path running straight to the right (``h = j``)."""
        return cls(np.tile(np.arange(N + 1), (M + 1, 1)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "h"])
        for i in range(self.M + 1):
            for j in range(self.N + 1):
                w.writerow([i, j, int(self._values[i, j])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "HeightField":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty height CSV")
        ii = np.array([int(r["i"]) for r in rows])
        jj = np.array([int(r["j"]) for r in rows])
        hh = np.array([int(r["h"]) for r in rows])
        arr = np.full((ii.max() + 1, jj.max() + 1), np.iinfo(np.int64).min, dtype=np.int64)
        arr[ii, jj] = hh
        if (arr == np.iinfo(np.int64).min).any():
            raise ValueError("height CSV does not cover a full rectangular window")
        return cls(arr)


def gradient_violations(h: HeightField) -> list[Face]:
    """Faces ``p`` at which a forward difference leaves the allowed set.

    Horizontal steps must lie in {0, -1}, vertical steps in {0, 1}.
    """
    v = h.values
    d1 = v[1:, :] - v[:-1, :]
    d2 = v[:, 1:] - v[:, :-1]
    bad = np.zeros(v.shape, dtype=bool)
    bad[:-1, :] |= (d1 != 0) & (d1 != -1)
    bad[:, :-1] |= (d2 != 0) & (d2 != 1)
    return [Face(int(i), int(j)) for i, j in zip(*np.nonzero(bad))]


def validate(h: HeightField) -> list[Face]:
    return gradient_violations(h)


def is_valid(h: HeightField) -> bool:
    return not gradient_violations(h)


def is_step_boundary(h: HeightField) -> bool:
    """Zero along the bottom face row and ``h(0, j) = j`` up the left column."""
    v = h.values
    return bool((v[:, 0] == 0).all() and (v[0, :] == np.arange(h.N + 1)).all())


def shift(h: HeightField, k: int) -> HeightField:
    return HeightField(h.values + int(k))


@dataclass(frozen=True)
class Region:
    """A set of faces inside a window, stored as a boolean mask."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool, copy=True)
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __contains__(self, face) -> bool:
        i, j = face
        return bool(self.mask[i, j])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Region):
            return NotImplemented
        return self.mask.shape == other.mask.shape and bool(np.array_equal(self.mask, other.mask))

    def __hash__(self) -> int:
        return hash((self.mask.shape, self.mask.tobytes()))

    @property
    def faces(self) -> frozenset[Face]:
        return frozenset(Face(int(i), int(j)) for i, j in zip(*np.nonzero(self.mask)))

    @classmethod
    def from_faces(cls, faces: Iterable, shape: tuple[int, int]) -> "Region":
        m = np.zeros(shape, dtype=bool)
        for i, j in faces:
            m[i, j] = True
        return cls(m)


def _component(mask: np.ndarray, p) -> np.ndarray:
    i, j = p
    if not (0 <= i < mask.shape[0] and 0 <= j < mask.shape[1]):
        raise IndexError(f"face {tuple(p)} lies outside the {mask.shape} window")
    if not mask[i, j]:
        return np.zeros_like(mask)
    # default structuring element in 2-d is the 4-neighbour cross
    labels, _ = ndimage.label(mask)
    return labels == labels[i, j]


def _check_same_window(h: HeightField, hp: HeightField) -> None:
    if h.shape != hp.shape:
        raise ValueError(f"window mismatch: {h.shape} vs {hp.shape}")


def region_less(h: HeightField, hp: HeightField, p) -> Region:
    """4-connected component of ``{h < h'}`` containing ``p``; empty if ``h(p) >= h'(p)``."""
    _check_same_window(h, hp)
    return Region(_component(h.values < hp.values, p))


def region_neq(h: HeightField, hp: HeightField, p) -> Region:
    """4-connected component of ``{h != h'}`` containing ``p``; empty if ``h(p) = h'(p)``."""
    _check_same_window(h, hp)
    return Region(_component(h.values != hp.values, p))


def boundary(region: Region) -> frozenset[Vertex]:
    """Vertices whose four adjacent faces meet both the region and its complement.

    Only vertices of the window are considered, so this is already the
    intersection with the box ``[1, M] x [1, N]``.
    """
    m = region.mask
    sw, se, nw, ne = m[:-1, :-1], m[1:, :-1], m[:-1, 1:], m[1:, 1:]
    any_in = sw | se | nw | ne
    all_in = sw & se & nw & ne
    xs, ys = np.nonzero(any_in & ~all_in)
    return frozenset(Vertex(int(x) + 1, int(y) + 1) for x, y in zip(xs, ys))


def iota(h: HeightField, hp: HeightField, p) -> tuple[HeightField, HeightField]:
    """Exchange the two fields on the component of ``{h != h'}`` through ``p``."""
    _check_same_window(h, hp)
    m = _component(h.values != hp.values, p)
    if not m.any():
        return h, hp
    a = np.where(m, hp.values, h.values)
    b = np.where(m, h.values, hp.values)
    return HeightField(a), HeightField(b)


def upsilon(h: HeightField, hp: HeightField, p, k: int) -> tuple[HeightField, HeightField]:
    """Shift ``h`` up by ``k``, swap on the differing component at ``p``, shift back.

    The map is an involution for every ``k``.
    """
    lifted, other = iota(shift(h, k), hp, p)
    return shift(lifted, -k), other


def boundary_size(h: HeightField, hp: HeightField, p, k: int) -> int:
    return len(boundary(region_neq(shift(h, k), hp, p)))


def k_star(h: HeightField, hp: HeightField, p, M: int | None = None, N: int | None = None) -> int:
    """Smallest lift ``k >= ceil((r'-r)/2)`` whose swap region has a short boundary.

    Here ``r = h(p) < r' = h'(p)`` and "short" means at most ``(MN)^(7/8)``
    boundary vertices inside the window.
    """
    _check_same_window(h, hp)
    r, rp = h[p], hp[p]
    if r >= rp:
        raise ValueError(f"need h(p) < h'(p), got {r} >= {rp}")
    M = h.M if M is None else M
    N = h.N if N is None else N
    cap = (M * N) ** (7 / 8)
    k = -(-(rp - r) // 2)
    # once h + k exceeds h' everywhere the region is the full window with no boundary
    k_max = k + int(np.max(hp.values - h.values)) + 2
    while k <= k_max:
        if boundary_size(h, hp, p, k) <= cap:
            return int(k)
        k += 1
    raise RuntimeError("no admissible lift found")  # unreachable for valid fields
