"""Sparse binary feature vectors.

A feature vector is the sorted set of its active indices plus the declared
dimensionality. Linear values are ``theta @ phi``, computed by summing the
weights of the active indices only.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_count, check_index_array


@dataclass(frozen=True, eq=False)
class SparseBinaryFeatures:
    """Binary vector of length ``total`` whose ones sit at ``active``.

    ``active`` is stored sorted and deduplicated. ``stacked`` marks vectors
    produced by :func:`stack_with_negation`.
    """

    total: int
    active: np.ndarray
    stacked: bool = field(default=False)

    def __post_init__(self):
        total = check_count(self.total, "total")
        active = np.unique(check_index_array(self.active, total, "active"))
        active.flags.writeable = False
        object.__setattr__(self, "total", total)
        object.__setattr__(self, "active", active)

    @classmethod
    def from_sorted(cls, total, active):
        """Skip validation; ``active`` must already be sorted, unique and in range."""
        f = object.__new__(cls)
        object.__setattr__(f, "total", total)
        object.__setattr__(f, "active", active)
        object.__setattr__(f, "stacked", False)
        return f

    @property
    def norm(self):
        """Number of active entries (the L1 norm of a binary vector)."""
        return int(self.active.size)

    def to_dense(self):
        out = np.zeros(self.total)
        out[self.active] = 1.0
        return out

    def __eq__(self, other):
        if not isinstance(other, SparseBinaryFeatures):
            return NotImplemented
        return self.total == other.total and np.array_equal(self.active, other.active)

    def __hash__(self):
        return hash((self.total, self.active.tobytes()))

    def __repr__(self):
        return f"SparseBinaryFeatures(total={self.total}, active={self.active.tolist()})"


def stack_with_negation(f):
    """Concatenate ``f`` with its coordinatewise negation.

    The result has dimension ``2 * f.total`` and exactly ``f.total`` active
    entries whatever ``f`` is.
    """
    n = f.total
    negated = np.setdiff1d(np.arange(n), f.active, assume_unique=True) + n
    return SparseBinaryFeatures(2 * n, np.concatenate([f.active, negated]), stacked=True)


def dot(weights, f):
    """``weights @ f`` touching only the active coordinates."""
    weights = np.asarray(weights)
    if weights.shape != (f.total,):
        raise ValueError(f"weights shape {weights.shape} does not match feature dimension {f.total}")
    return float(weights[f.active].sum())


@dataclass(frozen=True)
class GridFeatureSpec:
    """Tile grid with per-tile binary channels, one weight block per action."""

    tiles_x: int
    tiles_y: int
    channels: int
    actions: int

    def __post_init__(self):
        for name in ("tiles_x", "tiles_y", "channels", "actions"):
            check_count(getattr(self, name), name)

    @property
    def block_size(self):
        return self.tiles_x * self.tiles_y * self.channels

    @property
    def total(self):
        return self.block_size * self.actions


def grid_features(spec, occupancy, action):
    """Features of the active ``(x, y, channel)`` cells, placed in ``action``'s block.

    Within a block the index is ``(y * tiles_x + x) * channels + channel``.
    """
    if not 0 <= action < spec.actions:
        raise ValueError(f"action {action} out of range [0, {spec.actions})")
    cells = np.asarray(list(occupancy) if not isinstance(occupancy, np.ndarray) else occupancy,
                       dtype=np.int64).reshape(-1, 3)
    x, y, c = cells.T
    if (np.any((x < 0) | (x >= spec.tiles_x)) or np.any((y < 0) | (y >= spec.tiles_y))
            or np.any((c < 0) | (c >= spec.channels))):
        raise ValueError("occupancy references a tile or channel outside the grid")
    index = action * spec.block_size + (y * spec.tiles_x + x) * spec.channels + c
    return SparseBinaryFeatures(spec.total, index)
