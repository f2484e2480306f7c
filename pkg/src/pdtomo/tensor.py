"""Flattening data tensors into matrices.

Rows and columns are fused row-major over the listed axes, leftmost axis
slowest. For two factors of size ``d`` this is ``A = a*d + b``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import AxisCoveredTwice, RangeOutOfBounds


@dataclass(frozen=True)
class AxisSelection:
    axis: int
    settings: tuple

    def __post_init__(self):
        object.__setattr__(self, "settings", tuple(int(s) for s in self.settings))


@dataclass(frozen=True)
class SplitDescriptor:
    row_axes: tuple
    col_axes: tuple

    @classmethod
    def full(cls, shape, rows, cols, fixed=None):
        """Split using every setting of each listed axis.

        ``fixed`` maps axes that appear in neither list to the single setting
        they are held at; such axes are appended to the rows.
        """
        fixed = dict(fixed or {})
        row_sel = [AxisSelection(ax, range(shape[ax])) for ax in rows]
        row_sel += [AxisSelection(ax, (s,)) for ax, s in fixed.items()]
        col_sel = [AxisSelection(ax, range(shape[ax])) for ax in cols]
        return cls(tuple(row_sel), tuple(col_sel))

    @property
    def axes(self):
        return [sel.axis for sel in self.row_axes + self.col_axes]

    def relabel(self, mapping):
        """Same split with axis ``ax`` renamed to ``mapping[ax]``."""
        def move(sels):
            return tuple(AxisSelection(mapping[s.axis], s.settings) for s in sels)
        return SplitDescriptor(move(self.row_axes), move(self.col_axes))

    def transpose(self):
        return SplitDescriptor(self.col_axes, self.row_axes)

    def validate(self, shape):
        axes = self.axes
        if len(set(axes)) != len(axes):
            raise AxisCoveredTwice(f"axes {axes} list some axis more than once")
        if sorted(axes) != list(range(len(shape))):
            missing = sorted(set(range(len(shape))) - set(axes))
            raise RangeOutOfBounds(f"split must cover every axis of a {len(shape)}-axis tensor; missing {missing}")
        for sel in self.row_axes + self.col_axes:
            if not sel.settings:
                raise RangeOutOfBounds(f"axis {sel.axis} selects no settings")
            bad = [s for s in sel.settings if not 0 <= s < shape[sel.axis]]
            if bad:
                raise RangeOutOfBounds(f"settings {bad} out of range for axis {sel.axis} of size {shape[sel.axis]}")


def _values(tensor):
    return getattr(tensor, "values", tensor)


def flatten(tensor, split):
    """Matrix whose (row, col) entry is the tensor at the fused multi-index."""
    values = np.asarray(_values(tensor))
    split.validate(values.shape)
    by_axis = {sel.axis: sel.settings for sel in split.row_axes + split.col_axes}
    sub = values[np.ix_(*[by_axis[ax] for ax in range(values.ndim)])]
    order = [sel.axis for sel in split.row_axes] + [sel.axis for sel in split.col_axes]
    n_rows = int(np.prod([len(sel.settings) for sel in split.row_axes]))
    return sub.transpose(order).reshape(n_rows, -1)


def unflatten(matrix, split):
    """Inverse of :func:`flatten`: the selected sub-tensor in natural axis order."""
    row_sizes = [len(sel.settings) for sel in split.row_axes]
    col_sizes = [len(sel.settings) for sel in split.col_axes]
    order = [sel.axis for sel in split.row_axes] + [sel.axis for sel in split.col_axes]
    block = np.asarray(matrix).reshape(row_sizes + col_sizes)
    return block.transpose(np.argsort(order))


def fuse(a, b, d):
    if not (0 <= a < d and 0 <= b < d):
        raise RangeOutOfBounds(f"indices ({a}, {b}) out of range for d={d}")
    return a * d + b


def defuse(A, d):
    if not 0 <= A < d * d:
        raise RangeOutOfBounds(f"fused index {A} out of range for d={d}")
    return divmod(A, d)


def fusion_delta(d):
    """The 0/1 tensor ``delta[A, a, b] = 1`` iff ``A = a*d + b``."""
    delta = np.zeros((d * d, d, d))
    for a in range(d):
        for b in range(d):
            delta[fuse(a, b, d), a, b] = 1.0
    return delta


def permute_qudits(tensor, perm):
    """Move qudit ``q`` to position ``perm[q - 1]`` (both 1-based); the state axis stays first."""
    from .model import DataTensor

    values = np.asarray(_values(tensor))
    m = values.ndim - 1
    if sorted(perm) != list(range(1, m + 1)):
        raise ValueError(f"{perm} is not a permutation of 1..{m}")
    # new axis perm[q-1] holds old axis q
    source = [0] * (m + 1)
    for q, target in enumerate(perm, start=1):
        source[target] = q
    moved = values.transpose(source)
    if isinstance(tensor, DataTensor):
        prov = dict(tensor.provenance)
        prov["qudit_permutation"] = list(perm)
        return DataTensor(tensor.m, tensor.d, moved, prov)
    return moved
