"""Lebesgue, Lorentz, logarithmic-growth and Sobolev norms of sampled fields.

Every norm takes either a :class:`~aximhd.grid.ScalarFieldRZ` (integrated
against the cylindrical volume element) or a :class:`~aximhd.grid.Field3D`
(uniform box measure).  Raw arrays can be passed to the ``weighted_*``
helpers with explicit cell measures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .grid import Field3D, ScalarFieldRZ

DEFAULT_PGRID = (2, 4, 8, 16, 32, 64, 128, 256)
P_MAX = 256


@dataclass(frozen=True)
class PGrid:
    """Finite set of exponents standing in for ``p`` in ``[2, inf)``."""

    exponents: Tuple[float, ...] = DEFAULT_PGRID

    def __post_init__(self):
        ps = tuple(float(p) for p in self.exponents)
        if not ps or ps[0] != 2.0:
            raise ValueError("PGrid must start at p = 2")
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("PGrid exponents must be strictly increasing")
        if not all(np.isfinite(ps)) or ps[-1] > P_MAX:
            raise ValueError(f"PGrid exponents must be finite and <= {P_MAX}")
        object.__setattr__(self, "exponents", ps)

    def __iter__(self):
        return iter(self.exponents)

    def __len__(self):
        return len(self.exponents)


@dataclass(frozen=True)
class NormReport:
    """Named norm values sampled at one time."""

    t: float
    values: dict

    def __post_init__(self):
        for key, v in self.values.items():
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"norm {key!r} is not a finite non-negative number: {v}")


def _values_and_weights(f):
    if isinstance(f, ScalarFieldRZ):
        return f.values, f.grid.weights
    if isinstance(f, Field3D):
        return f.values, f.cell_volume
    raise TypeError(f"expected ScalarFieldRZ or Field3D, got {type(f).__name__}")


def weighted_lp(values, weights, p):
    """``(sum |v|^p w)^(1/p)``, evaluated as ``M (sum (|v|/M)^p w)^(1/p)``.

    Scaling by the peak ``M`` keeps large exponents from overflowing and
    makes ``|v| = 0`` contribute exactly zero.
    """
    a = np.abs(values)
    peak = float(np.max(a)) if a.size else 0.0
    if peak == 0.0:
        return 0.0
    if np.isinf(p):
        return peak
    s = np.sum((a / peak) ** p * weights)
    return peak * float(s) ** (1.0 / p)


def lp_norm(f, p):
    """``L^p`` norm for ``p >= 1`` or ``p = inf``."""
    if not (p >= 1):
        raise ValueError(f"p must be >= 1, got {p}")
    values, weights = _values_and_weights(f)
    return weighted_lp(values, weights, p)


def magnitude(*components):
    """Pointwise Euclidean length of a tuple of same-shaped arrays."""
    return np.sqrt(sum(np.asarray(c) ** 2 for c in components))


def weighted_lorentz(values, weights, p, q):
    """Lorentz ``L^{p,q}`` norm of a step function.

    Cells are sorted by ``|v|`` in decreasing order; with ``a_k`` the sorted
    values and ``T_k`` the cumulative measure, each step contributes
    ``a_k^q (p/q) (T_k^{q/p} - T_{k-1}^{q/p})`` to the ``q``-th power.  For
    ``q = inf`` the norm is ``max_k a_k T_k^{1/p}``.
    """
    a = np.abs(np.asarray(values, dtype=float)).ravel()
    w = np.broadcast_to(weights, np.shape(values)).ravel()
    order = np.argsort(-a, kind="stable")
    a = a[order]
    w = w[order]
    nz = a > 0
    if not np.any(nz):
        return 0.0
    a = a[nz]
    T = np.cumsum(w[nz])
    if np.isinf(q):
        return float(np.max(a * T ** (1.0 / p)))
    peak = a[0]
    Tq = T ** (q / p)
    steps = np.diff(np.concatenate([[0.0], Tq]))
    s = np.sum((a / peak) ** q * steps) * (p / q)
    return peak * float(s) ** (1.0 / q)


def lorentz_norm(f, p, q):
    """Lorentz norm from the exact decreasing rearrangement of the samples.

    Parameters
    ----------
    p : float
        Integrability index, ``1 < p < inf``.
    q : float
        Fine index: ``1`` or any value in ``[2, inf]``.
    """
    if not (1 < p < np.inf):
        raise ValueError(f"Lorentz norms need 1 < p < inf, got p={p}")
    if not (q == 1 or q >= 2):
        raise ValueError(f"Lorentz fine index must be 1 or >= 2, got q={q}")
    values, weights = _values_and_weights(f)
    return weighted_lorentz(values, weights, p, q)


@dataclass(frozen=True)
class GrowthReport:
    """``max_p ||f||_p / p^a`` over a PGrid, with its maximiser.

    ``tail_decreasing`` records whether the weighted sequence is
    non-increasing past the maximiser, i.e. whether truncating the
    supremum at the largest exponent is harmless for this field.
    """

    value: float
    argmax_p: float
    weighted: Tuple[float, ...]
    tail_decreasing: bool


def growth_report(values, weights, a, pgrid=None):
    pgrid = PGrid() if pgrid is None else pgrid
    if not (0.0 <= a <= 1.0):
        raise ValueError(f"growth exponent must lie in [0, 1], got {a}")
    seq = tuple(weighted_lp(values, weights, p) / p**a for p in pgrid)
    k = int(np.argmax(seq))
    tail = seq[k:]
    ok = all(y <= x * (1 + 1e-12) for x, y in zip(tail, tail[1:]))
    return GrowthReport(float(seq[k]), pgrid.exponents[k], seq, ok)


def la_norm(f, a, pgrid=None):
    """``sup_p ||f||_{L^p} / p^a`` with the supremum taken over ``pgrid``."""
    values, weights = _values_and_weights(f)
    return growth_report(values, weights, a, pgrid).value


def sqrtL_norm(f, pgrid=None):
    """The ``a = 1/2`` member of :func:`la_norm`."""
    return la_norm(f, 0.5, pgrid)


def sobolev_hs_norm(F, s, partition=None):
    """``H^s`` norm on the periodic box from dyadic block energies.

    Each Fourier coefficient is weighted by ``sum_j 2^{2js} phi_j(xi)``,
    the block weights summing to one, so ``s = 0`` reproduces the box
    ``L^2`` norm exactly and every block with ``j > j_max`` is dropped.
    """
    from .littlewood_paley import DyadicPartition, block_energy_weights

    if not (0.0 <= s <= 4.0):
        raise ValueError(f"s must lie in [0, 4], got {s}")
    if not np.any(F.values):
        return 0.0
    partition = DyadicPartition.default() if partition is None else partition
    weight, power = block_energy_weights(F, s, partition)
    return float(np.sqrt(np.sum(weight * power)))
