"""Exact probability bookkeeping over finite alphabets."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import UsageError

PMF_TOL = 1e-12


def entropy_bits(p):
    """Base-2 Shannon entropy with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def check_pmf(p, tol=PMF_TOL):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise UsageError("a pmf must be a non-empty vector")
    if np.any(p < -tol):
        raise UsageError(f"pmf has negative entries: {p}")
    if abs(p.sum() - 1.0) > max(tol, 1e-12 * p.size):
        raise UsageError(f"pmf sums to {p.sum()!r}, not 1")
    return np.clip(p, 0.0, None)


@dataclass(frozen=True, eq=False)
class ProductInput:
    pmfs: tuple

    def __post_init__(self):
        if len(self.pmfs) != 3:
            raise UsageError("a product input needs one pmf per sender")
        object.__setattr__(self, "pmfs", tuple(check_pmf(p) for p in self.pmfs))

    def __getitem__(self, k):
        return self.pmfs[k]

    def key(self, digits=12):
        return tuple(tuple(np.round(p, digits)) for p in self.pmfs)

    def format(self):
        return ";".join(",".join(f"{v:.6g}" for v in p) for p in self.pmfs)

    @classmethod
    def uniform(cls, sizes):
        return cls(tuple(np.full(n, 1.0 / n) for n in sizes))


def parse_pmf(text, sizes=None):
    """Parse ``"1/3,1/3,1/3;1/2,1/2;1"`` into a ProductInput."""
    parts = text.split(";")
    if len(parts) != 3:
        raise UsageError("pmf string needs three ';'-separated sender pmfs")
    pmfs = []
    for part in parts:
        try:
            pmfs.append(np.array([float(Fraction(v.strip())) for v in part.split(",")]))
        except (ValueError, ZeroDivisionError) as exc:
            raise UsageError(f"cannot parse pmf component {part!r}") from exc
    if sizes is not None:
        for k, (p, n) in enumerate(zip(pmfs, sizes)):
            if p.size != n:
                raise UsageError(f"sender {k + 1} pmf has {p.size} entries, alphabet has {n}")
    return ProductInput(tuple(pmfs))


class SignalDistribution:
    """Joint law of every network signal induced by a product input."""

    def __init__(self, spec, inp):
        self.spec = spec
        self.input = inp
        self.joint = np.einsum("i,j,k->ijk", *inp.pmfs)
        self._flat = self.joint.ravel()

    def pmf(self, variables):
        """Joint pmf over the observed values of ``variables`` (dense labels)."""
        codes, n = self.spec.joint_codes(variables)
        return np.bincount(codes, weights=self._flat, minlength=n)

    def marginal(self, var):
        """Pmf of a single signal indexed by its alphabet symbols."""
        table = self.spec.signal_tables[var].ravel()
        return np.bincount(table, weights=self._flat, minlength=self.spec.alphabet_size(var))

    def entropy(self, variables):
        if not variables:
            return 0.0
        return entropy_bits(self.pmf(variables))

    def conditional_entropy(self, variables, given):
        variables, given = list(variables), list(given)
        if not variables:
            return 0.0
        return self.entropy(variables + given) - self.entropy(given)

    def mutual_information(self, a, b, given=()):
        a, b, given = list(a), list(b), list(given)
        return (
            self.entropy(a + given) + self.entropy(b + given)
            - self.entropy(a + b + given) - self.entropy(given)
        )


def push_forward(spec, inp):
    for k, (p, n) in enumerate(zip(inp.pmfs, spec.input_sizes)):
        if p.size != n:
            raise UsageError(f"sender {k + 1} pmf has {p.size} entries, alphabet has {n}")
    return SignalDistribution(spec, inp)


def entropy(dist, variables):
    return dist.entropy(list(variables))


def conditional_entropy(dist, variables, given):
    return dist.conditional_entropy(variables, given)


# -- simplex grids -----------------------------------------------------------------


def unit_fraction(step):
    """Return ``M`` for ``step == 1/M``; accepts Fraction, str, int or float."""
    try:
        frac = Fraction(step).limit_denominator(10**6) if isinstance(step, float) else Fraction(step)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad grid step {step!r}") from exc
    if frac <= 0 or frac.numerator != 1:
        raise UsageError(f"grid step must be a unit fraction 1/M, got {step!r}")
    return frac.denominator


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


def simplex_grid(dim, step):
    """All pmfs on ``dim`` symbols with entries in multiples of ``step``.

    Points come in lexicographic order of their integer numerators.
    """
    m = unit_fraction(step)
    if dim < 1:
        raise UsageError("simplex dimension must be >= 1")
    for comp in _compositions(m, dim):
        yield np.array(comp, dtype=float) / m


def grid_size(dim, step):
    m = unit_fraction(step)
    from math import comb

    return comb(m + dim - 1, dim - 1)


def refine_around(inp, radius, step):
    """Finer-grid product inputs within an L-infinity ball of ``inp``."""
    if radius < 0:
        raise UsageError("radius must be non-negative")
    if radius == 0:
        yield inp
        return
    per_sender = []
    for p in inp.pmfs:
        near = [q for q in simplex_grid(p.size, step) if np.max(np.abs(q - p)) <= radius + 1e-12]
        per_sender.append(near)
    for combo in itertools.product(*per_sender):
        yield ProductInput(tuple(combo))
