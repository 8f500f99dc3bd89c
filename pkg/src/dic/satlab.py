"""Counting experiments on random codebooks through a deterministic MAC.

Two i.i.d. codebooks of sizes ceil(2^{nR1}) and ceil(2^{nR2}) are pushed
through a symbolwise map h and the distinct output sequences are counted.

Only the set of *distinct* codewords matters for the count, so codebooks are
drawn through the order in which sequences first appear in an i.i.d. stream:
sorting ``E_x / p(x)`` with ``E_x ~ Exp(1)`` gives that order, and the draw
index of the j-th new sequence is ``tau_{j+1} = tau_j + Geom(1 - P_j)`` with
``P_j`` the mass already seen. A codebook of size M is then the prefix
``{x_(j) : tau_j <= M}``; prefixes nest across rates for a fixed seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ResourceGuardError, UsageError
from .prob import check_pmf, entropy_bits

SEQUENCE_GUARD_BITS = 24  # per-codebook sequence space
OUTPUT_GUARD_BITS = 27  # bitmap over output sequences
MAX_N = 20
PAIR_CHUNK = 1 << 22


@dataclass(frozen=True)
class Mac:
    name: str
    table: np.ndarray  # h[b1, b2] -> b
    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.int64)
        if table.ndim != 2 or table.min() < 0:
            raise UsageError("MAC table must be a 2-D array of output indices")
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "p1", check_pmf(self.p1))
        object.__setattr__(self, "p2", check_pmf(self.p2))
        if self.p1.size != table.shape[0] or self.p2.size != table.shape[1]:
            raise UsageError("MAC pmfs do not match the table shape")
        for axis in (0, 1):
            rows = table if axis == 0 else table.T
            for r in rows:
                if len(np.unique(r)) != len(r):
                    raise UsageError(f"MAC {self.name}: h is not injective with one argument fixed")

    @property
    def n_out(self):
        return int(self.table.max()) + 1

    def output_pmf(self):
        return np.bincount(self.table.ravel(), weights=np.outer(self.p1, self.p2).ravel(), minlength=self.n_out)

    def entropies(self):
        return entropy_bits(self.p1), entropy_bits(self.p2), entropy_bits(self.output_pmf())


def adder_mac(p1=(0.5, 0.5), p2=(0.5, 0.5)):
    return Mac("adder", np.add.outer(np.arange(2), np.arange(2)), np.asarray(p1), np.asarray(p2))


def xor_mac(p1=(0.5, 0.5), p2=(0.5, 0.5)):
    return Mac("xor", np.bitwise_xor.outer(np.arange(2), np.arange(2)), np.asarray(p1), np.asarray(p2))


MACS = {"adder": adder_mac, "xor": xor_mac}


def builtin_mac(name, p1=None, p2=None):
    if name not in MACS:
        raise UsageError(f"unknown MAC {name!r}; choose from {', '.join(MACS)}")
    kwargs = {}
    if p1 is not None:
        kwargs["p1"] = p1
    if p2 is not None:
        kwargs["p2"] = p2
    return MACS[name](**kwargs)


@dataclass(frozen=True)
class MacExperiment:
    mac: Mac
    R1: float
    R2: float
    n: int
    trials: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.R1 < 0 or self.R2 < 0:
            raise UsageError("rates must be non-negative")
        if self.n < 1 or self.trials < 1:
            raise UsageError("need n >= 1 and trials >= 1")

    @property
    def sizes(self):
        return codebook_size(self.n, self.R1), codebook_size(self.n, self.R2)


def codebook_size(n, rate):
    """ceil(2^{nR}), never below one codeword."""
    return max(1, math.ceil(2.0 ** (n * rate) - 1e-9))


def predicted_exponent(exp):
    """min{R1+R2, R1+H(B2), H(B1)+R2, H(B)}."""
    h1, h2, hb = exp.mac.entropies()
    return min(exp.R1 + exp.R2, exp.R1 + h2, h1 + exp.R2, hb)


def counting_bound(exp):
    """Hard upper bound on the exponent: pairs of (ceiled) codebook sizes or the whole output space."""
    m1, m2 = exp.sizes
    return min(math.log2(m1) + math.log2(m2), exp.n * math.log2(exp.mac.n_out)) / exp.n


# -- codebook draws -----------------------------------------------------------------------


def _check_guards(mac, n):
    if n > MAX_N:
        raise ResourceGuardError(f"blocklength n={n} exceeds the limit {MAX_N}")
    s1, s2 = np.count_nonzero(mac.p1), np.count_nonzero(mac.p2)
    for s in (s1, s2):
        if n * math.log2(max(s, 1)) > SEQUENCE_GUARD_BITS:
            raise ResourceGuardError(
                f"{s}^{n} candidate codewords exceeds 2^{SEQUENCE_GUARD_BITS}; lower n"
            )
    if n * math.log2(mac.n_out) > OUTPUT_GUARD_BITS:
        raise ResourceGuardError(f"{mac.n_out}^{n} output sequences exceeds 2^{OUTPUT_GUARD_BITS}; lower n")


def _digits(idx, m, n):
    """Base-m digits (least significant first) of sequence indices, shape (len, n)."""
    idx = np.asarray(idx, dtype=np.int64)
    return (idx[:, None] // (m ** np.arange(n, dtype=np.int64))) % m


def _sequence_log_probs(p, n):
    """log p(x^n) for every sequence over the support (base-|supp| index order)."""
    logp = np.log(p[p > 0])
    m = logp.size
    out = np.zeros(1)
    for _ in range(n):
        # index = sum_i d_i m^i: the newest digit is the most significant
        out = (logp[:, None] + out[None, :]).ravel()
    return out, m


@dataclass
class DistinctStream:
    """Sequences in order of first appearance and the draw index of each first appearance."""

    order: np.ndarray
    times: np.ndarray
    m: int

    def prefix(self, size):
        return self.order[: int(np.searchsorted(self.times, size, side="right"))]

    def full(self, size):
        return self.times[-1] <= size


def draw_stream(p, n, rng):
    logp, m = _sequence_log_probs(p, n)
    keys = np.log(rng.exponential(size=logp.size)) - logp
    order = np.argsort(keys, kind="stable")
    probs = np.exp(logp[order])
    # unseen mass after the first j sequences, computed from the tail for accuracy
    remaining = np.cumsum(probs[::-1])[::-1][1:]
    gaps = rng.geometric(np.clip(remaining, 1e-300, 1.0)).astype(float)
    times = np.concatenate([[1.0], 1.0 + np.cumsum(gaps)])
    return DistinctStream(order, times, m)


# -- counting -----------------------------------------------------------------------------


def _support_table(mac):
    s1 = np.flatnonzero(mac.p1 > 0)
    s2 = np.flatnonzero(mac.p2 > 0)
    return mac.table[np.ix_(s1, s2)]


def _count_with_full(table, seqs2, m2, n, n_out):
    """Distinct outputs when the first codebook holds every support sequence.

    An output o is reachable iff some codeword c has o_i in h(supp1, c_i) for
    all i, so the indicator of codebook 2 is mapped axis by axis through
    ``out[o] = OR_{c : o in h(supp1, c)} in[c]``.
    """
    ind = np.zeros(m2**n, dtype=bool)
    ind[seqs2] = True
    ind = ind.reshape((m2,) * n)
    reach = [np.flatnonzero(np.isin(np.arange(m2), [c for c in range(m2) if o in table[:, c]])) for o in range(n_out)]
    for axis in range(n):
        ind = np.stack([np.any(np.take(ind, r, axis=axis), axis=axis) for r in reach], axis=axis)
    return int(np.count_nonzero(ind))


def _count_direct(table, seqs1, seqs2, m1, m2, n, n_out):
    nl = n // 2
    nh = n - nl

    def half_table(length):
        d1 = _digits(np.arange(m1**length), m1, length)
        d2 = _digits(np.arange(m2**length), m2, length)
        weights = n_out ** np.arange(length, dtype=np.int64)
        return (table[d1[:, None, :], d2[None, :, :]] * weights).sum(axis=2)

    t_lo = half_table(nl)
    t_hi = half_table(nh) * n_out**nl
    lo1, hi1 = seqs1 % m1**nl, seqs1 // m1**nl
    lo2, hi2 = seqs2 % m2**nl, seqs2 // m2**nl
    seen = np.zeros(n_out**n, dtype=bool)
    rows = max(1, PAIR_CHUNK // max(len(seqs2), 1))
    for start in range(0, len(seqs1), rows):
        a_lo, a_hi = lo1[start : start + rows, None], hi1[start : start + rows, None]
        seen[t_lo[a_lo, lo2] + t_hi[a_hi, hi2]] = True
    return int(np.count_nonzero(seen))


def count_outputs(mac, seqs1, seqs2, n, full1=False, full2=False):
    """Number of distinct h-images of (codeword 1, codeword 2) pairs.

    ``seqs`` are sequence indices over each support (base |supp|, least
    significant symbol first).
    """
    table = _support_table(mac)
    m1, m2 = table.shape
    n_out = mac.n_out
    if full1:
        return _count_with_full(table, seqs2, m2, n, n_out)
    if full2:
        return _count_with_full(table.T, seqs1, m1, n, n_out)
    return _count_direct(table, np.asarray(seqs1), np.asarray(seqs2), m1, m2, n, n_out)


def brute_force_count(mac, seqs1, seqs2, n):
    """Reference count by forming every pair explicitly (small inputs only)."""
    table = _support_table(mac)
    m1, m2 = table.shape
    d1 = _digits(seqs1, m1, n)
    d2 = _digits(seqs2, m2, n)
    outs = table[d1[:, None, :], d2[None, :, :]].reshape(-1, n)
    return len(np.unique(outs, axis=0))


def brute_force_distinct(p, n, size, rng):
    """Draw ``size`` i.i.d. codewords literally and return the distinct sequence indices."""
    support = np.flatnonzero(np.asarray(p) > 0)
    q = np.asarray(p)[support] / np.sum(np.asarray(p)[support])
    draws = rng.choice(support.size, size=(size, n), p=q)
    return np.unique((draws * support.size ** np.arange(n)).sum(axis=1))


# -- experiments --------------------------------------------------------------------------


@dataclass
class ExponentEstimate:
    value: float  # (1/n) log2(mean count)
    stddev: float  # across trials, of per-trial exponents
    counts: list = field(default_factory=list)

    def __str__(self):
        return f"{self.value:.4f} ± {self.stddev:.4f}"


class _TrialCounts:
    """Draws for one trial, shared across rate pairs so that codebooks nest."""

    def __init__(self, mac, n, seed):
        rng = np.random.default_rng(seed)
        self.mac, self.n = mac, n
        self.s1 = draw_stream(mac.p1, n, rng)
        self.s2 = draw_stream(mac.p2, n, rng)
        self._memo = {}

    def count(self, size1, size2):
        a, b = self.s1.prefix(size1), self.s2.prefix(size2)
        f1, f2 = self.s1.full(size1), self.s2.full(size2)
        key = (len(a), len(b))
        if key not in self._memo:
            self._memo[key] = count_outputs(self.mac, a, b, self.n, f1, f2)
        return self._memo[key]


def _estimate(counts, n):
    counts = np.asarray(counts, dtype=float)
    per_trial = np.log2(counts) / n
    return ExponentEstimate(float(np.log2(counts.mean()) / n), float(per_trial.std()), counts.astype(int).tolist())


def empirical_exponent(exp):
    _check_guards(exp.mac, exp.n)
    m1, m2 = exp.sizes
    counts = [_TrialCounts(exp.mac, exp.n, exp.seed + t).count(m1, m2) for t in range(exp.trials)]
    return _estimate(counts, exp.n)


def rate_grid(stop=2.0, step=0.25):
    k = int(round(stop / step))
    return [round(i * step, 12) for i in range(k + 1)]


@dataclass(frozen=True)
class ExponentRow:
    R1: float
    R2: float
    predicted: float
    empirical: float
    stddev: float

    @property
    def deviation(self):
        return abs(self.empirical - self.predicted)


def sweep_exponent_map(mac, rates1, rates2, n, trials, seed=0):
    """Predicted and empirical exponents over a rate grid (rows ordered by R1 then R2)."""
    _check_guards(mac, n)
    per_trial = [_TrialCounts(mac, n, seed + t) for t in range(trials)]
    rows = []
    for r1 in rates1:
        for r2 in rates2:
            exp = MacExperiment(mac, r1, r2, n, trials, seed)
            m1, m2 = exp.sizes
            est = _estimate([tc.count(m1, m2) for tc in per_trial], n)
            rows.append(ExponentRow(r1, r2, predicted_exponent(exp), est.value, est.stddev))
    return rows


def write_exponent_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["R1", "R2", "predicted", "empirical", "stddev"])
        for r in rows:
            w.writerow([f"{r.R1:.6f}", f"{r.R2:.6f}", f"{r.predicted:.6f}", f"{r.empirical:.6f}", f"{r.stddev:.6f}"])
