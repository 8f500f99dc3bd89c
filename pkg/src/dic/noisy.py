"""Regions for the 3-DIC whose outputs are seen through memoryless channels Y_k -> Z_k.

Discrete observation channels are handled exactly. For additive Gaussian
observations every conditional output law is a finite Gaussian mixture whose
differential entropy is integrated numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import xlogy

from .channel import CROSS, ChannelSpec
from .errors import AccuracyError, SpecError, UsageError
from .geometry import box_region
from .prob import entropy_bits
from .region import ReceiverTerms, id_region_from_terms

LN2 = np.log(2.0)
MI_TOL = 1e-6  # bits
IDENTITY_SIGMA2 = 1e-12


def gaussian_entropy(sigma2):
    """Differential entropy of N(0, sigma2) in bits."""
    return 0.5 * np.log2(2 * np.pi * np.e * sigma2)


@dataclass(frozen=True)
class ObservationChannel:
    kind: str  # "discrete" or "gaussian"
    matrices: tuple | None = None  # per receiver, rows P(z | y)
    sigma2: float | None = None

    def __post_init__(self):
        if self.kind == "discrete":
            mats = tuple(np.asarray(m, dtype=float) for m in self.matrices)
            if len(mats) != 3:
                raise UsageError("need one observation matrix per receiver")
            for m in mats:
                if m.ndim != 2 or np.any(m < 0) or not np.allclose(m.sum(axis=1), 1.0, atol=1e-12):
                    raise UsageError("observation matrices must be row-stochastic")
            object.__setattr__(self, "matrices", mats)
        elif self.kind == "gaussian":
            if self.sigma2 is None or self.sigma2 <= 0:
                raise UsageError("Gaussian observation needs sigma2 > 0")
        else:
            raise UsageError(f"unknown observation kind {self.kind!r}")

    @classmethod
    def identity(cls, spec):
        return cls("discrete", tuple(np.eye(n) for n in spec.y_sizes))

    @classmethod
    def gaussian(cls, sigma2):
        return cls("gaussian", sigma2=float(sigma2))

    def resolve(self, spec):
        """Gaussian noise at or below 1e-12 counts as a noiseless observation."""
        if self.kind == "gaussian" and self.sigma2 <= IDENTITY_SIGMA2:
            return ObservationChannel.identity(spec)
        if self.kind == "gaussian" and spec.y_values is None:
            raise SpecError(f"{spec.name}: Gaussian observation needs real output values")
        if self.kind == "discrete":
            for k, m in enumerate(self.matrices):
                if m.shape[0] != spec.y_sizes[k]:
                    raise UsageError(f"observation matrix {k + 1} has {m.shape[0]} rows, |Y{k + 1}|={spec.y_sizes[k]}")
        return self


def _merge_values(values, tol=1e-12):
    """Dense labels for real values, merging those within ``tol``."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    labels = np.empty(len(values), dtype=np.int64)
    uniq = []
    for i in order:
        if uniq and abs(values[i] - uniq[-1]) <= tol:
            labels[i] = len(uniq) - 1
        else:
            uniq.append(values[i])
            labels[i] = len(uniq) - 1
    return labels, np.array(uniq)


@dataclass(frozen=True)
class GaussianNetSpec:
    """Real-gain network ``Y_k = sum_l g_lk X_l`` over finite real input alphabets."""

    gains: np.ndarray  # gains[l][k]
    alphabets: tuple
    name: str = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=float).reshape(3, 3))
        object.__setattr__(self, "alphabets", tuple(np.asarray(a, dtype=float) for a in self.alphabets))

    def to_channel_spec(self):
        g = [[None] * 3 for _ in range(3)]
        inter_vals = [[None] * 3 for _ in range(3)]
        for l in range(3):
            for k in range(3):
                g[l][k], inter_vals[l][k] = _merge_values(self.gains[l, k] * self.alphabets[l])
        h, f, s_vals, y_vals = [], [], [], []
        for k in range(3):
            a, b = CROSS[k]
            sums = np.add.outer(inter_vals[a][k], inter_vals[b][k])
            lab, sv = _merge_values(sums.ravel())
            h.append(lab.reshape(sums.shape))
            s_vals.append(sv)
            ys = np.add.outer(inter_vals[k][k], sv)
            lab, yv = _merge_values(ys.ravel())
            f.append(lab.reshape(ys.shape))
            y_vals.append(yv)
        inter = [[len(inter_vals[l][k]) for k in range(3)] for l in range(3)]
        return ChannelSpec(
            self.name, tuple(len(a) for a in self.alphabets), inter,
            tuple(len(v) for v in s_vals), tuple(len(v) for v in y_vals), g, h, f,
            input_values=self.alphabets, y_values=tuple(y_vals),
        )


def cyclic_gains(direct, from_prev, from_next):
    """Cyclically symmetric gain matrix ``gains[l][k]``.

    ``from_prev`` is g_21 (and g_32, g_13); ``from_next`` is g_31 (and g_12, g_23).
    """
    gains = np.zeros((3, 3))
    for k in range(3):
        gains[k, k] = direct
        gains[(k + 1) % 3, k] = from_prev
        gains[(k + 2) % 3, k] = from_next
    return gains


def bpsk_example():
    """BPSK network with g11 = 1.8, g21 = 1.0, g31 = 1.1 (cyclically symmetric)."""
    bpsk = np.array([1.0, -1.0])
    return GaussianNetSpec(cyclic_gains(1.8, 1.0, 1.1), (bpsk, bpsk, bpsk), "gaussian-bpsk")


# -- Gaussian mixture entropies -------------------------------------------------------


def mixture_entropies(means, weights, sigma2, tol=MI_TOL, chunk=20000):
    """Differential entropies (bits) of mixtures ``sum_c w_c N(means_c, sigma2)``.

    ``weights`` is (R, C). Rows that put all mass on one component use the
    closed form; the rest are integrated by adaptive Gauss-Kronrod over
    ``[min mean - 10 sigma, max mean + 10 sigma]``. Returns ``(h, err)``.
    """
    means = np.asarray(means, dtype=float)
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    sigma = np.sqrt(sigma2)
    out = np.full(len(weights), gaussian_entropy(sigma2))
    worst = 0.0
    multi = np.count_nonzero(weights > 1e-300, axis=1) > 1
    if not multi.any():
        return out, worst
    rows = weights[multi]
    uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    used = uniq.any(axis=0)
    mu = means[used]
    lo, hi = mu.min() - 10 * sigma, mu.max() + 10 * sigma
    norm = 1.0 / np.sqrt(2 * np.pi * sigma2)
    vals = np.empty(len(uniq))
    for start in range(0, len(uniq), chunk):
        w = uniq[start : start + chunk][:, used]

        def integrand(z, w=w):
            dens = w @ (norm * np.exp(-0.5 * (z - mu) ** 2 / sigma2))
            return -xlogy(dens, dens) / LN2

        res, err = quad_vec(
            integrand, lo, hi, epsabs=tol / 100, epsrel=0.0, norm="max", limit=20000,
            points=np.unique(mu),
        )
        worst = max(worst, float(err))
        vals[start : start + chunk] = res
    if worst > tol:
        raise AccuracyError("Gaussian mixture entropy did not reach tolerance", worst)
    out[multi] = vals[inverse]
    return out, worst


# -- conditional output entropies ---------------------------------------------------------


def _output_given(spec, joints, k, cond):
    """P(B = b, Y_k = y) for every input: array (n_inputs, n_b, |Y_k|)."""
    codes, nb = spec.joint_codes(cond)
    ycodes = spec.signal_tables[f"Y{k + 1}"].ravel()
    ny = spec.y_sizes[k]
    key = ("indicator", k, tuple(sorted(cond)))
    ind = spec._cache.get(key)
    if ind is None:
        ind = np.zeros((len(codes), nb * ny))
        ind[np.arange(len(codes)), codes * ny + ycodes] = 1.0
        spec._cache[key] = ind
    return (joints @ ind).reshape(len(joints), nb, ny)


def conditional_output_entropies(spec, obs, joints, k, conds, tol=MI_TOL):
    """H(Z_k | B) (differential for Gaussian) for each input and each conditioning set.

    Returns an array (n_inputs, len(conds)).
    """
    out = np.zeros((len(joints), len(conds)))
    if obs.kind == "discrete":
        mat = obs.matrices[k]
        for j, cond in enumerate(conds):
            pby = _output_given(spec, joints, k, cond)
            pbz = pby @ mat
            pb = pbz.sum(axis=2)
            hbz = -np.sum(xlogy(pbz, pbz), axis=(1, 2)) / LN2
            hb = -np.sum(xlogy(pb, pb), axis=1) / LN2
            out[:, j] = hbz - hb
        return out
    rows, owners, masses = [], [], []
    for j, cond in enumerate(conds):
        pby = _output_given(spec, joints, k, cond)
        pb = pby.sum(axis=2)
        idx_in, idx_b = np.nonzero(pb > 0)
        rows.append(pby[idx_in, idx_b] / pb[idx_in, idx_b][:, None])
        owners.append(np.column_stack([idx_in, np.full(len(idx_in), j)]))
        masses.append(pb[idx_in, idx_b])
    rows = np.vstack(rows)
    owners = np.vstack(owners)
    masses = np.concatenate(masses)
    h, _ = mixture_entropies(spec.y_values[k], rows, obs.sigma2, tol)
    np.add.at(out, (owners[:, 0], owners[:, 1]), masses * h)
    return out


@dataclass(frozen=True)
class NoisyTerms:
    """Information quantities at one receiver (bits)."""

    k: int
    i_x_given_s: float  # I(X_k; Z_k | S_k)
    i_xa_given_b: float  # I(X_k, X_ak; Z_k | X_bk)
    i_xb_given_a: float  # I(X_k, X_bk; Z_k | X_ak)
    i_xs: float  # I(X_k, S_k; Z_k)
    i_x: float  # I(X_k; Z_k)
    i_s_given_x: float  # I(S_k; Z_k | X_k)
    h_xa: float
    h_xb: float
    h_s: float
    h_s_given_x: float

    def receiver_terms(self):
        return ReceiverTerms(
            self.k, self.i_x_given_s, self.i_xa_given_b, self.i_xb_given_a, self.i_xs,
            self.h_xa, self.h_xb, self.h_s,
        )

    @property
    def penalty(self):
        """H(S_k | X_k, Z_k) through the mutual-information route."""
        return self.h_s_given_x - self.i_s_given_x


def _discrete_entropies(spec, joints, variables):
    codes, n = spec.joint_codes(variables)
    p = np.zeros((len(joints), n))
    for c in range(n):
        p[:, c] = joints[:, codes == c].sum(axis=1)
    return -np.sum(xlogy(p, p), axis=1) / LN2


def mutual_info_terms_batch(spec, obs, inputs, tol=MI_TOL):
    """NoisyTerms for every input: list (per input) of 3 receivers."""
    obs = obs.resolve(spec)
    joints = np.array([np.einsum("i,j,k->ijk", *inp.pmfs).ravel() for inp in inputs])
    per_receiver = []
    for k in range(3):
        a, b = CROSS[k]
        K, A, B = k + 1, a + 1, b + 1
        xk, sk, xa, xb = f"X{K}", f"S{K}", f"X{A}{K}", f"X{B}{K}"
        conds = [[], [xk], [sk], [xa], [xb], [xk, sk], [xk, xa, xb]]
        hz = conditional_output_entropies(spec, obs, joints, k, conds, tol)
        h_none, h_x, h_s, h_a, h_b, h_xs, h_xab = hz.T
        h_xa = _discrete_entropies(spec, joints, [xa])
        h_xb = _discrete_entropies(spec, joints, [xb])
        h_sk = _discrete_entropies(spec, joints, [sk])
        h_x_only = _discrete_entropies(spec, joints, [xk])
        h_s_given_x = _discrete_entropies(spec, joints, [xk, sk]) - h_x_only
        per_receiver.append(
            [
                NoisyTerms(
                    k, h_s[i] - h_xs[i], h_b[i] - h_xab[i], h_a[i] - h_xab[i], h_none[i] - h_xs[i],
                    h_none[i] - h_x[i], h_x[i] - h_xs[i], h_xa[i], h_xb[i], h_sk[i], h_s_given_x[i],
                )
                for i in range(len(inputs))
            ]
        )
    return [[per_receiver[k][i] for k in range(3)] for i in range(len(inputs))]


def mutual_info_terms(spec, obs, inp, tol=MI_TOL):
    return mutual_info_terms_batch(spec, obs, [inp], tol)[0]


def id_region_from_noisy(terms):
    return id_region_from_terms([t.receiver_terms() for t in terms], "ID (noisy)")


def tin_region_from_noisy(terms):
    return box_region(np.clip([t.i_x for t in terms], 0.0, None), "TIN (noisy)")


def id_region_noisy_at(spec, obs, inp):
    return id_region_from_noisy(mutual_info_terms(spec, obs, inp))


def tin_region_noisy_at(spec, obs, inp):
    return tin_region_from_noisy(mutual_info_terms(spec, obs, inp))


# -- penalty ------------------------------------------------------------------------------


def _posterior_entropy_gaussian(means, weights, sigma2, tol):
    """Integral of p(z) H(S | z) for a mixture with component labels S."""
    sigma = np.sqrt(sigma2)
    lo, hi = means.min() - 10 * sigma, means.max() + 10 * sigma
    norm = 1.0 / np.sqrt(2 * np.pi * sigma2)

    def integrand(z):
        joint = weights * norm * np.exp(-0.5 * (z - means) ** 2 / sigma2)
        total = joint.sum()
        if total <= 0:
            return 0.0
        q = joint / total
        return float(-np.sum(xlogy(q, q)) / LN2 * total)

    res, err = quad_vec(integrand, lo, hi, epsabs=tol / 100, epsrel=0.0, limit=20000, points=np.unique(means))
    if err > tol:
        raise AccuracyError("posterior entropy did not reach tolerance", float(err))
    return float(res)


def penalty_term(spec, obs, inp, k, tol=MI_TOL, check=True):
    """H(S_k | X_k, Z_k), computed directly from the posterior of S_k.

    With ``check`` the value is compared against the mutual-information route
    ``I(X_k;Z_k) - [I(X_k,S_k;Z_k) - H(S_k)]``.
    """
    obs = obs.resolve(spec)
    K = k + 1
    joint = np.einsum("i,j,k->ijk", *inp.pmfs).ravel()
    xs = spec.signal_tables[f"X{K}"].ravel()
    ss = spec.signal_tables[f"S{K}"].ravel()
    ys = spec.signal_tables[f"Y{K}"].ravel()
    nx, ns, ny = spec.input_sizes[k], spec.s_sizes[k], spec.y_sizes[k]
    pxsy = np.zeros((nx, ns, ny))
    np.add.at(pxsy, (xs, ss, ys), joint)
    if obs.kind == "discrete":
        pxsz = pxsy @ obs.matrices[k]
        pxz = pxsz.sum(axis=1)
        value = entropy_bits(pxsz.ravel()) - entropy_bits(pxz.ravel())
    else:
        value = 0.0
        for x in range(nx):
            px = pxsy[x].sum()
            if px <= 0:
                continue
            s_idx, y_idx = np.nonzero(pxsy[x] > 0)
            if len(s_idx) <= 1:
                continue
            w = pxsy[x][s_idx, y_idx] / px
            means = spec.y_values[k][y_idx]
            value += px * _posterior_entropy_gaussian(means, w, obs.sigma2, tol)
    if check:
        t = mutual_info_terms(spec, obs, inp, tol)[k]
        other = t.i_x - (t.i_xs - t.h_s)
        if abs(other - value) > 10 * tol:
            raise AccuracyError(f"penalty routes disagree ({value:.6f} vs {other:.6f})", abs(other - value))
    return value
