"""Per-pmf achievable rate regions of the 3-DIC.

Strict rate inequalities are replaced by their closures.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channel import CROSS, FAILED, SAMPLED, check_invertible_h, check_strong_interference
from .errors import PreconditionError, UsageError
from .geometry import E, ZERO, MinConstraint, RateRegion, box_region, cap
from .prob import push_forward


@dataclass(frozen=True)
class ReceiverTerms:
    """Right-hand sides and saturation levels of the four decodability conditions at one receiver.

    ``single`` bounds R_k alone, ``pair_a`` bounds R_k + min{R_a, sat_a},
    ``pair_b`` bounds R_k + min{R_b, sat_b} and ``total`` bounds the four-way
    min involving the combined interference.
    """

    k: int
    single: float
    pair_a: float
    pair_b: float
    total: float
    sat_a: float
    sat_b: float
    sat_s: float


def receiver_entropies(dist, k):
    a, b = CROSS[k]
    K, A, B = k + 1, a + 1, b + 1
    h_xa = dist.entropy([f"X{A}{K}"])
    h_xb = dist.entropy([f"X{B}{K}"])
    return {
        "H_direct": dist.entropy([f"X{K}{K}"]),
        "H_xa": h_xa,
        "H_xb": h_xb,
        "H_s": dist.entropy([f"S{K}"]),
        "H_y": dist.entropy([f"Y{K}"]),
        "H_y_given_xa": dist.entropy([f"Y{K}", f"X{A}{K}"]) - h_xa,
        "H_y_given_xb": dist.entropy([f"Y{K}", f"X{B}{K}"]) - h_xb,
    }


def noiseless_terms(dist, k):
    h = receiver_entropies(dist, k)
    return ReceiverTerms(
        k,
        single=h["H_direct"],
        pair_a=h["H_y_given_xb"],
        pair_b=h["H_y_given_xa"],
        total=h["H_y"],
        sat_a=h["H_xa"],
        sat_b=h["H_xb"],
        sat_s=h["H_s"],
    )


def receiver_constraints(t):
    k = t.k
    a, b = CROSS[k]
    K = k + 1
    ek, ea, eb = E[k], E[a], E[b]
    return (
        MinConstraint.halfspace(ek, t.single, f"R{K}"),
        MinConstraint.with_min(ek, [(ea, 0.0), (ZERO, t.sat_a)], t.pair_a, f"R{K}+min(R{a + 1},H)"),
        MinConstraint.with_min(ek, [(eb, 0.0), (ZERO, t.sat_b)], t.pair_b, f"R{K}+min(R{b + 1},H)"),
        MinConstraint.with_min(
            ek,
            [(ea + eb, 0.0), (ea, t.sat_b), (eb, t.sat_a), (ZERO, t.sat_s)],
            t.total,
            f"R{K}+min(...,H(S{K}))",
        ),
    )


def id_region_from_terms(terms, label="ID"):
    cons = tuple(c for t in terms for c in receiver_constraints(t))
    return RateRegion(cons, label)


def id_region_at(spec, inp):
    """Interference-decoding region at one product input (intersection over receivers)."""
    dist = push_forward(spec, inp)
    return id_region_from_terms([noiseless_terms(dist, k) for k in range(3)])


def receiver_region(spec, inp, k, upper=None):
    """Decodability region of receiver ``k`` alone, capped for plotting.

    The uncapped region is unbounded in the two interfering rates; ``upper``
    defaults to ``log2|X| + 1`` per coordinate.
    """
    dist = push_forward(spec, inp)
    region = RateRegion(receiver_constraints(noiseless_terms(dist, k)), f"R_{k + 1}")
    if upper is None:
        upper = np.log2(np.array(spec.input_sizes, dtype=float)) + 1.0
    return cap(region, upper)


def tin_bounds(dist):
    return np.array([dist.entropy([f"Y{k + 1}"]) - dist.entropy([f"S{k + 1}"]) for k in range(3)])


def tin_region_at(spec, inp):
    """Treating-interference-as-noise box ``R_k <= H(Y_k) - H(S_k)``."""
    dist = push_forward(spec, inp)
    return box_region(np.clip(tin_bounds(dist), 0.0, None), "TIN")


def strong_region_from_entropies(h_direct, h_y, h_y_given):
    """Polyhedron of the strong-interference capacity region.

    ``h_y_given[k][l]`` is H(Y_k | X_lk) for the cross sender ``l``.
    """
    cons = [MinConstraint.halfspace(E[k], h_direct[k], f"R{k + 1}") for k in range(3)]
    for i, j in ((0, 1), (0, 2), (1, 2)):
        (other,) = {0, 1, 2} - {i, j}
        # R_i + R_j <= min{H(Y_i | X_other,i), H(Y_j | X_other,j)}
        rhs = min(h_y_given[i][other], h_y_given[j][other])
        cons.append(MinConstraint.halfspace(E[i] + E[j], rhs, f"R{i + 1}+R{j + 1}"))
    cons.append(MinConstraint.halfspace(np.ones(3), min(h_y), "R1+R2+R3"))
    return RateRegion(cons, "strong")


def strong_capacity_at(spec, inp, override=False, n_samples=200, seed=0):
    strong = check_strong_interference(spec, n_samples, seed)
    invertible = check_invertible_h(spec, n_samples, seed)
    for check in (strong, invertible):
        if check.verdict == FAILED and not override:
            raise PreconditionError(
                f"{spec.name}: {check.name} check failed ({check.detail}); pass override=True to force"
            )
        if check.verdict == SAMPLED:
            warnings.warn(f"{spec.name}: {check.name} verified by sampling only", stacklevel=2)
    dist = push_forward(spec, inp)
    h_direct = [dist.entropy([f"X{k + 1}{k + 1}"]) for k in range(3)]
    h_y = [dist.entropy([f"Y{k + 1}"]) for k in range(3)]
    h_y_given = [dict() for _ in range(3)]
    for k in range(3):
        for l in CROSS[k]:
            h_y_given[k][l] = dist.conditional_entropy([f"Y{k + 1}"], [f"X{l + 1}{k + 1}"])
    return strong_region_from_entropies(h_direct, h_y, h_y_given)


def two_user_id_region_at(spec, inp):
    """Interference decoding for a two-user channel (sender 3 silent), written out directly.

    R1 <= H(X11), R2 <= H(X22), R1 + min{R2, H(S1)} <= H(Y1),
    R2 + min{R1, H(S2)} <= H(Y2), and R3 = 0.
    """
    if not spec.is_two_user:
        raise UsageError(f"{spec.name} is not a two-user channel (|X3| must be 1)")
    dist = push_forward(spec, inp)
    cons = [
        MinConstraint.halfspace(E[0], dist.entropy(["X11"]), "R1"),
        MinConstraint.halfspace(E[1], dist.entropy(["X22"]), "R2"),
        MinConstraint.with_min(E[0], [(E[1], 0.0), (ZERO, dist.entropy(["S1"]))], dist.entropy(["Y1"]), "R1+min"),
        MinConstraint.with_min(E[1], [(E[0], 0.0), (ZERO, dist.entropy(["S2"]))], dist.entropy(["Y2"]), "R2+min"),
        MinConstraint.halfspace(E[2], 0.0, "R3=0"),
    ]
    return RateRegion(tuple(cons), "2-DIC ID")
