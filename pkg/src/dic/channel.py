"""Three-user-pair deterministic interference channels.

A channel is given by lookup tables over dense integer alphabets:

* ``g[l][k]`` maps an input symbol of sender ``l`` to the intermediate
  symbol ``X_lk`` seen at receiver ``k``;
* ``h[k]`` combines the two cross intermediates of receiver ``k`` (senders in
  ascending order) into the combined interference ``S_k``;
* ``f[k]`` maps ``(X_kk, S_k)`` to the output ``Y_k``.

Indices are zero-based throughout the code (sender 0 is "sender 1" in
user-facing names such as ``X21`` or ``S1``).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import SpecError, UsageError
from .prob import entropy_bits

CROSS = ((1, 2), (0, 2), (0, 1))

PROVED = "proved-structurally"
SAMPLED = "passed-sampled"
FAILED = "failed"


def cross_senders(k):
    """Senders interfering at receiver ``k``, ascending."""
    return CROSS[k]


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    name: str
    input_sizes: tuple
    inter_sizes: tuple  # 3x3, inter_sizes[l][k] = |X_lk|
    s_sizes: tuple
    y_sizes: tuple
    g: tuple  # g[l][k]: int array of length input_sizes[l]
    h: tuple  # h[k]: int array (|X_ak|, |X_bk|)
    f: tuple  # f[k]: int array (|X_kk|, |S_k|)
    input_values: tuple | None = None
    y_values: tuple | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        def frozen(a):
            a = np.array(a, dtype=np.int64)
            a.setflags(write=False)
            return a

        object.__setattr__(self, "input_sizes", tuple(int(n) for n in self.input_sizes))
        object.__setattr__(
            self, "inter_sizes", tuple(tuple(int(n) for n in row) for row in self.inter_sizes)
        )
        object.__setattr__(self, "s_sizes", tuple(int(n) for n in self.s_sizes))
        object.__setattr__(self, "y_sizes", tuple(int(n) for n in self.y_sizes))
        object.__setattr__(self, "g", tuple(tuple(frozen(t) for t in row) for row in self.g))
        object.__setattr__(self, "h", tuple(frozen(t) for t in self.h))
        object.__setattr__(self, "f", tuple(frozen(t) for t in self.f))
        if self.input_values is not None:
            object.__setattr__(
                self, "input_values", tuple(np.asarray(v, dtype=float) for v in self.input_values)
            )
        if self.y_values is not None:
            object.__setattr__(
                self, "y_values", tuple(np.asarray(v, dtype=float) for v in self.y_values)
            )

    @property
    def is_two_user(self):
        return self.input_sizes[2] == 1

    @cached_property
    def signal_tables(self):
        """Every network signal as an int array over the input grid (n1, n2, n3)."""
        x = np.meshgrid(*(np.arange(n) for n in self.input_sizes), indexing="ij")
        tables = {}
        for l in range(3):
            tables[f"X{l + 1}"] = x[l]
            for k in range(3):
                tables[f"X{l + 1}{k + 1}"] = self.g[l][k][x[l]]
        for k in range(3):
            a, b = CROSS[k]
            s = self.h[k][tables[f"X{a + 1}{k + 1}"], tables[f"X{b + 1}{k + 1}"]]
            tables[f"S{k + 1}"] = s
            tables[f"Y{k + 1}"] = self.f[k][tables[f"X{k + 1}{k + 1}"], s]
        for t in tables.values():
            t.setflags(write=False)
        return tables

    def alphabet_size(self, var):
        kind, digits = var[0], var[1:]
        if kind == "X" and len(digits) == 1:
            return self.input_sizes[int(digits) - 1]
        if kind == "X":
            return self.inter_sizes[int(digits[0]) - 1][int(digits[1]) - 1]
        if kind == "S":
            return self.s_sizes[int(digits) - 1]
        if kind == "Y":
            return self.y_sizes[int(digits) - 1]
        raise UsageError(f"unknown signal {var!r}")

    def joint_codes(self, variables):
        """Flat integer labels of the joint value of ``variables`` over the input grid.

        Returns ``(codes, n_codes)``; labels are dense in ``range(n_codes)``.
        """
        key = tuple(sorted(set(variables)))
        cache = self._cache.setdefault("codes", {})
        if key not in cache:
            if not key:
                codes, n = np.zeros(int(np.prod(self.input_sizes)), dtype=np.int64), 1
            else:
                tables = self.signal_tables
                for v in key:
                    if v not in tables:
                        raise UsageError(f"unknown signal {v!r}")
                flat = np.zeros(tables["X1"].size, dtype=np.int64)
                for v in key:
                    flat = flat * self.alphabet_size(v) + tables[v].ravel()
                _, codes = np.unique(flat, return_inverse=True)
                codes = codes.ravel()
                n = int(codes.max()) + 1
            codes.setflags(write=False)
            cache[key] = (codes, n)
        return cache[key]


@dataclass(frozen=True)
class NetworkSignals:
    x: tuple  # x[l][k]
    s: tuple
    y: tuple


@dataclass
class CheckResult:
    name: str
    passed: bool
    verdict: str = ""
    detail: str = ""
    witness: object = None
    required: bool = True  # False for hypotheses that only gate the strong-interference region


@dataclass
class ValidationReport:
    spec_name: str
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks if c.required)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def format_table(self):
        width = max(len(c.name) for c in self.checks)
        lines = [f"channel: {self.spec_name}"]
        for c in self.checks:
            status = ("PASS" if c.passed else "FAIL") if c.required else ("holds" if c.passed else "no")
            extra = " ".join(s for s in (c.verdict, c.detail) if s)
            lines.append(f"  {c.name:<{width}}  {status}  {extra}".rstrip())
        return "\n".join(lines)


def _check_table(name, table, shape, codomain):
    if table.shape != shape:
        raise SpecError(f"map {name} has shape {table.shape}, expected {shape}")
    bad = np.argwhere((table < 0) | (table >= codomain))
    if bad.size:
        idx = tuple(int(i) for i in bad[0])
        raise SpecError(
            f"map {name} sends input {idx} to {int(table[idx])}, outside codomain of size {codomain}"
        )


def _injectivity_witness(table):
    """First ``(fixed, arg, arg')`` collision of a 2-argument table, per argument order."""
    for axis, label in ((0, "first"), (1, "second")):
        # fixing the *other* argument, the map must be injective in this one
        t = table if axis == 1 else table.T
        for fixed, row in enumerate(t):
            seen = {}
            for arg, val in enumerate(row):
                if val in seen:
                    return label, fixed, seen[val], arg
                seen[val] = arg
    return None


def validate_spec(spec):
    """Structural checks: total maps, per-argument injectivity of every h_k and f_k."""
    for n in (*spec.input_sizes, *spec.s_sizes, *spec.y_sizes):
        if n < 1:
            raise SpecError("alphabet sizes must be positive")
    for l, k in itertools.product(range(3), range(3)):
        if spec.inter_sizes[l][k] < 1:
            raise SpecError("alphabet sizes must be positive")
        _check_table(f"g{l + 1}{k + 1}", spec.g[l][k], (spec.input_sizes[l],), spec.inter_sizes[l][k])
    for k in range(3):
        a, b = CROSS[k]
        _check_table(
            f"h{k + 1}", spec.h[k], (spec.inter_sizes[a][k], spec.inter_sizes[b][k]), spec.s_sizes[k]
        )
        _check_table(f"f{k + 1}", spec.f[k], (spec.inter_sizes[k][k], spec.s_sizes[k]), spec.y_sizes[k])

    checks = []
    for kind, tables in (("h", spec.h), ("f", spec.f)):
        for k, table in enumerate(tables):
            w = _injectivity_witness(table)
            if w is None:
                checks.append(CheckResult(f"{kind}{k + 1} one-to-one per argument", True))
            else:
                varying, fixed, u, v = w
                checks.append(
                    CheckResult(
                        f"{kind}{k + 1} one-to-one per argument",
                        False,
                        detail=f"not injective in {varying} argument: other argument fixed at {fixed}, "
                        f"inputs {u} and {v} collide",
                        witness=(fixed, u, v),
                    )
                )
    for k in range(3):
        need = max(spec.inter_sizes[k][k], spec.s_sizes[k])
        checks.append(
            CheckResult(
                f"|Y{k + 1}| >= max(|X{k + 1}{k + 1}|, |S{k + 1}|)",
                spec.y_sizes[k] >= need,
                detail=f"{spec.y_sizes[k]} vs {need}",
            )
        )
    return ValidationReport(spec.name, checks)


def evaluate(spec, x1, x2, x3):
    xs = (x1, x2, x3)
    for l, x in enumerate(xs):
        if not 0 <= x < spec.input_sizes[l]:
            raise UsageError(f"input symbol {x} out of range for sender {l + 1}")
    xlk = tuple(tuple(int(spec.g[l][k][xs[l]]) for k in range(3)) for l in range(3))
    s = []
    y = []
    for k in range(3):
        a, b = CROSS[k]
        s.append(int(spec.h[k][xlk[a][k], xlk[b][k]]))
        y.append(int(spec.f[k][xlk[k][k], s[k]]))
    return NetworkSignals(xlk, tuple(s), tuple(y))


# -- probabilistic conditions ------------------------------------------------


def random_product_pmfs(spec, n, seed=0):
    """Uniform product first, then ``n - 1`` Dirichlet(1) draws per sender."""
    rng = np.random.default_rng(seed)
    out = [tuple(np.full(m, 1.0 / m) for m in spec.input_sizes)]
    while len(out) < n:
        out.append(tuple(rng.dirichlet(np.ones(m)) for m in spec.input_sizes))
    return out[:n]


def _pushforward(p, table, size):
    return np.bincount(table, weights=p, minlength=size)


def _factors_through(direct, cross):
    """True when ``direct(x) != direct(x')`` implies ``cross(x) != cross(x')``."""
    mapping = {}
    for d, c in zip(direct, cross):
        if mapping.setdefault(int(c), int(d)) != int(d):
            return False
    return True


def check_strong_interference(spec, n_samples=200, seed=0, sampler=None, tol=1e-9):
    """Decide ``min_j H(X_kj) >= H(X_kk)`` for all product pmfs."""
    key = ("strong", n_samples, seed, sampler)
    if key in spec._cache:
        return spec._cache[key]
    structural = all(
        _factors_through(spec.g[k][k], spec.g[k][j]) for k in range(3) for j in range(3) if j != k
    )
    if structural:
        result = CheckResult("strong interference", True, PROVED)
    else:
        samples = sampler(spec, n_samples, seed) if sampler else random_product_pmfs(spec, n_samples, seed)
        result = CheckResult("strong interference", True, SAMPLED, detail=f"{len(samples)} pmfs")
        for pmfs in samples:
            bad = None
            for k in range(3):
                hd = entropy_bits(_pushforward(pmfs[k], spec.g[k][k], spec.inter_sizes[k][k]))
                for j in range(3):
                    if j == k:
                        continue
                    hc = entropy_bits(_pushforward(pmfs[k], spec.g[k][j], spec.inter_sizes[k][j]))
                    if hc < hd - tol:
                        bad = f"H(X{k + 1}{j + 1})={hc:.4f} < H(X{k + 1}{k + 1})={hd:.4f}"
                        break
                if bad:
                    break
            if bad:
                result = CheckResult("strong interference", False, FAILED, detail=bad, witness=pmfs)
                break
    spec._cache[key] = result
    return result


def check_invertible_h(spec, n_samples=200, seed=0, sampler=None, tol=1e-9):
    """Decide ``H(S_k) = H(X_ak) + H(X_bk)`` for all product pmfs."""
    key = ("invertible", n_samples, seed, sampler)
    if key in spec._cache:
        return spec._cache[key]
    structural = True
    for k in range(3):
        a, b = CROSS[k]
        ia = np.unique(spec.g[a][k])
        ib = np.unique(spec.g[b][k])
        vals = spec.h[k][np.ix_(ia, ib)].ravel()
        if np.unique(vals).size != vals.size:
            structural = False
    if structural:
        result = CheckResult("invertible h", True, PROVED)
    else:
        from .prob import ProductInput, push_forward

        samples = sampler(spec, n_samples, seed) if sampler else random_product_pmfs(spec, n_samples, seed)
        result = CheckResult("invertible h", True, SAMPLED, detail=f"{len(samples)} pmfs")
        for pmfs in samples:
            dist = push_forward(spec, ProductInput(pmfs))
            bad = None
            for k in range(3):
                a, b = CROSS[k]
                lhs = dist.entropy([f"S{k + 1}"])
                rhs = dist.entropy([f"X{a + 1}{k + 1}"]) + dist.entropy([f"X{b + 1}{k + 1}"])
                if abs(lhs - rhs) > tol:
                    bad = f"H(S{k + 1})={lhs:.4f} != {rhs:.4f}"
                    break
            if bad:
                result = CheckResult("invertible h", False, FAILED, detail=bad, witness=pmfs)
                break
    spec._cache[key] = result
    return result


def full_report(spec, n_samples=200, seed=0):
    report = validate_spec(spec)
    for check in (check_strong_interference(spec, n_samples, seed), check_invertible_h(spec, n_samples, seed)):
        report.checks.append(replace(check, required=False))
    return report


# -- built-in channels ---------------------------------------------------------

G_MINUS = (0, 1, 0)
G_PLUS = (0, 1, 1)


def _adder(m, n):
    return np.add.outer(np.arange(m), np.arange(n))


def additive3dic():
    ident = (0, 1, 2)
    g = [[None] * 3 for _ in range(3)]
    for k in range(3):
        g[k][k] = ident
        g[k][(k + 1) % 3] = G_PLUS  # g12, g23, g31
        g[k][(k + 2) % 3] = G_MINUS  # g13, g21, g32
    inter = [[3 if l == k else 2 for k in range(3)] for l in range(3)]
    h = [_adder(2, 2)] * 3
    f = [_adder(3, 3)] * 3
    return ChannelSpec(
        "additive3dic", (3, 3, 3), inter, (3, 3, 3), (5, 5, 5), g, h, f,
        input_values=(np.arange(3.0),) * 3, y_values=(np.arange(5.0),) * 3,
    )


def blackwell2dic():
    g = [
        [(0, 1, 2), (0, 0, 1), (0, 0, 0)],
        [(0, 1), (0, 1), (0, 0)],
        [(0,), (0,), (0,)],
    ]
    inter = [[3, 2, 1], [2, 2, 1], [1, 1, 1]]
    h = [_adder(2, 1), _adder(2, 1), _adder(1, 1)]
    f = [_adder(3, 2), _adder(2, 2), _adder(1, 1)]
    return ChannelSpec(
        "blackwell2dic", (3, 2, 1), inter, (2, 2, 1), (4, 3, 1), g, h, f,
        input_values=(np.arange(3.0), np.arange(2.0), np.zeros(1)),
        y_values=(np.arange(4.0), np.arange(3.0), np.zeros(1)),
    )


def pairing_strong(m=2):
    """Identity cross losses; h and f are injective pairings ``m*a + b``."""
    if m < 1:
        raise UsageError("pairing-strong needs input size m >= 1")
    ident = tuple(range(m))
    g = [[ident] * 3 for _ in range(3)]
    inter = [[m] * 3 for _ in range(3)]
    pair_h = np.arange(m * m).reshape(m, m)
    pair_f = np.arange(m**3).reshape(m, m * m)
    return ChannelSpec(
        f"pairing-strong(m={m})", (m, m, m), inter, (m * m,) * 3, (m**3,) * 3,
        g, [pair_h] * 3, [pair_f] * 3,
    )


def finite_field(alpha, beta, n_bits):
    """Cyclically symmetric shift channel over GF(2)^N with outputs in GF(2)^2N.

    A link of strength ``m`` levels (``0 <= m <= 2N``) shifts the N-bit input
    up by ``m - N`` (stronger than direct) or drops its ``N - m`` least
    significant bits (weaker). The direct link has N levels, the link from
    sender ``k+1`` has ``alpha*N`` and the link from sender ``k+2`` has
    ``beta*N`` (indices mod 3). Combining and receiver maps are XOR.
    """
    if not (1 <= alpha <= 2 and 0 <= beta <= 1):
        raise UsageError("finite-field needs (alpha, beta) in [1,2] x [0,1]")
    if n_bits < 1 or n_bits > 4:
        raise UsageError("finite-field supports 1 <= N <= 4")
    n_up = alpha * n_bits
    n_dn = beta * n_bits
    if abs(n_up - round(n_up)) > 1e-9 or abs(n_dn - round(n_dn)) > 1e-9:
        raise UsageError("alpha*N and beta*N must be integers")
    n_up, n_dn = int(round(n_up)), int(round(n_dn))
    size = 2 ** (2 * n_bits)
    x = np.arange(2**n_bits)

    def link(m):
        return x << (m - n_bits) if m >= n_bits else x >> (n_bits - m)

    g = [[None] * 3 for _ in range(3)]
    for k in range(3):
        g[k][k] = link(n_bits)
        g[(k + 1) % 3][k] = link(n_up)
        g[(k + 2) % 3][k] = link(n_dn)
    xor = np.bitwise_xor.outer(np.arange(size), np.arange(size))
    inter = [[size] * 3 for _ in range(3)]
    return ChannelSpec(
        f"finite-field(alpha={alpha},beta={beta},N={n_bits})",
        (2**n_bits,) * 3, inter, (size,) * 3, (size,) * 3, g, [xor] * 3, [xor] * 3,
    )


BUILTINS = ("additive3dic", "blackwell2dic", "finite-field", "pairing-strong")


def builtin_channel(name, **params):
    if name == "additive3dic":
        spec = additive3dic()
    elif name == "blackwell2dic":
        spec = blackwell2dic()
    elif name == "pairing-strong":
        spec = pairing_strong(int(params.get("m", 2)))
    elif name == "finite-field":
        spec = finite_field(
            float(params.get("alpha", 1.5)), float(params.get("beta", 0.5)), int(params.get("n_bits", params.get("N", 2)))
        )
    else:
        raise UsageError(f"unknown built-in channel {name!r}; choose from {', '.join(BUILTINS)}")
    report = validate_spec(spec)
    if not report.passed:  # pragma: no cover - guarded by tests
        raise SpecError(f"built-in channel {name} failed validation:\n{report.format_table()}")
    return spec


# -- spec files ------------------------------------------------------------------


def spec_to_dict(spec):
    d = {
        "name": spec.name,
        "input_sizes": list(spec.input_sizes),
        "inter_sizes": [list(r) for r in spec.inter_sizes],
        "s_sizes": list(spec.s_sizes),
        "y_sizes": list(spec.y_sizes),
        "g": [[t.tolist() for t in row] for row in spec.g],
        "h": [t.tolist() for t in spec.h],
        "f": [t.tolist() for t in spec.f],
    }
    if spec.input_values is not None:
        d["input_values"] = [v.tolist() for v in spec.input_values]
    if spec.y_values is not None:
        d["y_values"] = [v.tolist() for v in spec.y_values]
    return d


def _table(obj, name, ndim):
    try:
        arr = np.array(obj, dtype=np.int64)
    except (ValueError, TypeError) as exc:
        raise SpecError(f"map {name} is ragged or non-integer") from exc
    if arr.ndim != ndim:
        raise SpecError(f"map {name} must be a {ndim}-dimensional table")
    return arr


def spec_from_dict(d):
    try:
        g = [[_table(d["g"][l][k], f"g{l + 1}{k + 1}", 1) for k in range(3)] for l in range(3)]
        h = [_table(d["h"][k], f"h{k + 1}", 2) for k in range(3)]
        f = [_table(d["f"][k], f"f{k + 1}", 2) for k in range(3)]
        return ChannelSpec(
            d.get("name", "unnamed"), d["input_sizes"], d["inter_sizes"], d["s_sizes"], d["y_sizes"],
            g, h, f, input_values=d.get("input_values"), y_values=d.get("y_values"),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise SpecError(f"incomplete channel spec: {exc}") from exc


def load_spec_document(path):
    """Read a spec file; returns the parsed JSON object."""
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: not valid JSON ({exc})") from exc


def dump_spec(spec, path, extra=None):
    d = spec_to_dict(spec)
    if extra:
        d.update(extra)
    Path(path).write_text(json.dumps(d, indent=1) + "\n")
