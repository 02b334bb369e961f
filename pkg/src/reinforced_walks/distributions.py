"""Step laws with exact moment metadata, and their centered truncations.

A :class:`StepLaw` is immutable.  Its moments are computed once, at
construction, from closed forms (or adaptive quadrature for Gaussian
truncations), and sampling only ever touches the caller's generator.
"""

from __future__ import annotations

import json
import math
import shlex
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import integrate

from .errors import DegenerateLawError, UsageError

KINDS = ("rademacher", "gaussian", "uniform", "discrete", "truncated")

# relative variance threshold below which a law counts as constant
_DEGENERATE_RTOL = 1e-14


@dataclass(frozen=True)
class StepLaw:
    """Distribution of a typical step X.

    ``params`` depends on ``kind``:

    * ``rademacher``: ``(values, probs)`` of the two-point law on {-1, +1}
    * ``discrete``: ``(values, probs)``
    * ``gaussian``: ``(mu, sigma)``
    * ``uniform``: ``(a, b)``
    * ``truncated``: ``(base, b, shift)`` for ``1{|X|<=b} X - shift``

    ``fourth_moment`` is the raw moment E(X^4).
    """

    name: str
    kind: str
    params: tuple
    mean: float
    variance: float
    sup_bound: float | None = None
    fourth_moment: float | None = None

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def is_centered(self) -> bool:
        return abs(self.mean) <= 1e-12 * max(1.0, self.std)

    def interval_moment(self, k: int, lo: float = -math.inf, hi: float = math.inf) -> float:
        """E(X^k 1{lo <= X <= hi})."""
        return _interval_moment(self, k, lo, hi)


# ---------------------------------------------------------------------------
# construction


def _finish(name: str, kind: str, params: tuple, sup_bound: float | None) -> StepLaw:
    proto = StepLaw(name, kind, params, 0.0, 1.0, sup_bound)
    m1 = _interval_moment(proto, 1)
    m2 = _interval_moment(proto, 2)
    m4 = _interval_moment(proto, 4)
    variance = m2 - m1 * m1
    if not variance > _DEGENERATE_RTOL * max(m2, 1e-300):
        raise DegenerateLawError(f"{name}: step law is (numerically) constant")
    return StepLaw(name, kind, params, m1, variance, sup_bound, m4)


def rademacher() -> StepLaw:
    return _finish("rademacher", "rademacher", ((-1.0, 1.0), (0.5, 0.5)), 1.0)


def gaussian(mu: float = 0.0, sigma: float = 1.0) -> StepLaw:
    if not sigma > 0:
        raise DegenerateLawError(f"gaussian sigma must be positive, got {sigma}")
    return _finish(f"gaussian({mu:g},{sigma:g})", "gaussian", (float(mu), float(sigma)), None)


def uniform(a: float = -1.0, b: float = 1.0) -> StepLaw:
    if not b > a:
        raise DegenerateLawError(f"uniform needs a < b, got a={a}, b={b}")
    return _finish(f"uniform({a:g},{b:g})", "uniform", (float(a), float(b)), max(abs(a), abs(b)))


def discrete(values, probs) -> StepLaw:
    values = tuple(float(v) for v in values)
    probs = tuple(float(q) for q in probs)
    if len(values) != len(probs) or not values:
        raise UsageError("discrete law needs equally many values and probs")
    if any(q < 0 for q in probs):
        raise UsageError("discrete probabilities must be non-negative")
    if abs(math.fsum(probs) - 1.0) > 1e-12:
        raise UsageError(f"discrete probabilities sum to {math.fsum(probs)!r}, not 1")
    return _finish(f"discrete{values}", "discrete", (values, probs), max(abs(v) for v in values))


def truncate(law: StepLaw, b: float) -> StepLaw:
    """Centered truncation ``1{|X|<=b} X - E(X 1{|X|<=b})``.

    Returns ``law`` itself when the truncation is vacuous (``|X| <= b``
    almost surely and X already centered).
    """
    if not b > 0:
        raise UsageError(f"truncation level must be positive, got {b}")
    if law.sup_bound is not None and law.sup_bound <= b and law.mean == 0.0:
        return law
    shift = _interval_moment(law, 1, -b, b)
    bound = b + abs(shift)
    if law.sup_bound is not None:
        bound = min(bound, law.sup_bound + abs(shift))
    try:
        out = _finish(f"truncate({law.name},{b:g})", "truncated", (law, float(b), shift), bound)
    except DegenerateLawError as exc:
        raise DegenerateLawError(f"truncation of {law.name} at b={b} is degenerate") from exc
    # the centering is exact by construction; drop the rounding residue
    return StepLaw(out.name, out.kind, out.params, 0.0, out.variance, out.sup_bound, out.fourth_moment)


def moments(law: StepLaw) -> tuple[float, float]:
    return law.mean, law.variance


# ---------------------------------------------------------------------------
# partial moments


def _interval_moment(law: StepLaw, k: int, lo: float = -math.inf, hi: float = math.inf) -> float:
    if lo > hi:
        return 0.0
    kind = law.kind
    if kind in ("rademacher", "discrete"):
        values, probs = law.params
        return math.fsum(q * v**k for v, q in zip(values, probs) if lo <= v <= hi)
    if kind == "uniform":
        a, b = law.params
        l, h = max(a, lo), min(b, hi)
        if l >= h:
            return 0.0
        return (h ** (k + 1) - l ** (k + 1)) / ((k + 1) * (b - a))
    if kind == "gaussian":
        mu, sigma = law.params
        if math.isinf(lo) and math.isinf(hi):
            return _gaussian_raw_moment(k, mu, sigma)
        dens = lambda x: x**k * math.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
        # split at the mode so quad sees the bulk of the mass
        pieces = (lo, min(max(mu, lo), hi), hi)
        total = 0.0
        for left, right in zip(pieces[:-1], pieces[1:]):
            if right > left:
                total += integrate.quad(dens, left, right, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        return total
    if kind == "truncated":
        base, b, shift = law.params
        # Y = X - shift on {|X|<=b}, Y = -shift on {|X|>b}
        l, h = max(lo + shift, -b), min(hi + shift, b)
        total = 0.0
        if l <= h:
            for j in range(k + 1):
                total += math.comb(k, j) * (-shift) ** (k - j) * _interval_moment(base, j, l, h)
        if lo <= -shift <= hi:
            outside = 1.0 - _interval_moment(base, 0, -b, b)
            total += (-shift) ** k * max(outside, 0.0)
        return total
    raise UsageError(f"unknown law kind {kind!r}")


def _gaussian_raw_moment(k: int, mu: float, sigma: float) -> float:
    # E((mu + sigma Z)^k) with E(Z^j) = (j-1)!! for even j
    total = 0.0
    for j in range(0, k + 1, 2):
        double_fact = math.prod(range(j - 1, 0, -2)) if j > 0 else 1
        total += math.comb(k, j) * mu ** (k - j) * sigma**j * double_fact
    return total


# ---------------------------------------------------------------------------
# sampling


def sample(law: StepLaw, rng: np.random.Generator, size: int | None = None):
    """Draw from ``law``; a float when ``size`` is None, else an array."""
    out = _sample_array(law, rng, 1 if size is None else size)
    return float(out[0]) if size is None else out


def _sample_array(law: StepLaw, rng: np.random.Generator, size: int) -> np.ndarray:
    kind = law.kind
    if kind == "rademacher":
        return 2.0 * rng.integers(0, 2, size=size) - 1.0
    if kind == "discrete":
        values, probs = law.params
        return np.asarray(values)[rng.choice(len(values), size=size, p=probs)]
    if kind == "gaussian":
        mu, sigma = law.params
        return mu + sigma * rng.standard_normal(size)
    if kind == "uniform":
        a, b = law.params
        return rng.uniform(a, b, size)
    if kind == "truncated":
        base, b, shift = law.params
        x = _sample_array(base, rng, size)
        return np.where(np.abs(x) <= b, x, 0.0) - shift
    raise UsageError(f"unknown law kind {kind!r}")


# ---------------------------------------------------------------------------
# textual specs, e.g. "kind=uniform a=-1 b=1"


def parse_law(text: str) -> StepLaw:
    fields: dict[str, Any] = {}
    for token in shlex.split(text):
        if "=" not in token:
            if not fields:
                fields["kind"] = token
                continue
            raise UsageError(f"malformed law token {token!r}")
        key, value = token.split("=", 1)
        fields[key.strip()] = value.strip()
    kind = fields.pop("kind", None)
    builders = {
        "rademacher": (rademacher, ()),
        "gaussian": (gaussian, ("mu", "sigma")),
        "uniform": (uniform, ("a", "b")),
        "discrete": (discrete, ("values", "probs")),
    }
    if kind not in builders:
        raise UsageError(f"unknown law kind {kind!r}; expected one of {sorted(builders)}")
    truncation = fields.pop("truncate", None)
    builder, allowed = builders[kind]
    unknown = set(fields) - set(allowed)
    if unknown:
        raise UsageError(f"unknown key(s) for {kind} law: {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, value in fields.items():
        kwargs[key] = json.loads(value) if key in ("values", "probs") else float(value)
    law = builder(**kwargs)
    if truncation is not None:
        law = truncate(law, float(truncation))
    return law
