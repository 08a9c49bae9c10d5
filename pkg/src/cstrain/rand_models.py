"""Seeded generators for the Bernoulli-Subgaussian data model.

Randomness flows through :class:`RngStream`, a ``(master_seed, stream_id)``
pair. The pair is hashed by numpy's ``SeedSequence`` into the key of a Philox
4x64 counter-based generator, so a stream is identical on every platform and
independent of how many other streams exist or in which order they are used.
Normal variates come from numpy's ziggurat sampler (``standard_normal``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadShape, BadSparsity, InvalidSpec

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= int(value) <= MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def _seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_id),))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self._seed_sequence()))

    def derived_seed(self) -> int:
        """A 64-bit seed mixed from this stream, for building sub-streams."""
        return int(self._seed_sequence().generate_state(1, np.uint64)[0])

    def substream(self, stream_id: int) -> "RngStream":
        return RngStream(self.derived_seed(), stream_id)


def as_generator(rng) -> np.random.Generator:
    """Accept an :class:`RngStream`, a numpy ``Generator`` or an integer seed."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


class Distribution(str, enum.Enum):
    STANDARD_GAUSSIAN = "StandardGaussian"
    RADEMACHER = "Rademacher"
    UNIFORM_SYM = "UniformSym"


# sup_p p^{-1/2} E|R|^p)^{1/p} is attained at p = 1 for all three laws
_PSI2_AT_UNIT_NU = {
    Distribution.STANDARD_GAUSSIAN: math.sqrt(2.0 / math.pi),
    Distribution.RADEMACHER: 1.0,
    Distribution.UNIFORM_SYM: math.sqrt(3.0) / 2.0,
}


@dataclass(frozen=True)
class ModelSpec:
    """Bernoulli-Subgaussian parameters.

    ``theta`` is the Bernoulli rate ``s/n``; ``nu`` the root second moment of
    the value law; ``k_psi2`` the psi_2 constant ``K`` (informational, with
    ``||R||_psi2 <= nu * K``). For ``UniformSym`` values are uniform on
    ``[-sqrt(3) nu, sqrt(3) nu]``.
    """

    theta: float
    dist: Distribution = Distribution.STANDARD_GAUSSIAN
    nu: float = 1.0
    k_psi2: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "dist", Distribution(self.dist))
        if self.k_psi2 is None:
            object.__setattr__(self, "k_psi2", _PSI2_AT_UNIT_NU[self.dist])
        self.validate()

    def validate(self) -> None:
        if not (0.0 < self.theta <= 1.0):
            raise InvalidSpec(f"theta must lie in (0, 1], got {self.theta}")
        if not (self.nu > 0.0 and math.isfinite(self.nu)):
            raise InvalidSpec(f"nu must be positive, got {self.nu}")
        if not (self.k_psi2 > 0.0 and math.isfinite(self.k_psi2)):
            raise InvalidSpec(f"k_psi2 must be positive, got {self.k_psi2}")
        if self.dist in (Distribution.STANDARD_GAUSSIAN, Distribution.RADEMACHER) and self.nu != 1.0:
            raise InvalidSpec(f"{self.dist.value} has nu = 1, got {self.nu}")

    @property
    def restricted(self) -> bool:
        """Whether the value law meets the restricted-model conditions."""
        return restricted_model_check(self.dist, self.nu)["ok"]

    def to_dict(self) -> dict:
        return {"theta": self.theta, "dist": self.dist.value, "nu": self.nu, "k_psi2": self.k_psi2}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(theta=float(d["theta"]), dist=Distribution(d.get("dist", "StandardGaussian")),
                   nu=float(d.get("nu", 1.0)), k_psi2=d.get("k_psi2"))


def _moments(dist: Distribution, nu: float):
    """(E|R|, E R^2, P(R = 0), tail(tau)) for a value law."""
    if dist is Distribution.STANDARD_GAUSSIAN:
        from scipy.special import erfc

        return math.sqrt(2 / math.pi) * nu, nu * nu, 0.0, lambda t: erfc(t / (nu * math.sqrt(2)))
    if dist is Distribution.RADEMACHER:
        return nu, nu * nu, 0.0, lambda t: np.where(t < nu, 1.0, 0.0)
    a = math.sqrt(3.0) * nu
    return a / 2, nu * nu, 0.0, lambda t: np.clip(1.0 - t / a, 0.0, 1.0)


def restricted_model_check(dist, nu: float = 1.0, grid=None) -> dict:
    """Evaluate the restricted Bernoulli-Subgaussian conditions numerically.

    Symmetry holds for all shipped laws by construction. The tail condition
    ``P(|R| > tau) <= 2 exp(-tau^2/2)`` is checked on a grid of ``tau``.
    """
    dist = Distribution(dist)
    mean_abs, second, atom, tail = _moments(dist, nu)
    taus = np.linspace(0.0, 12.0, 2401) if grid is None else np.asarray(grid, dtype=float)
    tail_ok = bool(np.all(tail(taus) <= 2.0 * np.exp(-taus ** 2 / 2.0) + 1e-15))
    checks = {
        "symmetric": True,
        "no_atom_at_zero": atom == 0.0,
        "mean_abs_in_range": 0.1 <= mean_abs <= 1.0,
        "second_moment_le_1": second <= 1.0 + 1e-15,
        "gaussian_tail": tail_ok,
    }
    return {"ok": all(checks.values()), "mean_abs": mean_abs, **checks}


def _values(gen: np.random.Generator, shape, spec: ModelSpec) -> np.ndarray:
    if spec.dist is Distribution.STANDARD_GAUSSIAN:
        return gen.standard_normal(shape)
    if spec.dist is Distribution.RADEMACHER:
        return np.where(gen.random(shape) < 0.5, -1.0, 1.0)
    a = math.sqrt(3.0) * spec.nu
    return gen.uniform(-a, a, shape)


def gen_component_matrix(n: int, p: int, spec: ModelSpec, rng) -> np.ndarray:
    """``X = Omega * R`` with Bernoulli(theta) mask and i.i.d. values."""
    if not isinstance(spec, ModelSpec):
        raise InvalidSpec("spec must be a ModelSpec")
    spec.validate()
    if n < 1 or p < 1:
        raise BadShape(f"need n, p >= 1, got {n}, {p}")
    gen = as_generator(rng)
    mask = gen.random((n, p)) < spec.theta
    return np.where(mask, _values(gen, (n, p), spec), 0.0)


def _nonzero_values(gen: np.random.Generator, k: int) -> np.ndarray:
    mags = gen.uniform(1.0, 2.0, k)
    signs = np.where(gen.random(k) < 0.5, -1.0, 1.0)
    return mags * signs


def gen_sparse_combinator(p: int, k: int, rng) -> np.ndarray:
    """Exactly ``k`` nonzeros on a uniform support; magnitudes in [1, 2], random signs."""
    if p < 1:
        raise BadShape(f"need p >= 1, got {p}")
    if not 1 <= k <= p:
        raise BadSparsity(f"need 1 <= k <= p, got k={k}, p={p}")
    gen = as_generator(rng)
    z = np.zeros(p)
    support = gen.choice(p, size=k, replace=False)
    z[support] = _nonzero_values(gen, k)
    return z


def gen_training_matrix(p: int, q: int, k_easy: int, rng) -> np.ndarray:
    """Training combinators ``Z`` (p x q) with guaranteed rank ``p``.

    Column ``i < p`` has a nonzero at row ``i`` plus ``min(k_easy - 1, i)``
    nonzeros at random rows above it, so the leading p x p block is upper
    triangular with nonzero diagonal. The remaining ``q - p`` columns are
    independent :func:`gen_sparse_combinator` draws.
    """
    if q < p:
        raise BadShape(f"need q >= p, got q={q}, p={p}")
    if not 1 <= k_easy <= p:
        raise BadSparsity(f"need 1 <= k_easy <= p, got {k_easy}")
    gen = as_generator(rng)
    Z = np.zeros((p, q))
    for i in range(p):
        extra = min(k_easy - 1, i)
        rows = [i]
        if extra:
            rows += sorted(gen.choice(i, size=extra, replace=False).tolist())
        Z[rows, i] = _nonzero_values(gen, len(rows))
    for j in range(p, q):
        Z[:, j] = gen_sparse_combinator(p, k_easy, gen)
    return Z


def gen_gaussian_sensing(m: int, n: int, rng) -> np.ndarray:
    """i.i.d. N(0, 1/m) entries, so columns have unit expected squared norm."""
    if m < 1 or n < 1:
        raise BadShape(f"need m, n >= 1, got {m}, {n}")
    return as_generator(rng).standard_normal((m, n)) / math.sqrt(m)
