"""Random uniform designs and replication-indexed seeding."""

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = [
    "STREAMS",
    "Design",
    "DuplicatePointsError",
    "SeedPlan",
    "derive_seed",
    "draw_design",
    "rng_for",
]

STREAMS = ("design", "field", "noise", "quadrature")


class DuplicatePointsError(ValueError):
    """Two observation points coincide exactly."""


@dataclass(frozen=True, eq=False)
class Design:
    """``n`` observation points in ``[0, n^(1/d)]^d``, stored as an (n, d) array."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if p.shape[0] < 1:
            raise ValueError("a design needs at least one point")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    @property
    def side(self):
        """Edge length of the observation domain."""
        return self.n ** (1.0 / self.d)

    def check_distinct(self):
        if np.unique(self.points, axis=0).shape[0] != self.n:
            raise DuplicatePointsError("design contains duplicated points")
        return self

    def in_domain(self):
        return bool(np.all((self.points >= 0.0) & (self.points <= self.side)))


@dataclass(frozen=True)
class SeedPlan:
    master_seed: int
    rep_index: int
    stream: str
    scope: str = ""

    def __post_init__(self):
        if self.stream not in STREAMS:
            raise ValueError(f"unknown stream {self.stream!r}; expected one of {STREAMS}")
        if self.rep_index < 0:
            raise ValueError("rep_index must be >= 0")


def derive_seed(plan):
    """64-bit sub-seed as a hash of (master seed, replication, stream[, scope]).

    Pure function of its inputs, independent of platform and of the order
    in which replications are executed.
    """
    msg = f"{int(plan.master_seed)}|{int(plan.rep_index)}|{plan.stream}"
    if plan.scope:
        msg += f"|{plan.scope}"
    msg = msg.encode()
    digest = hashlib.blake2b(msg, digest_size=8, person=b"gpmisspec").digest()
    return int.from_bytes(digest, "little")


def rng_for(master_seed, rep_index, stream, scope=""):
    plan = SeedPlan(master_seed, rep_index, stream, scope)
    return np.random.Generator(np.random.PCG64(derive_seed(plan)))


def draw_design(n, d, seed):
    """``n`` iid uniform points on ``[0, n^(1/d)]^d``."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    side = n ** (1.0 / d)
    return Design(rng.uniform(0.0, side, size=(n, d)))
