"""Model parameters: p, the FK weight q, kappa and the cone exponents."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


class DomainError(ValueError):
    """Raised when an input lies outside the supported parameter domain."""


@dataclass(frozen=True)
class ModelParams:
    """Immutable parameter bundle; ``p`` is canonical, the rest is derived.

    Attributes
    ----------
    p : float
        Flexible-order parameter in (0, 1/2).
    q : float
        FK weight ``4 p^2 / (1-p)^2``.
    kappa : float
        SLE parameter in (4, 8).
    mu, mu_prime : float
        Cone exponents ``kappa/8`` and ``kappa/(4(kappa-2))``.
    sym_probs : tuple of float
        Probabilities of (b_h, b_c, o_h, o_c, o_f).
    """

    p: float
    q: float = field(init=False)
    kappa: float = field(init=False)
    mu: float = field(init=False)
    mu_prime: float = field(init=False)
    sym_probs: tuple = field(init=False)

    def __post_init__(self):
        p = float(self.p)
        if not (0.0 < p < 0.5):
            raise DomainError(f"p must lie in (0, 1/2), got {p!r}")
        angle = math.atan(math.sqrt(1.0 - 2.0 * p) / p)
        mu = math.pi / (2.0 * (math.pi - angle))
        set_ = object.__setattr__
        set_(self, "p", p)
        set_(self, "q", 4.0 * p * p / (1.0 - p) ** 2)
        set_(self, "mu", mu)
        set_(self, "kappa", 8.0 * mu)
        set_(self, "mu_prime", math.pi / (2.0 * (math.pi + angle)))
        r = (1.0 - p) / 4.0
        set_(self, "sym_probs", (0.25, 0.25, r, r, p / 2.0))

    @property
    def cone_angle(self) -> float:
        """Opening angle of the image of the first quadrant under the standardizing map."""
        return math.pi - math.atan(math.sqrt(1.0 - 2.0 * self.p) / self.p)

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "kappa": self.kappa,
                "mu": self.mu, "mu_prime": self.mu_prime}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        if "p" not in d:
            raise DomainError("parameter record needs a 'p' entry")
        return cls(float(d["p"]))

    @classmethod
    def from_json(cls, s: str) -> "ModelParams":
        return cls.from_dict(json.loads(s))


def params_from_p(p: float) -> ModelParams:
    return ModelParams(p)


def params_from_q(q: float) -> ModelParams:
    """Invert ``q = 4p^2/(1-p)^2`` via ``p = sqrt(q)/(2+sqrt(q))``."""
    q = float(q)
    if not (0.0 < q < 4.0):
        raise DomainError(f"q must lie in (0, 4), got {q!r}")
    s = math.sqrt(q)
    return ModelParams(s / (2.0 + s))


def params_from_kappa(kappa: float) -> ModelParams:
    kappa = float(kappa)
    if not (4.0 < kappa < 8.0):
        raise DomainError(f"kappa must lie in (4, 8), got {kappa!r}")
    s = math.sqrt(2.0 + 2.0 * math.cos(8.0 * math.pi / kappa))
    return ModelParams(s / (2.0 + s))


def kappa_closed_form(kappa: float) -> float:
    """p as a function of kappa, without going through ModelParams."""
    s = math.sqrt(2.0 + 2.0 * math.cos(8.0 * math.pi / kappa))
    return s / (2.0 + s)
