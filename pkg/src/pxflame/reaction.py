"""Reaction profiles beta, their epsilon scalings and the limit slope."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _check_eps(eps: float) -> None:
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")


@dataclass(frozen=True)
class ReactionProfile:
    """A Lipschitz profile supported on [0, 1] with total mass ``mass``.

    The profile is either the quadratic ``6 M t (1 - t)`` or a piecewise linear
    table of ``(t, value)`` knots rescaled so that it integrates to ``mass``.
    """

    mass: float = 0.5
    kind: str = "quadratic"
    knots: tuple[tuple[float, float], ...] = ()
    _t: np.ndarray = field(init=False, repr=False, compare=False)
    _v: np.ndarray = field(init=False, repr=False, compare=False)
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if self.kind == "quadratic":
            t = v = cum = np.empty(0)
        elif self.kind == "table":
            pts = sorted((float(a), float(b)) for a, b in self.knots)
            pts = [(a, b) for a, b in pts if 0.0 < a < 1.0]
            if not pts:
                raise ValueError("table profile needs knots inside (0, 1)")
            if any(b <= 0 for _, b in pts):
                raise ValueError("table profile must be positive on (0, 1)")
            t = np.array([0.0] + [a for a, _ in pts] + [1.0])
            v = np.array([0.0] + [b for _, b in pts] + [0.0])
            seg = 0.5 * (v[1:] + v[:-1]) * np.diff(t)
            v = v * (self.mass / seg.sum())
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))])
            object.__setattr__(self, "knots", tuple(zip(t.tolist(), v.tolist())))
        else:
            raise ValueError(f"unknown reaction kind {self.kind!r}")
        object.__setattr__(self, "_t", t)
        object.__setattr__(self, "_v", v)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def quadratic(cls, mass: float = 0.5) -> "ReactionProfile":
        return cls(mass=mass)

    @classmethod
    def table(cls, points, mass: float) -> "ReactionProfile":
        return cls(mass=mass, kind="table", knots=tuple(tuple(p) for p in points))

    def to_dict(self) -> dict:
        if self.kind == "quadratic":
            return {"kind": "quadratic", "mass": self.mass}
        inner = [list(k) for k in self.knots[1:-1]]
        return {"kind": "table", "mass": self.mass, "points": inner}

    # -- profile on the unit scale -------------------------------------------

    def beta(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t > 0) & (t < 1)
        if self.kind == "quadratic":
            out = 6.0 * self.mass * t * (1.0 - t)
        else:
            out = np.interp(t, self._t, self._v)
        return np.where(inside, out, 0.0)

    def beta_prime(self, t):
        """Derivative of beta; one-sided from the right at t = 0, zero outside (0, 1)."""
        t = np.asarray(t, dtype=float)
        inside = (t > 0) & (t < 1)
        if self.kind == "quadratic":
            out = 6.0 * self.mass * (1.0 - 2.0 * t)
        else:
            k = np.clip(np.searchsorted(self._t, t, side="right") - 1, 0, self._t.size - 2)
            out = (self._v[k + 1] - self._v[k]) / (self._t[k + 1] - self._t[k])
        return np.where(inside, out, 0.0)

    def big_b(self, t):
        """Primitive B(t) = int_0^t beta."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        if self.kind == "quadratic":
            return self.mass * (3.0 * t**2 - 2.0 * t**3)
        k = np.clip(np.searchsorted(self._t, t, side="right") - 1, 0, self._t.size - 2)
        dt = t - self._t[k]
        slope = (self._v[k + 1] - self._v[k]) / (self._t[k + 1] - self._t[k])
        return self._cum[k] + self._v[k] * dt + 0.5 * slope * dt**2

    @property
    def lipschitz(self) -> float:
        if self.kind == "quadratic":
            return 6.0 * self.mass
        return float(np.max(np.abs(np.diff(self._v) / np.diff(self._t))))

    @property
    def sup_norm(self) -> float:
        if self.kind == "quadratic":
            return 1.5 * self.mass
        return float(self._v.max())

    # -- epsilon scalings -----------------------------------------------------

    def beta_eps(self, s, eps: float):
        _check_eps(eps)
        return self.beta(np.asarray(s, dtype=float) / eps) / eps

    def beta_eps_prime(self, s, eps: float):
        _check_eps(eps)
        return self.beta_prime(np.asarray(s, dtype=float) / eps) / eps**2

    def big_b_eps(self, s, eps: float):
        _check_eps(eps)
        return self.big_b(np.asarray(s, dtype=float) / eps)


def beta_eps(s, eps: float, reaction: ReactionProfile | None = None):
    return (reaction or ReactionProfile()).beta_eps(s, eps)


def big_b_eps(s, eps: float, reaction: ReactionProfile | None = None):
    return (reaction or ReactionProfile()).big_b_eps(s, eps)


def lambda_star(p_val, mass: float):
    """Limit gradient ``((p / (p - 1)) M) ** (1 / p)`` on the free boundary."""
    p = np.asarray(p_val, dtype=float)
    if np.any(p <= 1):
        raise ValueError("exponent must exceed 1")
    if not mass > 0:
        raise ValueError("mass must be positive")
    out = (p / (p - 1.0) * mass) ** (1.0 / p)
    return float(out) if out.ndim == 0 else out
