"""Derivative-growth parameter algebra for well-behaved function families.

A family is well-behaved with parameters (B, C, beta_min) when, for every
beta >= beta_min, the bound  M^(k)(x) <= C^k 2^B k! / beta^k  can only fail
inside a small computable cover of boxes with sides <= beta.  This module
provides the base parameters for single charges and polynomials and the
combinators for derivatives, scaled sums, and products, each paired with
its cover provider.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import EmptyProduct, EmptySum, InvalidTau
from .grid import Box
from .potential import Charge


@dataclass(frozen=True)
class WellBehavedParams:
    B: int
    C: int
    beta_min: float

    def __post_init__(self):
        if self.B < 0 or self.C <= 0 or self.beta_min <= 0:
            raise ValueError("invalid well-behaved parameters")

    def bound(self, k: int, beta: float) -> float:
        """The certified derivative bound C^k 2^B k! / beta^k."""
        return float(self.C) ** k * 2.0**self.B * math.factorial(k) / beta**k


@dataclass(frozen=True)
class CoverProvider:
    """Maps beta to the boxes where the (B, C, beta_min) bound may fail."""

    boxes_fn: Callable[[float], list[Box]] = field(repr=False)

    def boxes(self, beta: float) -> list[Box]:
        out = list(self.boxes_fn(beta))
        for b in out:
            if any(h - l > beta * (1 + 1e-12) for l, h in zip(b.lo, b.hi)):
                raise ValueError("cover box side exceeds beta")
        return out

    def count(self, beta: float) -> int:
        return len(self.boxes(beta))


def empty_cover() -> CoverProvider:
    return CoverProvider(lambda beta: [])


def concat_covers(covers: Sequence[CoverProvider]) -> CoverProvider:
    covers = list(covers)
    return CoverProvider(lambda beta: [b for c in covers for b in c.boxes(beta)])


def single_charge_params(charge: Charge, tau: float) -> tuple[WellBehavedParams, CoverProvider]:
    """Parameters for the potential of one charge, valid ||x - a||_inf >= tau away.

    B = ceil(log2(max(1, |q|) / tau)), C = 4, beta_min = 2 tau; the cover at
    any beta is the single cube of side beta centered at the charge.
    """
    if not (0 < tau <= 1):
        raise InvalidTau("tau must lie in (0, 1]")
    q = abs(charge.q)
    B = max(0, math.ceil(math.log2(max(1.0, q) / tau)))
    params = WellBehavedParams(B=B, C=4, beta_min=2.0 * tau)
    a = charge.position

    def boxes(beta: float) -> list[Box]:
        half = beta / 2.0
        return [Box(tuple(p - half for p in a), tuple(p + half for p in a))]

    return params, CoverProvider(boxes)


def derivative_params(p: WellBehavedParams, kappa: int) -> WellBehavedParams:
    """Parameters for any order-kappa partial derivative of a family member.

    B_hat = B + kappa lg C + kappa lg(1/beta_min) + kappa lg(kappa + 1),
    C_hat = 2^kappa C, with beta_min clamped to <= 1 first.  The cover is
    unchanged, so callers keep their provider.
    """
    if kappa < 0:
        raise ValueError("derivative order must be nonnegative")
    if kappa == 0:
        return p
    beta_min = min(p.beta_min, 1.0)
    B_hat = math.ceil(
        p.B
        + kappa * math.log2(p.C)
        + kappa * math.log2(1.0 / beta_min)
        + kappa * math.log2(kappa + 1)
    )
    return WellBehavedParams(B=B_hat, C=2**kappa * p.C, beta_min=beta_min)


def sum_params(
    items: Sequence[tuple[float, WellBehavedParams, CoverProvider]],
) -> tuple[WellBehavedParams, CoverProvider]:
    """Parameters for a linear combination sum_i coef_i * f_i.

    Per-item scaling adds max(0, lg |coef|) to B_i; the sum then takes
    B = ceil(lg n) + max B_i', C = sum C_i, beta_min = min, covers
    concatenated.
    """
    items = list(items)
    if not items:
        raise EmptySum("sum of zero families")
    if any(coef == 0 for coef, _, _ in items):
        raise ValueError("sum coefficients must be nonzero")
    if len(items) == 1 and abs(items[0][0]) == 1.0:
        _, p, cover = items[0]
        return p, cover
    scaled_B = [
        p.B + max(0, math.ceil(math.log2(abs(coef)))) for coef, p, _ in items
    ]
    n = len(items)
    B = max(0, math.ceil(math.log2(n))) + max(scaled_B)
    C = sum(p.C for _, p, _ in items)
    beta_min = min(p.beta_min for _, p, _ in items)
    return (
        WellBehavedParams(B=B, C=C, beta_min=beta_min),
        concat_covers([cover for _, _, cover in items]),
    )


def product_params(
    items: Sequence[tuple[WellBehavedParams, CoverProvider]],
) -> tuple[WellBehavedParams, CoverProvider]:
    """Parameters for a product of family members.

    B = sum B_i, C = n * max C_i, beta_min = min; covers concatenated.
    """
    items = list(items)
    if not items:
        raise EmptyProduct("product of zero families")
    if len(items) == 1:
        return items[0]
    n = len(items)
    B = sum(p.B for p, _ in items)
    C = n * max(p.C for p, _ in items)
    beta_min = min(p.beta_min for p, _ in items)
    return (
        WellBehavedParams(B=B, C=C, beta_min=beta_min),
        concat_covers([cover for _, cover in items]),
    )


def polynomial_params(coeff_bound: float) -> tuple[WellBehavedParams, CoverProvider]:
    """Parameters for polynomials on [-1, 1]^d with derivative values <= M.

    B = ceil(log2 M), C = 2, beta_min = 2; the bound holds everywhere on the
    cube for beta in the schedule, so the cover is empty.
    """
    if coeff_bound < 1:
        raise ValueError("bound M must be >= 1")
    B = max(0, math.ceil(math.log2(coeff_bound)))
    return WellBehavedParams(B=B, C=2, beta_min=2.0), empty_cover()
