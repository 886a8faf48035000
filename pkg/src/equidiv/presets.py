"""Named templates and congruence systems."""

from __future__ import annotations

from .arith import Factorization
from .search import ProgressionTemplate, build_template

__all__ = ["TEMPLATES", "template", "k76_first", "k76_second", "desk_k12", "K76_S0", "K76_SECOND_HIT"]


def _f(*pe) -> Factorization:
    return Factorization.from_dict(dict(pe))


# s0 as published; build_template returns it reduced mod m
K76_S0 = {
    "k76-first": 283068009891526033048495522741168151673505189503207144294857813203632566487752480287,
    "k76-second": 57367831813930710416942173714046021671610774684867929921010461281856875149028902647,
}


def k76_first() -> ProgressionTemplate:
    """Seven integers with 76 divisors: 3*17^18, 2*5^18, 23*7^18, 3*2^18,
    19*11^18, 2*13^18, 5*3^18, each times a prime (every fixed part has 38
    divisors)."""
    return build_template(
        76,
        7,
        [
            (0, _f((3, 1), (17, 18))),
            (1, _f((2, 1), (5, 18))),
            (2, _f((23, 1), (7, 18))),
            (3, _f((3, 1), (2, 18))),
            (4, _f((19, 1), (11, 18))),
            (5, _f((2, 1), (13, 18))),
            (6, _f((5, 1), (3, 18))),
        ],
    )


def k76_second() -> ProgressionTemplate:
    """Seven integers with 76 divisors; offsets 2, 4, 6 carry a bare 18th power
    so their cofactors need 4 divisors. This is the template that produced the
    known run of length 7."""
    return build_template(
        76,
        7,
        [
            (0, _f((3, 1), (11, 18))),
            (1, _f((2, 1), (17, 18))),
            (2, _f((7, 18))),
            (3, _f((3, 1), (2, 18))),
            (4, _f((5, 18))),
            (5, _f((2, 1), (13, 18))),
            (6, _f((3, 18))),
        ],
    )


# j at which k76_second gives the known run of seven
K76_SECOND_HIT = 250149002


def desk_k12() -> ProgressionTemplate:
    """Four integers with 12 divisors, small enough to check by brute force:
    2^2*3, 5^2, 2*7^2, 3*11^2 with 2 and 3 pinned (m = 889350)."""
    return build_template(
        12,
        4,
        [
            (0, _f((2, 2), (3, 1))),
            (1, _f((5, 2))),
            (2, _f((2, 1), (7, 2))),
            (3, _f((3, 1), (11, 2))),
        ],
        pin=(2, 3),
    )


TEMPLATES = {
    "k76-first": k76_first,
    "k76-second": k76_second,
    "desk-k12": desk_k12,
}


def template(name: str) -> ProgressionTemplate:
    try:
        return TEMPLATES[name]()
    except KeyError:
        raise KeyError(f"unknown template {name!r}; known: {', '.join(TEMPLATES)}") from None
