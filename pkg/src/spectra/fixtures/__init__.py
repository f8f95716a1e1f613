"""Rule files for the example systems shipped with the package."""

from __future__ import annotations

from importlib import resources

from ..substitution import SubstitutionRule, parse_rule

CATALOGUE = {
    "fibonacci": "Fibonacci (ab, a)",
    "pisa_2": "Pisa family, d = 2",
    "pisa_3": "Pisa family, d = 3",
    "pisa_4": "Pisa family, d = 4",
    "pisa_5": "Pisa family, d = 5",
    "pisa_6": "Pisa family, d = 6",
    "tribonacci": "Tribonacci (ab, ac, a)",
    "twisted_tribonacci": "twisted Tribonacci (ba, ac, a)",
    "pisa4": "quartic Pisa rule with explicit lengths",
    "twisted_fib_ext": "bar-swap extension of Fibonacci (ab, AB, A, a)",
    "rho_prime": "return-word recoding (AB, D, CA, C)",
    "rho_tilde": "pure-point factor (12, 13, 1, 0)",
}


def list_fixtures() -> dict[str, str]:
    """Fixture names with a one-line description."""
    return dict(CATALOGUE)


def fixture_text(name: str) -> str:
    if name not in CATALOGUE:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(CATALOGUE)}")
    return resources.files(__package__).joinpath(f"{name}.rule").read_text(encoding="utf-8")


def fixture_path(name: str):
    fixture_text(name)
    return resources.files(__package__).joinpath(f"{name}.rule")


def load_fixture(name: str) -> SubstitutionRule:
    return parse_rule(fixture_text(name), name=name)
