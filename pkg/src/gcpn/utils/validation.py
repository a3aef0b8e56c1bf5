"""Input checks shared by the estimators and the CLI."""
from __future__ import annotations

from typing import Iterable

from ..errors import ConfigError
from ..molgraph import MolGraph, is_connected, is_valid
from ..smiles import parse


def check_molecule(x, atom_cap: int | None = None) -> MolGraph:
    g = parse(x) if isinstance(x, str) else x
    if not isinstance(g, MolGraph):
        raise TypeError(f"expected a SMILES string or MolGraph, got {type(x).__name__}")
    if not is_valid(g) or not is_connected(g):
        raise ValueError("molecule must be valid and connected")
    if atom_cap is not None and g.n > atom_cap:
        raise ValueError(f"molecule has {g.n} atoms; cap is {atom_cap}")
    return g


def check_molecules(X: Iterable | None, atom_cap: int | None = None, allow_empty: bool = True) -> list[MolGraph]:
    """Coerce an iterable of SMILES strings / graphs into validated graphs."""
    if X is None:
        X = []
    if isinstance(X, (str, MolGraph)):
        raise TypeError("expected an iterable of molecules, not a single molecule")
    graphs = [check_molecule(x, atom_cap) for x in X]
    if not graphs and not allow_empty:
        raise ValueError("at least one molecule is required")
    return graphs


def parse_range(text: str, what: str = "range") -> tuple[float, float]:
    """'LO:HI' -> (lo, hi) with lo < hi."""
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError:
        raise ConfigError(f"{what} must look like LO:HI, got {text!r}") from None
    if not lo < hi:
        raise ConfigError(f"{what} needs LO < HI, got {text!r}")
    return lo, hi
