"""Parser and writer for a kekulized SMILES subset.

Grammar: atoms ``C N O S P F Cl Br I`` (two-letter symbols matched first),
bonds ``- = #`` (single by default), branches ``( )`` and ring closures
``1``-``9``. No aromatic atoms, brackets, charges, stereo or ``%`` rings.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ContractError, EmptyCorpusError, GcpnError
from .molgraph import (ATOM_TABLE, SYMBOL_TO_INDEX, MolGraph, add_atom, add_bond, is_connected)

BOND_SYMBOLS = {"-": 1, "=": 2, "#": 3}
ORDER_SYMBOLS = {1: "", 2: "=", 3: "#"}
_TWO_LETTER = ("Cl", "Br")
DEFAULT_ATOM_CAP = 38


class TokenKind(str, enum.Enum):
    ATOM = "atom"
    BOND = "bond"
    OPEN_BRANCH = "open_branch"
    CLOSE_BRANCH = "close_branch"
    RING_CLOSURE = "ring_closure"


@dataclass(frozen=True)
class SmilesToken:
    kind: TokenKind
    payload: object
    position: int


class SmilesParseError(GcpnError, ValueError):
    """``kind`` is one of unknown-symbol, unmatched-paren, unmatched-ring,
    valence-violation, dangling-bond, empty-input."""

    def __init__(self, kind: str, position: int, message: str):
        super().__init__(f"{kind} at offset {position}: {message}")
        self.kind = kind
        self.position = position
        self.message = message


def tokenize(s: str) -> list[SmilesToken]:
    tokens = []
    i = 0
    while i < len(s):
        ch = s[i]
        two = s[i:i + 2]
        if two in _TWO_LETTER:
            tokens.append(SmilesToken(TokenKind.ATOM, two, i))
            i += 2
            continue
        if ch in SYMBOL_TO_INDEX:
            tokens.append(SmilesToken(TokenKind.ATOM, ch, i))
        elif ch in BOND_SYMBOLS:
            tokens.append(SmilesToken(TokenKind.BOND, BOND_SYMBOLS[ch], i))
        elif ch == "(":
            tokens.append(SmilesToken(TokenKind.OPEN_BRANCH, ch, i))
        elif ch == ")":
            tokens.append(SmilesToken(TokenKind.CLOSE_BRANCH, ch, i))
        elif ch in "123456789":
            tokens.append(SmilesToken(TokenKind.RING_CLOSURE, int(ch), i))
        else:
            raise SmilesParseError("unknown-symbol", i, f"unexpected character {ch!r}")
        i += 1
    return tokens


def parse(s: str) -> MolGraph:
    """Parse ``s`` into a valence-checked graph or raise ``SmilesParseError``."""
    if not s.strip():
        raise SmilesParseError("empty-input", 0, "empty SMILES string")
    tokens = tokenize(s)
    g = MolGraph(())
    prev: int | None = None
    pending_bond: SmilesToken | None = None
    branch_stack: list[tuple[int, int]] = []   # (atom, position of '(')
    open_rings: dict[int, tuple[int, int | None, int]] = {}  # digit -> (atom, order, position)

    def bond(u, v, order, pos):
        nonlocal g
        g, violation = add_bond(g, u, v, order)
        if violation is not None:
            raise SmilesParseError("valence-violation", pos,
                                   f"bond {u}-{v} of order {order} rejected ({violation.value})")

    for tok in tokens:
        if tok.kind is TokenKind.ATOM:
            g = add_atom(g, tok.payload)
            new = g.n - 1
            if prev is not None:
                order = pending_bond.payload if pending_bond else 1
                bond(prev, new, order, tok.position)
            elif pending_bond is not None:
                raise SmilesParseError("dangling-bond", pending_bond.position, "bond without a preceding atom")
            pending_bond = None
            prev = new
        elif tok.kind is TokenKind.BOND:
            if prev is None or pending_bond is not None:
                raise SmilesParseError("dangling-bond", tok.position, "bond symbol without an atom to attach")
            pending_bond = tok
        elif tok.kind is TokenKind.OPEN_BRANCH:
            if prev is None or pending_bond is not None:
                raise SmilesParseError("unmatched-paren", tok.position, "branch opened without an anchor atom")
            branch_stack.append((prev, tok.position))
        elif tok.kind is TokenKind.CLOSE_BRANCH:
            if not branch_stack:
                raise SmilesParseError("unmatched-paren", tok.position, "')' without matching '('")
            if pending_bond is not None:
                raise SmilesParseError("dangling-bond", pending_bond.position, "bond symbol before ')'")
            anchor, open_pos = branch_stack.pop()
            if prev == anchor:
                raise SmilesParseError("unmatched-paren", open_pos, "empty branch")
            prev = anchor
        else:  # ring closure
            if prev is None:
                raise SmilesParseError("unmatched-ring", tok.position, "ring digit before any atom")
            digit = tok.payload
            order = pending_bond.payload if pending_bond else None
            pending_bond = None
            if digit in open_rings:
                partner, partner_order, _ = open_rings.pop(digit)
                if partner == prev:
                    raise SmilesParseError("unmatched-ring", tok.position, "ring closes on its own atom")
                if order is not None and partner_order is not None and order != partner_order:
                    raise SmilesParseError("unmatched-ring", tok.position,
                                           f"ring bond orders disagree ({partner_order} vs {order})")
                bond(partner, prev, order or partner_order or 1, tok.position)
            else:
                open_rings[digit] = (prev, order, tok.position)
    if pending_bond is not None:
        raise SmilesParseError("dangling-bond", pending_bond.position, "trailing bond symbol")
    if branch_stack:
        raise SmilesParseError("unmatched-paren", branch_stack[-1][1], "'(' never closed")
    if open_rings:
        pos = min(p for _, _, p in open_rings.values())
        raise SmilesParseError("unmatched-ring", pos, "ring closure never closed")
    if g.n == 0:
        raise SmilesParseError("empty-input", 0, "no atoms")
    return g


def write(g: MolGraph) -> str:
    """Deterministic SMILES for a connected graph.

    Depth-first from the lowest-index atom of highest degree, neighbours in
    ascending index order; ring-closure digits are handed out in discovery
    order and reused once closed.
    """
    if g.n == 0 or not is_connected(g):
        raise ContractError("write requires a connected, non-empty graph")
    degrees = [g.degree(u) for u in range(g.n)]
    root = max(range(g.n), key=lambda u: (degrees[u], -u))
    rank: dict[int, int] = {}
    children: dict[int, list[int]] = {u: [] for u in range(g.n)}
    ring_edges: list[tuple[int, int]] = []   # (opener, closer)
    ring_seen: set[frozenset] = set()

    def visit(u: int, parent: int) -> None:
        rank[u] = len(rank)
        for w in g.neighbors(u):
            if w == parent:
                continue
            if w not in rank:
                children[u].append(w)
                visit(w, u)
            elif frozenset((u, w)) not in ring_seen and rank[w] < rank[u]:
                ring_seen.add(frozenset((u, w)))
                ring_edges.append((w, u))

    visit(root, -1)
    ring_at: dict[int, list[tuple[int, int]]] = {u: [] for u in range(g.n)}
    for edge_id, (opener, closer) in enumerate(ring_edges):
        ring_at[opener].append((edge_id, closer))
        ring_at[closer].append((edge_id, opener))

    digits_for: dict[int, int] = {}
    free = list(range(1, 10))
    out: list[str] = []

    def emit(u: int) -> None:
        out.append(ATOM_TABLE[g.atoms[u]].symbol)
        entries = sorted(ring_at[u], key=lambda e: (e[0] not in digits_for, rank[e[1]]))
        for edge_id, partner in entries:
            if edge_id in digits_for:
                digit = digits_for.pop(edge_id)
                out.append(str(digit))
                free.append(digit)
                free.sort()
            else:
                if not free:
                    raise ContractError("more than 9 simultaneously open rings")
                digit = free.pop(0)
                digits_for[edge_id] = digit
                out.append(ORDER_SYMBOLS[int(g.bonds[u, partner])] + str(digit))
        kids = children[u]
        for i, w in enumerate(kids):
            text = ORDER_SYMBOLS[int(g.bonds[u, w])]
            if i < len(kids) - 1:
                out.append("(" + text)
                emit(w)
                out.append(")")
            else:
                out.append(text)
                emit(w)

    emit(root)
    return "".join(out)


@dataclass
class CorpusReport:
    graphs: list[MolGraph] = field(default_factory=list)
    lines: list[int] = field(default_factory=list)
    rejected: list[tuple[int, str, str]] = field(default_factory=list)  # (line number, text, reason)


def load_corpus(path, atom_cap: int = DEFAULT_ATOM_CAP) -> CorpusReport:
    """Read one SMILES per line; '#' lines and blank lines are skipped."""
    report = CorpusReport()
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            g = parse(line)
        except SmilesParseError as exc:
            report.rejected.append((lineno, line, f"{exc.kind} at offset {exc.position}"))
            continue
        if g.n > atom_cap:
            report.rejected.append((lineno, line, f"atom-cap: {g.n} atoms exceeds {atom_cap}"))
            continue
        if not is_connected(g):
            report.rejected.append((lineno, line, "disconnected"))
            continue
        report.graphs.append(g)
        report.lines.append(lineno)
    if not report.graphs:
        raise EmptyCorpusError(f"no usable molecules in {path}")
    return report
