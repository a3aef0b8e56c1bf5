import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import nx_isomorphic, random_graph
from gcpn.errors import ContractError, EmptyCorpusError
from gcpn.molgraph import disjoint_union, from_edges, is_isomorphic, is_valid
from gcpn.smiles import SmilesParseError, TokenKind, load_corpus, parse, tokenize, write


def test_parse_examples():
    assert parse("C").n == 1
    g = parse("C=O")
    assert g.n == 2 and g.edges() == [(0, 1, 2)]
    tri = from_edges(["C", "C", "C"], [(0, 1, 1), (1, 2, 1), (0, 2, 1)])
    assert nx_isomorphic(parse("C1CC1"), tri)


@pytest.mark.parametrize("text, kind, pos", [
    ("C(", "unmatched-paren", 1),
    ("Cq", "unknown-symbol", 1),
    ("C1CC", "unmatched-ring", 1),
    ("FF=F", "valence-violation", 3),
    ("", "empty-input", 0),
    ("C=", "dangling-bond", 1),
    ("C)", "unmatched-paren", 1),
])
def test_parse_errors(text, kind, pos):
    with pytest.raises(SmilesParseError) as err:
        parse(text)
    assert err.value.kind == kind
    assert err.value.position == pos


def test_tokenize_greedy_two_letter():
    kinds = [(t.kind, t.payload) for t in tokenize("ClCBr")]
    assert [p for _, p in kinds] == ["Cl", "C", "Br"]
    assert all(k == TokenKind.ATOM for k, _ in kinds)


def test_ring_closure_orders():
    assert parse("C=1CCCC1").edges().count((0, 4, 2)) == 1 or (0, 4, 2) in parse("C=1CCCC=1").edges()
    with pytest.raises(SmilesParseError):
        parse("C=1CCCC#1")


def test_write_examples():
    assert write(parse("C")) == "C"
    tri = parse("C1CC1")
    assert is_isomorphic(parse(write(tri)), tri)
    g = parse("CC(=O)OC1CCN(C)C1")
    assert write(g) == write(g)


def test_write_disconnected_is_contract_error():
    with pytest.raises(ContractError):
        write(disjoint_union(parse("C"), parse("O")))


EDGE_CASES = [
    "C1CCCCC1", "C1CC2CCC1C2", "CC(C)(C)C", "C(=O)(O)CC#N", "OCC(N)S", "PC(F)(Cl)Br", "CI",
    "C#CC=CC", "C12CC1C2", "N1CCC(CC1)C(=O)O", "C1CCC2CCCCC2C1", "S=C=S", "OP(O)C", "FC(Cl)(Br)I",
]


@pytest.mark.parametrize("smi", EDGE_CASES)
def test_round_trip_edge_cases(smi):
    g = parse(smi)
    again = parse(write(g))
    assert nx_isomorphic(g, again)
    assert write(again) == write(parse(write(again)))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_random_graphs(seed):
    g = random_graph(np.random.default_rng(seed), 1, 14, symbols=("C", "C", "N", "O", "S", "P", "F", "Cl", "Br", "I"))
    text = write(g)
    assert set(text) <= set("CNOSPFIlBr=#()123456789")
    again = parse(text)
    assert is_valid(again)
    assert nx_isomorphic(g, again)


def test_load_corpus(tmp_path):
    p = tmp_path / "a.smi"
    p.write_text("C\nCC\n")
    assert len(load_corpus(p).graphs) == 2
    p.write_text("# comment\n")
    with pytest.raises(EmptyCorpusError):
        load_corpus(p)
    p.write_text("C\nCq\nCO\n")
    rep = load_corpus(p)
    assert len(rep.graphs) == 2
    assert rep.rejected[0][0] == 2 and "unknown-symbol at offset 1" in rep.rejected[0][2]


def test_load_corpus_atom_cap(tmp_path):
    p = tmp_path / "a.smi"
    p.write_text("CCCC\nC\n")
    rep = load_corpus(p, atom_cap=3)
    assert len(rep.graphs) == 1 and "atom-cap" in rep.rejected[0][2]
