import itertools
import warnings
from collections import Counter

import numpy as np
import pytest

from chempert.smiles import (
    Atom,
    Bond,
    MolecularGraph,
    StereoDiscardedWarning,
    TrailingInputError,
    UnbalancedBranchError,
    UnclosedRingError,
    UnknownAtomTokenError,
    enumerate_paths,
    fingerprint,
    fingerprint_smiles,
    fnv1a64,
    parse_smiles,
)


def brute_force_paths(graph, max_len):
    """Independent path enumerator: try every atom permutation of each length
    and keep those whose consecutive pairs are bonded."""
    labels = [a.label() for a in graph.atoms]
    bond_label = {"single": "-", "double": "=", "triple": "#", "aromatic": ":"}
    edges = {}
    for b in graph.bonds:
        edges[(b.a, b.b)] = bond_label[b.order]
        edges[(b.b, b.a)] = bond_label[b.order]
    counts = Counter(labels)
    n = len(graph.atoms)
    for length in range(2, max_len + 2):  # number of atoms on the path
        if length > n:
            break
        for perm in itertools.permutations(range(n), length):
            if all((perm[i], perm[i + 1]) in edges for i in range(length - 1)):
                parts = [labels[perm[0]]]
                for i in range(length - 1):
                    parts.append(edges[(perm[i], perm[i + 1])])
                    parts.append(labels[perm[i + 1]])
                rendering = "".join(parts)
                reverse = "".join(
                    [labels[perm[-1]]]
                    + [
                        s
                        for i in range(length - 2, -1, -1)
                        for s in (edges[(perm[i + 1], perm[i])], labels[perm[i]])
                    ]
                )
                counts[min(rendering, reverse)] += 1
    # permutations traverse each undirected path twice
    out = Counter()
    for key, c in counts.items():
        if "-" in key[1:] or "=" in key or "#" in key or ":" in key:
            assert c % 2 == 0
            out[key] = c // 2
        else:
            out[key] = c
    return out


class TestParse:
    def test_single_atom(self):
        g = parse_smiles("C")
        assert len(g.atoms) == 1 and g.atoms[0].symbol == "C"
        assert g.bonds == []

    def test_linear_chain(self):
        g = parse_smiles("CCO")
        assert [a.symbol for a in g.atoms] == ["C", "C", "O"]
        assert len(g.bonds) == 2
        assert all(b.order == "single" for b in g.bonds)

    def test_benzene_ring_closure(self):
        g = parse_smiles("c1ccccc1")
        assert len(g.atoms) == 6
        assert all(a.aromatic and a.symbol == "C" for a in g.atoms)
        assert len(g.bonds) == 6
        assert all(b.order == "aromatic" for b in g.bonds)

    def test_unbalanced_branch_offset(self):
        with pytest.raises(UnbalancedBranchError) as exc:
            parse_smiles("C(")
        assert exc.value.offset == 1

    def test_close_without_open(self):
        with pytest.raises(UnbalancedBranchError) as exc:
            parse_smiles("CC)C")
        assert exc.value.offset == 2

    def test_unclosed_ring(self):
        with pytest.raises(UnclosedRingError) as exc:
            parse_smiles("C1CC")
        assert exc.value.offset == 1

    def test_percent_ring_closure(self):
        g = parse_smiles("C%12CCC%12")
        assert len(g.bonds) == 4

    def test_branching(self):
        g = parse_smiles("CC(C)(O)C")
        assert len(g.atoms) == 5
        # atom 1 carries three substituents plus the chain parent
        adj = g.adjacency()
        assert len(adj[1]) == 4

    def test_explicit_bonds(self):
        g = parse_smiles("C=C#C")
        assert [b.order for b in g.bonds] == ["double", "triple"]

    def test_bracket_atom_fields(self):
        g = parse_smiles("[13CH3+]")
        atom = g.atoms[0]
        assert atom.symbol == "C"
        assert atom.isotope == 13
        assert atom.explicit_hydrogens == 3
        assert atom.charge == 1

    def test_bracket_charges(self):
        assert parse_smiles("[O-]").atoms[0].charge == -1
        assert parse_smiles("[Fe++]").atoms[0].charge == 2
        assert parse_smiles("[N+3]").atoms[0].charge == 3

    def test_aromatic_bracket(self):
        atom = parse_smiles("[nH]").atoms[0]
        assert atom.aromatic and atom.symbol == "N" and atom.explicit_hydrogens == 1

    def test_two_letter_elements(self):
        g = parse_smiles("ClCBr")
        assert [a.symbol for a in g.atoms] == ["Cl", "C", "Br"]

    def test_stereo_discarded_with_warning(self):
        with pytest.warns(StereoDiscardedWarning):
            g = parse_smiles("C/C=C\\C")
        assert len(g.atoms) == 4
        assert [b.order for b in g.bonds] == ["single", "double", "single"]
        with pytest.warns(StereoDiscardedWarning):
            g = parse_smiles("[C@H](O)C")
        assert len(g.atoms) == 3

    def test_wildcard_rejected(self):
        with pytest.raises(UnknownAtomTokenError) as exc:
            parse_smiles("C*")
        assert exc.value.offset == 1

    def test_unknown_atom(self):
        with pytest.raises(UnknownAtomTokenError) as exc:
            parse_smiles("X")
        assert exc.value.offset == 0

    def test_trailing_input(self):
        with pytest.raises(TrailingInputError) as exc:
            parse_smiles("CC C")
        assert exc.value.offset == 2

    def test_dangling_bond(self):
        with pytest.raises(UnknownAtomTokenError):
            parse_smiles("CC-")

    def test_empty_branch(self):
        with pytest.raises(UnknownAtomTokenError):
            parse_smiles("C()O")

    def test_self_ring_rejected(self):
        with pytest.raises(UnclosedRingError):
            parse_smiles("C11")

    def test_duplicate_ring_bond_rejected(self):
        with pytest.raises(UnclosedRingError):
            parse_smiles("C12CC12")

    def test_unterminated_bracket(self):
        with pytest.raises(UnknownAtomTokenError) as exc:
            parse_smiles("C[NH2")
        assert exc.value.offset == 1

    def test_never_crashes_on_garbage(self):
        rng = np.random.default_rng(1234)
        alphabet = "CNOcno()[]123%=#-+/\\@*Hl rB!\x00é"
        for _ in range(5000):
            length = int(rng.integers(0, 12))
            chars = rng.integers(0, len(alphabet), size=length)
            text = "".join(alphabet[c] for c in chars)
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    parse_smiles(text)
            except (ValueError, TypeError):
                pass


class TestPaths:
    def test_methane(self):
        g = parse_smiles("C")
        assert enumerate_paths(g, 3) == Counter({"C": 1})

    def test_ethanol_exhaustive(self):
        g = parse_smiles("CCO")
        expected = Counter({"C": 2, "O": 1, "C-C": 1, "C-O": 1, "C-C-O": 1})
        assert enumerate_paths(g, 2) == expected

    def test_direction_canonicalization(self):
        assert enumerate_paths(parse_smiles("OCC"), 2) == enumerate_paths(
            parse_smiles("CCO"), 2
        )

    def test_max_len_bounds(self):
        g = parse_smiles("C")
        with pytest.raises(ValueError):
            enumerate_paths(g, 0)
        with pytest.raises(ValueError):
            enumerate_paths(g, 11)

    @pytest.mark.parametrize("smiles", ["c1ccccc1", "CC(C)O", "C1CC1CO", "N#CC=O"])
    def test_against_brute_force(self, smiles):
        g = parse_smiles(smiles)
        assert enumerate_paths(g, 4) == brute_force_paths(g, 4)


class TestFingerprint:
    def test_single_path_single_bit(self):
        fp = fingerprint(parse_smiles("C"), dim=64, max_len=3)
        assert fp.values.sum() == 1.0

    def test_order_invariance(self):
        a = fingerprint_smiles("CCO", 200, 7)
        b = fingerprint_smiles("OCC", 200, 7)
        assert np.array_equal(a.values, b.values)

    def test_benzene_bits_match_oracle(self):
        g = parse_smiles("c1ccccc1")
        fp = fingerprint(g, dim=200, max_len=7)
        # independent re-derivation of the documented bit rule
        hashes = {fnv1a64(p.encode()) for p in brute_force_paths(g, 7)}
        expected_bits = sorted({(h ^ (h >> 32)) % 200 for h in hashes})
        assert sorted(np.nonzero(fp.values)[0].tolist()) == expected_bits

    def test_binary_and_density(self):
        g = parse_smiles("CC(C)C(=O)O")
        paths = enumerate_paths(g, 7)
        fp = fingerprint(g, dim=32, max_len=7)
        assert set(np.unique(fp.values)) <= {0.0, 1.0}
        assert fp.values.sum() <= len({fnv1a64(p.encode()) for p in paths})

    def test_dim_validation(self):
        with pytest.raises(ValueError):
            fingerprint(parse_smiles("C"), dim=4)

    def test_hash_is_pinned(self):
        # FNV-1a reference values; guards against accidental hash changes
        assert fnv1a64(b"") == 14695981039346656037
        assert fnv1a64(b"a") == 12638187200555641996
        # frozen from an independent reduce() over the FNV-1a definition
        assert fnv1a64(b"C-C-O") == 1937050423571814078

    def test_chain_respellings(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(2, 8))
            symbols = [("C", "O")[int(rng.integers(0, 2))] for _ in range(n)]
            forward = "".join(symbols)
            backward = "".join(reversed(symbols))
            # spell from an interior atom using a branch
            k = int(rng.integers(1, n))
            rerooted = (
                symbols[k]
                + ("(" + "".join(reversed(symbols[:k])) + ")" if k else "")
                + "".join(symbols[k + 1 :])
            )
            ref = fingerprint_smiles(forward, 128, 7).values
            assert np.array_equal(ref, fingerprint_smiles(backward, 128, 7).values)
            assert np.array_equal(ref, fingerprint_smiles(rerooted, 128, 7).values)

    def test_ring_respellings(self):
        ring = ["C", "C", "O", "C", "N", "C"]
        base = None
        for start in range(6):
            rotated = ring[start:] + ring[:start]
            smiles = rotated[0] + "1" + "".join(rotated[1:]) + "1"
            fp = fingerprint_smiles(smiles, 128, 7).values
            if base is None:
                base = fp
            assert np.array_equal(base, fp)
