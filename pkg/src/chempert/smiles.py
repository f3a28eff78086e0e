"""SMILES parsing and hashed path fingerprints.

Supports the organic subset (B, C, N, O, P, S, F, Cl, Br, I and the aromatic
forms b, c, n, o, p, s), bracket atoms with isotope / charge / explicit-H
annotations, explicit bonds ``- = # :``, branches, and ring closures
(including ``%nn``). Stereo markers (``/ \\ @``) are parsed and discarded with
a warning; wildcards are rejected. No valence checking is performed and
implicit hydrogens stay implicit.

Fingerprints are binary folded path fingerprints: every simple path of up to
``max_len`` bonds is rendered as an alternating atom/bond label string, the
string is hashed, and one bit is set. The hash is fixed so fingerprints are
bit-identical across platforms and runs: 64-bit FNV-1a (offset basis
14695981039346656037, prime 1099511628211) over the UTF-8 bytes of the path
string, xor-folded as ``h ^ (h >> 32)`` to mix the weak low bits, then
reduced modulo ``dim``.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Atom",
    "Bond",
    "MolecularGraph",
    "Fingerprint",
    "SmilesError",
    "UnbalancedBranchError",
    "UnclosedRingError",
    "UnknownAtomTokenError",
    "TrailingInputError",
    "StereoDiscardedWarning",
    "parse_smiles",
    "enumerate_paths",
    "fingerprint",
    "fingerprint_smiles",
    "fnv1a64",
    "path_bit",
]

ORGANIC_ALIPHATIC = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
ORGANIC_AROMATIC = ("b", "c", "n", "o", "p", "s")
BOND_ORDERS = {"-": "single", "=": "double", "#": "triple", ":": "aromatic"}
BOND_LABELS = {"single": "-", "double": "=", "triple": "#", "aromatic": ":"}

FNV_OFFSET_BASIS = 14695981039346656037
FNV_PRIME = 1099511628211
_U64 = (1 << 64) - 1


class SmilesError(ValueError):
    """Parse failure; ``offset`` is the byte position in the input."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnbalancedBranchError(SmilesError):
    pass


class UnclosedRingError(SmilesError):
    pass


class UnknownAtomTokenError(SmilesError):
    pass


class TrailingInputError(SmilesError):
    pass


class StereoDiscardedWarning(UserWarning):
    pass


@dataclass
class Atom:
    symbol: str
    aromatic: bool = False
    charge: int = 0
    explicit_hydrogens: int | None = None
    isotope: int | None = None

    def label(self) -> str:
        """Atom label used in path strings (symbol, aromaticity, charge)."""
        sym = self.symbol.lower() if self.aromatic else self.symbol
        if self.charge > 0:
            return sym + "+" + (str(self.charge) if self.charge > 1 else "")
        if self.charge < 0:
            return sym + "-" + (str(-self.charge) if self.charge < -1 else "")
        return sym


@dataclass
class Bond:
    a: int
    b: int
    order: str  # "single" | "double" | "triple" | "aromatic"


@dataclass
class MolecularGraph:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)

    def adjacency(self) -> list[list[tuple[int, str]]]:
        """Neighbor list of (atom index, bond order) per atom."""
        adj: list[list[tuple[int, str]]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            adj[bond.a].append((bond.b, bond.order))
            adj[bond.b].append((bond.a, bond.order))
        return adj


@dataclass
class Fingerprint:
    """Binary folded path fingerprint, consumed downstream as a real vector."""

    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a of ``data`` (constants in the module docstring)."""
    h = FNV_OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _U64
    return h


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.i = 0
        self.graph = MolecularGraph()
        self.prev: int | None = None
        # pending explicit bond: (order, offset of the bond character)
        self.pending: tuple[str, int] | None = None
        # open branches: (atom to restore, '(' offset, atom count at open)
        self.stack: list[tuple[int, int, int]] = []
        # open ring closures: digit -> (atom index, explicit order, offset)
        self.rings: dict[int, tuple[int, str | None, int]] = {}
        self.stereo_seen = False

    def error_expected_atom(self, offset: int, found: str) -> UnknownAtomTokenError:
        return UnknownAtomTokenError(f"expected an atom, found {found!r}", offset)

    def add_atom(self, atom: Atom, offset: int) -> None:
        self.graph.atoms.append(atom)
        idx = len(self.graph.atoms) - 1
        if self.prev is not None:
            order = self._resolve_order(self.prev, idx, self.pending)
            self._add_bond(self.prev, idx, order, offset)
        elif self.pending is not None:
            raise self.error_expected_atom(self.pending[1], self.text[self.pending[1]])
        self.pending = None
        self.prev = idx

    def _resolve_order(self, a: int, b: int, pending: tuple[str, int] | None) -> str:
        if pending is not None:
            return pending[0]
        atoms = self.graph.atoms
        if atoms[a].aromatic and atoms[b].aromatic:
            return "aromatic"
        return "single"

    def _add_bond(self, a: int, b: int, order: str, offset: int) -> None:
        if a == b:
            raise UnclosedRingError("ring closure bonds an atom to itself", offset)
        for bond in self.graph.bonds:
            if {bond.a, bond.b} == {a, b}:
                raise UnclosedRingError("duplicate ring bond between atom pair", offset)
        self.graph.bonds.append(Bond(a, b, order))

    def close_or_open_ring(self, digit: int, offset: int) -> None:
        if self.prev is None:
            raise self.error_expected_atom(offset, self.text[offset])
        if digit in self.rings:
            other, other_order, _ = self.rings.pop(digit)
            explicit = other_order
            if explicit is None and self.pending is not None:
                explicit = self.pending[0]
            if explicit is None:
                atoms = self.graph.atoms
                explicit = (
                    "aromatic"
                    if atoms[other].aromatic and atoms[self.prev].aromatic
                    else "single"
                )
            self._add_bond(other, self.prev, explicit, offset)
        else:
            order = self.pending[0] if self.pending is not None else None
            self.rings[digit] = (self.prev, order, offset)
        self.pending = None

    def parse_bracket(self) -> None:
        text = self.text
        start = self.i
        j = start + 1

        def fail_unterminated():
            raise UnknownAtomTokenError("unterminated bracket atom", start)

        isotope = None
        digits = ""
        while j < len(text) and text[j].isdigit():
            digits += text[j]
            j += 1
        if digits:
            isotope = int(digits)
        if j >= len(text):
            fail_unterminated()
        sym = text[j]
        aromatic = False
        if sym in ORGANIC_AROMATIC:
            j += 1
            aromatic = True
            sym = sym.upper()
        elif sym.isupper():
            j += 1
            if j < len(text) and text[j].islower() and text[j].isalpha():
                sym += text[j]
                j += 1
        else:
            raise UnknownAtomTokenError(f"invalid bracket atom symbol {sym!r}", j)
        hydrogens = 0
        charge = 0
        while True:
            if j >= len(text):
                fail_unterminated()
            ch = text[j]
            if ch == "]":
                j += 1
                break
            if ch == "@":
                self.stereo_seen = True
                j += 1
                if j < len(text) and text[j] == "@":
                    j += 1
                continue
            if ch == "H":
                j += 1
                digits = ""
                while j < len(text) and text[j].isdigit():
                    digits += text[j]
                    j += 1
                hydrogens = int(digits) if digits else 1
                continue
            if ch in "+-":
                sign = 1 if ch == "+" else -1
                j += 1
                digits = ""
                while j < len(text) and text[j].isdigit():
                    digits += text[j]
                    j += 1
                if digits:
                    charge += sign * int(digits)
                else:
                    charge += sign
                    while j < len(text) and text[j] == ch:
                        charge += sign
                        j += 1
                continue
            raise UnknownAtomTokenError(f"invalid bracket atom token {ch!r}", j)
        atom = Atom(
            symbol=sym,
            aromatic=aromatic,
            charge=charge,
            explicit_hydrogens=hydrogens,
            isotope=isotope,
        )
        self.add_atom(atom, start)
        self.i = j

    def parse(self) -> MolecularGraph:
        text = self.text
        while self.i < len(text):
            ch = text[self.i]
            if not ch.isascii():
                raise UnknownAtomTokenError(f"non-ASCII character {ch!r}", self.i)
            if ch == "(":
                if self.prev is None:
                    raise UnbalancedBranchError("branch opened before any atom", self.i)
                if self.pending is not None:
                    raise self.error_expected_atom(self.i, ch)
                self.stack.append((self.prev, self.i, len(self.graph.atoms)))
                self.i += 1
            elif ch == ")":
                if self.pending is not None:
                    raise self.error_expected_atom(self.i, ch)
                if not self.stack:
                    raise UnbalancedBranchError("branch closed without opening", self.i)
                restore, open_offset, count = self.stack.pop()
                if len(self.graph.atoms) == count:
                    raise UnknownAtomTokenError("empty branch", self.i)
                self.prev = restore
                self.i += 1
            elif ch in BOND_ORDERS:
                if self.prev is None or self.pending is not None:
                    raise self.error_expected_atom(self.i, ch)
                self.pending = (BOND_ORDERS[ch], self.i)
                self.i += 1
            elif ch in "/\\":
                if self.prev is None or self.pending is not None:
                    raise self.error_expected_atom(self.i, ch)
                self.stereo_seen = True
                self.pending = ("single", self.i)
                self.i += 1
            elif ch.isdigit():
                self.close_or_open_ring(int(ch), self.i)
                self.i += 1
            elif ch == "%":
                if self.i + 2 >= len(text) or not text[self.i + 1 : self.i + 3].isdigit():
                    raise UnknownAtomTokenError("'%' needs two ring-closure digits", self.i)
                self.close_or_open_ring(int(text[self.i + 1 : self.i + 3]), self.i)
                self.i += 3
            elif ch == "[":
                self.parse_bracket()
            elif ch == "*":
                raise UnknownAtomTokenError("wildcard atoms are not supported", self.i)
            else:
                matched = None
                for sym in ORGANIC_ALIPHATIC:
                    if text.startswith(sym, self.i):
                        matched = Atom(symbol=sym)
                        break
                if matched is None and ch in ORGANIC_AROMATIC:
                    matched = Atom(symbol=ch.upper(), aromatic=True)
                if matched is None:
                    if self.prev is None or self.pending is not None:
                        raise self.error_expected_atom(self.i, ch)
                    raise TrailingInputError(f"unexpected input {ch!r}", self.i)
                self.add_atom(matched, self.i)
                self.i += len(matched.symbol)
        if self.pending is not None:
            raise self.error_expected_atom(self.pending[1], self.text[self.pending[1]])
        if self.stack:
            raise UnbalancedBranchError("branch never closed", self.stack[-1][1])
        if self.rings:
            offset = min(off for (_, _, off) in self.rings.values())
            raise UnclosedRingError("ring closure never closed", offset)
        if not self.graph.atoms:
            raise UnknownAtomTokenError("no atoms in input", 0)
        if self.stereo_seen:
            warnings.warn(
                "stereochemistry markers were discarded",
                StereoDiscardedWarning,
                stacklevel=3,
            )
        return self.graph


def parse_smiles(text: str) -> MolecularGraph:
    """Parse ``text`` into a molecular graph.

    Raises a typed :class:`SmilesError` naming the byte offset on malformed
    input; never raises anything else for string inputs.
    """
    if not isinstance(text, str):
        raise TypeError("SMILES input must be a string")
    if not text:
        raise UnknownAtomTokenError("empty input", 0)
    return _Parser(text).parse()


def enumerate_paths(graph: MolecularGraph, max_len: int) -> Counter:
    """Multiset of label strings for all simple paths of 0..max_len bonds.

    A path is rendered as atom and bond labels alternating along the walk;
    each undirected path contributes the lexicographically smaller of its two
    directional renderings exactly once. Single atoms count as 0-bond paths.
    """
    if not 1 <= max_len <= 10:
        raise ValueError("max_len must be in 1..10")
    labels = [atom.label() for atom in graph.atoms]
    adj = graph.adjacency()
    counts: Counter = Counter()
    for lab in labels:
        counts[lab] += 1

    directed: Counter = Counter()
    n = len(graph.atoms)
    visited = [False] * n

    def walk(node: int, depth: int, atom_seq: list[int], bond_seq: list[str]) -> None:
        if depth == max_len:
            return
        for nxt, order in adj[node]:
            if visited[nxt]:
                continue
            atom_seq.append(nxt)
            bond_seq.append(BOND_LABELS[order])
            visited[nxt] = True
            forward = _render(labels, atom_seq, bond_seq)
            backward = _render(labels, atom_seq[::-1], bond_seq[::-1])
            directed[min(forward, backward)] += 1
            walk(nxt, depth + 1, atom_seq, bond_seq)
            visited[nxt] = False
            atom_seq.pop()
            bond_seq.pop()

    for start in range(n):
        visited[start] = True
        walk(start, 0, [start], [])
        visited[start] = False

    for key, count in directed.items():
        # every undirected path is traversed once from each end
        assert count % 2 == 0
        counts[key] += count // 2
    return counts


def _render(labels: list[str], atom_seq: list[int], bond_seq: list[str]) -> str:
    parts = [labels[atom_seq[0]]]
    for bond, atom in zip(bond_seq, atom_seq[1:]):
        parts.append(bond)
        parts.append(labels[atom])
    return "".join(parts)


def path_bit(path: str, dim: int) -> int:
    """Bit index for a path string: xor-folded FNV-1a modulo ``dim``."""
    h = fnv1a64(path.encode())
    return (h ^ (h >> 32)) % dim


def fingerprint(graph: MolecularGraph, dim: int = 200, max_len: int = 7) -> Fingerprint:
    """Fold the path multiset of ``graph`` into a binary ``dim``-wide vector."""
    if dim < 8:
        raise ValueError("fingerprint dim must be >= 8")
    values = np.zeros(dim, dtype=np.float64)
    for path in enumerate_paths(graph, max_len):
        values[path_bit(path, dim)] = 1.0
    return Fingerprint(values=values)


def fingerprint_smiles(text: str, dim: int = 200, max_len: int = 7) -> Fingerprint:
    """Parse ``text`` and fingerprint it, recording the source text."""
    fp = fingerprint(parse_smiles(text), dim=dim, max_len=max_len)
    fp.source = text
    return fp
