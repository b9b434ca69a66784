"""IUPAC-condensed glycan notation: tokenizer, parser, canonical writer and vocabularies.

Supported grammar::

    glycan   := unit { unit } MONO
    unit     := ( MONO LINKAGE ) | ( "[" glycan LINKAGE "]" )
    MONO     := [A-Za-z][A-Za-z0-9]*
    LINKAGE  := "(" ("a"|"b"|"?") ("1"|"2"|"?") "-" ("1".."9"|"?") ")"

Strings read child -> parent from left to right; the last residue of the
top-level sequence is the reducing-end root.  A bracketed branch attaches to
the residue that follows the closing bracket.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

UNKNOWN_MONO = "Unknown-Monosaccharide"

LINKAGE_RE = re.compile(r"^[ab?][12?]-[1-9?]$")

_ANOMERS = "ab?"
_DONORS = "12?"
_ACCEPTORS = "123456789?"


class GlycanSyntaxError(ValueError):
    """Base class for every structured notation error."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)


class UnexpectedCharacter(GlycanSyntaxError):
    pass


class UnterminatedLinkage(GlycanSyntaxError):
    pass


class UnbalancedBrackets(GlycanSyntaxError):
    pass


class DanglingLinkage(GlycanSyntaxError):
    pass


class EmptyInput(GlycanSyntaxError):
    pass


class EmptyCorpus(ValueError):
    pass


# ---------------------------------------------------------------------------
# Tokens


@dataclass(frozen=True)
class Token:
    kind: str  # MONO | LINKAGE | LBRACKET | RBRACKET
    lexeme: str
    position: int
    value: str = ""

    @property
    def linkage(self) -> tuple[str, str, str]:
        if self.kind != "LINKAGE":
            raise AttributeError("not a linkage token")
        return self.value[0], self.value[1], self.value[3]


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into MONO, LINKAGE, LBRACKET and RBRACKET tokens.

    The lexemes concatenate back to ``text`` exactly.
    """
    if not text:
        raise EmptyInput("empty glycan string", 0)
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            tokens.append(Token("LBRACKET", ch, i))
            i += 1
        elif ch == "]":
            tokens.append(Token("RBRACKET", ch, i))
            i += 1
        elif ch == "(":
            tokens.append(_read_linkage(text, i))
            i += len(tokens[-1].lexeme)
        elif ch.isascii() and ch.isalpha():
            j = i + 1
            while j < n and text[j].isascii() and text[j].isalnum():
                j += 1
            tokens.append(Token("MONO", text[i:j], i, text[i:j]))
            i = j
        else:
            raise UnexpectedCharacter(f"unexpected character {ch!r}", i)
    return tokens


def _read_linkage(text: str, start: int) -> Token:
    # expected layout: ( anomer donor - acceptor )
    slots = (_ANOMERS, _DONORS, "-", _ACCEPTORS)
    pos = start + 1
    for allowed in slots:
        if pos >= len(text):
            raise UnterminatedLinkage("linkage is not closed", start)
        if text[pos] not in allowed:
            if text[pos] in "()[]":
                raise UnterminatedLinkage("linkage is not closed", start)
            raise UnexpectedCharacter(f"unexpected character {text[pos]!r} in linkage", pos)
        pos += 1
    if pos >= len(text) or text[pos] != ")":
        if pos < len(text) and text[pos].isdigit():
            raise UnexpectedCharacter("multi-digit linkage positions are not supported", pos)
        raise UnterminatedLinkage("linkage is not closed", start)
    lexeme = text[start:pos + 1]
    return Token("LINKAGE", lexeme, start, lexeme[1:-1])


# ---------------------------------------------------------------------------
# Trees


@dataclass(frozen=True)
class GlycanTree:
    """Monosaccharide-level tree.

    ``nodes`` holds ``(node_id, name)`` pairs with ids ``0..M-1`` in reading
    order; ``edges`` holds ``(child_id, parent_id, linkage)``.
    """

    nodes: tuple[tuple[int, str], ...]
    edges: tuple[tuple[int, int, str], ...]
    root_id: int

    def __post_init__(self):
        m = len(self.nodes)
        if m < 1:
            raise ValueError("a glycan tree needs at least one node")
        if [nid for nid, _ in self.nodes] != list(range(m)):
            raise ValueError("node ids must be 0..M-1 in order")
        if len(self.edges) != m - 1:
            raise ValueError("a tree with M nodes has M-1 edges")
        parents = {}
        for child, parent, link in self.edges:
            if child == self.root_id or child in parents:
                raise ValueError(f"node {child} has more than one parent")
            if not (0 <= parent < m and 0 <= child < m):
                raise ValueError("edge endpoint out of range")
            if not LINKAGE_RE.match(link):
                raise ValueError(f"malformed linkage {link!r}")
            parents[child] = parent
        for nid in range(m):
            seen = set()
            while nid != self.root_id:
                if nid in seen:
                    raise ValueError("cycle in glycan tree")
                seen.add(nid)
                nid = parents[nid]

    @property
    def names(self) -> list[str]:
        return [name for _, name in self.nodes]

    @property
    def linkages(self) -> list[str]:
        return [link for _, _, link in self.edges]

    def children(self) -> dict[int, list[tuple[int, str]]]:
        out: dict[int, list[tuple[int, str]]] = {nid: [] for nid, _ in self.nodes}
        for child, parent, link in self.edges:
            out[parent].append((child, link))
        return out

    @property
    def fully_solved(self) -> bool:
        return all("?" not in link for link in self.linkages)


class _Parser:
    def __init__(self, tokens: Sequence[Token], text: str):
        self.tokens = tokens
        self.pos = 0
        self.text = text
        self.names: list[str] = []
        self.edges: list[tuple[int, int, str]] = []

    def _new_node(self, name: str) -> int:
        self.names.append(name)
        return len(self.names) - 1

    def sequence(self, nested: bool) -> tuple[int, str | None]:
        """Parse a chain up to ``]`` or end of input.

        Returns the chain's last residue and, inside brackets, the linkage
        that connects it to the outer residue.
        """
        pending: list[tuple[int, str]] = []
        last: int | None = None
        last_link: str | None = None
        while self.pos < len(self.tokens):
            tok = self.tokens[self.pos]
            if tok.kind == "RBRACKET":
                break
            if last is not None and last_link is None:
                # a residue without linkage must close the chain
                raise UnexpectedCharacter(f"expected linkage before {tok.lexeme!r}", tok.position)
            if last is not None:
                pending.append((last, last_link))
                last, last_link = None, None
            if tok.kind == "LBRACKET":
                self.pos += 1
                branch, link = self.sequence(nested=True)
                if self.pos >= len(self.tokens):
                    raise UnbalancedBrackets("missing ']'", tok.position)
                self.pos += 1
                pending.append((branch, link))
            elif tok.kind == "MONO":
                self.pos += 1
                node = self._new_node(tok.value)
                for child, link in pending:
                    self.edges.append((child, node, link))
                pending = []
                last = node
                if self.pos < len(self.tokens) and self.tokens[self.pos].kind == "LINKAGE":
                    last_link = self.tokens[self.pos].value
                    self.pos += 1
            else:  # LINKAGE without residue
                raise DanglingLinkage("linkage without a preceding residue", tok.position)
        end = self.tokens[self.pos].position if self.pos < len(self.tokens) else len(self.text)
        if pending:
            raise DanglingLinkage("linkage without a following residue", end)
        if last is None:
            raise EmptyInput("empty chain", end)
        if nested:
            if last_link is None:
                raise DanglingLinkage("branch lacks a linkage to its parent", end)
        elif last_link is not None:
            raise DanglingLinkage("linkage without a following residue", end)
        return last, last_link


def parse_glycan(text: str) -> GlycanTree:
    """Parse an IUPAC-condensed string into a :class:`GlycanTree`."""
    if text is None or not text.strip():
        raise EmptyInput("empty glycan string", 0)
    tokens = tokenize(text)
    opened: list[int] = []
    for tok in tokens:
        if tok.kind == "LBRACKET":
            opened.append(tok.position)
        elif tok.kind == "RBRACKET":
            if not opened:
                raise UnbalancedBrackets("unexpected ']'", tok.position)
            opened.pop()
    if opened:
        raise UnbalancedBrackets("missing ']'", opened[-1])
    parser = _Parser(tokens, text)
    root, _ = parser.sequence(nested=False)
    if parser.pos != len(tokens):
        raise UnbalancedBrackets("unexpected ']'", tokens[parser.pos].position)
    return GlycanTree(
        nodes=tuple(enumerate(parser.names)),
        edges=tuple(parser.edges),
        root_id=root,
    )


def canonicalize(tree: GlycanTree) -> str:
    """Deterministic IUPAC-condensed string for ``tree``.

    Siblings are ordered by ``(linkage, canonical subtree)``; the smallest
    one continues the main chain and the rest become bracketed branches.
    """
    children = tree.children()
    names = dict(tree.nodes)
    memo: dict[int, str] = {}

    # iterative post-order so deep chains do not hit the recursion limit
    stack = [(tree.root_id, False)]
    while stack:
        nid, expanded = stack.pop()
        if expanded:
            parts = sorted((link, memo[c]) for c, link in children[nid])
            if not parts:
                memo[nid] = names[nid]
                continue
            link0, s0 = parts[0]
            branches = "".join(f"[{s}({link})]" for link, s in parts[1:])
            memo[nid] = f"{s0}({link0}){branches}{names[nid]}"
        else:
            stack.append((nid, True))
            stack.extend((c, False) for c, _ in children[nid])
    return memo[tree.root_id]


def canonical_form(text: str) -> str:
    return canonicalize(parse_glycan(text))


# ---------------------------------------------------------------------------
# Vocabularies


@dataclass(frozen=True)
class MonoVocab:
    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate monosaccharide names")
        if self.names.count(UNKNOWN_MONO) != 1:
            raise ValueError(f"vocabulary must contain exactly one {UNKNOWN_MONO}")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.names)})

    @property
    def unknown_id(self) -> int:
        return self._index[UNKNOWN_MONO]

    def lookup(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class LinkageVocab:
    """Linkage strings; linkage ``k`` owns relations ``2k`` (child->parent) and ``2k+1``."""

    linkages: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.linkages)) != len(self.linkages):
            raise ValueError("duplicate linkages")
        for link in self.linkages:
            if not LINKAGE_RE.match(link):
                raise ValueError(f"malformed linkage {link!r}")
        object.__setattr__(self, "_index", {l: i for i, l in enumerate(self.linkages)})

    def __len__(self) -> int:
        return len(self.linkages)

    def __contains__(self, link: str) -> bool:
        return link in self._index

    @property
    def num_relations(self) -> int:
        return 2 * len(self.linkages)

    def relation_ids(self, link: str) -> tuple[int, int]:
        k = self._index[link]
        return 2 * k, 2 * k + 1

    def relation_name(self, rel: int) -> str:
        direction = "fwd" if rel % 2 == 0 else "rev"
        return f"{self.linkages[rel // 2]}:{direction}"


def build_vocabularies(corpus: Iterable[GlycanTree]) -> tuple[MonoVocab, LinkageVocab]:
    names: set[str] = set()
    links: set[str] = set()
    empty = True
    for tree in corpus:
        empty = False
        names.update(tree.names)
        links.update(tree.linkages)
    if empty:
        raise EmptyCorpus("cannot build vocabularies from an empty corpus")
    names.discard(UNKNOWN_MONO)
    return (
        MonoVocab(tuple(sorted(names)) + (UNKNOWN_MONO,)),
        LinkageVocab(tuple(sorted(links))),
    )
