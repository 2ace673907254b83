"""Task formulas over goal variables: parsing, DNF reduction, evaluation.

Grammar (precedence high to low, all left-associative):

    atom  := LABEL | '(' expr ')'
    seq   := atom ('>' atom)*        sequencing ("next")
    conj  := seq  ('&' seq)*         all operands, in any block order
    expr  := conj ('|' conj)*        alternatives

Unicode spellings are accepted as aliases: `∧` for `&`, `∨` for `|`,
`○` for `>`.  A conjunction of composite operands permutes whole
blocks; it never interleaves their contents.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from .world import GoalSet


class ParseError(Exception):
    def __init__(self, message: str, position: int, expected=()):
        self.position = position
        self.expected = tuple(expected)
        super().__init__(f"{message} at position {position}")


@dataclass(frozen=True)
class GoalVar:
    label: str


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


@dataclass(frozen=True)
class Next:
    left: object
    right: object


_TOKEN_RE = re.compile(r"\s*(?:(?P<label>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[&|>()∧∨○]))")
_ALIASES = {"∧": "&", "∨": "|", "○": ">"}


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        if not text[pos:].strip():
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            at = len(text) - len(stripped)
            raise ParseError(f"unexpected character {text[at]!r}", at)
        if m.group("label"):
            tokens.append(("label", m.group("label"), m.start("label")))
        else:
            op = _ALIASES.get(m.group("op"), m.group("op"))
            tokens.append((op, op, m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind):
        tok = self.tokens[self.pos]
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1] or 'end of input'!r}",
                             tok[2], expected=(kind,))
        self.pos += 1
        return tok

    def atom(self):
        kind, value, at = self.peek()
        if kind == "label":
            self.take("label")
            return GoalVar(value)
        if kind == "(":
            self.take("(")
            node = self.expr()
            self.take(")")
            return node
        raise ParseError(f"expected a goal label or '(', found {value or 'end of input'!r}",
                         at, expected=("label", "("))

    def seq(self):
        node = self.atom()
        while self.peek()[0] == ">":
            self.take(">")
            node = Next(node, self.atom())
        return node

    def conj(self):
        parts = [self.seq()]
        while self.peek()[0] == "&":
            self.take("&")
            parts.append(self.seq())
        if len(parts) == 1:
            return parts[0]
        flat = []
        for p in parts:
            flat.extend(p.children if isinstance(p, And) else [p])
        return And(tuple(flat))

    def expr(self):
        parts = [self.conj()]
        while self.peek()[0] == "|":
            self.take("|")
            parts.append(self.conj())
        if len(parts) == 1:
            return parts[0]
        flat = []
        for p in parts:
            flat.extend(p.children if isinstance(p, Or) else [p])
        return Or(tuple(flat))


def parse(formula: str):
    """Parse a task formula into an AST; raises ParseError on bad input."""
    p = _Parser(formula)
    node = p.expr()
    p.take("end")
    return node


def format_ast(node) -> str:
    """Print an AST so that parse(format_ast(x)) == x."""

    def fmt(n, parent_level):
        if isinstance(n, GoalVar):
            return n.label
        if isinstance(n, Next):
            # right operand needs parens: '>' parses left-associative
            text = f"{fmt(n.left, 3)} > {fmt(n.right, 4)}"
            level = 3
        elif isinstance(n, And):
            text = " & ".join(fmt(ch, 2) for ch in n.children)
            level = 2
        else:
            text = " | ".join(fmt(ch, 1) for ch in n.children)
            level = 1
        return f"({text})" if level < parent_level else text

    return fmt(node, 0)


def _word_sets(node):
    """Set of label tuples realizing the formula rooted at ``node``."""
    if isinstance(node, GoalVar):
        return {(node.label,)}
    if isinstance(node, Next):
        left, right = _word_sets(node.left), _word_sets(node.right)
        return {a + b for a in left for b in right}
    if isinstance(node, Or):
        out = set()
        for ch in node.children:
            out |= _word_sets(ch)
        return out
    if isinstance(node, And):
        child_sets = [_word_sets(ch) for ch in node.children]
        out = set()
        for order in itertools.permutations(range(len(child_sets))):
            for combo in itertools.product(*(child_sets[i] for i in order)):
                out.add(tuple(itertools.chain.from_iterable(combo)))
        return out
    raise TypeError(f"not an AST node: {node!r}")


@dataclass(frozen=True)
class Word:
    """One admissible goal sequence from the DNF reduction."""

    labels: tuple[str, ...]
    goal_indices: tuple[int, ...] = ()
    states: tuple[int, ...] = ()

    def __len__(self):
        return len(self.labels)


def to_dnf(ast, goals: GoalSet | None = None) -> list[Word]:
    """Reduce a formula to its deduplicated, deterministically ordered words.

    With a GoalSet the words are grounded (and ordered by goal indices);
    every label in the formula must then name a goal.
    """
    label_words = _word_sets(ast)
    if goals is None:
        return [Word(labels=w) for w in sorted(label_words)]
    words = []
    for w in label_words:
        idx = tuple(goals.index_of(lbl) for lbl in w)
        states = tuple(goals[c].state for c in idx)
        words.append(Word(labels=w, goal_indices=idx, states=states))
    return sorted(words, key=lambda w: w.goal_indices)


@dataclass(frozen=True)
class Certificate:
    state: int
    time: int


def evaluate_word(word: Word, trace, goals: GoalSet, realized=None) -> bool:
    """True iff the certificate trace matches the word's goal order and deadlines.

    ``realized`` maps goal labels to sampled deadline times; deterministic
    deadlines default to their point mass.
    """
    if len(trace) < len(word):
        return False
    for m, label in enumerate(word.labels):
        goal = goals.by_label[label]
        cert = trace[m]
        if cert.state != goal.state:
            return False
        if realized is not None and label in realized:
            deadline_t = realized[label]
        elif goal.deadline.kind == "det":
            deadline_t = goal.deadline.time
        else:
            raise ValueError(
                f"goal {label} has a probabilistic deadline; pass its realization"
            )
        if cert.time > deadline_t:
            return False
    return True
