"""Textual forms: atoms `Pred(a,b)`, piles `((a,b),(c))` and chain clauses."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache

from lark import Lark, Transformer, v_args
from lark.exceptions import LarkError

from src.utils.errors import ParseError


GRAMMAR = r"""
atom: NAME "(" NAME "," NAME ")"

piles: "(" pile ("," pile)* ")"
pile: "(" NAME ("," NAME)* ")"

clause: atom ARROW body
body: atom (AND atom)*

report_line: NUMBER clause

ARROW: "←" | "<-" | ":-"
AND: "∧" | "&"
NAME: /[A-Za-z_][A-Za-z0-9_]*/
NUMBER: /[+-]?\d+(\.\d+)?([eE][+-]?\d+)?/

%import common.WS
%ignore WS
"""


@dataclass(frozen=True)
class ParsedClause:
    """Head and body atoms of a clause, each as (predicate, arg1, arg2)."""

    head: tuple[str, str, str]
    body: tuple[tuple[str, str, str], ...]


@v_args(inline=True)
class _ToPython(Transformer):
    def atom(self, predicate, subject, obj):
        return str(predicate), str(subject), str(obj)

    def pile(self, *names):
        return [str(n) for n in names]

    def piles(self, *piles):
        return list(piles)

    def body(self, *parts):
        return tuple(p for p in parts if isinstance(p, tuple))

    def clause(self, head, _arrow, body):
        return ParsedClause(head, body)

    def report_line(self, number, clause):
        return float(number), clause


@lru_cache(maxsize=1)
def _parser() -> Lark:
    return Lark(GRAMMAR, start=['atom', 'piles', 'clause', 'report_line'], parser='lalr')


def _parse(text: str, start: str):
    try:
        tree = _parser().parse(text.strip(), start=start)
    except LarkError as exc:
        raise ParseError(f'cannot parse {start} from {text!r}: {exc}') from None
    return _ToPython().transform(tree)


def parse_atom(text: str) -> tuple[str, str, str]:
    return _parse(text, 'atom')


def format_atom(predicate: str, subject: str, obj: str) -> str:
    return f'{predicate}({subject},{obj})'


def parse_piles(text: str) -> list[list[str]]:
    """Parse bottom-first piles, e.g. `((a,b,c),(d))`."""
    return _parse(text, 'piles')


def format_piles(piles: Sequence[Sequence[str]]) -> str:
    return '(' + ','.join('(' + ','.join(p) + ')' for p in piles) + ')'


def parse_clause(text: str) -> ParsedClause:
    return _parse(text, 'clause')


def parse_report_line(text: str) -> tuple[float, ParsedClause]:
    return _parse(text, 'report_line')
