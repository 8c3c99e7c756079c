"""Access control policies: whitelist rules plus an overriding blacklist.

A policy file holds one rule per line in the form

    < objects > :: < specifications >

where both sides are boolean combinations (AND / OR / NOT, parentheses) of
atoms.  Object atoms select what is being read (edge label ``alpha=X``,
exposable-weight threshold ``chi=0.3``, user location ``delta``); spec atoms
constrain who may read it (social distance ``rho=2``, connection label
``gamma=X``, connection weight ``y=0.2``, originator user/peer ``B``/``P``,
intermediate user/peer ``C``/``M``, application ``S``, originator location
``L``).  Lines after a ``---`` separator populate the blacklist.  Access is
granted iff no participant is blacklisted and some rule whose selector covers
the requested object has a satisfied specification; rules are checked in the
order blacklist -> label rules -> weight rules -> other rules.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

# -- AST -------------------------------------------------------------------

_GREEK = {
    "α": "alpha",
    "χ": "chi",
    "Δ": "delta",
    "ρ": "rho",
    "γ": "gamma",
}

_OBJECT_KEYS = {"alpha", "chi", "delta", "blacklist"}
_SPEC_KEYS = {"rho", "gamma", "y", "B", "P", "C", "M", "S", "L"}


class PolicyParseError(ValueError):
    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class Atom:
    key: str
    value: Optional[str] = None

    def render(self) -> str:
        return self.key if self.value is None else f"{self.key}={self.value}"


@dataclass(frozen=True)
class Not:
    child: object

    def render(self) -> str:
        return f"NOT {_render_child(self.child)}"


@dataclass(frozen=True)
class And:
    children: tuple

    def render(self) -> str:
        return " AND ".join(_render_child(c) for c in self.children)


@dataclass(frozen=True)
class Or:
    children: tuple

    def render(self) -> str:
        return " OR ".join(_render_child(c) for c in self.children)


def _render_child(node) -> str:
    if isinstance(node, (And, Or)):
        return f"({node.render()})"
    return node.render()


# -- parser ----------------------------------------------------------------

_TOKEN_RE = re.compile(r"::|<|>|\(|\)|[^\s<>()]+")


def _tokenize(line: str) -> list[str]:
    return _TOKEN_RE.findall(line)


class _ExprParser:
    def __init__(self, tokens: list[str], lineno: int, allowed_keys: set[str]):
        self.tokens = tokens
        self.pos = 0
        self.lineno = lineno
        self.allowed = allowed_keys

    def peek(self) -> Optional[str]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise PolicyParseError("unexpected end of expression", self.lineno)
        self.pos += 1
        return tok

    def parse(self):
        expr = self.parse_or()
        if self.peek() is not None:
            raise PolicyParseError(f"trailing token {self.peek()!r}", self.lineno)
        return expr

    def parse_or(self):
        children = [self.parse_and()]
        while self.peek() is not None and self.peek().upper() == "OR":
            self.take()
            children.append(self.parse_and())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def parse_and(self):
        children = [self.parse_unary()]
        while self.peek() is not None and self.peek().upper() == "AND":
            self.take()
            children.append(self.parse_unary())
        return children[0] if len(children) == 1 else And(tuple(children))

    def parse_unary(self):
        tok = self.peek()
        if tok is not None and tok.upper() == "NOT":
            self.take()
            return Not(self.parse_unary())
        if tok == "(":
            self.take()
            expr = self.parse_or()
            if self.take() != ")":
                raise PolicyParseError("expected ')'", self.lineno)
            return expr
        return self.parse_atom()

    def parse_atom(self) -> Atom:
        tok = self.take()
        key, _, value = tok.partition("=")
        key = _GREEK.get(key, key)
        if key not in self.allowed:
            raise PolicyParseError(f"unknown atom {tok!r}", self.lineno)
        return Atom(key, value if value else None)


# -- policy ----------------------------------------------------------------


@dataclass(frozen=True)
class BlacklistEntry:
    role: str  # B | C | P | M | any
    token: str


@dataclass(frozen=True)
class Rule:
    selector: object
    spec: object

    def category(self) -> int:
        """0 = mentions a label object, 1 = weight-only, 2 = everything else."""
        keys = _atom_keys(self.selector)
        if "alpha" in keys:
            return 0
        if keys <= {"chi"}:
            return 1
        return 2

    def render(self) -> str:
        return f"< {self.selector.render()} > :: < {self.spec.render()} >"


def _atom_keys(node) -> set[str]:
    if isinstance(node, Atom):
        return {node.key}
    if isinstance(node, Not):
        return _atom_keys(node.child)
    return set().union(*(_atom_keys(c) for c in node.children))


def _atoms(node):
    if isinstance(node, Atom):
        yield node
    elif isinstance(node, Not):
        yield from _atoms(node.child)
    else:
        for c in node.children:
            yield from _atoms(c)


@dataclass
class AccessPolicy:
    owner: str = ""
    rules: list[Rule] = field(default_factory=list)
    blacklist: list[BlacklistEntry] = field(default_factory=list)

    def ordered_rules(self) -> list[tuple[int, Rule]]:
        indexed = list(enumerate(self.rules))
        indexed.sort(key=lambda p: p[1].category())
        return indexed

    def add_blacklist(self, token: str, role: str = "any") -> None:
        self.blacklist.append(BlacklistEntry(role, token))

    def to_text(self) -> str:
        lines = [rule.render() for rule in self.rules]
        if self.blacklist:
            rendered = []
            for e in self.blacklist:
                if e.role == "any":
                    # a generic entry bans the token as originator and intermediate
                    rendered.extend([f"B={e.token}", f"C={e.token}"])
                else:
                    rendered.append(f"{e.role}={e.token}")
            lines.append("---")
            lines.append("< blacklist > :: < " + " OR ".join(rendered) + " >")
        return "\n".join(lines) + "\n"


def parse_policy(text: str, owner: str = "") -> AccessPolicy:
    policy = AccessPolicy(owner=owner)
    in_blacklist = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if set(line) <= {"-"} and len(line) >= 3:
            in_blacklist = True
            continue
        tokens = _tokenize(line)
        rule = _parse_rule(tokens, lineno)
        selector_keys = _atom_keys(rule.selector)
        if "blacklist" in selector_keys or in_blacklist:
            _absorb_blacklist(policy, rule, lineno)
        else:
            policy.rules.append(rule)
    return policy


def load_policy(path, owner: str = "") -> AccessPolicy:
    with open(path) as fh:
        return parse_policy(fh.read(), owner=owner)


def _parse_rule(tokens: list[str], lineno: int) -> Rule:
    def expect(tok: str, i: int) -> int:
        if i >= len(tokens) or tokens[i] != tok:
            raise PolicyParseError(f"expected {tok!r}", lineno)
        return i + 1

    i = expect("<", 0)
    try:
        close = tokens.index(">", i)
    except ValueError:
        raise PolicyParseError("expected '>'", lineno) from None
    selector = _ExprParser(
        tokens[i:close], lineno, _OBJECT_KEYS
    ).parse()
    i = expect("::", close + 1)
    i = expect("<", i)
    if tokens[-1] != ">":
        raise PolicyParseError("expected trailing '>'", lineno)
    spec = _ExprParser(tokens[i:-1], lineno, _SPEC_KEYS).parse()
    return Rule(selector, spec)


def _absorb_blacklist(policy: AccessPolicy, rule: Rule, lineno: int) -> None:
    for atom in _atoms(rule.spec):
        if atom.key not in {"B", "C", "P", "M"}:
            raise PolicyParseError(
                f"blacklist entries must use B/C/P/M atoms, got {atom.key!r}", lineno
            )
        if atom.value is None:
            raise PolicyParseError("blacklist atom needs a value", lineno)
        policy.blacklist.append(BlacklistEntry(atom.key, atom.value))


# -- evaluation ------------------------------------------------------------


@dataclass(frozen=True)
class RequestedObject:
    kind: str  # edge | location
    label: Optional[str] = None
    weight: Optional[float] = None


@dataclass(frozen=True)
class RequestContext:
    originator_user: str
    originator_peer: str = ""
    application: str = ""
    intermediate_users: frozenset = frozenset()
    intermediate_peers: frozenset = frozenset()
    social_distance: Optional[int] = None
    connection_labels: frozenset = frozenset()
    connection_weight: float = 0.0
    originator_place: Optional[str] = None


@dataclass(frozen=True)
class Verdict:
    granted: bool
    rule_index: Optional[int] = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.granted


def _selector_covers(node, requested: RequestedObject) -> bool:
    if isinstance(node, Atom):
        if node.key == "alpha":
            return requested.kind == "edge" and (
                node.value is None or requested.label == node.value
            )
        if node.key == "chi":
            # threshold semantics: weights >= chi may be disclosed
            if requested.kind != "edge" or requested.weight is None:
                return False
            return requested.weight >= float(node.value or 0.0)
        if node.key == "delta":
            return requested.kind == "location"
        return False
    if isinstance(node, Not):
        return not _selector_covers(node.child, requested)
    if isinstance(node, And):
        return all(_selector_covers(c, requested) for c in node.children)
    return any(_selector_covers(c, requested) for c in node.children)


def _spec_satisfied(node, ctx: RequestContext) -> bool:
    if isinstance(node, Atom):
        v = node.value
        if node.key == "rho":
            # rho=k admits originators within k hops
            return ctx.social_distance is not None and ctx.social_distance <= int(
                float(v)
            )
        if node.key == "gamma":
            return v in ctx.connection_labels
        if node.key == "y":
            return ctx.connection_weight >= float(v)
        if node.key == "B":
            return ctx.originator_user == v
        if node.key == "P":
            return ctx.originator_peer == v
        if node.key == "C":
            return v in ctx.intermediate_users
        if node.key == "M":
            return v in ctx.intermediate_peers
        if node.key == "S":
            return ctx.application == v
        if node.key == "L":
            return ctx.originator_place == v
        return False
    if isinstance(node, Not):
        return not _spec_satisfied(node.child, ctx)
    if isinstance(node, And):
        return all(_spec_satisfied(c, ctx) for c in node.children)
    return any(_spec_satisfied(c, ctx) for c in node.children)


def _blacklisted(policy: AccessPolicy, ctx: RequestContext) -> Optional[str]:
    for e in policy.blacklist:
        if e.role in ("B", "any") and ctx.originator_user == e.token:
            return f"originator user {e.token} blacklisted"
        if e.role in ("P", "any") and ctx.originator_peer == e.token:
            return f"originator peer {e.token} blacklisted"
        if e.role in ("C", "any") and e.token in ctx.intermediate_users:
            return f"intermediate user {e.token} blacklisted"
        if e.role in ("M", "any") and e.token in ctx.intermediate_peers:
            return f"intermediate peer {e.token} blacklisted"
    return None


def evaluate(
    policy: AccessPolicy, ctx: RequestContext, requested: RequestedObject
) -> Verdict:
    """Pure whitelist evaluation with blacklist dominance."""
    reason = _blacklisted(policy, ctx)
    if reason is not None:
        return Verdict(False, None, reason)
    for index, rule in policy.ordered_rules():
        if _selector_covers(rule.selector, requested) and _spec_satisfied(
            rule.spec, ctx
        ):
            return Verdict(True, index, "rule matched")
    return Verdict(False, None, "no whitelist rule matched")


def permissive_policy() -> AccessPolicy:
    """Experiment default: expose all edges and location to everyone.

    ``NOT rho=-1`` is vacuously true for any context, resolved distance or
    not, so every object category is granted unconditionally.
    """
    always = Not(Atom("rho", "-1"))
    return AccessPolicy(
        rules=[
            Rule(Atom("alpha"), always),
            Rule(Atom("chi", "0"), always),
            Rule(Atom("delta"), always),
        ]
    )


class PolicyStore:
    """Per-user policies with a configurable default."""

    def __init__(self, default: Optional[AccessPolicy] = None):
        self._policies: dict = {}
        self.default = default

    def set(self, owner, policy: AccessPolicy) -> None:
        self._policies[owner] = policy

    def get(self, owner) -> Optional[AccessPolicy]:
        return self._policies.get(owner, self.default)

    def allows_edge(self, owner, label: str, weight: float, ctx: RequestContext) -> bool:
        policy = self.get(owner)
        if policy is None:
            return True  # permissive default
        return bool(
            evaluate(policy, ctx, RequestedObject("edge", label=label, weight=weight))
        )

    def allows_location(self, owner, ctx: RequestContext) -> bool:
        policy = self.get(owner)
        if policy is None:
            return True
        return bool(evaluate(policy, ctx, RequestedObject("location")))
