"""Location classes, policy provisions, and classification of location facts.

Class expressions are negation-free unions and intersections of

* ``within F``            the location is inside feature F,
* ``distance F <= N km``  the location is at most N km from feature F,
* ``ref C``               the location is a member of class C.

Classes may also declare superclasses. Membership is the least fixed point
of these definitions, which is well defined because every operator is
monotone.

The textual policy format, one declaration per line by convention
(``#`` starts a comment)::

    class US91Loc = ref CountryLocation and (within ex:sites/FAIRBANKS or
        within ex:sites/CAMPPARKS) subclass-of CountryLocation
    provision US91-2-c of US91 location US91Loc band 1761..1780 mhz
        effect permit obligation "must accept harmful interference"

IRIs are written bare (``ex:sites/FAIRBANKS``) or in angle brackets when
they collide with a keyword or contain delimiters.
"""

import enum
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .errors import (
    CyclicDefinition, DanglingClassRef, DanglingProvisionClass, DuplicateDefinition,
    MissingDistanceFact, PolicySyntaxError,
)


@dataclass(frozen=True)
class Within:
    feature: str


@dataclass(frozen=True)
class DistanceLE:
    feature: str
    threshold_km: float


@dataclass(frozen=True)
class ClassRef:
    iri: str


@dataclass(frozen=True)
class And:
    operands: Tuple[object, ...]

    def __post_init__(self):
        object.__setattr__(self, "operands", tuple(self.operands))
        if not self.operands:
            raise ValueError("And needs at least one operand")


@dataclass(frozen=True)
class Or:
    operands: Tuple[object, ...]

    def __post_init__(self):
        object.__setattr__(self, "operands", tuple(self.operands))
        if not self.operands:
            raise ValueError("Or needs at least one operand")


@dataclass(frozen=True)
class ClassDef:
    iri: str
    equivalent_to: object
    superclasses: Tuple[str, ...] = ()


class Effect(enum.Enum):
    PERMIT = "Permit"
    DENY = "Deny"


@dataclass(frozen=True)
class Provision:
    id: str
    policy_id: str
    location_class: str
    effect: Effect
    band: Optional[Tuple[float, float]] = None
    obligation: Optional[str] = None


@dataclass
class PolicySet:
    classes: Dict[str, ClassDef] = field(default_factory=dict)
    provisions: List[Provision] = field(default_factory=list)


# -- expression helpers ------------------------------------------------------

def walk(expr):
    yield expr
    if isinstance(expr, (And, Or)):
        for op in expr.operands:
            yield from walk(op)


def class_refs(expr):
    return {e.iri for e in walk(expr) if isinstance(e, ClassRef)}


def referenced_features(expr):
    return {e.feature for e in walk(expr) if isinstance(e, (Within, DistanceLE))}


def distance_targets(ps):
    """Features that some class constrains by distance."""
    return {e.feature for c in ps.classes.values() for e in walk(c.equivalent_to)
            if isinstance(e, DistanceLE)}


def format_expr(expr):
    """Render an expression back into policy syntax."""
    from .wkt import format_number
    if isinstance(expr, Within):
        return "within %s" % expr.feature
    if isinstance(expr, DistanceLE):
        return "distance %s <= %s km" % (expr.feature, format_number(expr.threshold_km))
    if isinstance(expr, ClassRef):
        return "ref %s" % expr.iri
    if isinstance(expr, And):
        return " and ".join(
            "(%s)" % format_expr(op) if isinstance(op, Or) else format_expr(op)
            for op in expr.operands)
    return " or ".join(format_expr(op) for op in expr.operands)


# -- parsing -----------------------------------------------------------------

KEYWORDS = {
    "class", "subclass-of", "or", "and", "within", "distance", "km", "ref",
    "provision", "of", "location", "band", "mhz", "effect", "permit", "deny", "obligation",
}

_DELIM = r"""(?=[\s(),="<]|\.\.|\Z)"""
_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<iri><[^<>\s]*>)
  | (?P<op><=|\.\.|[(),=])
  | (?P<number>-?\d+(?:\.\d+)?""" + _DELIM + r""")
  | (?P<word>[^\s(),="<\#][^\s(),="<]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text):
    out = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise PolicySyntaxError("unexpected character %r" % text[pos],
                                    line=line, column=pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            out.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    out.append(_Tok("end", "", line, pos - line_start + 1))
    return out


_STRING_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


class _PolicyParser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        if tok.kind != "end":
            self.i += 1
        return tok

    def fail(self, tok, what):
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise PolicySyntaxError("expected %s, found %s" % (what, found),
                                line=tok.line, column=tok.col)

    def is_kw(self, tok, kw):
        return tok.kind == "word" and tok.text == kw

    def keyword(self, kw):
        tok = self.next()
        if not self.is_kw(tok, kw):
            self.fail(tok, repr(kw))
        return tok

    def op(self, value):
        tok = self.next()
        if tok.kind != "op" or tok.text != value:
            self.fail(tok, repr(value))

    def iri(self):
        tok = self.next()
        if tok.kind == "iri":
            return tok.text[1:-1]
        if tok.kind == "word" and tok.text not in KEYWORDS:
            return tok.text
        self.fail(tok, "an IRI")

    def ident(self):
        tok = self.next()
        if tok.kind in ("word", "number") and tok.text not in KEYWORDS:
            return tok.text
        self.fail(tok, "an identifier")

    def number(self):
        tok = self.next()
        if tok.kind != "number":
            self.fail(tok, "a number")
        return float(tok.text), tok

    def string(self):
        tok = self.next()
        if tok.kind != "string":
            self.fail(tok, "a quoted string")
        body = tok.text[1:-1]
        out = []
        i = 0
        while i < len(body):
            c = body[i]
            if c == "\\":
                nxt = body[i + 1]
                if nxt not in _STRING_ESCAPES:
                    raise PolicySyntaxError("invalid escape \\%s" % nxt,
                                            line=tok.line, column=tok.col + i + 1)
                out.append(_STRING_ESCAPES[nxt])
                i += 2
            else:
                out.append(c)
                i += 1
        return "".join(out)

    def expr(self):
        terms = [self.term()]
        while self.is_kw(self.peek(), "or"):
            self.next()
            terms.append(self.term())
        return terms[0] if len(terms) == 1 else Or(tuple(terms))

    def term(self):
        factors = [self.factor()]
        while self.is_kw(self.peek(), "and"):
            self.next()
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else And(tuple(factors))

    def factor(self):
        tok = self.peek()
        if self.is_kw(tok, "within"):
            self.next()
            return Within(self.iri())
        if self.is_kw(tok, "distance"):
            self.next()
            feature = self.iri()
            self.op("<=")
            threshold, ntok = self.number()
            if threshold < 0:
                raise PolicySyntaxError("distance threshold must be non-negative",
                                        line=ntok.line, column=ntok.col)
            self.keyword("km")
            return DistanceLE(feature, threshold)
        if self.is_kw(tok, "ref"):
            self.next()
            return ClassRef(self.iri())
        if tok.kind == "op" and tok.text == "(":
            self.next()
            inner = self.expr()
            self.op(")")
            return inner
        self.fail(tok, "'within', 'distance', 'ref' or '('")

    def classdecl(self, ps):
        start = self.keyword("class")
        iri = self.iri()
        self.op("=")
        expr = self.expr()
        supers = []
        if self.is_kw(self.peek(), "subclass-of"):
            self.next()
            supers.append(self.iri())
            while self.peek().kind == "op" and self.peek().text == ",":
                self.next()
                supers.append(self.iri())
        if iri in ps.classes:
            raise DuplicateDefinition("class %s declared twice (line %d)" % (iri, start.line))
        ps.classes[iri] = ClassDef(iri, expr, tuple(dict.fromkeys(supers)))

    def providecl(self, ps):
        start = self.keyword("provision")
        pid = self.ident()
        self.keyword("of")
        policy = self.ident()
        self.keyword("location")
        cls = self.iri()
        band = None
        if self.is_kw(self.peek(), "band"):
            self.next()
            low, ltok = self.number()
            self.op("..")
            high, _ = self.number()
            self.keyword("mhz")
            if low > high:
                raise PolicySyntaxError("band low edge exceeds high edge",
                                        line=ltok.line, column=ltok.col)
            band = (low, high)
        self.keyword("effect")
        tok = self.next()
        if self.is_kw(tok, "permit"):
            effect = Effect.PERMIT
        elif self.is_kw(tok, "deny"):
            effect = Effect.DENY
        else:
            self.fail(tok, "'permit' or 'deny'")
        obligation = None
        if self.is_kw(self.peek(), "obligation"):
            self.next()
            obligation = self.string()
        if any(p.id == pid and p.policy_id == policy for p in ps.provisions):
            raise DuplicateDefinition("provision %s of %s declared twice (line %d)"
                                      % (pid, policy, start.line))
        ps.provisions.append(Provision(pid, policy, cls, effect, band, obligation))

    def document(self):
        ps = PolicySet()
        while True:
            tok = self.peek()
            if tok.kind == "end":
                return ps
            if self.is_kw(tok, "class"):
                self.classdecl(ps)
            elif self.is_kw(tok, "provision"):
                self.providecl(ps)
            else:
                self.fail(tok, "'class' or 'provision'")


_ERROR_CLASSES = {
    "CyclicDefinition": CyclicDefinition,
    "DanglingClassRef": DanglingClassRef,
    "DanglingProvisionClass": DanglingProvisionClass,
}


def parse_policy_doc(text, validate=True):
    """Parse policy text and check it is self-consistent.

    Raises the first structural validation error unless ``validate`` is
    false; feature references are not checked here because no store is
    available.
    """
    ps = _PolicyParser(text).document()
    if not validate:
        return ps
    report = validate_policy_set(ps)
    if report.errors:
        first = report.errors[0]
        raise _ERROR_CLASSES[first.code](first.message)
    return ps


# -- validation --------------------------------------------------------------

@dataclass(frozen=True)
class Issue:
    code: str
    subject: str
    message: str


@dataclass
class ValidationReport:
    errors: List[Issue] = field(default_factory=list)
    warnings: List[Issue] = field(default_factory=list)

    @property
    def ok(self):
        return not self.errors

    def lines(self):
        out = ["error %s %s: %s" % (i.code, i.subject, i.message) for i in self.errors]
        out += ["warning %s %s: %s" % (i.code, i.subject, i.message) for i in self.warnings]
        return out


def _find_cycle(ps):
    graph = {c: sorted(r for r in class_refs(d.equivalent_to) if r in ps.classes)
             for c, d in ps.classes.items()}
    state = {}

    def visit(node, path):
        state[node] = "active"
        path.append(node)
        for nxt in graph[node]:
            if state.get(nxt) == "active":
                return path[path.index(nxt):] + [nxt]
            if nxt not in state:
                found = visit(nxt, path)
                if found:
                    return found
        path.pop()
        state[node] = "done"
        return None

    for start in sorted(graph):
        if start not in state:
            found = visit(start, [])
            if found:
                return found
    return None


def validate_policy_set(ps, store=None):
    """Check references and acyclicity; feature checks need ``store``.

    Problems are collected into the returned report rather than raised.
    """
    report = ValidationReport()
    for c in sorted(ps.classes):
        for ref in sorted(class_refs(ps.classes[c].equivalent_to)):
            if ref not in ps.classes:
                report.errors.append(Issue("DanglingClassRef", c,
                                           "refers to undeclared class %s" % ref))
    for p in ps.provisions:
        if p.location_class not in ps.classes:
            report.errors.append(Issue("DanglingProvisionClass", "%s/%s" % (p.policy_id, p.id),
                                       "location class %s is not declared" % p.location_class))
    cycle = _find_cycle(ps)
    if cycle:
        report.errors.append(Issue("CyclicDefinition", cycle[0],
                                   "cyclic class references: %s" % " -> ".join(cycle)))
    if store is not None:
        for c in sorted(ps.classes):
            for f in sorted(referenced_features(ps.classes[c].equivalent_to)):
                if f not in store:
                    report.warnings.append(Issue("UnknownFeature", c,
                                                 "feature %s is not in the store" % f))
    return report


# -- evaluation --------------------------------------------------------------

def eval_class_expr(expr, facts, memberships, known_features=None):
    """Truth of ``expr`` for a location, given the classes it already belongs to.

    With ``known_features`` given, a distance constraint on a feature outside
    that set is false instead of an error.
    """
    if isinstance(expr, Within):
        return expr.feature in facts.within
    if isinstance(expr, DistanceLE):
        d = facts.distances.get(expr.feature)
        if d is None:
            if known_features is not None and expr.feature not in known_features:
                return False
            raise MissingDistanceFact("no distance computed to %s" % expr.feature)
        return d <= expr.threshold_km
    if isinstance(expr, ClassRef):
        return expr.iri in memberships
    if isinstance(expr, And):
        return all(eval_class_expr(op, facts, memberships, known_features)
                   for op in expr.operands)
    if isinstance(expr, Or):
        return any(eval_class_expr(op, facts, memberships, known_features)
                   for op in expr.operands)
    raise TypeError("not a class expression: %r" % (expr,))


def witness(expr, facts, memberships, known_features=None):
    """Atoms that make a true ``expr`` true: the first satisfied branch of each Or."""
    if isinstance(expr, Within):
        return (("within", expr.feature),)
    if isinstance(expr, DistanceLE):
        return (("distance", expr.feature, facts.distances[expr.feature], expr.threshold_km),)
    if isinstance(expr, ClassRef):
        return (("class", expr.iri),)
    if isinstance(expr, And):
        atoms = []
        for op in expr.operands:
            atoms.extend(witness(op, facts, memberships, known_features))
        return tuple(dict.fromkeys(atoms))
    for op in expr.operands:
        if eval_class_expr(op, facts, memberships, known_features):
            return witness(op, facts, memberships, known_features)
    raise ValueError("expression is not satisfied")


@dataclass(frozen=True)
class ClassEntry:
    iri: str
    round: int
    support: Tuple[tuple, ...]
    via: str  # "definition" or "subclass-of"


@dataclass(frozen=True)
class Classification:
    memberships: frozenset
    entries: Tuple[ClassEntry, ...]
    rounds: int


def classify_trace(facts, ps, known_features=None):
    """Least fixed point of class membership, with the reason each class entered.

    Each round evaluates every class against the memberships from the end of
    the previous round, then closes the result under declared superclasses.
    ``rounds`` counts the rounds that added at least one class; it never
    exceeds the number of classes.
    """
    members = set()
    entries = []
    order = sorted(ps.classes)
    rounds = 0
    while True:
        snapshot = frozenset(members)
        fresh = [c for c in order if c not in snapshot
                 and eval_class_expr(ps.classes[c].equivalent_to, facts, snapshot, known_features)]
        if not fresh:
            break
        rounds += 1
        for c in fresh:
            support = witness(ps.classes[c].equivalent_to, facts, snapshot, known_features)
            members.add(c)
            entries.append(ClassEntry(c, rounds, support, "definition"))
        queue = list(fresh)
        while queue:
            sub = queue.pop(0)
            sup_list = ps.classes[sub].superclasses if sub in ps.classes else ()
            for sup in sorted(sup_list):
                if sup not in members:
                    members.add(sup)
                    entries.append(ClassEntry(sup, rounds, (("class", sub),), "subclass-of"))
                    queue.append(sup)
    return Classification(frozenset(members), tuple(entries), rounds)


def classify(facts, ps, known_features=None):
    return classify_trace(facts, ps, known_features).memberships
