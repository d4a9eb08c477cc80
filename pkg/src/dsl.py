"""
The `.tm` text format: lexer, recursive-descent parser, printer and the
canonical form used for round-trip comparison.

Parsing happens in two passes. The first pass reads the text into plain
declarations; the second builds the StaticModel (machines and storages,
then stages, then flows and triggers in document order) and resolves every
dotted path relative to the machine it was written in.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, List, Optional

from src.dynamics import BehaviorError, EventError, RegionError, build_behavior, define_event, define_region
from src.expressions import (COMPARISONS, Assign, Binary, EvalContext, EvaluationError, Field, Index, It,
                             Len, ListDisplay, Literal, Name, Now, SetVerdict, Transform, Unary, VERDICTS,
                             action_to_source, evaluate, to_source)
from src.model import Annotation, ModelError, StageKind, new_model
from src.things import Record, Symbol, render, type_name

logger = logging.getLogger(__name__)

KEYWORDS = {
    'model', 'machine', 'storage', 'flow', 'trigger', 'when', 'after', 'do', 'emit', 'input', 'event',
    'over', 'duration', 'behavior', 'repeat', 'every',
} | {kind.value for kind in StageKind}

# Words with a fixed meaning inside expressions; they stay ident tokens
RESERVED = {'it', 'now', 'len', 'verdict', 'and', 'or', 'not', 'true', 'false'}

PUNCTUATION = {
    '->': 'arrow', ':=': 'assign', '!=': 'ne', '<=': 'le', '>=': 'ge',
    '{': 'lbrace', '}': 'rbrace', '(': 'lparen', ')': 'rparen', '[': 'lbracket', ']': 'rbracket',
    ';': 'semi', ',': 'comma', '.': 'dot', ':': 'colon', '=': 'eq', '<': 'lt', '>': 'gt',
    '+': 'plus', '-': 'minus', '*': 'star', '/': 'slash', '%': 'percent',
}
OPERATORS = {'eq': '=', 'ne': '!=', 'lt': '<', 'le': '<=', 'gt': '>', 'ge': '>=',
             'plus': '+', 'minus': '-', 'star': '*', 'slash': '/', 'percent': '%'}
ESCAPES = {'n': '\n', '"': '"', '\\': '\\'}


# ---------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------
@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int = 0

    def __str__(self):
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str   # 'error' or 'warning'
    span: SourceSpan
    message: str
    rule: str

    def __str__(self):
        return f"{self.span}: {self.severity}: {self.message} [{self.rule}]"


class ParseError(ValueError):
    """Raised with one or more error diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__('\n'.join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: SourceSpan
    value: Any = None


# ---------------------------------------------------------
# Lexer
# ---------------------------------------------------------
def tokenize(source, file='<input>'):
    """Splits source text into tokens. Comments and whitespace are skipped."""
    tokens = []
    i, line, col = 0, 1, 1
    n = len(source)

    def fail(message, rule='IllegalCharacter', length=1):
        raise ParseError([ParseDiagnostic('error', SourceSpan(file, line, col, length), message, rule)])

    while i < n:
        ch = source[i]
        if ch == '\n':
            i, line, col = i + 1, line + 1, 1
            continue
        if ch.isspace():
            i, col = i + 1, col + 1
            continue
        if source.startswith('//', i):
            while i < n and source[i] != '\n':
                i += 1
            continue
        start = i
        if '0' <= ch <= '9':
            while i < n and '0' <= source[i] <= '9':
                i += 1
            text = source[start:i]
            tokens.append(Token('int', text, SourceSpan(file, line, col, len(text)), int(text)))
        elif ch.isalpha() or ch == '_':
            while i < n and (source[i].isalnum() or source[i] == '_'):
                i += 1
            text = source[start:i]
            kind = f"kw-{text}" if text in KEYWORDS else 'ident'
            tokens.append(Token(kind, text, SourceSpan(file, line, col, len(text)), text))
        elif ch == '#':
            i += 1
            while i < n and (source[i].isalnum() or source[i] == '_'):
                i += 1
            text = source[start:i]
            if len(text) == 1:
                fail("'#' must be followed by a symbol name")
            tokens.append(Token('symbol', text, SourceSpan(file, line, col, len(text)), Symbol(text[1:])))
        elif ch == '"':
            i += 1
            chars = []
            while True:
                if i >= n or source[i] == '\n':
                    fail("Unterminated string", 'UnterminatedString', i - start)
                if source[i] == '"':
                    i += 1
                    break
                if source[i] == '\\':
                    if i + 1 >= n or source[i + 1] not in ESCAPES:
                        fail("Unknown escape in string", 'IllegalEscape', i - start + 1)
                    chars.append(ESCAPES[source[i + 1]])
                    i += 2
                    continue
                chars.append(source[i])
                i += 1
            text = source[start:i]
            tokens.append(Token('string', text, SourceSpan(file, line, col, len(text)), ''.join(chars)))
        else:
            two = source[i:i + 2]
            if two in PUNCTUATION:
                i += 2
            elif ch in PUNCTUATION:
                i += 1
            else:
                fail(f"Illegal character {ch!r}")
            text = source[start:i]
            tokens.append(Token(PUNCTUATION[text], text, SourceSpan(file, line, col, len(text))))
        col += i - start
    return tokens


# ---------------------------------------------------------
# Declarations (first pass)
# ---------------------------------------------------------
@dataclass
class _Names:
    """Storage names an expression refers to, with the tokens they came from."""
    refs: List[Token] = field(default_factory=list)


@dataclass
class _StageDecl:
    kind: StageKind
    token: Token
    annotation: Annotation
    names: _Names


@dataclass
class _StorageDecl:
    name: str
    token: Token
    initial: Any


@dataclass
class _MachineDecl:
    name: str
    token: Token
    stages: List[_StageDecl] = field(default_factory=list)
    storages: List[_StorageDecl] = field(default_factory=list)
    machines: List['_MachineDecl'] = field(default_factory=list)
    id: Optional[str] = None


@dataclass
class _EdgeDecl:
    kind: str   # 'flow' or 'trigger'
    token: Token
    source: List[Token]
    target: List[Token]
    scope: Optional[_MachineDecl]
    label: Optional[str] = None
    condition: Any = None
    names: _Names = field(default_factory=_Names)


@dataclass
class _InputDecl:
    name: str
    token: Token
    path: List[Token]
    values: tuple
    every: int


@dataclass
class _EventDecl:
    name: str
    token: Token
    paths: List[List[Token]]
    duration: int
    label: Optional[str]


@dataclass
class _BehaviorDecl:
    token: Token
    edges: List[tuple]
    repeats: List[Token]


@dataclass
class ModelDocument:
    model: Any
    events: List[Any] = field(default_factory=list)
    behavior: Any = None
    warnings: List[ParseDiagnostic] = field(default_factory=list)
    file: str = '<input>'

    @property
    def inputs(self):
        return self.model.inputs

    def event(self, name):
        for event in self.events:
            if event.name == name:
                return event
        raise KeyError(name)


# ---------------------------------------------------------
# Parser
# ---------------------------------------------------------
class Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, tokens, source='', file='<input>'):
        self.tokens = tokens
        self.pos = 0
        self.file = file
        lines = source.split('\n')
        self.end_span = SourceSpan(file, len(lines), len(lines[-1]) + 1, 0)
        self.names = _Names()

    # -- token helpers --
    def peek(self, offset=0):
        index = self.pos + offset
        return self.tokens[index] if index < len(self.tokens) else None

    def at(self, kind, text=None, offset=0):
        token = self.peek(offset)
        return token is not None and token.kind == kind and (text is None or token.text == text)

    def at_end(self):
        return self.pos >= len(self.tokens)

    def advance(self):
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def error(self, message, rule, token=None):
        token = token or self.peek()
        span = token.span if token is not None else self.end_span
        raise ParseError([ParseDiagnostic('error', span, message, rule)])

    def expect(self, kind, rule, text=None, what=None):
        if self.at(kind, text):
            return self.advance()
        token = self.peek()
        found = 'end of input' if token is None else f"'{token.text}'"
        self.error(f"Expected {what or text or kind}, found {found}", rule)

    def accept(self, kind, text=None):
        if self.at(kind, text):
            return self.advance()
        return None

    # -- literals --
    def literal(self):
        token = self.peek()
        if token is None:
            self.error("Expected a literal, found end of input", 'literal')
        if token.kind == 'minus' and self.at('int', offset=1):
            self.advance()
            return -self.advance().value
        if token.kind in ('int', 'string', 'symbol'):
            return self.advance().value
        if token.kind == 'ident' and token.text in ('true', 'false'):
            self.advance()
            return token.text == 'true'
        if token.kind == 'lbracket':
            self.advance()
            items = []
            if not self.accept('rbracket'):
                items.append(self.literal())
                while self.accept('comma'):
                    items.append(self.literal())
                self.expect('rbracket', 'literal', what="']'")
            return tuple(items)
        if token.kind == 'lbrace':
            self.advance()
            fields = []
            if not self.accept('rbrace'):
                while True:
                    key = self.expect('ident', 'literal', what='field name')
                    if key.text in [k for k, _ in fields]:
                        self.error(f"Duplicate field '{key.text}'", 'literal', key)
                    self.expect('colon', 'literal', what="':'")
                    fields.append((key.text, self.literal()))
                    if not self.accept('comma'):
                        break
                self.expect('rbrace', 'literal', what="'}'")
            return Record(tuple(fields))
        self.error(f"Expected a literal, found '{token.text}'", 'literal')

    def literal_list(self, rule):
        self.expect('lbracket', rule, what="'['")
        items = []
        if not self.accept('rbracket'):
            items.append(self.literal())
            while self.accept('comma'):
                items.append(self.literal())
            self.expect('rbracket', rule, what="']'")
        return tuple(items)

    # -- expressions --
    def expression(self):
        return self.or_expr()

    def or_expr(self):
        left = self.and_expr()
        while self.accept('ident', 'or'):
            left = Binary('or', left, self.and_expr())
        return left

    def and_expr(self):
        left = self.not_expr()
        while self.accept('ident', 'and'):
            left = Binary('and', left, self.not_expr())
        return left

    def not_expr(self):
        if self.accept('ident', 'not'):
            return Unary('not', self.not_expr())
        return self.comparison()

    def comparison(self):
        left = self.additive()
        token = self.peek()
        if token is not None and OPERATORS.get(token.kind) in COMPARISONS:
            self.advance()
            left = Binary(OPERATORS[token.kind], left, self.additive())
            after = self.peek()
            if after is not None and OPERATORS.get(after.kind) in COMPARISONS:
                self.error("Comparisons do not chain; use 'and'", 'expr', after)
        return left

    def additive(self):
        left = self.multiplicative()
        while self.at('plus') or self.at('minus'):
            op = OPERATORS[self.advance().kind]
            left = Binary(op, left, self.multiplicative())
        return left

    def multiplicative(self):
        left = self.unary()
        while self.at('star') or self.at('slash') or self.at('percent'):
            op = OPERATORS[self.advance().kind]
            left = Binary(op, left, self.unary())
        return left

    def unary(self):
        if self.at('minus'):
            if self.at('int', offset=1):
                self.advance()
                return self.postfix(Literal(-self.advance().value))
            self.advance()
            return Unary('neg', self.unary())
        return self.postfix(self.atom())

    def postfix(self, expr):
        while True:
            if self.accept('lbracket'):
                index = self.expression()
                self.expect('rbracket', 'expr', what="']'")
                expr = Index(expr, index)
            elif self.accept('dot'):
                expr = Field(expr, self.expect('ident', 'expr', what='field name').text)
            else:
                return expr

    def atom(self):
        token = self.peek()
        if token is None:
            self.error("Expected an expression, found end of input", 'expr')
        if token.kind in ('int', 'string', 'symbol'):
            return Literal(self.advance().value)
        if token.kind == 'lbrace':
            return Literal(self.literal())
        if token.kind == 'lparen':
            self.advance()
            inner = self.expression()
            self.expect('rparen', 'expr', what="')'")
            return inner
        if token.kind == 'lbracket':
            self.advance()
            items = []
            if not self.accept('rbracket'):
                items.append(self.expression())
                while self.accept('comma'):
                    items.append(self.expression())
                self.expect('rbracket', 'expr', what="']'")
            return ListDisplay(tuple(items))
        if token.kind == 'ident':
            word = token.text
            if word in ('true', 'false'):
                self.advance()
                return Literal(word == 'true')
            if word == 'it':
                self.advance()
                return It()
            if word == 'now':
                self.advance()
                return Now()
            if word == 'len':
                self.advance()
                self.expect('lparen', 'expr', what="'('")
                arg = self.expression()
                self.expect('rparen', 'expr', what="')'")
                return Len(arg)
            if word in RESERVED:
                self.error(f"'{word}' cannot start an expression", 'expr')
            self.advance()
            self.names.refs.append(token)
            return Name(word)
        self.error(f"Expected an expression, found '{token.text}'", 'expr')

    def action_item(self):
        if self.at('ident') and self.at('assign', offset=1):
            target = self.advance()
            if target.text in RESERVED:
                self.error(f"Cannot assign to '{target.text}'", 'annotation', target)
            self.advance()
            self.names.refs.append(target)
            return Assign(target.text, self.expression())
        if self.at('ident', 'verdict') and self.at('lparen', offset=1):
            self.advance()
            self.advance()
            word = self.expect('ident', 'annotation', what='accepted or rejected')
            if word.text not in VERDICTS:
                self.error(f"Verdict must be accepted or rejected, not '{word.text}'", 'annotation', word)
            self.expect('rparen', 'annotation', what="')'")
            return SetVerdict(word.text)
        return Transform(self.expression())

    # -- structure --
    def annotation(self):
        clauses = {}
        while True:
            token = self.peek()
            if token is None or token.kind not in ('kw-when', 'kw-after', 'kw-do', 'kw-emit'):
                break
            if token.text in clauses:
                self.error(f"Duplicate '{token.text}' clause", 'annotation', token)
            self.advance()
            if token.text == 'when':
                clauses['when'] = self.expression()
            elif token.text == 'after':
                clauses['after'] = self.expression()
            elif token.text == 'do':
                items = [self.action_item()]
                while self.accept('comma'):
                    items.append(self.action_item())
                clauses['do'] = tuple(items)
            else:
                clauses['emit'] = self.literal_list('annotation')
        return Annotation(clauses.get('when'), clauses.get('after'), clauses.get('do', ()), clauses.get('emit'))

    def path(self, rule):
        segments = [self.path_segment(rule)]
        while self.accept('dot'):
            segments.append(self.path_segment(rule))
        return segments

    def path_segment(self, rule):
        token = self.peek()
        if token is not None and (token.kind == 'ident' or token.kind in STAGE_TOKENS):
            return self.advance()
        found = 'end of input' if token is None else f"'{token.text}'"
        self.error(f"Expected a path, found {found}", rule)

    def document(self):
        self.expect('kw-model', 'document', what="'model'")
        name = self.expect('ident', 'document', what='model name')
        self.expect('lbrace', 'document', what="'{'")
        top = _MachineDecl(name.text, name)
        edges = []
        self.block(top, edges, is_model=True)
        inputs, events, behavior = [], [], None
        while not self.at_end():
            token = self.peek()
            if token.kind == 'kw-input':
                inputs.append(self.input_decl())
            elif token.kind == 'kw-event':
                events.append(self.event_decl())
            elif token.kind == 'kw-behavior':
                if behavior is not None:
                    self.error("Only one behavior block is allowed", 'behavior')
                behavior = self.behavior_decl()
            else:
                self.error(f"Expected 'event', 'behavior' or 'input', found '{token.text}'", 'document')
        return top, edges, inputs, events, behavior

    def block(self, owner, edges, is_model=False):
        """Items up to and including the closing brace."""
        scope = None if is_model else owner
        while not self.accept('rbrace'):
            token = self.peek()
            if token is None:
                self.error("Expected '}', found end of input", 'machine')
            if token.kind == 'kw-machine':
                self.advance()
                name = self.expect('ident', 'machine', what='machine name')
                self.expect('lbrace', 'machine', what="'{'")
                child = _MachineDecl(name.text, name)
                owner.machines.append(child)
                self.block(child, edges)
            elif token.kind in STAGE_TOKENS:
                if is_model:
                    self.error("Stages must be declared inside a machine", 'stage')
                self.advance()
                self.names = _Names()
                note = self.annotation()
                self.expect('semi', 'stage', what="';'")
                owner.stages.append(_StageDecl(StageKind(token.text), token, note, self.names))
            elif token.kind == 'kw-storage':
                if is_model:
                    self.error("Storages must be declared inside a machine", 'storage')
                self.advance()
                name = self.expect('ident', 'storage', what='storage name')
                if name.text in RESERVED:
                    self.error(f"'{name.text}' is reserved", 'storage', name)
                initial = self.literal() if self.accept('eq') else None
                self.expect('semi', 'storage', what="';'")
                owner.storages.append(_StorageDecl(name.text, name, initial))
            elif token.kind in ('kw-flow', 'kw-trigger'):
                edges.append(self.edge_decl(scope))
            else:
                self.error(f"Unexpected '{token.text}'", 'machine')

    def edge_decl(self, scope):
        token = self.advance()
        rule = token.text
        source = self.path(rule)
        self.expect('arrow', rule, what="'->'")
        target = self.path(rule)
        edge = _EdgeDecl(rule, token, source, target, scope)
        label = self.accept('string')
        edge.label = label.value if label else None
        if rule == 'trigger' and self.accept('kw-when'):
            self.names = _Names()
            edge.condition = self.expression()
            edge.names = self.names
        self.expect('semi', rule, what="';'")
        return edge

    def input_decl(self):
        token = self.advance()
        name = None
        if self.at('ident') and self.at('colon', offset=1):
            name = self.advance().text
            self.advance()
        path = self.path('input')
        self.expect('eq', 'input', what="'='")
        values = self.literal_list('input')
        every = 0
        if self.accept('kw-every'):
            every = self.expect('int', 'input', what='integer').value
        self.expect('semi', 'input', what="';'")
        return _InputDecl(name or '.'.join(t.text for t in path), token, path, values, every)

    def event_decl(self):
        self.advance()
        name = self.expect('ident', 'event', what='event name')
        label = self.accept('string')
        self.expect('kw-over', 'event', what="'over'")
        self.expect('lbrace', 'event', what="'{'")
        paths = [self.path('event')]
        while self.accept('comma'):
            paths.append(self.path('event'))
        self.expect('rbrace', 'event', what="'}'")
        duration = 0
        if self.accept('kw-duration'):
            start = self.peek()
            try:
                duration = evaluate(self.expression(), EvalContext())
            except EvaluationError as exc:
                self.error(f"Duration must be a constant: {exc}", 'event', start)
            if type_name(duration) != 'integer':
                self.error("Duration must be an integer", 'event', start)
        self.expect('semi', 'event', what="';'")
        return _EventDecl(name.text, name, paths, duration, label.value if label else None)

    def behavior_decl(self):
        token = self.advance()
        self.expect('lbrace', 'behavior', what="'{'")
        edges, repeats = [], []
        while not self.accept('rbrace'):
            if self.accept('kw-repeat'):
                repeats.append(self.expect('ident', 'behavior', what='event name'))
            else:
                a = self.expect('ident', 'behavior', what='event name')
                self.expect('arrow', 'behavior', what="'->'")
                b = self.expect('ident', 'behavior', what='event name')
                edges.append((a, b))
            self.expect('semi', 'behavior', what="';'")
        return _BehaviorDecl(token, edges, repeats)


STAGE_TOKENS = {f"kw-{kind.value}" for kind in StageKind}


# ---------------------------------------------------------
# Building (second pass)
# ---------------------------------------------------------
class _Builder:
    def __init__(self, name, file):
        self.model = new_model(name)
        self.file = file
        self.errors = []
        self.warnings = []

    def fail(self, token, message, rule):
        self.errors.append(ParseDiagnostic('error', token.span, message, rule))

    def declare(self, decl, parent):
        try:
            decl.id = self.model.add_machine(decl.name, parent)
        except ModelError as exc:
            self.fail(decl.token, str(exc), 'DuplicateDeclaration')
            return
        for storage in decl.storages:
            try:
                self.model.add_storage(decl.id, storage.name, storage.initial)
            except ModelError as exc:
                self.fail(storage.token, str(exc), 'DuplicateDeclaration')
        for child in decl.machines:
            self.declare(child, decl.id)

    def stages(self, decl):
        if decl.id is None:
            return
        if not decl.stages and not decl.machines:
            self.warnings.append(ParseDiagnostic('warning', decl.token.span,
                                                 f"Machine '{decl.name}' has no stages", 'machine'))
        for stage in decl.stages:
            try:
                self.model.add_stage(decl.id, stage.kind, stage.annotation)
            except ModelError as exc:
                self.fail(stage.token, str(exc), type(exc).__name__)
                continue
            self.check_names(decl.id, stage.names)
        for child in decl.machines:
            self.stages(child)

    def check_names(self, machine, names):
        visible = self.model.visible_storages(machine)
        for token in names.refs:
            if token.text not in visible:
                self.fail(token, f"Unresolved name '{token.text}'", 'UnresolvedName')

    def resolve(self, segments, scope):
        """Resolves a path from `scope` outward; returns an id or records a diagnostic."""
        bases = (self.model.ancestors(scope) if scope else []) + [None]
        best_depth = -1
        for base in bases:
            found, depth = self.walk(base, segments)
            if found is not None:
                return found
            if depth > best_depth:
                best_depth = depth
        bad = segments[best_depth]
        self.fail(bad, f"Unresolved name '{bad.text}' in path "
                       f"'{'.'.join(t.text for t in segments)}'", 'UnresolvedName')
        return None

    def walk(self, base, segments):
        model = self.model
        current = base
        for depth, token in enumerate(segments[:-1]):
            level = model.siblings(current)
            matches = [m for m in level if model.machines[m].name == token.text]
            if not matches:
                return None, depth
            current = matches[0]
        last = segments[-1]
        if current is None:
            return None, len(segments) - 1
        if last.kind in STAGE_TOKENS:
            return model.stage_of(current, last.text), len(segments) - 1
        for storage_id in model.machines[current].storages:
            if model.storages[storage_id].name == last.text:
                return storage_id, len(segments) - 1
        return None, len(segments) - 1

    def edge(self, decl):
        scope = decl.scope.id if decl.scope is not None else None
        source = self.resolve(decl.source, scope)
        target = self.resolve(decl.target, scope)
        if source is None or target is None:
            return
        try:
            if decl.kind == 'flow':
                self.model.add_flow(source, target, decl.label, enforce=False)
            else:
                if source not in self.model.stages:
                    self.fail(decl.token, "Trigger source must be a stage", 'trigger')
                    return
                self.model.add_trigger(source, target, decl.condition, decl.label)
                self.check_names(self.model.stages[source].owner, decl.names)
        except ModelError as exc:
            self.fail(decl.token, str(exc), type(exc).__name__)

    def input(self, decl):
        stage = self.resolve(decl.path, None)
        if stage is None:
            return
        try:
            self.model.add_input(decl.name, stage, decl.values, decl.every)
        except ModelError as exc:
            self.fail(decl.token, str(exc), type(exc).__name__)

    def event(self, decl, names):
        if decl.name in names:
            self.fail(decl.token, f"Event '{decl.name}' is already declared", 'DuplicateDeclaration')
            return None
        elements = [self.resolve(p, None) for p in decl.paths]
        if any(e is None for e in elements):
            return None
        try:
            return define_event(decl.name, define_region(self.model, elements), decl.duration, decl.label)
        except (RegionError, EventError) as exc:
            self.fail(decl.token, str(exc), type(exc).__name__)
            return None

    def behavior(self, decl, events):
        names = {e.name for e in events}
        tokens = [t for pair in decl.edges for t in pair] + decl.repeats
        missing = [t for t in tokens if t.text not in names]
        for token in missing:
            self.fail(token, f"Unresolved event '{token.text}'", 'UnresolvedName')
        if missing:
            return None
        try:
            return build_behavior(events, [(a.text, b.text) for a, b in decl.edges],
                                  [t.text for t in decl.repeats])
        except BehaviorError as exc:
            self.fail(decl.token, str(exc), type(exc).__name__)
            return None

    def check(self):
        if self.errors:
            raise ParseError(self.errors)


def parse(source, file='<input>'):
    """
    Parses `.tm` text into a ModelDocument. Raises ParseError carrying every
    diagnostic found; syntax errors stop at the first one.
    """
    parser = Parser(tokenize(source, file), source, file)
    top, edges, inputs, events, behavior = parser.document()

    builder = _Builder(top.name, file)
    for machine in top.machines:
        builder.declare(machine, None)
    builder.check()
    for machine in top.machines:
        builder.stages(machine)
    builder.check()
    for edge in edges:
        builder.edge(edge)
    for binding in inputs:
        builder.input(binding)
    builder.check()

    declared = []
    for decl in events:
        event = builder.event(decl, {e.name for e in declared})
        if event is not None:
            declared.append(event)
    builder.check()
    graph = builder.behavior(behavior, declared) if behavior is not None else None
    builder.check()
    logger.debug("Parsed %s: %d machine(s), %d event(s)", file, len(builder.model.machines), len(declared))
    return ModelDocument(builder.model, declared, graph, builder.warnings, file)


def parse_literal(text):
    """Parses a single literal (as used by `--input name=[...]`)."""
    parser = Parser(tokenize(text, '<literal>'), text, '<literal>')
    value = parser.literal()
    if not parser.at_end():
        parser.error(f"Unexpected '{parser.peek().text}' after literal", 'literal')
    return value


# ---------------------------------------------------------
# Printing
# ---------------------------------------------------------
def _annotation_text(note):
    parts = []
    if note.guard is not None:
        parts.append(f"when {to_source(note.guard)}")
    if note.delay is not None:
        parts.append(f"after {to_source(note.delay)}")
    if note.action:
        parts.append(f"do {action_to_source(note.action)}")
    if note.emit is not None:
        parts.append(f"emit {render(tuple(note.emit))}")
    return ''.join(' ' + p for p in parts)


def _print_machine(model, machine_id, indent, out):
    machine = model.machines[machine_id]
    pad = '  ' * indent
    out.append(f"{pad}machine {machine.name} {{")
    for storage_id in machine.storages:
        storage = model.storages[storage_id]
        initial = '' if storage.initial is None else f" = {render(storage.initial)}"
        out.append(f"{pad}  storage {storage.name}{initial};")
    for stage_id in machine.stages:
        stage = model.stages[stage_id]
        out.append(f"{pad}  {stage.kind.value}{_annotation_text(stage.annotation)};")
    for child in machine.children:
        _print_machine(model, child, indent + 1, out)
    out.append(f"{pad}}}")


def print_model(doc):
    """Prints a document in the `.tm` format, with absolute paths throughout."""
    model = doc.model
    out = []
    body = []
    for root in model.roots():
        _print_machine(model, root, 1, body)
    for flow in model.flows.values():
        label = f" {render(flow.label)}" if flow.label is not None else ''
        body.append(f"  flow {model.path(flow.source)} -> {model.path(flow.target)}{label};")
    for trigger in model.triggers.values():
        label = f" {render(trigger.label)}" if trigger.label is not None else ''
        condition = f" when {to_source(trigger.condition)}" if trigger.condition is not None else ''
        body.append(f"  trigger {model.path(trigger.source)} -> {model.path(trigger.target)}{label}{condition};")
    if body:
        out.append(f"model {model.name} {{")
        out.extend(body)
        out.append('}')
    else:
        out.append(f"model {model.name} {{ }}")
    for event in doc.events:
        label = f" {render(event.label)}" if event.label is not None else ''
        duration = f" duration {event.duration}" if event.duration else ''
        out.append(f"event {event.name}{label} over {{ {', '.join(event.region.paths())} }}{duration};")
    if doc.behavior is not None:
        out.append('behavior {')
        for a, b in doc.behavior.edges:
            out.append(f"  {a} -> {b};")
        for name in sorted(doc.behavior.repeats):
            out.append(f"  repeat {name};")
        out.append('}')
    for binding in model.inputs.values():
        every = f" every {binding.every}" if binding.every else ''
        target = model.path(binding.stage)
        name = '' if binding.name == target else f"{binding.name}: "
        out.append(f"input {name}{target} = {render(tuple(binding.values))}{every};")
    return '\n'.join(out) + '\n'


def canonical(doc):
    """Id-free, order-independent description of a document."""
    model = doc.model
    path = model.path

    def expr(e):
        return None if e is None else to_source(e)

    stages = sorted(
        (path(s), expr(st.annotation.guard), expr(st.annotation.delay),
         action_to_source(st.annotation.action),
         None if st.annotation.emit is None else render(tuple(st.annotation.emit)))
        for s, st in model.stages.items())
    return (
        model.name,
        tuple(sorted(path(m) for m in model.machines)),
        tuple(stages),
        tuple(sorted((path(d), render(s.initial)) for d, s in model.storages.items())),
        tuple(sorted((path(f.source), path(f.target), f.label or '') for f in model.flows.values())),
        tuple(sorted((path(t.source), path(t.target), t.label or '', expr(t.condition) or '')
                     for t in model.triggers.values())),
        tuple(sorted((b.name, path(b.stage), render(tuple(b.values)), b.every) for b in model.inputs.values())),
        tuple(sorted((e.name, tuple(e.region.paths()), e.duration, e.label or '') for e in doc.events)),
        None if doc.behavior is None else (tuple(sorted(doc.behavior.edges)),
                                           tuple(sorted(doc.behavior.repeats))),
    )
