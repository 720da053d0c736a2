"""Error-tolerant recursive descent parser for a pragmatic Solidity subset.

The grammar covers what the administrated-pattern detectors need: contracts
(interfaces and libraries included), inheritance lists, state variables,
modifiers, functions, events, and the statement forms require/assert,
if/else, return, emit, assignments, compound assignments, calls and
selfdestruct/suicide. Anything else inside a function body is skipped up to
the matching `;` or balanced `}` and kept as an opaque statement, so one
unsupported construct never costs the rest of the contract.
"""

import logging
from contextlib import contextmanager
from typing import Iterator, List, Optional, Tuple

from src.solidity_ast import (
    ASSIGNMENT,
    COMPOUND_ASSIGNMENT,
    COMPOUND_OPERATORS,
    EMIT,
    FUNCTION_CALL,
    IF,
    LOCAL_DECLARATION,
    MEMBER_CALL,
    OPAQUE,
    PLACEHOLDER,
    REQUIRE_CALL,
    RETURN,
    SELFDESTRUCT_CALL,
    AstUnit,
    ContractDecl,
    EventDecl,
    Expr,
    FunctionDecl,
    ModifierDecl,
    Parameter,
    ParseDiagnostics,
    StateVariable,
    Statement,
)
from src.solidity_lexer import (
    COMMENT,
    IDENTIFIER,
    KEYWORD,
    NUMBER,
    STRING,
    SourceToken,
    is_elementary_type,
    tokenize,
)

logger = logging.getLogger(__name__)

VISIBILITIES = ("public", "private", "internal", "external")
MUTABILITIES = ("view", "pure", "payable", "constant")
DATA_LOCATIONS = ("memory", "storage", "calldata")
UNSUPPORTED_STATEMENTS = ("assembly", "for", "while", "do", "try")
SELFDESTRUCT_NAMES = ("selfdestruct", "suicide")
REQUIRE_NAMES = ("require", "assert")
ETHER_UNITS = ("wei", "gwei", "szabo", "finney", "ether", "seconds", "minutes",
               "hours", "days", "weeks", "years")

# Binary operator precedence, loosest first. Assignment and ternary are
# handled separately.
_BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", ">", "<=", ">="),
    ("|",),
    ("^",),
    ("&",),
    ("<<", ">>", ">>>"),
    ("+", "-"),
    ("*", "/", "%"),
    ("**",),
]
_ASSIGNMENT_OPERATORS = ("=",) + COMPOUND_OPERATORS
_PREFIX_OPERATORS = ("!", "-", "~", "++", "--", "delete", "+")

# Bracket, block and prefix-operator nesting beyond this depth is skipped as
# a recovered region.
MAX_NESTING = 32


class _ParseError(Exception):
    """Internal signal that the current construct is outside the subset."""


class Parser:
    """Parse a token list into an AstUnit plus recovery diagnostics."""

    def __init__(self, tokens: List[SourceToken], source: Optional[str] = None):
        self.tokens = [token for token in tokens if token.kind != COMMENT]
        self.source = source
        self.pos = 0
        self.diagnostics = ParseDiagnostics()
        self.depth = 0

    # ========== Token helpers ==========

    def _peek(self, ahead: int = 0) -> Optional[SourceToken]:
        index = self.pos + ahead
        return self.tokens[index] if index < len(self.tokens) else None

    def _at(self, text: str, ahead: int = 0) -> bool:
        token = self._peek(ahead)
        return token is not None and token.is_(text)

    def _at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def _advance(self) -> SourceToken:
        token = self._peek()
        if token is None:
            raise _ParseError("unexpected end of input")
        self.pos += 1
        return token

    def _accept(self, text: str) -> bool:
        if self._at(text):
            self.pos += 1
            return True
        return False

    def _expect(self, text: str) -> SourceToken:
        token = self._peek()
        if token is None or not token.is_(text):
            found = token.text if token else "end of input"
            line = token.line if token else "EOF"
            raise _ParseError(f"expected '{text}' but found '{found}' at line {line}")
        self.pos += 1
        return token

    def _expect_name(self) -> SourceToken:
        token = self._peek()
        if token is None or token.kind != IDENTIFIER:
            found = token.text if token else "end of input"
            raise _ParseError(f"expected identifier but found '{found}'")
        self.pos += 1
        return token

    def _line(self) -> int:
        token = self._peek()
        if token is not None:
            return token.line
        return self.tokens[-1].line if self.tokens else 1

    def _span_text(self, start: int, end: int) -> str:
        """Raw text of tokens[start:end]."""
        if start >= end:
            return ""
        first, last = self.tokens[start], self.tokens[end - 1]
        if self.source is not None:
            return self.source[first.offset:last.offset + len(last.text)]
        return " ".join(token.text for token in self.tokens[start:end])

    def _check_depth(self) -> None:
        if self.depth >= MAX_NESTING:
            self.diagnostics.nesting_limit_hits += 1
            raise _ParseError(f"nesting deeper than {MAX_NESTING} levels at line {self._line()}")

    @contextmanager
    def _nested(self) -> Iterator[None]:
        self._check_depth()
        self.depth += 1
        try:
            yield
        finally:
            self.depth -= 1

    # ========== Recovery ==========

    def _skip_balanced(self) -> None:
        """Skip from an opening bracket to its matching closer."""
        pairs = {"{": "}", "(": ")", "[": "]"}
        stack = [pairs[self._advance().text]]
        while stack and not self._at_end():
            token = self._advance()
            if token.kind in (STRING,):
                continue
            if token.text in pairs:
                stack.append(pairs[token.text])
            elif token.text == stack[-1]:
                stack.pop()

    def _skip_unit(self) -> None:
        """Skip to just past the next `;` or balanced `{...}` at depth 0.

        Stops without consuming a `}` that closes the enclosing block.
        """
        while not self._at_end():
            token = self._peek()
            if token.is_(";"):
                self.pos += 1
                return
            if token.is_("}"):
                return
            if token.is_("(") or token.is_("["):
                self._skip_balanced()
                continue
            if token.is_("{"):
                self._skip_balanced()
                # `try {..} catch {..}`, `do {..} while (..);`
                while self._at("catch") or self._at("else"):
                    self.pos += 1
                    while not self._at_end() and not self._at("{") and not self._at(";"):
                        if self._at("("):
                            self._skip_balanced()
                        else:
                            self.pos += 1
                    if self._at("{"):
                        self._skip_balanced()
                if self._at("while"):
                    continue
                self._accept(";")
                return
            self.pos += 1

    def _recover(self, start: int, reason: str) -> Tuple[int, int]:
        self.pos = start
        first_line = self._line()
        self._skip_unit()
        if self.pos == start and not self._at_end():
            # never loop on a stray token
            self.pos += 1
        last_line = self.tokens[self.pos - 1].line if self.pos > 0 else first_line
        span = (first_line, last_line)
        self.diagnostics.skipped_spans.append(span)
        logger.debug(f"Recovered lines {first_line}-{last_line}: {reason}")
        return span

    # ========== Top level ==========

    def parse(self) -> Tuple[AstUnit, ParseDiagnostics]:
        unit = AstUnit()
        while not self._at_end():
            start = self.pos
            token = self._peek()
            try:
                if token.is_("pragma") or token.is_("import") or token.is_("using"):
                    self._skip_unit()
                elif token.is_("contract") or token.is_("interface") or token.is_("library") \
                        or (token.is_("abstract") and self._at("contract", 1)):
                    unit.contracts.append(self._parse_contract())
                elif token.is_("struct") or token.is_("enum") or token.is_("error") \
                        or token.is_("function") or token.is_("event"):
                    self._skip_unit()
                else:
                    raise _ParseError(f"unexpected '{token.text}' at top level")
            except _ParseError as e:
                self._recover(start, str(e))

        if not unit.contracts:
            self.diagnostics.fatal = True
            logger.debug("No contract declaration recognized")
        return unit, self.diagnostics

    def _parse_contract(self) -> ContractDecl:
        head = self._advance()
        kind = head.text
        if kind == "abstract":
            self._expect("contract")
            kind = "abstract contract"
        name = self._expect_name().text
        bases: List[str] = []
        if self._accept("is"):
            while True:
                base = self._expect_name().text
                while self._accept("."):
                    base = self._expect_name().text
                bases.append(base)
                if self._at("("):
                    self._skip_balanced()
                if not self._accept(","):
                    break
        self._expect("{")

        contract = ContractDecl(
            name=name, kind=kind, bases=bases, state_variables=[], modifiers=[],
            functions=[], events=[], line=head.line, end_line=head.line,
        )
        while not self._at("}"):
            if self._at_end():
                raise _ParseError(f"contract {name} is not closed")
            start = self.pos
            try:
                self._parse_member(contract)
            except _ParseError as e:
                self._recover(start, str(e))
        contract.end_line = self._expect("}").line
        return contract

    def _parse_member(self, contract: ContractDecl) -> None:
        token = self._peek()
        if token.is_("function") or (
            token.text in ("constructor", "fallback", "receive") and self._at("(", 1)
        ):
            contract.functions.append(self._parse_function(contract))
        elif token.is_("modifier"):
            contract.modifiers.append(self._parse_modifier(contract))
        elif token.is_("event"):
            contract.events.append(self._parse_event())
        elif token.is_("struct") or token.is_("enum") or token.is_("error") or token.is_("using"):
            self._skip_unit()
        elif token.is_(";"):
            self.pos += 1
        else:
            contract.state_variables.append(self._parse_state_variable())

    # ========== Types and parameters ==========

    def _parse_type(self) -> str:
        token = self._peek()
        if token is None:
            raise _ParseError("expected type")
        if token.is_("mapping"):
            self._advance()
            self._expect("(")
            key = self._parse_type()
            if self._peek() is not None and self._peek().kind == IDENTIFIER:
                self._advance()
            self._expect("=>")
            value = self._parse_type()
            if self._peek() is not None and self._peek().kind == IDENTIFIER:
                self._advance()
            self._expect(")")
            type_name = f"mapping({key}=>{value})"
        elif token.kind == KEYWORD and (is_elementary_type(token.text) or token.text == "var"):
            self._advance()
            type_name = token.text
            if type_name == "address" and self._accept("payable"):
                type_name = "address payable"
        elif token.kind == IDENTIFIER:
            self._advance()
            type_name = token.text
            while self._at(".") and self._peek(1) is not None and self._peek(1).kind == IDENTIFIER:
                self.pos += 1
                type_name += "." + self._advance().text
        else:
            raise _ParseError(f"expected type but found '{token.text}'")

        while self._at("["):
            start = self.pos
            self._skip_balanced()
            inner = self._span_text(start + 1, self.pos - 1)
            type_name += f"[{inner}]"
        return type_name

    def _parse_parameters(self) -> List[Parameter]:
        self._expect("(")
        parameters: List[Parameter] = []
        while not self._accept(")"):
            line = self._line()
            type_name = self._parse_type()
            name = ""
            while self._peek() is not None and (
                self._peek().text in DATA_LOCATIONS or self._peek().is_("indexed")
            ):
                self._advance()
            if self._peek() is not None and self._peek().kind == IDENTIFIER:
                name = self._advance().text
            parameters.append(Parameter(name=name, type_name=type_name, line=line))
            if not self._accept(","):
                self._expect(")")
                break
        return parameters

    # ========== Declarations ==========

    def _parse_state_variable(self) -> StateVariable:
        line = self._line()
        type_name = self._parse_type()
        visibility = "internal"
        constant = False
        while True:
            token = self._peek()
            if token is None:
                raise _ParseError("unterminated state variable")
            if token.text in VISIBILITIES:
                visibility = token.text
                self.pos += 1
            elif token.text in ("constant", "immutable"):
                constant = True
                self.pos += 1
            elif token.is_("override"):
                self.pos += 1
                if self._at("("):
                    self._skip_balanced()
            else:
                break
        name = self._expect_name().text
        initial = None
        if self._accept("="):
            initial = self._parse_expression()
        self._expect(";")
        return StateVariable(
            name=name, type_name=type_name, visibility=visibility, line=line,
            constant=constant, initial=initial,
        )

    def _parse_event(self) -> EventDecl:
        line = self._expect("event").line
        name = self._expect_name().text
        parameters = self._parse_parameters()
        self._accept("anonymous")
        self._expect(";")
        return EventDecl(name=name, parameters=parameters, line=line)

    def _parse_modifier(self, contract: ContractDecl) -> ModifierDecl:
        line = self._expect("modifier").line
        name = self._expect_name().text
        parameters = self._parse_parameters() if self._at("(") else []
        while self._at("virtual") or self._at("override"):
            self.pos += 1
            if self._at("("):
                self._skip_balanced()
        body, end_line = self._parse_block()
        return ModifierDecl(
            name=name, contract=contract.name, parameters=parameters,
            body=body, line=line, end_line=end_line,
        )

    def _parse_function(self, contract: ContractDecl) -> FunctionDecl:
        head = self._advance()
        if head.is_("function"):
            kind = "function"
            name_token = self._peek()
            if name_token is not None and name_token.kind in (IDENTIFIER, KEYWORD) \
                    and not name_token.is_("("):
                name = self._advance().text
                if name in ("fallback", "receive"):
                    kind = name
            else:
                name, kind = "", "fallback"
            if name == contract.name:
                kind = "constructor"
        else:
            name = kind = head.text

        parameters = self._parse_parameters()
        returns: List[Parameter] = []
        modifiers: List[str] = []
        visibility = ""
        mutability = ""
        while True:
            token = self._peek()
            if token is None:
                raise _ParseError(f"unterminated function {name}")
            if token.is_("{") or token.is_(";"):
                break
            if token.text in VISIBILITIES:
                visibility = token.text
                self.pos += 1
            elif token.text in MUTABILITIES:
                mutability = "view" if token.text == "constant" else token.text
                self.pos += 1
            elif token.is_("virtual"):
                self.pos += 1
            elif token.is_("override"):
                self.pos += 1
                if self._at("("):
                    self._skip_balanced()
            elif token.is_("returns"):
                self.pos += 1
                returns = self._parse_parameters()
            elif token.kind == IDENTIFIER:
                modifier = self._advance().text
                while self._accept("."):
                    modifier = self._expect_name().text
                if self._at("("):
                    self._skip_balanced()
                if modifier not in contract.bases:
                    modifiers.append(modifier)
            else:
                raise _ParseError(f"unexpected '{token.text}' in header of {name}")

        if not visibility:
            visibility = "public"
        body: Optional[List[Statement]] = None
        end_line = head.line
        if self._at("{"):
            body, end_line = self._parse_block()
        else:
            end_line = self._expect(";").line
        return FunctionDecl(
            name=name, contract=contract.name, kind=kind, parameters=parameters,
            returns=returns, visibility=visibility, mutability=mutability,
            modifiers=modifiers, body=body, line=head.line, end_line=end_line,
        )

    # ========== Statements ==========

    def _parse_block(self) -> Tuple[List[Statement], int]:
        """Parse `{ ... }`, recovering statement by statement."""
        with self._nested():
            self._expect("{")
            statements: List[Statement] = []
            while not self._at("}"):
                if self._at_end():
                    raise _ParseError("unterminated block")
                statements.extend(self._parse_statement_recovering())
            end_line = self._expect("}").line
        return statements, end_line

    def _parse_statement_recovering(self) -> List[Statement]:
        start = self.pos
        try:
            return self._parse_statement()
        except _ParseError as e:
            head = self.tokens[start]
            self._recover(start, str(e))
            return [self._opaque(start, head)]

    def _opaque(self, start: int, head: SourceToken) -> Statement:
        text = self._span_text(start, self.pos)
        return Statement(kind=OPAQUE, line=head.line, head=head.text, text=text)

    def _parse_body(self) -> List[Statement]:
        """A branch body: either a block or a single statement."""
        if self._at("{"):
            body, _ = self._parse_block()
            return body
        return self._parse_statement_recovering()

    def _parse_statement(self) -> List[Statement]:
        start = self.pos
        token = self._peek()
        line = token.line

        if token.is_("{"):
            body, _ = self._parse_block()
            return body
        if token.is_("unchecked") and self._at("{", 1):
            self.pos += 1
            body, _ = self._parse_block()
            return body
        if token.text in UNSUPPORTED_STATEMENTS and token.kind == KEYWORD:
            raise _ParseError(f"'{token.text}' statements are outside the subset")
        if token.is_(";"):
            self.pos += 1
            return []

        if token.is_("if"):
            self.pos += 1
            self._expect("(")
            condition = self._parse_expression()
            self._expect(")")
            then_body = self._parse_body()
            else_body: List[Statement] = []
            if self._accept("else"):
                else_body = self._parse_body()
            return [Statement(
                kind=IF, line=line, head=token.text, text=self._span_text(start, self.pos),
                condition=condition, then_body=then_body, else_body=else_body,
            )]

        if token.is_("return"):
            self.pos += 1
            expr = None if self._at(";") else self._parse_expression()
            self._expect(";")
            return [Statement(kind=RETURN, line=line, head=token.text,
                              text=self._span_text(start, self.pos), expr=expr)]

        if token.is_("emit"):
            self.pos += 1
            expr = self._parse_expression()
            self._expect(";")
            return [Statement(kind=EMIT, line=line, head=token.text,
                              text=self._span_text(start, self.pos), expr=expr)]

        if token.is_("throw"):
            self.pos += 1
            self._expect(";")
            call = Expr("call", line, children=[Expr("identifier", line, "throw")])
            return [Statement(kind=FUNCTION_CALL, line=line, head=token.text,
                              text=self._span_text(start, self.pos), expr=call)]

        if token.kind == IDENTIFIER and token.text == "revert" and self._peek(1) is not None \
                and self._peek(1).kind == IDENTIFIER:
            # revert CustomError(args);
            self.pos += 1
            error = self._parse_expression()
            self._expect(";")
            call = Expr("call", line, children=[Expr("identifier", line, "revert"), error])
            return [Statement(kind=FUNCTION_CALL, line=line, head=token.text,
                              text=self._span_text(start, self.pos), expr=call)]

        if token.kind == IDENTIFIER and token.text == "_" and self._at(";", 1):
            self.pos += 2
            return [Statement(kind=PLACEHOLDER, line=line, head="_", text="_;")]

        declaration = self._try_local_declaration()
        if declaration is not None:
            return [declaration]

        expr = self._parse_expression()
        self._expect(";")
        return [self._classify_expression_statement(expr, start, token)]

    def _try_local_declaration(self) -> Optional[Statement]:
        start = self.pos
        token = self._peek()
        if token.kind not in (IDENTIFIER, KEYWORD) or token.text == "_":
            return None
        if token.kind == KEYWORD and not (
            is_elementary_type(token.text) or token.text in ("mapping", "var")
        ):
            return None
        try:
            type_name = self._parse_type()
        except _ParseError:
            self.pos = start
            return None
        while self._peek() is not None and self._peek().text in DATA_LOCATIONS:
            self.pos += 1
        name_token = self._peek()
        if name_token is None or name_token.kind != IDENTIFIER \
                or not (self._at("=", 1) or self._at(";", 1)):
            self.pos = start
            return None
        self.pos += 1
        value = None
        if self._accept("="):
            value = self._parse_expression()
        self._expect(";")
        return Statement(
            kind=LOCAL_DECLARATION, line=token.line, head=token.text,
            text=self._span_text(start, self.pos), value=value,
            target=Expr("identifier", name_token.line, name_token.text),
            declared_type=type_name, name=name_token.text,
        )

    def _classify_expression_statement(self, expr: Expr, start: int, head: SourceToken) -> Statement:
        text = self._span_text(start, self.pos)
        statement = Statement(kind=OPAQUE, line=head.line, head=head.text, text=text, expr=expr)

        if expr.kind == "binary" and expr.text == "=":
            statement.kind = ASSIGNMENT
            statement.op = "="
            statement.target, statement.value = expr.children
        elif expr.kind == "binary" and expr.text in COMPOUND_OPERATORS:
            statement.kind = COMPOUND_ASSIGNMENT
            statement.op = expr.text
            statement.target, statement.value = expr.children
        elif expr.kind == "unary" and expr.text.replace("@post", "") in ("++", "--"):
            statement.kind = COMPOUND_ASSIGNMENT
            statement.op = "+=" if expr.text.startswith("++") else "-="
            statement.target = expr.children[0]
            statement.value = Expr("literal", head.line, "1")
        elif expr.kind == "call":
            callee = expr.callee
            if callee.kind == "identifier" and callee.text in REQUIRE_NAMES:
                statement.kind = REQUIRE_CALL
            elif callee.kind == "identifier" and callee.text in SELFDESTRUCT_NAMES:
                statement.kind = SELFDESTRUCT_CALL
            elif callee.kind == "member":
                statement.kind = MEMBER_CALL
            else:
                statement.kind = FUNCTION_CALL
        return statement

    # ========== Expressions ==========

    def _parse_expression(self) -> Expr:
        with self._nested():
            left = self._parse_ternary()
            token = self._peek()
            if token is not None and token.text in _ASSIGNMENT_OPERATORS and token.kind != STRING:
                self.pos += 1
                right = self._parse_expression()
                return Expr("binary", left.line, token.text, [left, right])
            return left

    def _parse_ternary(self) -> Expr:
        condition = self._parse_binary(0)
        if self._accept("?"):
            if_true = self._parse_expression()
            self._expect(":")
            if_false = self._parse_expression()
            return Expr("ternary", condition.line, "?", [condition, if_true, if_false])
        return condition

    def _parse_binary(self, level: int) -> Expr:
        if level >= len(_BINARY_LEVELS):
            return self._parse_unary()
        operators = _BINARY_LEVELS[level]
        left = self._parse_binary(level + 1)
        # each fold deepens the tree by one level
        folds = 0
        try:
            while True:
                token = self._peek()
                if token is None or token.kind == STRING or token.text not in operators:
                    return left
                self.pos += 1
                self._check_depth()
                self.depth += 1
                folds += 1
                # ** is right-associative
                right = self._parse_binary(level if token.text == "**" else level + 1)
                left = Expr("binary", left.line, token.text, [left, right])
        finally:
            self.depth -= folds

    def _parse_unary(self) -> Expr:
        token = self._peek()
        if token is not None and token.kind != STRING and token.text in _PREFIX_OPERATORS:
            self.pos += 1
            with self._nested():
                operand = self._parse_unary()
            return Expr("unary", token.line, token.text, [operand])
        return self._parse_postfix(self._parse_primary())

    def _parse_postfix(self, expr: Expr) -> Expr:
        while True:
            if self._accept("."):
                member = self._advance()
                expr = Expr("member", expr.line, member.text, [expr])
            elif self._at("["):
                self.pos += 1
                children = [expr]
                if not self._at("]"):
                    children.append(self._parse_expression())
                    if self._accept(":"):
                        if not self._at("]"):
                            self._parse_expression()
                self._expect("]")
                expr = Expr("index", expr.line, "", children)
            elif self._at("{") and self._peek(1) is not None and self._peek(1).kind == IDENTIFIER \
                    and self._at(":", 2):
                options = self._parse_call_options()
                expr = Expr(expr.kind, expr.line, expr.text, expr.children, expr.options + options)
            elif self._at("("):
                args = self._parse_arguments()
                options = expr.options if expr.kind != "call" else []
                expr = Expr("call", expr.line, "", [expr] + args, options)
            elif self._at("++") or self._at("--"):
                op = self._advance().text
                expr = Expr("unary", expr.line, op + "@post", [expr])
            else:
                return expr

    def _parse_call_options(self) -> List[str]:
        self._expect("{")
        names = []
        while not self._accept("}"):
            names.append(self._expect_name().text)
            self._expect(":")
            self._parse_expression()
            if not self._accept(","):
                self._expect("}")
                break
        return names

    def _parse_arguments(self) -> List[Expr]:
        self._expect("(")
        args: List[Expr] = []
        if self._at("{"):
            # named arguments f({a: 1, b: 2})
            line = self._line()
            self._parse_call_options()
            self._expect(")")
            return [Expr("opaque", line, "{...}")]
        while not self._accept(")"):
            args.append(self._parse_expression())
            if not self._accept(","):
                self._expect(")")
                break
        return args

    def _parse_primary(self) -> Expr:
        token = self._peek()
        if token is None:
            raise _ParseError("unexpected end of expression")
        line = token.line

        if token.kind == NUMBER:
            self.pos += 1
            text = token.text
            unit = self._peek()
            if unit is not None and unit.kind == IDENTIFIER and unit.text in ETHER_UNITS:
                self.pos += 1
                text += " " + unit.text
            return Expr("literal", line, text)
        if token.kind == STRING:
            self.pos += 1
            text = token.text
            while self._peek() is not None and self._peek().kind == STRING:
                text += self._advance().text
            return Expr("literal", line, text)
        if token.is_("true") or token.is_("false"):
            self.pos += 1
            return Expr("literal", line, token.text)
        if token.kind == IDENTIFIER:
            self.pos += 1
            if token.text == "hex" and self._peek() is not None and self._peek().kind == STRING:
                return Expr("literal", line, "hex" + self._advance().text)
            return Expr("identifier", line, token.text)
        if token.kind == KEYWORD and (is_elementary_type(token.text) or token.text == "payable"):
            self.pos += 1
            name = token.text
            if name == "address" and self._at("payable"):
                self.pos += 1
            return Expr("identifier", line, name)
        if token.is_("new"):
            self.pos += 1
            return Expr("new", line, self._parse_type())
        if token.is_("("):
            self.pos += 1
            elements: List[Expr] = []
            while not self._accept(")"):
                if self._at(","):
                    elements.append(Expr("literal", self._line(), ""))
                else:
                    elements.append(self._parse_expression())
                if not self._accept(","):
                    self._expect(")")
                    break
            if len(elements) == 1:
                return elements[0]
            return Expr("tuple", line, "", elements)
        if token.is_("["):
            self.pos += 1
            elements = []
            while not self._accept("]"):
                elements.append(self._parse_expression())
                if not self._accept(","):
                    self._expect("]")
                    break
            return Expr("tuple", line, "[]", elements)
        raise _ParseError(f"unexpected '{token.text}' in expression at line {line}")


def parse(tokens: List[SourceToken], source: Optional[str] = None) -> Tuple[AstUnit, ParseDiagnostics]:
    """Parse tokens into an AST.

    Args:
        tokens: Output of tokenize().
        source: Original text; when given, opaque statements keep the exact
            source span instead of a space-joined token rendering.

    Returns:
        Tuple of (AstUnit, ParseDiagnostics). Diagnostics are fatal only when
        no contract declaration could be recognized.
    """
    return Parser(tokens, source).parse()


def parse_source(source: str) -> Tuple[AstUnit, ParseDiagnostics]:
    """Tokenize and parse in one step."""
    return parse(tokenize(source), source)
