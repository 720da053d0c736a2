"""AST node types produced by the Solidity subset parser.

Expressions use one generic node (Expr) whose `kind` selects the shape:

    identifier  text = name
    literal     text = literal source text
    member      text = member name, children = [base]
    index       children = [base, index] (index omitted for `T[]`)
    call        children = [callee, *args], options = call option names
    binary      text = operator (assignments included), children = [left, right]
    unary       text = operator ("x++" style postfix ops are suffixed "@post")
    ternary     children = [condition, if_true, if_false]
    tuple       children = elements
    new         text = type name
    opaque      text = raw text that could not be parsed
"""

import json
from dataclasses import asdict, dataclass, field
from typing import Iterator, List, Optional, Tuple

# Statement kinds
REQUIRE_CALL = "require-call"
ASSIGNMENT = "assignment"
COMPOUND_ASSIGNMENT = "compound-assignment"
FUNCTION_CALL = "function-call"
MEMBER_CALL = "member-call"
IF = "if"
RETURN = "return"
EMIT = "emit"
SELFDESTRUCT_CALL = "selfdestruct-call"
OPAQUE = "opaque"
LOCAL_DECLARATION = "local-declaration"
PLACEHOLDER = "placeholder"

COMPOUND_OPERATORS = ("+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "<<=", ">>=")


@dataclass
class Expr:
    kind: str
    line: int
    text: str = ""
    children: List["Expr"] = field(default_factory=list)
    options: List[str] = field(default_factory=list)

    def walk(self) -> Iterator["Expr"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def mentions(self, name: str) -> bool:
        return any(node.kind == "identifier" and node.text == name for node in self.walk())

    @property
    def callee(self) -> Optional["Expr"]:
        return self.children[0] if self.kind == "call" and self.children else None

    @property
    def args(self) -> List["Expr"]:
        return self.children[1:] if self.kind == "call" else []

    @property
    def call_name(self) -> str:
        """Name of the called function: `f` for f(x), `m` for a.b.m(x)."""
        callee = self.callee
        if callee is None:
            return ""
        if callee.kind in ("identifier", "member"):
            return callee.text
        return ""

    def is_member(self, base: str, member: str) -> bool:
        return (
            self.kind == "member"
            and self.text == member
            and self.children[0].kind == "identifier"
            and self.children[0].text == base
        )


@dataclass
class Statement:
    kind: str
    line: int
    head: str
    text: str
    expr: Optional[Expr] = None
    target: Optional[Expr] = None
    op: str = ""
    value: Optional[Expr] = None
    condition: Optional[Expr] = None
    then_body: List["Statement"] = field(default_factory=list)
    else_body: List["Statement"] = field(default_factory=list)
    declared_type: str = ""
    name: str = ""

    def expressions(self) -> Iterator[Expr]:
        for node in (self.expr, self.target, self.value, self.condition):
            if node is not None:
                yield node


@dataclass
class Parameter:
    name: str
    type_name: str
    line: int


@dataclass
class StateVariable:
    name: str
    type_name: str
    visibility: str
    line: int
    constant: bool = False
    initial: Optional[Expr] = None

    @property
    def is_address(self) -> bool:
        return self.type_name in ("address", "address payable")

    @property
    def is_bool(self) -> bool:
        return self.type_name == "bool"

    @property
    def is_mapping(self) -> bool:
        return self.type_name.startswith("mapping(")

    @property
    def mapping_key_type(self) -> str:
        if not self.is_mapping:
            return ""
        inner = self.type_name[len("mapping("):]
        return inner.split("=>", 1)[0].split(" ")[0]


@dataclass
class ModifierDecl:
    name: str
    contract: str
    parameters: List[Parameter]
    body: List[Statement]
    line: int
    end_line: int


@dataclass
class FunctionDecl:
    name: str
    contract: str
    kind: str
    parameters: List[Parameter]
    returns: List[Parameter]
    visibility: str
    mutability: str
    modifiers: List[str]
    body: Optional[List[Statement]]
    line: int
    end_line: int

    @property
    def is_constructor(self) -> bool:
        return self.kind == "constructor"

    @property
    def is_external_entry(self) -> bool:
        return self.visibility in ("public", "external") and self.kind == "function"

    @property
    def scope_key(self) -> str:
        return f"{self.name}@L{self.line}"


@dataclass
class EventDecl:
    name: str
    parameters: List[Parameter]
    line: int


@dataclass
class ContractDecl:
    name: str
    kind: str
    bases: List[str]
    state_variables: List[StateVariable]
    modifiers: List[ModifierDecl]
    functions: List[FunctionDecl]
    events: List[EventDecl]
    line: int
    end_line: int


@dataclass
class AstUnit:
    contracts: List[ContractDecl] = field(default_factory=list)

    def contract(self, name: str) -> Optional[ContractDecl]:
        for decl in self.contracts:
            if decl.name == name:
                return decl
        return None


@dataclass
class ParseDiagnostics:
    skipped_spans: List[Tuple[int, int]] = field(default_factory=list)
    fatal: bool = False
    nesting_limit_hits: int = 0

    @property
    def recovered_regions(self) -> int:
        return len(self.skipped_spans)

    def summary(self) -> dict:
        return {
            "fatal": self.fatal,
            "recovered_regions": self.recovered_regions,
            "skipped_spans": [list(span) for span in self.skipped_spans],
            "nesting_limit_hits": self.nesting_limit_hits,
        }


def iter_statements(body: Optional[List[Statement]]) -> Iterator[Statement]:
    """Yield every statement of a body, descending into if/else branches."""
    for statement in body or []:
        yield statement
        if statement.kind == IF:
            yield from iter_statements(statement.then_body)
            yield from iter_statements(statement.else_body)


def dump_ast(ast: AstUnit, diagnostics: Optional[ParseDiagnostics] = None) -> str:
    """Serialize the AST as deterministic, indented JSON.

    Keys follow dataclass field order, so identical input always yields
    byte-identical output.
    """
    document = {"contracts": [asdict(contract) for contract in ast.contracts]}
    if diagnostics is not None:
        document["diagnostics"] = diagnostics.summary()
    return json.dumps(document, indent=2, ensure_ascii=False)
