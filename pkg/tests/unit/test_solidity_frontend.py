"""Tests for the Solidity frontend: tokenizer, parser and AST dump.

Tests:
1. Tokenizer kinds, positions and lossless reconstruction
2. Token count agreement with an independent regex splitter
3. Parser subset coverage (modifiers, selfdestruct, constructors, call options)
4. Error recovery (opaque statements, recovered regions, nesting limit, fatal input)
5. Round-trip locality and deterministic AST serialization
"""

import json
import re

import pytest

from src.solidity_ast import (
    FUNCTION_CALL,
    IF,
    LOCAL_DECLARATION,
    MEMBER_CALL,
    OPAQUE,
    PLACEHOLDER,
    REQUIRE_CALL,
    SELFDESTRUCT_CALL,
    dump_ast,
    iter_statements,
)
from src.solidity_lexer import COMMENT, IDENTIFIER, KEYWORD, NUMBER, PUNCTUATION, STRING, reconstruct, tokenize
from src.solidity_parser import parse_source
from tests.fixtures import FIXTURES

SOL_FIXTURES = sorted(path.name for path in (FIXTURES / "contracts").glob("*.sol"))

# Character-class splitter used as a token-count oracle
_ORACLE_RE = re.compile(
    r"//[^\n]*|/\*.*?\*/"
    r"|\"(?:\\.|[^\"\\])*\"|'(?:\\.|[^'\\])*'"
    r"|0[xX][0-9a-fA-F]+|\d+(?:\.\d+)?(?:[eE][-+]?\d+)?|\.\d+"
    r"|[A-Za-z_$][A-Za-z0-9_$]*"
    r"|>>>=|<<=|>>=|>>>|\*\*=|==|!=|<=|>=|&&|\|\||\+=|-=|\*=|/=|%=|\|=|&=|\^=|\+\+|--|=>|<<|>>|\*\*|->|:="
    r"|\S",
    re.DOTALL,
)


def _parse_fixture(name: str):
    source = (FIXTURES / "contracts" / name).read_text(encoding="utf-8")
    ast, diagnostics = parse_source(source)
    return source, ast, diagnostics


# ========== Tokenizer ==========

def test_tokenize_empty_source():
    assert tokenize("") == []


def test_tokenize_minimal_contract():
    tokens = tokenize("contract A {}")
    assert [(t.kind, t.text) for t in tokens] == [
        (KEYWORD, "contract"),
        (IDENTIFIER, "A"),
        (PUNCTUATION, "{"),
        (PUNCTUATION, "}"),
    ]


def test_tokenize_positions_are_one_based():
    tokens = tokenize("contract A {\n    uint x; // note\n}")
    uint = next(t for t in tokens if t.text == "uint")
    assert (uint.line, uint.column) == (2, 5)
    comment = next(t for t in tokens if t.kind == COMMENT)
    assert comment.text == "// note"
    assert comment.line == 2


def test_tokenize_literals_and_operators():
    tokens = tokenize('x += 0x1F; s = "a;b"; y = 1.5e3 >>= 2;')
    kinds = {t.text: t.kind for t in tokens}
    assert kinds["+="] == PUNCTUATION
    assert kinds["0x1F"] == NUMBER
    assert kinds['"a;b"'] == STRING
    assert kinds["1.5e3"] == NUMBER
    assert kinds[">>="] == PUNCTUATION


def test_unknown_characters_become_punctuation():
    tokens = tokenize("a @ b")
    assert [(t.kind, t.text) for t in tokens][1] == (PUNCTUATION, "@")


def test_require_and_selfdestruct_are_identifiers():
    kinds = {t.text: t.kind for t in tokenize("require(x); selfdestruct(o); revert();")}
    assert kinds["require"] == IDENTIFIER
    assert kinds["selfdestruct"] == IDENTIFIER
    assert kinds["revert"] == IDENTIFIER


@pytest.mark.parametrize("name", SOL_FIXTURES)
def test_reconstruct_is_lossless(name):
    source = (FIXTURES / "contracts" / name).read_text(encoding="utf-8")
    assert reconstruct(tokenize(source), source) == source


def test_token_count_matches_independent_splitter():
    source = (FIXTURES / "contracts" / "deprecate_upgrade.sol").read_text(encoding="utf-8")
    expected = len(_ORACLE_RE.findall(source))
    assert len(tokenize(source)) == expected


# ========== Parser ==========

def test_parse_minimal_contract():
    ast, diagnostics = parse_source("contract A {}")
    assert len(ast.contracts) == 1
    assert ast.contracts[0].functions == []
    assert diagnostics.fatal is False
    assert diagnostics.skipped_spans == []


def test_parse_guarded_kill():
    source = """
contract K {
    address owner;
    modifier onlyOwner { require(msg.sender == owner); _; }
    function kill() onlyOwner { selfdestruct(msg.sender); }
}
"""
    ast, diagnostics = parse_source(source)
    contract = ast.contracts[0]
    kill = contract.functions[0]
    assert kill.name == "kill"
    assert kill.modifiers == ["onlyOwner"]
    assert [s.kind for s in kill.body] == [SELFDESTRUCT_CALL]
    modifier = contract.modifiers[0]
    assert [s.kind for s in modifier.body] == [REQUIRE_CALL, PLACEHOLDER]
    assert diagnostics.recovered_regions == 0


def test_suicide_alias_is_selfdestruct():
    ast, _ = parse_source("contract K { function k() public { suicide(msg.sender); } }")
    statement = ast.contracts[0].functions[0].body[0]
    assert statement.kind == SELFDESTRUCT_CALL
    assert statement.kind != FUNCTION_CALL


def test_assembly_block_becomes_one_opaque_statement():
    source = """
contract A {
    function f() public returns (uint r) {
        r = 1;
        assembly {
            r := add(r, 1)
        }
    }
}
"""
    ast, diagnostics = parse_source(source)
    fn = ast.contracts[0].functions[0]
    assert fn.name == "f"
    opaque = [s for s in fn.body if s.kind == OPAQUE]
    assert len(opaque) == 1
    assert opaque[0].text.startswith("assembly")
    assert "r := add(r, 1)" in opaque[0].text
    assert diagnostics.recovered_regions == 1
    assert diagnostics.skipped_spans == [(5, 7)]


def test_unparseable_input_is_fatal():
    source = (FIXTURES / "contracts" / "unparseable.sol").read_text(encoding="utf-8")
    ast, diagnostics = parse_source(source)
    assert diagnostics.fatal is True
    assert ast.contracts == []
    assert diagnostics.recovered_regions == len(diagnostics.skipped_spans)


def test_recovery_keeps_every_function():
    _, ast, diagnostics = _parse_fixture("recovery_mix.sol")
    contract = ast.contract("RecoveryToken")
    assert [fn.name for fn in contract.functions] == ["constructor", "transfer", "checksum", "mint"]
    # the for loop and the assembly block
    assert diagnostics.recovered_regions == 2
    assert diagnostics.fatal is False


def test_deep_nesting_is_recovered_not_fatal():
    deep = "(" * 120 + "1" + ")" * 120
    source = (
        "contract D {\n"
        "    uint total;\n"
        f"    function f() public {{ uint x = {deep}; total = x; }}\n"
        "    function g() public { total = 1; }\n"
        "}\n"
    )
    ast, diagnostics = parse_source(source)
    contract = ast.contracts[0]
    assert [fn.name for fn in contract.functions] == ["f", "g"]
    assert diagnostics.nesting_limit_hits >= 1
    assert diagnostics.recovered_regions >= 1
    assert diagnostics.fatal is False
    assert diagnostics.summary()["nesting_limit_hits"] == diagnostics.nesting_limit_hits


def test_deep_unary_chain_is_recovered():
    source = "contract N { function f() public returns (bool) { return " + "!" * 200 + "true; } }"
    ast, diagnostics = parse_source(source)
    assert ast.contracts[0].functions[0].name == "f"
    assert diagnostics.nesting_limit_hits >= 1
    assert diagnostics.fatal is False


def test_adding_unsupported_statement_never_removes_functions():
    source = (FIXTURES / "contracts" / "kill_selfdestruct.sol").read_text(encoding="utf-8")
    before, _ = parse_source(source)
    mutated = source.replace(
        "require(balanceOf[msg.sender] >= value);",
        "require(balanceOf[msg.sender] >= value);\n        while (value > 0) { value--; }",
    )
    after, diagnostics = parse_source(mutated)
    assert [fn.name for fn in after.contracts[0].functions] == [fn.name for fn in before.contracts[0].functions]
    assert diagnostics.recovered_regions == 1


def test_custom_error_revert_is_a_revert_call():
    _, ast, _ = _parse_fixture("recovery_mix.sol")
    modifier = ast.contract("RecoveryToken").modifiers[0]
    branch = modifier.body[0]
    assert branch.kind == IF
    assert branch.then_body[0].kind == FUNCTION_CALL
    assert branch.then_body[0].expr.call_name == "revert"


def test_throw_is_a_function_call():
    ast, _ = parse_source("contract A { function f() public { if (msg.sender != owner) throw; } }")
    branch = ast.contracts[0].functions[0].body[0]
    assert branch.kind == IF
    assert branch.then_body[0].kind == FUNCTION_CALL
    assert branch.then_body[0].expr.call_name == "throw"


def test_old_style_constructor():
    _, ast, _ = _parse_fixture("issue_mint.sol")
    ownable = ast.contract("Ownable")
    assert ownable.functions[0].kind == "constructor"
    assert ownable.functions[0].is_constructor


def test_contract_kinds_and_declarations():
    source = """
interface IToken { function transfer(address to, uint v) external returns (bool); }
library Math { function add(uint a, uint b) internal pure returns (uint) { return a + b; } }
abstract contract Base { function hook() internal virtual; }
contract T is Base {
    address payable public sink;
    mapping(address => mapping(address => uint256)) allowed;
    event Sent(address indexed to, uint amount);
    function f(uint a) { uint256 local = a; }
}
"""
    ast, diagnostics = parse_source(source)
    assert [(c.name, c.kind) for c in ast.contracts] == [
        ("IToken", "interface"), ("Math", "library"), ("Base", "abstract contract"), ("T", "contract"),
    ]
    token = ast.contract("T")
    assert token.bases == ["Base"]
    assert token.state_variables[0].type_name == "address payable"
    assert token.state_variables[1].type_name == "mapping(address=>mapping(address=>uint256))"
    assert token.events[0].name == "Sent"
    fn = token.functions[0]
    assert fn.visibility == "public"
    assert fn.body[0].kind == LOCAL_DECLARATION
    assert ast.contract("Base").functions[0].body is None
    assert diagnostics.fatal is False


def test_call_options_and_member_calls():
    source = """
contract P {
    function pay(address payable to, uint amount) public {
        to.call{value: amount}("");
        to.transfer(amount);
    }
}
"""
    ast, _ = parse_source(source)
    body = ast.contracts[0].functions[0].body
    assert body[0].kind == MEMBER_CALL
    assert body[0].expr.options == ["value"]
    assert body[1].kind == MEMBER_CALL
    assert body[1].expr.call_name == "transfer"


def test_unchecked_block_is_flattened():
    _, ast, _ = _parse_fixture("setfee_inline.sol")
    transfer = ast.contract("TreasuryToken").functions[1]
    assert transfer.name == "transfer"
    assert [s.line for s in transfer.body] == [16, 18, 20, 21]


# ========== Invariants ==========

@pytest.mark.parametrize("name", [n for n in SOL_FIXTURES if n != "unparseable.sol"])
def test_round_trip_locality(name):
    source, ast, _ = _parse_fixture(name)
    lines = source.splitlines()
    for contract in ast.contracts:
        assert contract.kind.split()[0] in lines[contract.line - 1]
        for fn in contract.functions:
            for statement in iter_statements(fn.body):
                assert statement.head in lines[statement.line - 1], (fn.name, statement)
        for modifier in contract.modifiers:
            assert "modifier" in lines[modifier.line - 1]
            for statement in iter_statements(modifier.body):
                assert statement.head in lines[statement.line - 1]


def test_dump_ast_is_deterministic():
    source = (FIXTURES / "contracts" / "tether_style.sol").read_text(encoding="utf-8")
    first = dump_ast(*parse_source(source))
    second = dump_ast(*parse_source(source))
    assert first == second
    document = json.loads(first)
    assert [c["name"] for c in document["contracts"]][-1] == "TetherStyleToken"
    assert document["diagnostics"]["fatal"] is False
    assert list(document["contracts"][0].keys())[:3] == ["name", "kind", "bases"]
