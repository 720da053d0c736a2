"""Administrated-pattern detectors.

Each detector inspects one flattened contract (a ContractView) and returns
Findings tied to the privilege guard that protects the offending function.
Matching is per function with symbol resolution. The only inter-procedural
step attributes a selfdestruct inside an internal helper to its callers.

Catalog:
    SelfDestruction   privileged selfdestruct/suicide (or a reachable
                      SELFDESTRUCT opcode when only bytecode is available)
    Deprecation       owner-set flag plus forwarding address that reroutes
                      public functions to other code
    ChangeOfAddress   owner-settable address that receives value
    Minting           privileged creation of token units
    Burning           privileged destruction of someone else's tokens
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from src.evm_disasm import OpcodeEvidence, disassemble, find_opcodes
from src.solidity_ast import (
    ASSIGNMENT,
    COMPOUND_ASSIGNMENT,
    IF,
    OPAQUE,
    REQUIRE_CALL,
    SELFDESTRUCT_CALL,
    AstUnit,
    ContractDecl,
    Expr,
    FunctionDecl,
    ModifierDecl,
    Statement,
    iter_statements,
)
from src.solidity_parser import parse_source
from src.symbols import PARAMETER, Symbol, SymbolTable, flatten_contract, resolve_symbols, select_target

logger = logging.getLogger(__name__)

SELF_DESTRUCTION = "SelfDestruction"
DEPRECATION = "Deprecation"
CHANGE_OF_ADDRESS = "ChangeOfAddress"
MINTING = "Minting"
BURNING = "Burning"
PATTERNS = (SELF_DESTRUCTION, DEPRECATION, CHANGE_OF_ADDRESS, MINTING, BURNING)

MODIFIER_BASED = "modifier-based"
INLINE_REQUIRE = "inline-require"
UNKNOWN_IDENTITY = "<unknown>"
IDENTITY_SEPARATOR = " or "

SOURCE_AST = "ast"
SOURCE_BYTECODE = "bytecode"

_REVERT_NAMES = ("revert", "throw")
_SENDER_ALIASES = ("_msgSender",)


@dataclass(frozen=True)
class DetectorSettings:
    """Name heuristics; overridable through ToolConfig."""

    supply_markers: Tuple[str, ...] = ("supply",)
    balance_markers: Tuple[str, ...] = ("balance",)
    transfer_calls: Tuple[str, ...] = (
        "transfer", "send", "transferFrom", "safeTransfer", "safeTransferFrom", "_transfer",
    )


@dataclass(frozen=True)
class PrivilegeGuard:
    kind: str
    guard_name: str
    privileged_identity: str
    functions_guarded: Tuple[str, ...]
    line: int

    @property
    def identities(self) -> Tuple[str, ...]:
        """Each account the guard admits."""
        return tuple(self.privileged_identity.split(IDENTITY_SEPARATOR))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "guard_name": self.guard_name,
            "privileged_identity": self.privileged_identity,
            "functions_guarded": list(self.functions_guarded),
            "line": self.line,
        }


@dataclass(frozen=True)
class Finding:
    pattern: str
    contract: str
    function: str
    line: int
    guard: Optional[str]
    evidence: str
    source: str = SOURCE_AST

    def to_dict(self) -> dict:
        return {
            "pattern": self.pattern,
            "contract": self.contract,
            "function": self.function,
            "line": self.line,
            "guard": self.guard,
            "evidence": self.evidence,
            "source": self.source,
        }


class ContractView:
    """A flattened target contract plus the symbol table used to read it."""

    def __init__(self, ast: AstUnit, contract: ContractDecl, symbols: SymbolTable,
                 settings: Optional[DetectorSettings] = None):
        self.ast = ast
        self.symbols = symbols
        self.settings = settings or DetectorSettings()
        self.contract = flatten_contract(ast, contract.name) or contract
        self.name = self.contract.name
        self.functions: List[FunctionDecl] = [fn for fn in self.contract.functions if fn.body is not None]
        self.modifiers: Dict[str, ModifierDecl] = {m.name: m for m in self.contract.modifiers}

    def resolve(self, name: str, fn: Optional[FunctionDecl] = None,
                modifier: Optional[ModifierDecl] = None) -> Symbol:
        if fn is not None:
            return self.symbols.resolve(name, fn.contract, fn.scope_key)
        if modifier is not None:
            return self.symbols.resolve(name, modifier.contract, f"modifier:{modifier.name}")
        return self.symbols.resolve(name, self.name)

    def state_variable_type(self, name: str, fn: Optional[FunctionDecl] = None) -> Optional[str]:
        symbol = self.resolve(name, fn)
        return symbol.type_name if symbol.is_state_variable else None

    def is_address_var(self, name: str, fn: Optional[FunctionDecl] = None) -> bool:
        return self.state_variable_type(name, fn) in ("address", "address payable")

    def is_bool_var(self, name: str, fn: Optional[FunctionDecl] = None) -> bool:
        return self.state_variable_type(name, fn) == "bool"

    def is_supply_var(self, name: str, fn: Optional[FunctionDecl] = None) -> bool:
        type_name = self.state_variable_type(name, fn)
        if type_name is None or type_name.startswith("mapping("):
            return False
        lowered = name.lower()
        if any(marker in lowered for marker in self.settings.supply_markers):
            return True
        return name in self._total_supply_returns()

    def is_balances_mapping(self, name: str, fn: Optional[FunctionDecl] = None) -> bool:
        type_name = self.state_variable_type(name, fn)
        if type_name is None or not type_name.startswith("mapping(address"):
            return False
        return any(marker in name.lower() for marker in self.settings.balance_markers)

    def _total_supply_returns(self) -> List[str]:
        names = []
        for fn in self.functions:
            if fn.name != "totalSupply":
                continue
            for statement in fn.body:
                if statement.kind == "return" and statement.expr is not None \
                        and statement.expr.kind == "identifier":
                    names.append(statement.expr.text)
        return names

    def function(self, name: str) -> Optional[FunctionDecl]:
        for fn in self.functions:
            if fn.name == name:
                return fn
        return None


def build_view(ast: AstUnit, target: Optional[str] = None,
               settings: Optional[DetectorSettings] = None) -> Optional[ContractView]:
    contract = select_target(ast, target)
    if contract is None:
        return None
    return ContractView(ast, contract, resolve_symbols(ast), settings)


# ========== Privilege guards ==========

def _is_sender(expr: Expr) -> bool:
    if expr.is_member("msg", "sender") or expr.is_member("tx", "origin"):
        return True
    return expr.kind == "call" and not expr.args and expr.call_name in _SENDER_ALIASES \
        and expr.callee.kind == "identifier"


def _identity(expr: Expr, view: ContractView, fn: Optional[FunctionDecl],
              modifier: Optional[ModifierDecl], depth: int = 0) -> Optional[str]:
    """State variable the caller is compared against, UNKNOWN_IDENTITY, or None."""
    if expr.kind == "identifier":
        symbol = view.resolve(expr.text, fn, modifier)
        if symbol.is_state_variable:
            return symbol.name
        if symbol.kind == "unknown":
            return UNKNOWN_IDENTITY
        return None
    if expr.kind == "call" and not expr.args and expr.callee.kind == "identifier" and depth < 2:
        symbol = view.resolve(expr.callee.text, fn, modifier)
        if symbol.is_state_variable:
            # public state variable read through its generated getter
            return symbol.name
        getter = view.function(expr.callee.text)
        if getter is not None:
            for statement in getter.body:
                if statement.kind == "return" and statement.expr is not None:
                    return _identity(statement.expr, view, getter, None, depth + 1)
    return None


def _owner_check(expr: Optional[Expr], op: str, view: ContractView,
                 fn: Optional[FunctionDecl], modifier: Optional[ModifierDecl],
                 depth: int = 0) -> Optional[str]:
    """Identity from `msg.sender <op> X` (either side), `&&` chains, `||`
    alternatives that are all owner checks (identities joined with " or "),
    or an owner-check helper call such as isOwner()."""
    if expr is None:
        return None
    if expr.kind == "binary" and expr.text == op:
        left, right = expr.children
        if _is_sender(left):
            return _identity(right, view, fn, modifier)
        if _is_sender(right):
            return _identity(left, view, fn, modifier)
        return None
    if expr.kind == "binary" and expr.text == ("&&" if op == "==" else "||"):
        for child in expr.children:
            identity = _owner_check(child, op, view, fn, modifier, depth)
            if identity is not None:
                return identity
        return None
    if expr.kind == "binary" and expr.text == ("||" if op == "==" else "&&"):
        # every alternative must itself be an owner check
        identities: List[str] = []
        for child in expr.children:
            identity = _owner_check(child, op, view, fn, modifier, depth)
            if identity is None:
                return None
            for name in identity.split(IDENTITY_SEPARATOR):
                if name not in identities:
                    identities.append(name)
        return IDENTITY_SEPARATOR.join(identities)
    if op == "==" and expr.kind == "call" and not expr.args \
            and expr.callee.kind == "identifier" and depth < 2:
        helper = view.function(expr.callee.text)
        if helper is not None:
            for statement in helper.body:
                if statement.kind == "return":
                    return _owner_check(statement.expr, op, view, helper, None, depth + 1)
    if op == "!=" and expr.kind == "unary" and expr.text == "!":
        return _owner_check(expr.children[0], "==", view, fn, modifier, depth)
    return None


def _guard_identity(statement: Statement, view: ContractView,
                    fn: Optional[FunctionDecl], modifier: Optional[ModifierDecl]) -> Optional[str]:
    if statement.kind == REQUIRE_CALL and statement.expr.args:
        return _owner_check(statement.expr.args[0], "==", view, fn, modifier)
    if statement.kind == IF:
        reverts = any(
            s.expr is not None and s.expr.kind == "call" and s.expr.call_name in _REVERT_NAMES
            for s in statement.then_body
        ) or any(
            s.kind == REQUIRE_CALL and s.expr.args and s.expr.args[0].kind == "literal"
            and s.expr.args[0].text == "false"
            for s in statement.then_body
        )
        if reverts:
            return _owner_check(statement.condition, "!=", view, fn, modifier)
    return None


def detect_privilege_guards(view: ContractView) -> List[PrivilegeGuard]:
    """Find modifier-based and inline owner checks.

    A modifier containing require(msg.sender == X) or if (msg.sender != X)
    revert becomes a guard over every function that applies it; the same
    check written directly in a function body becomes an inline guard.
    """
    guards: List[PrivilegeGuard] = []

    for modifier in view.modifiers.values():
        identity = None
        for statement in iter_statements(modifier.body):
            identity = _guard_identity(statement, view, None, modifier)
            if identity is not None:
                break
        if identity is None:
            continue
        guarded = tuple(fn.name for fn in view.functions if modifier.name in fn.modifiers)
        if not guarded:
            logger.debug(f"Modifier {modifier.name} checks {identity} but guards nothing")
            continue
        guards.append(PrivilegeGuard(MODIFIER_BASED, modifier.name, identity, guarded, modifier.line))

    for fn in view.functions:
        for statement in fn.body:
            identity = _guard_identity(statement, view, fn, None)
            if identity is not None:
                guards.append(PrivilegeGuard(
                    INLINE_REQUIRE, f"inline@L{statement.line}", identity, (fn.name,), statement.line))
                break

    logger.debug(f"{view.name}: {len(guards)} privilege guard(s)")
    return guards


def guard_for(function_name: str, guards: Iterable[PrivilegeGuard]) -> Optional[PrivilegeGuard]:
    for guard in guards:
        if function_name in guard.functions_guarded:
            return guard
    return None


def _guard_note(guard: PrivilegeGuard) -> str:
    return f"guarded by {guard.guard_name} (caller must be {guard.privileged_identity})"


def _reportable(fn: FunctionDecl, guard: Optional[PrivilegeGuard]) -> bool:
    """Guarded functions, plus unguarded public entry points."""
    if fn.is_constructor:
        return False
    return guard is not None or fn.is_external_entry


# ========== SelfDestruction ==========

def _calls(fn: FunctionDecl, names: Iterable[str]) -> Optional[Tuple[str, int]]:
    """First call in fn to one of names, as (callee, line)."""
    wanted = set(names)
    for statement in iter_statements(fn.body):
        for expr in statement.expressions():
            for node in expr.walk():
                if node.kind == "call" and node.callee.kind == "identifier" and node.call_name in wanted:
                    return node.call_name, statement.line
    return None


def _selfdestruct_paths(view: ContractView) -> Dict[str, Tuple[int, str, str]]:
    """Functions that can end in selfdestruct, as name -> (line, call, helper).

    helper is empty for a direct call; otherwise it names the internal
    function the call goes through. Only internal and private helpers
    propagate to their callers.
    """
    paths: Dict[str, Tuple[int, str, str]] = {}
    for fn in view.functions:
        if fn.is_constructor:
            continue
        for statement in iter_statements(fn.body):
            if statement.kind == SELFDESTRUCT_CALL:
                paths[fn.name] = (statement.line, statement.expr.call_name, "")
                break

    changed = True
    while changed:
        changed = False
        helpers = [name for name in paths
                   if view.function(name) is not None and not view.function(name).is_external_entry]
        for fn in view.functions:
            if fn.is_constructor or fn.name in paths:
                continue
            hit = _calls(fn, helpers)
            if hit is not None:
                helper, line = hit
                paths[fn.name] = (line, paths[helper][1], helper)
                changed = True
    return paths


def detect_self_destruction(view: Optional[ContractView], guards: List[PrivilegeGuard],
                            opcode_evidence: Optional[List[OpcodeEvidence]] = None,
                            contract_name: str = "<bytecode>") -> List[Finding]:
    """Report selfdestruct/suicide calls, guarded or not.

    A selfdestruct inside an internal or private helper is attributed to the
    functions that call it, so the helper's own missing guard does not hide
    the guard on its caller. With no source view, each reachable
    SELFDESTRUCT opcode evidence entry becomes a bytecode-level finding.
    """
    findings: List[Finding] = []
    if view is not None:
        paths = _selfdestruct_paths(view)
        for fn in view.functions:
            if fn.name not in paths:
                continue
            guard = guard_for(fn.name, guards)
            if not _reportable(fn, guard):
                continue
            line, call, helper = paths[fn.name]
            route = f"calls {call}()" if not helper else f"reaches {call}() through {helper}()"
            if guard is not None:
                evidence = f"{fn.name}() {route} {_guard_note(guard)}"
            else:
                evidence = f"unguarded: anyone may destroy the contract via {fn.name}()"
            findings.append(Finding(SELF_DESTRUCTION, view.name, fn.name, line,
                                    guard.guard_name if guard else None, evidence))
        return findings

    for evidence in opcode_evidence or []:
        if evidence.mnemonic != "SELFDESTRUCT" or not evidence.reachable_guess:
            continue
        offsets = ", ".join(str(offset) for offset in evidence.offsets)
        findings.append(Finding(
            SELF_DESTRUCTION, contract_name, "<bytecode>", 0, None,
            f"SELFDESTRUCT opcode at byte offset(s) {offsets}", SOURCE_BYTECODE,
        ))
    return findings


# ========== Deprecation ==========

def _assigned_state(statement: Statement, view: ContractView, fn: FunctionDecl) -> Optional[str]:
    if statement.kind != ASSIGNMENT or statement.target is None or statement.target.kind != "identifier":
        return None
    symbol = view.resolve(statement.target.text, fn)
    return symbol.name if symbol.is_state_variable else None


def _forwarding_site(view: ContractView, flag: str, address: str) -> Optional[Tuple[str, int]]:
    """A public function that branches on `flag` and calls out through `address`."""
    for fn in view.functions:
        if not fn.is_external_entry:
            continue
        for statement in iter_statements(fn.body):
            if statement.kind != IF or not statement.condition.mentions(flag):
                continue
            for branch_statement in iter_statements(statement.then_body + statement.else_body):
                if branch_statement.kind == OPAQUE and address in branch_statement.text:
                    return fn.name, branch_statement.line
                for expr in branch_statement.expressions():
                    if not expr.mentions(address):
                        continue
                    if any(node.kind == "call" and node.callee.kind == "member" for node in expr.walk()):
                        return fn.name, branch_statement.line
    return None


def detect_deprecation(view: ContractView, guards: List[PrivilegeGuard]) -> List[Finding]:
    """Flag-plus-forwarding-address upgrade switch.

    Requires a privileged function that sets a bool state flag to true and
    an address state variable (in the same body, or in another function
    behind the same guard), and a public function that branches on the flag
    and forwards a call through that address.
    """
    flag_sets: Dict[str, List[Tuple[str, int]]] = {}
    address_sets: Dict[str, List[str]] = {}
    for fn in view.functions:
        for statement in iter_statements(fn.body):
            name = _assigned_state(statement, view, fn)
            if name is None:
                continue
            if view.is_bool_var(name, fn) and statement.value is not None \
                    and statement.value.kind == "literal" and statement.value.text == "true":
                flag_sets.setdefault(fn.name, []).append((name, statement.line))
            elif view.is_address_var(name, fn):
                address_sets.setdefault(fn.name, []).append(name)

    findings: List[Finding] = []
    for fn in view.functions:
        if fn.name not in flag_sets:
            continue
        guard = guard_for(fn.name, guards)
        if not _reportable(fn, guard):
            continue
        siblings = {fn.name}
        if guard is not None:
            siblings.update(guard.functions_guarded)
        identities = {name for g in guards for name in g.identities}
        candidates: List[str] = []
        for sibling in sorted(siblings, key=lambda name: (name != fn.name, name)):
            for address in address_sets.get(sibling, []):
                if address not in candidates and address not in identities:
                    candidates.append(address)

        for flag, line in flag_sets[fn.name]:
            for address in candidates:
                site = _forwarding_site(view, flag, address)
                if site is None:
                    continue
                prefix = _guard_note(guard) if guard else "unguarded: any caller may switch"
                evidence = (f"{fn.name}() sets flag {flag} and forwarding address {address}; "
                            f"{site[0]}() forwards calls at line {site[1]}; {prefix}")
                findings.append(Finding(DEPRECATION, view.name, fn.name, line,
                                        guard.guard_name if guard else None, evidence))
                break
    return findings


# ========== ChangeOfAddress ==========

def _unwrap_conversion(expr: Expr) -> Expr:
    while expr.kind == "call" and len(expr.args) == 1 and expr.callee.kind == "identifier" \
            and expr.callee.text in ("address", "payable", "address payable"):
        expr = expr.args[0]
    return expr


def _is_transfer_call(node: Expr, settings: DetectorSettings) -> bool:
    if node.kind != "call":
        return False
    name = node.call_name
    if name in settings.transfer_calls:
        return True
    if name == "call" and "value" in node.options:
        return True
    callee = node.callee
    # legacy a.call.value(x)(...)
    return name == "value" and callee.kind == "member" and callee.children[0].kind == "member" \
        and callee.children[0].text == "call"


def _value_use_site(view: ContractView, address: str, setter: FunctionDecl) -> Optional[Tuple[str, int, str]]:
    for fn in view.functions:
        if fn is setter:
            continue
        for statement in iter_statements(fn.body):
            target = statement.target
            if statement.kind in (ASSIGNMENT, COMPOUND_ASSIGNMENT) and target is not None \
                    and target.kind == "index" and len(target.children) == 2 \
                    and target.children[0].kind == "identifier" \
                    and view.is_balances_mapping(target.children[0].text, fn) \
                    and target.children[1].mentions(address):
                return fn.name, statement.line, f"{target.children[0].text}[{address}]"
            for expr in statement.expressions():
                for node in expr.walk():
                    if _is_transfer_call(node, view.settings) and node.mentions(address):
                        return fn.name, statement.line, f"{node.call_name}()"
    return None


def detect_address_change(view: ContractView, guards: List[PrivilegeGuard]) -> List[Finding]:
    """Privileged setter of an address that later receives value."""
    identities = {name for guard in guards for name in guard.identities}
    findings: List[Finding] = []
    for fn in view.functions:
        guard = guard_for(fn.name, guards)
        if not _reportable(fn, guard):
            continue
        for statement in iter_statements(fn.body):
            name = _assigned_state(statement, view, fn)
            if name is None or name in identities or not view.is_address_var(name, fn):
                continue
            value = _unwrap_conversion(statement.value)
            if value.kind != "identifier" or view.resolve(value.text, fn).kind != PARAMETER:
                continue
            site = _value_use_site(view, name, fn)
            if site is None:
                logger.debug(f"{fn.name}() sets {name} but it never receives value")
                continue
            prefix = _guard_note(guard) if guard else "unguarded: any caller may redirect"
            evidence = (f"{fn.name}() sets {name} from parameter {value.text}; "
                        f"{name} receives value via {site[2]} in {site[0]}() at line {site[1]}; {prefix}")
            findings.append(Finding(CHANGE_OF_ADDRESS, view.name, fn.name, statement.line,
                                    guard.guard_name if guard else None, evidence))
            break
    return findings


# ========== Minting and Burning ==========

@dataclass
class _SupplyEffects:
    supply_increments: List[int] = field(default_factory=list)
    supply_decrements: List[int] = field(default_factory=list)
    balance_increments: List[Tuple[Expr, int]] = field(default_factory=list)
    balance_decrements: List[Tuple[Expr, int]] = field(default_factory=list)
    balance_zeroings: List[Tuple[Expr, int]] = field(default_factory=list)


def _is_zeroing(statement: Statement) -> bool:
    value = statement.value
    return statement.kind == ASSIGNMENT and value is not None \
        and value.kind == "literal" and value.text == "0"


def _direction(statement: Statement) -> int:
    """+1 for an increment, -1 for a decrement, 0 otherwise."""
    if statement.kind == COMPOUND_ASSIGNMENT:
        return {"+=": 1, "-=": -1}.get(statement.op, 0)
    if statement.kind == ASSIGNMENT and statement.value is not None:
        value = statement.value
        if value.kind == "binary" and value.text in ("+", "-"):
            return 1 if value.text == "+" else -1
        if value.kind == "call" and value.callee.kind == "member" and value.call_name in ("add", "sub"):
            return 1 if value.call_name == "add" else -1
    return 0


def _supply_effects(view: ContractView, fn: FunctionDecl) -> _SupplyEffects:
    effects = _SupplyEffects()
    for statement in iter_statements(fn.body):
        direction = _direction(statement)
        target = statement.target
        if target is None or (direction == 0 and not _is_zeroing(statement)):
            continue
        if target.kind == "identifier" and view.is_supply_var(target.text, fn):
            if direction:
                (effects.supply_increments if direction > 0 else effects.supply_decrements).append(statement.line)
        elif target.kind == "index" and len(target.children) == 2 \
                and target.children[0].kind == "identifier":
            mapping = target.children[0].text
            if view.is_balances_mapping(mapping, fn):
                entry = (target.children[1], statement.line)
                if direction == 0:
                    effects.balance_zeroings.append(entry)
                else:
                    (effects.balance_increments if direction > 0 else effects.balance_decrements).append(entry)
            elif view.state_variable_type(mapping, fn) is not None:
                logger.debug(f"{fn.name}(): {mapping} is not balances-style, ignoring line {statement.line}")
    return effects


def detect_mint(view: ContractView, guards: List[PrivilegeGuard]) -> List[Finding]:
    """Privileged creation of tokens: supply grows, or a balance grows with
    no matching decrement in the same body."""
    findings: List[Finding] = []
    for fn in view.functions:
        guard = guard_for(fn.name, guards)
        if not _reportable(fn, guard):
            continue
        effects = _supply_effects(view, fn)
        if effects.supply_increments:
            line = effects.supply_increments[0]
            what = "total supply"
        elif effects.balance_increments and not effects.balance_decrements:
            line = effects.balance_increments[0][1]
            what = "a balance with no matching decrement"
        else:
            continue
        prefix = _guard_note(guard) if guard else "unguarded: any caller may mint"
        findings.append(Finding(MINTING, view.name, fn.name, line,
                                guard.guard_name if guard else None,
                                f"{fn.name}() increases {what}; {prefix}"))
    return findings


def detect_burn(view: ContractView, guards: List[PrivilegeGuard]) -> List[Finding]:
    """Privileged destruction of tokens held by an account other than the caller."""
    findings: List[Finding] = []
    for fn in view.functions:
        guard = guard_for(fn.name, guards)
        if not _reportable(fn, guard):
            continue
        effects = _supply_effects(view, fn)
        candidates = list(effects.balance_decrements)
        if effects.supply_decrements:
            # wiping a balance counts only when supply shrinks with it
            candidates += effects.balance_zeroings
        victims = sorted(
            ((index, line) for index, line in candidates
             if not _is_sender(index) and index.kind == "identifier"
             and view.resolve(index.text, fn).kind == PARAMETER),
            key=lambda victim: victim[1],
        )
        if not victims:
            continue
        if effects.balance_increments and not effects.supply_decrements:
            # paired movement between two accounts, not destruction
            continue
        index, line = victims[0]
        prefix = _guard_note(guard) if guard else "unguarded: any caller may burn"
        findings.append(Finding(BURNING, view.name, fn.name, line,
                                guard.guard_name if guard else None,
                                f"{fn.name}() decreases the balance of arbitrary account {index.text}; {prefix}"))
    return findings


# ========== Pipeline ==========

@dataclass
class Analysis:
    """Everything the classifier and reports need about one artifact."""

    frontend: str
    target: Optional[str]
    guards: List[PrivilegeGuard]
    findings: List[Finding]
    diagnostics: dict
    fatal: bool = False


def run_detectors(view: ContractView) -> Tuple[List[PrivilegeGuard], List[Finding]]:
    guards = detect_privilege_guards(view)
    findings: List[Finding] = []
    findings += detect_self_destruction(view, guards)
    findings += detect_deprecation(view, guards)
    findings += detect_address_change(view, guards)
    findings += detect_mint(view, guards)
    findings += detect_burn(view, guards)
    findings.sort(key=lambda f: (PATTERNS.index(f.pattern), f.line, f.function))
    return guards, findings


def analyze_source(source: str, target: Optional[str] = None,
                   settings: Optional[DetectorSettings] = None) -> Analysis:
    """Run tokenize → parse → resolve → detect over Solidity source."""
    ast, diagnostics = parse_source(source)
    summary = diagnostics.summary()
    if diagnostics.fatal:
        return Analysis(SOURCE_AST, None, [], [], summary, fatal=True)
    view = build_view(ast, target, settings)
    if view is None:
        summary["error"] = f"target contract {target} not found"
        return Analysis(SOURCE_AST, None, [], [], summary, fatal=True)
    guards, findings = run_detectors(view)
    summary["contracts"] = [contract.name for contract in ast.contracts]
    summary["target"] = view.name
    return Analysis(SOURCE_AST, view.name, guards, findings, summary)


def analyze_bytecode(bytecode: str, contract_name: str = "<bytecode>") -> Analysis:
    """Opcode-level analysis; only SelfDestruction is decidable here."""
    instructions = disassemble(bytecode)
    evidence = find_opcodes(instructions, {"SELFDESTRUCT", "DELEGATECALL"})
    findings = detect_self_destruction(None, [], evidence, contract_name)
    delegatecall = [e for e in evidence if e.mnemonic == "DELEGATECALL"]
    summary = {
        "fatal": False,
        "instructions": len(instructions),
        "invalid_instructions": sum(1 for i in instructions if i.invalid),
        "delegatecall_offsets": list(delegatecall[0].offsets) if delegatecall else [],
    }
    return Analysis(SOURCE_BYTECODE, contract_name, [], findings, summary)
