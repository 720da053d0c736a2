"""Symbol resolution and contract flattening.

Resolution is innermost-first: locals and parameters of the enclosing
function or modifier, then the contract's own members, then members of base
contracts declared in the same file (most derived first). Names that resolve
nowhere map to the UNKNOWN marker; resolution never raises.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from src.solidity_ast import (
    LOCAL_DECLARATION,
    AstUnit,
    ContractDecl,
    FunctionDecl,
    ModifierDecl,
    StateVariable,
    iter_statements,
)

logger = logging.getLogger(__name__)

STATE_VARIABLE = "state-variable"
FUNCTION = "function"
MODIFIER = "modifier"
PARAMETER = "parameter"
LOCAL = "local"
UNKNOWN = "unknown"

ERC20_SIGNATURES = ("transfer", "balanceOf", "totalSupply")


@dataclass(frozen=True)
class Symbol:
    name: str
    kind: str
    type_name: str = ""
    contract: str = ""

    @property
    def is_state_variable(self) -> bool:
        return self.kind == STATE_VARIABLE


def unknown_symbol(name: str) -> Symbol:
    return Symbol(name=name, kind=UNKNOWN)


class SymbolTable:
    """Scoped identifier lookup for one AstUnit."""

    def __init__(self, ast: AstUnit):
        self.ast = ast
        self._members: Dict[str, Dict[str, Symbol]] = {}
        self._locals: Dict[Tuple[str, str], Dict[str, Symbol]] = {}
        self._linearized: Dict[str, List[str]] = {}

    def _declare_member(self, contract: str, symbol: Symbol) -> None:
        # first declaration wins (functions may be overloaded)
        self._members.setdefault(contract, {}).setdefault(symbol.name, symbol)

    def _declare_local(self, contract: str, scope: str, symbol: Symbol) -> None:
        self._locals.setdefault((contract, scope), {})[symbol.name] = symbol

    def resolve(self, name: str, contract: str, scope: Optional[str] = None) -> Symbol:
        """Resolve an identifier.

        Args:
            name: Identifier text.
            contract: Contract the reference appears in.
            scope: scope_key of the enclosing function, or "modifier:<name>".

        Returns:
            The innermost matching Symbol, or an UNKNOWN symbol.
        """
        if scope is not None:
            symbol = self._locals.get((contract, scope), {}).get(name)
            if symbol is not None:
                return symbol
        for owner in self.linearization(contract):
            symbol = self._members.get(owner, {}).get(name)
            if symbol is not None:
                return symbol
        return unknown_symbol(name)

    def linearization(self, contract: str) -> List[str]:
        return self._linearized.get(contract, [contract])

    def state_variable(self, contract: str, name: str) -> Optional[StateVariable]:
        for owner in self.linearization(contract):
            decl = self.ast.contract(owner)
            if decl is None:
                continue
            for variable in decl.state_variables:
                if variable.name == name:
                    return variable
        return None


def linearize(ast: AstUnit, name: str) -> List[str]:
    """Contract names in lookup order, most derived first.

    Bases missing from the file are kept by name so callers can still see
    them, but contribute no members.
    """
    order: List[str] = []
    visiting = set()

    def visit(current: str) -> List[str]:
        if current in visiting:
            return []
        visiting.add(current)
        decl = ast.contract(current)
        result = [current]
        if decl is not None:
            # later bases are "more derived" in Solidity's ordering
            for base in reversed(decl.bases):
                for item in visit(base):
                    if item not in result:
                        result.append(item)
        visiting.discard(current)
        return result

    for item in visit(name):
        if item not in order:
            order.append(item)
    return order


def _function_scope(fn: FunctionDecl) -> str:
    return fn.scope_key


def _modifier_scope(modifier: ModifierDecl) -> str:
    return f"modifier:{modifier.name}"


def resolve_symbols(ast: AstUnit) -> SymbolTable:
    """Build the symbol table for every contract in the unit."""
    table = SymbolTable(ast)
    for contract in ast.contracts:
        table._linearized[contract.name] = linearize(ast, contract.name)
        for variable in contract.state_variables:
            table._declare_member(contract.name, Symbol(
                variable.name, STATE_VARIABLE, variable.type_name, contract.name))
        for fn in contract.functions:
            if fn.name:
                returns = ",".join(p.type_name for p in fn.returns)
                table._declare_member(contract.name, Symbol(fn.name, FUNCTION, returns, contract.name))
            for parameter in fn.parameters + fn.returns:
                if parameter.name:
                    table._declare_local(contract.name, _function_scope(fn), Symbol(
                        parameter.name, PARAMETER, parameter.type_name, contract.name))
            for statement in iter_statements(fn.body):
                if statement.kind == LOCAL_DECLARATION:
                    table._declare_local(contract.name, _function_scope(fn), Symbol(
                        statement.name, LOCAL, statement.declared_type, contract.name))
        for modifier in contract.modifiers:
            table._declare_member(contract.name, Symbol(modifier.name, MODIFIER, "", contract.name))
            for parameter in modifier.parameters:
                if parameter.name:
                    table._declare_local(contract.name, _modifier_scope(modifier), Symbol(
                        parameter.name, PARAMETER, parameter.type_name, contract.name))
            for statement in iter_statements(modifier.body):
                if statement.kind == LOCAL_DECLARATION:
                    table._declare_local(contract.name, _modifier_scope(modifier), Symbol(
                        statement.name, LOCAL, statement.declared_type, contract.name))

    logger.debug(f"Resolved symbols for {len(ast.contracts)} contract(s)")
    return table


def flatten_contract(ast: AstUnit, name: str) -> Optional[ContractDecl]:
    """Merged view of a contract and its same-file bases.

    Members declared in a more derived contract shadow same-named members of
    its bases; functions are keyed by name and arity so overloads survive.
    """
    decl = ast.contract(name)
    if decl is None:
        return None

    state_variables: Dict[str, StateVariable] = {}
    modifiers: Dict[str, ModifierDecl] = {}
    functions: Dict[Tuple[str, int], FunctionDecl] = {}
    events = {}
    for owner in linearize(ast, name):
        base = ast.contract(owner)
        if base is None:
            continue
        for variable in base.state_variables:
            state_variables.setdefault(variable.name, variable)
        for modifier in base.modifiers:
            modifiers.setdefault(modifier.name, modifier)
        for fn in base.functions:
            if fn.is_constructor and owner != name:
                continue
            functions.setdefault((fn.name or f"<{fn.kind}>", len(fn.parameters)), fn)
        for event in base.events:
            events.setdefault(event.name, event)

    ordered_functions = sorted(functions.values(), key=lambda fn: (_order(ast, fn.contract), fn.line))
    return ContractDecl(
        name=decl.name,
        kind=decl.kind,
        bases=list(decl.bases),
        state_variables=sorted(state_variables.values(), key=lambda v: v.line),
        modifiers=list(modifiers.values()),
        functions=ordered_functions,
        events=list(events.values()),
        line=decl.line,
        end_line=decl.end_line,
    )


def _order(ast: AstUnit, contract: str) -> int:
    for index, decl in enumerate(ast.contracts):
        if decl.name == contract:
            return index
    return len(ast.contracts)


def declares_erc20(ast: AstUnit, contract: ContractDecl) -> bool:
    flat = flatten_contract(ast, contract.name) or contract
    names = {fn.name for fn in flat.functions}
    names.update(v.name for v in flat.state_variables if v.visibility == "public")
    return any(signature in names for signature in ERC20_SIGNATURES)


def select_target(ast: AstUnit, override: Optional[str] = None) -> Optional[ContractDecl]:
    """Pick the contract to analyze.

    The last deployable contract declaring ERC-20 signatures wins; verified
    sources usually list libraries and bases before the token itself.
    """
    if override:
        decl = ast.contract(override)
        if decl is None:
            logger.warning(f"Target contract {override} not found in source")
        return decl
    deployable = [c for c in ast.contracts if c.kind in ("contract", "abstract contract")]
    for contract in reversed(deployable):
        if contract.kind == "contract" and declares_erc20(ast, contract):
            return contract
    if deployable:
        return deployable[-1]
    return ast.contracts[-1] if ast.contracts else None
