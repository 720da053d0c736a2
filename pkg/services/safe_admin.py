"""SafelyAdministrated token model.

A deterministic token state machine in which the owner keeps useful powers
but cannot rug users:

    - every privileged action is announced, then executable only after a
      fixed delay (users can leave in between)
    - transfers can never be paused
    - minting goes to the owner, capped per fixed window
    - burning is only ever of the caller's own tokens
    - migration to new code is opt-in per user
    - there is no self-destruct

Every operation takes a state and returns a new one; a rejected operation
raises SimulationError and leaves the input state untouched.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Tuple, Union

logger = logging.getLogger(__name__)

DEFAULT_DELAY = 604800       # 7 days
DEFAULT_WINDOW = 2592000     # 30 days
DEFAULT_CAP_PERCENT = 1

PENDING = "pending"
EXECUTED = "executed"
CANCELLED = "cancelled"


# ========== Errors ==========

class SimulationError(ValueError):
    """Rejected operation; `code` names the reason."""

    code = "SimulationError"

    def __init__(self, message: str):
        super().__init__(f"{self.code}: {message}")


class InsufficientBalance(SimulationError):
    code = "InsufficientBalance"


class Unauthorized(SimulationError):
    code = "Unauthorized"


class NotMatured(SimulationError):
    code = "NotMatured"


class MintCapExceeded(SimulationError):
    code = "MintCapExceeded"


class FeeAddressNotPayable(SimulationError):
    code = "FeeAddressNotPayable"


class UnknownAction(SimulationError):
    code = "UnknownAction"


class InvalidState(SimulationError):
    code = "InvalidState"


class MigrationNotAnnounced(SimulationError):
    code = "MigrationNotAnnounced"


class ClockRegression(SimulationError):
    code = "ClockRegression"


class InvalidAmount(SimulationError):
    code = "InvalidAmount"


# ========== Actions ==========

@dataclass(frozen=True)
class MintToOwner:
    amount: int
    kind: str = "MintToOwner"


@dataclass(frozen=True)
class SetFeeAddress:
    address: str
    kind: str = "SetFeeAddress"


@dataclass(frozen=True)
class AnnounceMigration:
    target: str
    kind: str = "AnnounceMigration"


Action = Union[MintToOwner, SetFeeAddress, AnnounceMigration]
ACTION_TYPES = (MintToOwner, SetFeeAddress, AnnounceMigration)


@dataclass(frozen=True)
class PendingAction:
    id: int
    action: Action
    proposed_at: int
    executable_at: int
    status: str = PENDING
    executed_at: Optional[int] = None


@dataclass
class Migration:
    target: str
    claims: Dict[str, int] = field(default_factory=dict)


# ========== State ==========

@dataclass
class TokenState:
    balances: Dict[str, int]
    total_supply: int
    owner: str
    pending: List[PendingAction] = field(default_factory=list)
    delay: int = DEFAULT_DELAY
    window: int = DEFAULT_WINDOW
    mint_cap_per_window: int = 0
    cap_override: Optional[int] = None
    cap_percent: int = DEFAULT_CAP_PERCENT
    clock: int = 0
    minted_this_window: int = 0
    window_index: int = 0
    migration: Optional[Migration] = None
    fee_address: Optional[str] = None
    probes: Dict[str, bool] = field(default_factory=dict)
    next_id: int = 1
    log: Tuple[str, ...] = ()

    def copy(self) -> "TokenState":
        # PendingAction is frozen and the log is a tuple, so sharing them is safe
        return replace(
            self,
            balances=dict(self.balances),
            pending=list(self.pending),
            probes=dict(self.probes),
            migration=None if self.migration is None
            else Migration(self.migration.target, dict(self.migration.claims)),
        )

    def note(self, entry: str) -> None:
        self.log = self.log + (entry,)

    def balance(self, account: str) -> int:
        return self.balances.get(account, 0)

    def action(self, action_id: int) -> Optional[PendingAction]:
        for pending in self.pending:
            if pending.id == action_id:
                return pending
        return None

    def to_dict(self) -> dict:
        """Canonical JSON-ready form (accounts sorted, zero balances dropped)."""
        return {
            "balances": {k: v for k, v in sorted(self.balances.items()) if v},
            "total_supply": self.total_supply,
            "owner": self.owner,
            "pending": [
                {
                    "id": p.id,
                    "action": asdict(p.action),
                    "proposed_at": p.proposed_at,
                    "executable_at": p.executable_at,
                    "status": p.status,
                    "executed_at": p.executed_at,
                }
                for p in self.pending
            ],
            "params": {
                "delay": self.delay,
                "window": self.window,
                "mint_cap_per_window": self.mint_cap_per_window,
                "cap_percent": self.cap_percent if self.cap_override is None else None,
            },
            "clock": self.clock,
            "minted_this_window": self.minted_this_window,
            "window_index": self.window_index,
            "migration": None if self.migration is None else {
                "target": self.migration.target,
                "claims": dict(sorted(self.migration.claims.items())),
            },
            "fee_address": self.fee_address,
            "probes": dict(sorted(self.probes.items())),
        }


def _window_cap(total_supply: int, cap_override: Optional[int], cap_percent: int) -> int:
    if cap_override is not None:
        return cap_override
    return total_supply * cap_percent // 100


def create_state(balances: Dict[str, int], owner: str, delay: int = DEFAULT_DELAY,
                 window: int = DEFAULT_WINDOW, cap: Optional[int] = None,
                 cap_percent: int = DEFAULT_CAP_PERCENT, fee_address: Optional[str] = None,
                 clock: int = 0) -> TokenState:
    """Genesis state; total supply is the sum of the initial balances.

    Raises:
        InvalidAmount: On a negative balance or a non-positive parameter.
    """
    if any(amount < 0 for amount in balances.values()):
        raise InvalidAmount("initial balances must be non-negative")
    if delay <= 0 or window <= 0 or cap_percent <= 0 or (cap is not None and cap < 0):
        raise InvalidAmount("delay, window and cap must be positive")
    supply = sum(balances.values())
    return TokenState(
        balances=dict(balances),
        total_supply=supply,
        owner=owner,
        delay=delay,
        window=window,
        cap_override=cap,
        cap_percent=cap_percent,
        mint_cap_per_window=_window_cap(supply, cap, cap_percent),
        clock=clock,
        window_index=clock // window,
        fee_address=fee_address,
    )


def advance_clock(state: TokenState, now: int) -> TokenState:
    """Move the clock forward, rolling the mint window at fixed boundaries.

    Raises:
        ClockRegression: If `now` is earlier than the current clock.
    """
    if now < state.clock:
        raise ClockRegression(f"time {now} is before current clock {state.clock}")
    new = state.copy()
    new.clock = now
    index = now // new.window
    if index != new.window_index:
        new.window_index = index
        new.minted_this_window = 0
        new.mint_cap_per_window = _window_cap(new.total_supply, new.cap_override, new.cap_percent)
        new.note(f"t={now} window {index} opens, cap {new.mint_cap_per_window}")
    return new


def _check_amount(amount: int) -> None:
    if not isinstance(amount, int) or amount < 0:
        raise InvalidAmount(f"amount must be a non-negative integer, got {amount!r}")


# ========== User operations ==========

def transfer(state: TokenState, sender: str, to: str, amount: int, now: Optional[int] = None) -> TokenState:
    """Move tokens between accounts. No owner action can disable this.

    Raises:
        InvalidAmount, InsufficientBalance, ClockRegression
    """
    _check_amount(amount)
    new = advance_clock(state, state.clock if now is None else now)
    if new.balance(sender) < amount:
        raise InsufficientBalance(f"{sender} holds {new.balance(sender)}, cannot send {amount}")
    if amount == 0:
        new.note(f"t={new.clock} transfer {sender}->{to} 0 (no-op)")
        return new
    new.balances[sender] = new.balance(sender) - amount
    new.balances[to] = new.balance(to) + amount
    new.note(f"t={new.clock} transfer {sender}->{to} {amount}")
    return new


def burn_self(state: TokenState, user: str, amount: int, now: Optional[int] = None) -> TokenState:
    """Destroy the caller's own tokens.

    Raises:
        InvalidAmount, InsufficientBalance, ClockRegression
    """
    _check_amount(amount)
    new = advance_clock(state, state.clock if now is None else now)
    if new.balance(user) < amount:
        raise InsufficientBalance(f"{user} holds {new.balance(user)}, cannot burn {amount}")
    new.balances[user] = new.balance(user) - amount
    new.total_supply -= amount
    new.note(f"t={new.clock} burn {user} {amount}")
    return new


def opt_in_migration(state: TokenState, user: str, now: int) -> TokenState:
    """Move only the caller's balance to the migration target and record the claim.

    Raises:
        MigrationNotAnnounced: No AnnounceMigration has been executed.
        InvalidState: The caller is the migration target itself.
    """
    new = advance_clock(state, now)
    if new.migration is None:
        raise MigrationNotAnnounced("no migration has been executed")
    target = new.migration.target
    if user == target:
        raise InvalidState("the migration target cannot opt in")
    amount = new.balance(user)
    new.balances[user] = 0
    new.balances[target] = new.balance(target) + amount
    new.migration.claims[user] = new.migration.claims.get(user, 0) + amount
    new.note(f"t={now} opt_in {user} moves {amount} to {target}")
    return new


def record_probe(state: TokenState, address: str, payable: bool, now: Optional[int] = None) -> TokenState:
    """Record the outcome of a payability probe for an address."""
    new = advance_clock(state, state.clock if now is None else now)
    new.probes[address] = payable
    new.note(f"t={new.clock} probe {address} {'payable' if payable else 'nonpayable'}")
    return new


# ========== Privileged operations ==========

def propose(state: TokenState, caller: str, action: Action, now: int) -> TokenState:
    """Announce a privileged action, executable exactly `delay` seconds later.

    Raises:
        Unauthorized: Caller is not the owner.
        UnknownAction: Action is not one of the supported kinds.
        InvalidAmount: Mint of a non-positive amount.
        InvalidState: Migration target is the owner.
        ClockRegression
    """
    if caller != state.owner:
        raise Unauthorized(f"{caller} is not the owner")
    if not isinstance(action, ACTION_TYPES):
        raise UnknownAction(f"unsupported action {action!r}")
    if isinstance(action, MintToOwner) and (not isinstance(action.amount, int) or action.amount <= 0):
        raise InvalidAmount(f"mint amount must be positive, got {action.amount!r}")
    if isinstance(action, AnnounceMigration) and action.target == state.owner:
        # migrated balances never reach the owner
        raise InvalidState("the migration target cannot be the owner")
    new = advance_clock(state, now)
    pending = PendingAction(new.next_id, action, now, now + new.delay)
    new.pending.append(pending)
    new.next_id += 1
    new.note(f"t={now} announce #{pending.id} {action.kind} executable at {pending.executable_at}")
    return new


def _pending(state: TokenState, action_id: int) -> PendingAction:
    pending = state.action(action_id)
    if pending is None:
        raise UnknownAction(f"no action #{action_id}")
    if pending.status != PENDING:
        raise InvalidState(f"action #{action_id} is {pending.status}")
    return pending


def _set_status(state: TokenState, action_id: int, status: str, when: Optional[int] = None) -> None:
    state.pending = [
        replace(p, status=status, executed_at=when) if p.id == action_id else p
        for p in state.pending
    ]


def execute(state: TokenState, action_id: int, now: int) -> TokenState:
    """Apply a matured action. Anyone may trigger execution.

    Raises:
        UnknownAction, InvalidState, NotMatured, MintCapExceeded,
        FeeAddressNotPayable, ClockRegression
    """
    pending = _pending(state, action_id)
    if now < pending.executable_at:
        raise NotMatured(f"action #{action_id} executable at {pending.executable_at}, now {now}")
    new = advance_clock(state, now)
    action = pending.action

    if isinstance(action, MintToOwner):
        if new.minted_this_window + action.amount > new.mint_cap_per_window:
            raise MintCapExceeded(
                f"minting {action.amount} exceeds window cap {new.mint_cap_per_window} "
                f"({new.minted_this_window} already minted)")
        new.balances[new.owner] = new.balance(new.owner) + action.amount
        new.total_supply += action.amount
        new.minted_this_window += action.amount
    elif isinstance(action, SetFeeAddress):
        # unprobed addresses are assumed payable
        if not new.probes.get(action.address, True):
            raise FeeAddressNotPayable(f"{action.address} cannot receive payments")
        new.fee_address = action.address
    elif isinstance(action, AnnounceMigration):
        if new.migration is None or new.migration.target != action.target:
            new.migration = Migration(action.target)
    else:
        raise UnknownAction(f"unsupported action {action!r}")

    _set_status(new, action_id, EXECUTED, now)
    new.note(f"t={now} execute #{action_id} {action.kind}")
    return new


def cancel(state: TokenState, caller: str, action_id: int, now: int) -> TokenState:
    """Withdraw a pending action.

    Raises:
        Unauthorized, UnknownAction, InvalidState, ClockRegression
    """
    if caller != state.owner:
        raise Unauthorized(f"{caller} is not the owner")
    _pending(state, action_id)
    new = advance_clock(state, now)
    _set_status(new, action_id, CANCELLED)
    new.note(f"t={now} cancel #{action_id}")
    return new
