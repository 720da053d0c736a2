"""Scenario harness for the SafelyAdministrated model.

Scenario file format (`#` comments, blank lines ignored). Header directives
come before the first event:

    set owner <addr>          set delay <s>        set window <s>
    set cap <units>           set cap_percent <%>  set fee_address <addr>
    balance <addr> <units>

Events, in non-decreasing time order:

    t=<s> <principal> transfer <to> <amount>
    t=<s> <principal> propose mint <amount> | propose fee <addr> | propose migrate <target>
    t=<s> <principal> execute <id>
    t=<s> <principal> cancel <id>
    t=<s> <principal> opt_in
    t=<s> <principal> burn <amount>
    t=<s> <principal> probe <addr> payable|nonpayable
    t=<s> <principal> advance

run_scenario() applies every event and records before/after states;
check_safety() evaluates the user-safety properties over the trace.
"""

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from services.safe_admin import (
    DEFAULT_CAP_PERCENT,
    DEFAULT_DELAY,
    DEFAULT_WINDOW,
    EXECUTED,
    PENDING,
    AnnounceMigration,
    MintToOwner,
    SetFeeAddress,
    SimulationError,
    TokenState,
    advance_clock,
    burn_self,
    cancel,
    create_state,
    execute,
    opt_in_migration,
    propose,
    record_probe,
    transfer,
)

logger = logging.getLogger(__name__)

APPLIED = "applied"
REJECTED = "rejected"

TIMELOCK = "timelock"
EXIT_SAFETY = "exit-safety"
CONSERVATION = "conservation"
TRANSFER_LIVENESS = "transfer-liveness"
PROPERTIES = (TIMELOCK, EXIT_SAFETY, CONSERVATION, TRANSFER_LIVENESS)

PRIVILEGED_OPS = ("propose", "execute", "cancel")
LIVENESS_PROBE_ACCOUNT = "__liveness_probe__"

# op -> accepted argument counts
_ARITY = {
    "transfer": (2,),
    "propose": (2,),
    "execute": (1,),
    "cancel": (1,),
    "opt_in": (0,),
    "burn": (1,),
    "probe": (2,),
    "advance": (0,),
}
_SETTINGS = ("owner", "delay", "window", "cap", "cap_percent", "fee_address")
_INT_SETTINGS = ("delay", "window", "cap", "cap_percent")


class ScenarioSyntaxError(ValueError):
    """Malformed scenario line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"scenario line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class ScenarioEvent:
    line: int
    time: int
    principal: str
    op: str
    args: Tuple[str, ...] = ()

    def render(self) -> str:
        return " ".join([f"t={self.time}", self.principal, self.op, *self.args])


@dataclass
class Scenario:
    owner: str = "owner"
    delay: Optional[int] = None
    window: Optional[int] = None
    cap: Optional[int] = None
    cap_percent: Optional[int] = None
    fee_address: Optional[str] = None
    balances: Dict[str, int] = field(default_factory=dict)
    events: List[ScenarioEvent] = field(default_factory=list)

    def render(self) -> str:
        lines = [f"set owner {self.owner}"]
        for name in ("delay", "window", "cap", "cap_percent", "fee_address"):
            value = getattr(self, name)
            if value is not None:
                lines.append(f"set {name} {value}")
        lines += [f"balance {account} {amount}" for account, amount in self.balances.items()]
        lines += [event.render() for event in self.events]
        return "\n".join(lines) + "\n"


@dataclass
class Step:
    event: ScenarioEvent
    status: str
    before: TokenState
    after: TokenState
    error: Optional[str] = None
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "line": self.event.line,
            "time": self.event.time,
            "principal": self.event.principal,
            "op": self.event.op,
            "args": list(self.event.args),
            "status": self.status,
            "error": self.error,
            "message": self.message,
        }


@dataclass
class Trace:
    initial: TokenState
    steps: List[Step] = field(default_factory=list)
    digests: List[str] = field(default_factory=list)

    @property
    def final_state(self) -> TokenState:
        return self.steps[-1].after if self.steps else self.initial


@dataclass(frozen=True)
class PropertyVerdict:
    name: str
    holds: bool
    violations: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"property": self.name, "holds": self.holds, "violations": list(self.violations)}


# ========== Parsing ==========

def _int(text: str, line: int, what: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ScenarioSyntaxError(f"{what} must be an integer, got {text!r}", line) from None
    if value < 0:
        raise ScenarioSyntaxError(f"{what} must be non-negative, got {value}", line)
    return value


def _parse_event(words: List[str], number: int) -> ScenarioEvent:
    if len(words) < 3:
        raise ScenarioSyntaxError("expected 't=<seconds> <principal> <op> ...'", number)
    time = _int(words[0][2:], number, "time")
    principal, op, args = words[1], words[2], tuple(words[3:])
    if op not in _ARITY:
        raise ScenarioSyntaxError(f"unknown op '{op}'", number)
    if len(args) not in _ARITY[op]:
        raise ScenarioSyntaxError(f"'{op}' takes {_ARITY[op][0]} argument(s), got {len(args)}", number)

    if op in ("transfer",):
        _int(args[1], number, "amount")
    elif op == "burn":
        _int(args[0], number, "amount")
    elif op in ("execute", "cancel"):
        _int(args[0], number, "action id")
    elif op == "propose":
        if args[0] not in ("mint", "fee", "migrate"):
            raise ScenarioSyntaxError(f"unknown proposal '{args[0]}'", number)
        if args[0] == "mint":
            _int(args[1], number, "amount")
    elif op == "probe" and args[1] not in ("payable", "nonpayable"):
        raise ScenarioSyntaxError(f"probe outcome must be payable or nonpayable, got {args[1]!r}", number)
    return ScenarioEvent(number, time, principal, op, args)


def parse_scenario(text: str) -> Scenario:
    """Parse scenario text.

    Raises:
        ScenarioSyntaxError: On any malformed line, with its line number.
    """
    scenario = Scenario()
    last_time = 0
    for number, raw in enumerate(text.splitlines(), start=1):
        words = raw.split("#", 1)[0].split()
        if not words:
            continue
        if words[0].startswith("t="):
            event = _parse_event(words, number)
            if event.time < last_time:
                raise ScenarioSyntaxError(f"time {event.time} goes backwards (previous {last_time})", number)
            last_time = event.time
            scenario.events.append(event)
            continue
        if scenario.events:
            raise ScenarioSyntaxError(f"directive '{words[0]}' after the first event", number)
        if words[0] == "set":
            if len(words) != 3 or words[1] not in _SETTINGS:
                raise ScenarioSyntaxError(f"expected 'set <{'|'.join(_SETTINGS)}> <value>'", number)
            value = _int(words[2], number, words[1]) if words[1] in _INT_SETTINGS else words[2]
            if words[1] in ("delay", "window", "cap_percent") and value == 0:
                raise ScenarioSyntaxError(f"{words[1]} must be positive", number)
            setattr(scenario, words[1], value)
        elif words[0] == "balance":
            if len(words) != 3:
                raise ScenarioSyntaxError("expected 'balance <addr> <units>'", number)
            scenario.balances[words[1]] = _int(words[2], number, "balance")
        else:
            raise ScenarioSyntaxError(f"unknown directive '{words[0]}'", number)
    return scenario


# ========== Running ==========

def _canonical(state: TokenState) -> str:
    return json.dumps(state.to_dict(), sort_keys=True, separators=(",", ":"))


def _apply(state: TokenState, event: ScenarioEvent) -> TokenState:
    t, who, args = event.time, event.principal, event.args
    if event.op == "transfer":
        return transfer(state, who, args[0], int(args[1]), now=t)
    if event.op == "propose":
        kind, value = args
        if kind == "mint":
            action = MintToOwner(int(value))
        elif kind == "fee":
            action = SetFeeAddress(value)
        else:
            action = AnnounceMigration(value)
        return propose(state, who, action, t)
    if event.op == "execute":
        return execute(state, int(args[0]), t)
    if event.op == "cancel":
        return cancel(state, who, int(args[0]), t)
    if event.op == "opt_in":
        return opt_in_migration(state, who, t)
    if event.op == "burn":
        return burn_self(state, who, int(args[0]), now=t)
    if event.op == "probe":
        return record_probe(state, args[0], args[1] == "payable", now=t)
    return advance_clock(state, t)


def initial_state(scenario: Scenario, delay: Optional[int] = None, window: Optional[int] = None,
                  cap: Optional[int] = None, cap_percent: Optional[int] = None) -> TokenState:
    """Genesis state; scenario header values win over the given defaults."""
    def pick(own, given, default):
        if own is not None:
            return own
        return given if given is not None else default

    return create_state(
        scenario.balances,
        scenario.owner,
        delay=pick(scenario.delay, delay, DEFAULT_DELAY),
        window=pick(scenario.window, window, DEFAULT_WINDOW),
        cap=scenario.cap if scenario.cap is not None else cap,
        cap_percent=pick(scenario.cap_percent, cap_percent, DEFAULT_CAP_PERCENT),
        fee_address=scenario.fee_address,
    )


def run_scenario(scenario: Scenario, delay: Optional[int] = None, window: Optional[int] = None,
                 cap: Optional[int] = None, cap_percent: Optional[int] = None) -> Trace:
    """Apply every event in order; rejected events leave the state unchanged.

    Returns:
        Trace with one Step per event and a sha256 digest chain over states.
    """
    state = initial_state(scenario, delay, window, cap, cap_percent)
    trace = Trace(initial=state)
    previous = ""
    for event in scenario.events:
        try:
            after = _apply(state, event)
            step = Step(event, APPLIED, state, after)
        except SimulationError as e:
            step = Step(event, REJECTED, state, state, e.code, str(e))
            logger.debug(f"line {event.line}: {event.op} rejected ({e.code})")
        trace.steps.append(step)
        previous = hashlib.sha256((previous + _canonical(step.after)).encode("utf-8")).hexdigest()
        trace.digests.append(previous)
        state = step.after
    return trace


# ========== Safety properties ==========

def _executed_action(step: Step):
    return step.before.action(int(step.event.args[0]))


def _check_timelock(trace: Trace) -> List[str]:
    violations = []
    for step in trace.steps:
        before, after = step.before, step.after
        is_execute = step.status == APPLIED and step.event.op == "execute"
        if is_execute:
            pending = _executed_action(step)
            if step.event.time < pending.executable_at:
                violations.append(f"line {step.event.line}: action #{pending.id} executed before maturity")
            if pending.executable_at - pending.proposed_at != before.delay:
                violations.append(f"line {step.event.line}: action #{pending.id} delay is not exactly {before.delay}")
            continue
        if after.fee_address != before.fee_address:
            violations.append(f"line {step.event.line}: fee address changed outside an execution")
        if (after.migration is None) != (before.migration is None):
            violations.append(f"line {step.event.line}: migration announced outside an execution")
        newly_executed = [p.id for p in after.pending
                          if p.status == EXECUTED and (before.action(p.id) is None
                                                       or before.action(p.id).status != EXECUTED)]
        if newly_executed:
            violations.append(f"line {step.event.line}: actions {newly_executed} executed by a {step.event.op}")
    return violations


def _check_exit_safety(trace: Trace) -> List[str]:
    violations = []
    for step in trace.steps:
        before, after, event = step.before, step.after, step.event
        if event.op in PRIVILEGED_OPS and step.status == APPLIED:
            accounts = set(before.balances) | set(after.balances)
            touched = sorted(a for a in accounts if a != before.owner and before.balance(a) != after.balance(a))
            if touched:
                violations.append(f"line {event.line}: {event.op} changed balances of {touched}")

        if event.op != "transfer" or event.principal == before.owner:
            continue
        amount = int(event.args[1])
        is_full_exit = amount > 0 and amount == before.balance(event.principal)
        pending = [p for p in before.pending if p.status == PENDING
                   and event.time < p.executable_at]
        if not (is_full_exit and pending):
            continue
        recipient = event.args[0]
        if step.status != APPLIED:
            violations.append(f"line {event.line}: exit of {event.principal} rejected ({step.error})")
        elif recipient != event.principal and after.balance(recipient) != before.balance(recipient) + amount:
            violations.append(f"line {event.line}: exit of {event.principal} did not deliver {amount}")
    return violations


def _check_conservation(trace: Trace) -> List[str]:
    violations = []
    for step in trace.steps:
        before, after, event = step.before, step.after, step.event
        if sum(after.balances.values()) != after.total_supply:
            violations.append(f"line {event.line}: balances sum to {sum(after.balances.values())}, "
                              f"supply is {after.total_supply}")
        if after.minted_this_window > after.mint_cap_per_window:
            violations.append(f"line {event.line}: window mint {after.minted_this_window} over cap")
        expected = 0
        if step.status == APPLIED and event.op == "execute":
            action = _executed_action(step).action
            if isinstance(action, MintToOwner):
                expected = action.amount
        elif step.status == APPLIED and event.op == "burn":
            expected = -int(event.args[0])
        if after.total_supply - before.total_supply != expected:
            violations.append(f"line {event.line}: supply moved by {after.total_supply - before.total_supply} "
                              f"on {event.op}, expected {expected}")
    return violations


def _check_transfer_liveness(trace: Trace) -> List[str]:
    violations = []
    states = [(0, trace.initial)] + [(step.event.line, step.after) for step in trace.steps]
    for line, state in states:
        holders = [(amount, account) for account, amount in state.balances.items() if amount > 0]
        if not holders:
            continue
        _, holder = max(holders)
        try:
            transfer(state, holder, LIVENESS_PROBE_ACCOUNT, 1)
        except SimulationError as e:
            violations.append(f"line {line}: trial transfer from {holder} failed ({e.code})")
    for step in trace.steps:
        if step.event.op == "transfer" and step.status == REJECTED \
                and step.error not in ("InsufficientBalance", "InvalidAmount"):
            violations.append(f"line {step.event.line}: transfer rejected with {step.error}")
    return violations


def check_safety(trace: Trace) -> List[PropertyVerdict]:
    """Evaluate the four user-safety properties over a trace."""
    checks = (
        (TIMELOCK, _check_timelock),
        (EXIT_SAFETY, _check_exit_safety),
        (CONSERVATION, _check_conservation),
        (TRANSFER_LIVENESS, _check_transfer_liveness),
    )
    verdicts = []
    for name, check in checks:
        violations = check(trace)
        if violations:
            logger.warning(f"Property {name} violated: {violations[0]}")
        verdicts.append(PropertyVerdict(name, not violations, tuple(violations)))
    return verdicts


def trace_document(trace: Trace, verdicts: List[PropertyVerdict]) -> dict:
    return {
        "events": [step.to_dict() for step in trace.steps],
        "digests": list(trace.digests),
        "verdicts": [verdict.to_dict() for verdict in verdicts],
        "final_state": trace.final_state.to_dict(),
    }


def render_trace(trace: Trace, verdicts: List[PropertyVerdict]) -> str:
    return json.dumps(trace_document(trace, verdicts), indent=2) + "\n"


# ========== Adversarial harness ==========

USERS = ("alice", "bob", "carol", "dave")
_OWNER = "owner"


def generate_adversarial_script(seed: int, max_events: int = 100) -> Scenario:
    """Seeded random script in which the owner probes every privileged path.

    Users transfer, exit, burn and opt in; the owner proposes, executes early
    and late, cancels, and sets non-payable fee addresses. Time jumps span
    several delays so actions mature and windows roll.
    """
    rng = random.Random(seed)
    delay = rng.choice((60, 3600, DEFAULT_DELAY))
    window = delay * rng.choice((2, 4, 30))
    scenario = Scenario(owner=_OWNER, delay=delay, window=window,
                        cap_percent=rng.choice((1, 5, 50)))
    scenario.balances = {user: rng.randint(0, 10_000) for user in USERS}
    scenario.balances[_OWNER] = rng.randint(0, 10_000)
    principals = USERS + (_OWNER,)
    targets = ("vault", "newtoken", "feebox") + USERS

    now = 0
    proposals = 0
    events: List[ScenarioEvent] = []
    for index in range(rng.randint(1, max_events)):
        now += rng.choice((0, 0, 1, rng.randint(1, delay), delay - 1 if delay > 1 else 0, delay, 2 * delay))
        who = rng.choice(principals)
        roll = rng.random()
        line = index + 1
        if roll < 0.25:
            amount = rng.randint(0, 12_000)
            events.append(ScenarioEvent(line, now, who, "transfer", (rng.choice(targets + principals), str(amount))))
        elif roll < 0.45:
            kind = rng.choice(("mint", "mint", "fee", "migrate"))
            value = str(rng.randint(1, 20_000)) if kind == "mint" else rng.choice(targets)
            events.append(ScenarioEvent(line, now, rng.choice((_OWNER, _OWNER, who)), "propose", (kind, value)))
            proposals += 1
        elif roll < 0.65:
            events.append(ScenarioEvent(line, now, who, "execute", (str(rng.randint(1, proposals + 1)),)))
        elif roll < 0.70:
            events.append(ScenarioEvent(line, now, rng.choice((_OWNER, who)), "cancel",
                                        (str(rng.randint(1, proposals + 1)),)))
        elif roll < 0.78:
            events.append(ScenarioEvent(line, now, who, "opt_in"))
        elif roll < 0.84:
            events.append(ScenarioEvent(line, now, who, "burn", (str(rng.randint(0, 5_000)),)))
        elif roll < 0.92:
            outcome = rng.choice(("payable", "nonpayable"))
            events.append(ScenarioEvent(line, now, who, "probe", (rng.choice(targets), outcome)))
        else:
            events.append(ScenarioEvent(line, now, who, "advance"))
    scenario.events = events
    return scenario


def compare_exit_runs(scenario: Scenario, user: str, exit_target: str) -> Tuple[int, int]:
    """Exit target's final balance with and without the owner's privileged events.

    Returns:
        (balance with owner actions, balance without them).
    """
    stripped = Scenario(
        owner=scenario.owner,
        delay=scenario.delay,
        window=scenario.window,
        cap=scenario.cap,
        cap_percent=scenario.cap_percent,
        fee_address=scenario.fee_address,
        balances=dict(scenario.balances),
        events=[e for e in scenario.events
                if not (e.principal == scenario.owner and e.op in PRIVILEGED_OPS)],
    )
    with_owner = run_scenario(scenario).final_state.balance(exit_target)
    without_owner = run_scenario(stripped).final_state.balance(exit_target)
    logger.debug(f"Exit of {user} to {exit_target}: {with_owner} with owner actions, {without_owner} without")
    return with_owner, without_owner
