"""Tests for privilege guards and the five administrated-pattern detectors.

Tests:
1. Guard recognition: modifiers, inline requires, if/revert, helper calls
2. One positive fixture per pattern, plus near-miss negatives
3. Unguarded capabilities reported with an "unguarded" note
4. Detector independence under deletion of the pattern-bearing function
5. Guard linkage, monotonicity and source/bytecode agreement
"""

import pytest

from src.classifier import ADMINISTRATED, classify, featurize
from src.detectors import (
    BURNING,
    CHANGE_OF_ADDRESS,
    DEPRECATION,
    INLINE_REQUIRE,
    MINTING,
    MODIFIER_BASED,
    SELF_DESTRUCTION,
    SOURCE_BYTECODE,
    DetectorSettings,
    analyze_bytecode,
    analyze_source,
    build_view,
    detect_privilege_guards,
)
from src.solidity_parser import parse_source
from tests.fixtures import read_fixture


def _analyze(name, **kwargs):
    return analyze_source(read_fixture(f"contracts/{name}"), **kwargs)


def _patterns(analysis):
    return sorted((f.pattern, f.function) for f in analysis.findings)


# ========== Guards ==========

def test_modifier_guard_on_kill():
    analysis = _analyze("kill_selfdestruct.sol")
    assert len(analysis.guards) == 1
    guard = analysis.guards[0]
    assert guard.kind == MODIFIER_BASED
    assert guard.guard_name == "onlyOwner"
    assert guard.privileged_identity == "owner"
    assert guard.functions_guarded == ("kill",)


def test_no_owner_comparison_means_no_guards():
    assert _analyze("plain_erc20.sol").guards == []


def test_two_inline_requires_share_identity():
    source = """
contract Admin {
    address admin;
    address payable sink;
    function a() public { require(msg.sender == admin); sink = payable(msg.sender); }
    function b() public { require(admin == msg.sender, "no"); }
}
"""
    view = build_view(parse_source(source)[0])
    guards = detect_privilege_guards(view)
    assert [(g.kind, g.guard_name, g.privileged_identity, g.functions_guarded) for g in guards] == [
        (INLINE_REQUIRE, "inline@L5", "admin", ("a",)),
        (INLINE_REQUIRE, "inline@L6", "admin", ("b",)),
    ]


def test_if_revert_modifier_guard():
    analysis = _analyze("deprecate_split.sol")
    guard = analysis.guards[0]
    assert guard.guard_name == "onlyAdmin"
    assert guard.privileged_identity == "admin"
    assert set(guard.functions_guarded) == {"setUpgradeTarget", "activateUpgrade"}


def test_custom_error_revert_guard():
    analysis = _analyze("recovery_mix.sol")
    assert [(g.guard_name, g.privileged_identity) for g in analysis.guards] == [("onlyOwner", "owner")]
    assert _patterns(analysis) == [(MINTING, "mint")]


def test_is_owner_helper_guard():
    guard = _analyze("mint_burn.sol").guards[0]
    assert guard.guard_name == "onlyOwner"
    assert guard.privileged_identity == "_owner"
    assert set(guard.functions_guarded) == {"mint", "burn"}


def test_msg_sender_alias_and_getter_guard():
    guard = _analyze("symbolic_owner.sol").guards[0]
    assert guard.privileged_identity == "_owner"
    assert set(guard.functions_guarded) == {"transferOwnership", "setWebsite"}


def test_either_of_two_admins_is_a_guard():
    source = """
contract T {
    address owner;
    address admin;
    address payable treasury;
    uint public totalSupply;
    mapping(address => uint) public balances;
    modifier onlyStaff() {
        if (msg.sender != owner && msg.sender != admin) revert();
        _;
    }
    function mint(uint n) public { require(msg.sender == owner || admin == msg.sender); totalSupply += n; }
    function setAdmin(address a) public onlyStaff { admin = a; }
    function pay() public onlyStaff { treasury.transfer(1); }
}
"""
    analysis = analyze_source(source)
    assert [(g.guard_name, g.privileged_identity) for g in analysis.guards] == [
        ("onlyStaff", "owner or admin"),
        ("inline@L12", "owner or admin"),
    ]
    assert analysis.guards[0].identities == ("owner", "admin")
    # rotating one of the admins is not a fee redirection
    assert _patterns(analysis) == [(MINTING, "mint")]
    assert analysis.findings[0].guard == "inline@L12"


def test_alternative_that_is_not_an_owner_check_is_not_a_guard():
    source = """
contract T {
    address owner;
    bool open;
    uint public totalSupply;
    function mint(uint n) public { require(msg.sender == owner || open); totalSupply += n; }
}
"""
    analysis = analyze_source(source)
    assert analysis.guards == []
    assert analysis.findings[0].evidence.endswith("unguarded: any caller may mint")


def test_unused_modifier_is_not_a_guard():
    source = """
contract T {
    address owner;
    modifier onlyOwner() { require(msg.sender == owner); _; }
    function transfer(address to, uint v) public returns (bool) { return true; }
}
"""
    assert analyze_source(source).guards == []


# ========== Patterns ==========

def test_issue_is_minting():
    analysis = _analyze("issue_mint.sol")
    assert analysis.target == "IssuableToken"
    assert _patterns(analysis) == [(MINTING, "issue")]
    finding = analysis.findings[0]
    assert finding.guard == "onlyOwner"
    assert finding.line == 47
    assert "total supply" in finding.evidence


def test_kill_is_self_destruction():
    analysis = _analyze("kill_selfdestruct.sol")
    assert _patterns(analysis) == [(SELF_DESTRUCTION, "kill")]
    assert analysis.findings[0].line == 27
    assert analysis.findings[0].source == "ast"


def test_bytecode_selfdestruct_cites_offset():
    analysis = analyze_bytecode("33ff", "probe")
    assert len(analysis.findings) == 1
    finding = analysis.findings[0]
    assert finding.source == SOURCE_BYTECODE
    assert finding.pattern == SELF_DESTRUCTION
    assert "offset(s) 1" in finding.evidence
    assert analysis.diagnostics["instructions"] == 2


def test_plain_token_has_no_findings():
    assert _analyze("plain_erc20.sol").findings == []
    assert analyze_bytecode("6080604052").findings == []


def test_deprecate_is_deprecation():
    analysis = _analyze("deprecate_upgrade.sol")
    assert _patterns(analysis) == [(DEPRECATION, "deprecate")]
    evidence = analysis.findings[0].evidence
    assert "deprecated" in evidence
    assert "upgradedAddress" in evidence


def test_split_flag_and_address_setters_are_deprecation():
    analysis = _analyze("deprecate_split.sol")
    assert _patterns(analysis) == [(DEPRECATION, "activateUpgrade")]
    assert "upgradeTarget" in analysis.findings[0].evidence


def test_pause_flag_alone_is_not_deprecation():
    assert _analyze("pause_only.sol").findings == []


def test_fee_setter_is_change_of_address():
    analysis = _analyze("setfee_address.sol")
    assert _patterns(analysis) == [(CHANGE_OF_ADDRESS, "setFeeAddress")]
    evidence = analysis.findings[0].evidence
    assert "balances[feeAddress]" in evidence
    assert "transfer()" in evidence


def test_inline_guarded_setter_is_change_of_address():
    analysis = _analyze("setfee_inline.sol")
    assert _patterns(analysis) == [(CHANGE_OF_ADDRESS, "setTreasury")]
    finding = analysis.findings[0]
    assert finding.guard == "inline@L25"
    assert analysis.guards[0].kind == INLINE_REQUIRE


def test_setter_without_value_flow_is_ignored():
    source = """
contract T {
    address owner;
    address website;
    mapping(address => uint) balances;
    modifier onlyOwner() { require(msg.sender == owner); _; }
    function setWebsite(address w) public onlyOwner { website = w; }
    function transfer(address to, uint v) public { balances[msg.sender] -= v; balances[to] += v; }
}
"""
    assert analyze_source(source).findings == []


def test_owner_rotation_is_not_change_of_address():
    analysis = _analyze("symbolic_owner.sol")
    assert analysis.findings == []


def test_mint_and_arbitrary_burn():
    analysis = _analyze("mint_burn.sol")
    assert _patterns(analysis) == [(BURNING, "burn"), (MINTING, "mint")]
    burn = next(f for f in analysis.findings if f.pattern == BURNING)
    assert "_from" in burn.evidence


def test_paired_movement_is_neither_mint_nor_burn():
    assert _analyze("paired_transfer.sol").findings == []


def test_self_burn_is_not_burning():
    assert _analyze("self_burn_only.sol").findings == []


def test_redeem_from_owner_is_not_burning():
    analysis = _analyze("tether_style.sol")
    assert _patterns(analysis) == [(DEPRECATION, "deprecate"), (MINTING, "issue")]


def test_wiping_listed_balance_is_burning():
    analysis = _analyze("blacklist_destroy.sol")
    assert _patterns(analysis) == [(BURNING, "destroyBlackFunds")]
    burn = analysis.findings[0]
    assert burn.line == 42
    assert burn.guard == "onlyOwner"
    assert "blackListedUser" in burn.evidence

    classification = classify(featurize(analysis.findings, analysis.guards))
    assert classification.verdict == ADMINISTRATED


def test_wiping_own_balance_is_not_burning():
    source = """
contract T {
    address owner;
    uint public totalSupply;
    mapping(address => uint) public balances;
    modifier onlyOwner() { require(msg.sender == owner); _; }
    function wipe(address who) public onlyOwner { balances[who] = 0; }
    function leave() public { totalSupply -= balances[msg.sender]; balances[msg.sender] = 0; }
}
"""
    assert analyze_source(source).findings == []


def test_supply_marker_is_configurable():
    source = """
contract T {
    address owner;
    uint public issued;
    modifier onlyOwner() { require(msg.sender == owner); _; }
    function grow(uint n) public onlyOwner { issued += n; }
}
"""
    assert analyze_source(source).findings == []
    settings = DetectorSettings(supply_markers=("issued",))
    assert _patterns(analyze_source(source, settings=settings)) == [(MINTING, "grow")]


# ========== Unguarded capabilities ==========

def test_unguarded_selfdestruct_is_reported():
    analysis = _analyze("unguarded_kill.sol")
    assert _patterns(analysis) == [(SELF_DESTRUCTION, "close")]
    finding = analysis.findings[0]
    assert finding.guard is None
    assert finding.evidence.startswith("unguarded")


KILL_THROUGH_HELPER = """
contract Closable {
    address owner;
    mapping(address => uint) public balances;
    function transfer(address to, uint v) public { balances[msg.sender] -= v; balances[to] += v; }
    function kill() public { require(msg.sender == owner); _destroy(); }
    function _destroy() internal { selfdestruct(owner); }
    function _unused() private { selfdestruct(owner); }
}
"""


def test_selfdestruct_helper_takes_its_callers_guard():
    analysis = analyze_source(KILL_THROUGH_HELPER)
    assert _patterns(analysis) == [(SELF_DESTRUCTION, "kill")]
    finding = analysis.findings[0]
    assert finding.guard == "inline@L6"
    assert finding.line == 6
    assert "through _destroy()" in finding.evidence
    assert not finding.evidence.startswith("unguarded")

    classification = classify(featurize(analysis.findings, analysis.guards))
    assert classification.verdict == ADMINISTRATED
    assert classification.features.unguarded_dangerous_count == 0


def test_public_caller_of_selfdestruct_helper_is_unguarded():
    source = KILL_THROUGH_HELPER.replace("require(msg.sender == owner); ", "")
    analysis = analyze_source(source)
    assert _patterns(analysis) == [(SELF_DESTRUCTION, "kill")]
    assert analysis.findings[0].evidence.startswith("unguarded")


def test_unguarded_public_mint_is_reported():
    source = """
contract Faucet {
    uint public totalSupply;
    mapping(address => uint) public balances;
    function drip(address to) external { totalSupply += 10; balances[to] += 10; }
    function _grant(address to) internal { balances[to] += 10; }
}
"""
    analysis = analyze_source(source)
    assert _patterns(analysis) == [(MINTING, "drip")]
    assert "unguarded" in analysis.findings[0].evidence


# ========== Properties ==========

MUTATIONS = [
    ("issue_mint.sol", "issue", MINTING),
    ("kill_selfdestruct.sol", "kill", SELF_DESTRUCTION),
    ("deprecate_upgrade.sol", "deprecate", DEPRECATION),
    ("setfee_address.sol", "setFeeAddress", CHANGE_OF_ADDRESS),
    ("mint_burn.sol", "burn", BURNING),
]


@pytest.mark.parametrize("name,function,pattern", MUTATIONS)
def test_deleting_pattern_function_removes_only_that_pattern(name, function, pattern):
    source = read_fixture(f"contracts/{name}")
    before = analyze_source(source)
    fn = build_view(parse_source(source)[0]).function(function)
    lines = source.splitlines(keepends=True)
    mutated = "".join(lines[:fn.line - 1] + lines[fn.end_line:])
    after = analyze_source(mutated)

    removed = {(p, f) for p, f in _patterns(before)} - {(p, f) for p, f in _patterns(after)}
    assert removed == {(pattern, function)}
    assert {p for p, _ in _patterns(before)} - {p for p, _ in _patterns(after)} == {pattern}


@pytest.mark.parametrize("name", [
    "issue_mint.sol", "kill_selfdestruct.sol", "deprecate_upgrade.sol", "setfee_address.sol",
    "mint_burn.sol", "setfee_inline.sol", "deprecate_split.sol", "tether_style.sol",
])
def test_every_guarded_finding_links_to_its_guard(name):
    analysis = _analyze(name)
    guards = {g.guard_name: g for g in analysis.guards}
    assert analysis.findings
    for finding in analysis.findings:
        assert finding.guard in guards
        assert finding.function in guards[finding.guard].functions_guarded


def test_appending_unrelated_contract_keeps_findings():
    source = read_fixture("contracts/mint_burn.sol")
    before = analyze_source(source)
    after = analyze_source(source + "\ncontract Unrelated {\n    function ping() public {}\n}\n")
    assert after.target == "MintBurnToken"
    assert [f.to_dict() for f in after.findings] == [f.to_dict() for f in before.findings]


def test_source_and_bytecode_agree_on_selfdestruct():
    pairs = [
        ("kill_selfdestruct.sol", read_fixture("contracts/kill_selfdestruct.hex")),
        ("plain_erc20.sol", "0x6080604052348015600f57600080fd5b50"),
    ]
    for name, bytecode in pairs:
        source_hit = any(f.pattern == SELF_DESTRUCTION for f in _analyze(name).findings)
        bytecode_hit = bool(analyze_bytecode(bytecode).findings)
        assert source_hit == bytecode_hit, name


def test_missing_target_is_fatal():
    analysis = _analyze("issue_mint.sol", target="Nope")
    assert analysis.fatal is True
    assert "Nope" in analysis.diagnostics["error"]


def test_findings_are_ordered_by_pattern_then_line():
    analysis = _analyze("tether_style.sol")
    assert [f.pattern for f in analysis.findings] == [DEPRECATION, MINTING]
    assert analysis.diagnostics["target"] == "TetherStyleToken"
