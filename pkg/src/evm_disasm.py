"""EVM bytecode disassembler.

Decodes hex bytecode into instructions with PUSH immediates attached, so a
0xFF byte inside push data is never mistaken for SELFDESTRUCT. The opcode
table is pinned to the Shanghai revision; unknown bytes decode as
single-byte INVALID-class instructions.
"""

import logging
import string
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

logger = logging.getLogger(__name__)

OPCODES: Dict[int, str] = {
    0x00: "STOP", 0x01: "ADD", 0x02: "MUL", 0x03: "SUB", 0x04: "DIV", 0x05: "SDIV",
    0x06: "MOD", 0x07: "SMOD", 0x08: "ADDMOD", 0x09: "MULMOD", 0x0A: "EXP",
    0x0B: "SIGNEXTEND",
    0x10: "LT", 0x11: "GT", 0x12: "SLT", 0x13: "SGT", 0x14: "EQ", 0x15: "ISZERO",
    0x16: "AND", 0x17: "OR", 0x18: "XOR", 0x19: "NOT", 0x1A: "BYTE", 0x1B: "SHL",
    0x1C: "SHR", 0x1D: "SAR",
    0x20: "SHA3",
    0x30: "ADDRESS", 0x31: "BALANCE", 0x32: "ORIGIN", 0x33: "CALLER",
    0x34: "CALLVALUE", 0x35: "CALLDATALOAD", 0x36: "CALLDATASIZE",
    0x37: "CALLDATACOPY", 0x38: "CODESIZE", 0x39: "CODECOPY", 0x3A: "GASPRICE",
    0x3B: "EXTCODESIZE", 0x3C: "EXTCODECOPY", 0x3D: "RETURNDATASIZE",
    0x3E: "RETURNDATACOPY", 0x3F: "EXTCODEHASH",
    0x40: "BLOCKHASH", 0x41: "COINBASE", 0x42: "TIMESTAMP", 0x43: "NUMBER",
    0x44: "PREVRANDAO", 0x45: "GASLIMIT", 0x46: "CHAINID", 0x47: "SELFBALANCE",
    0x48: "BASEFEE",
    0x50: "POP", 0x51: "MLOAD", 0x52: "MSTORE", 0x53: "MSTORE8", 0x54: "SLOAD",
    0x55: "SSTORE", 0x56: "JUMP", 0x57: "JUMPI", 0x58: "PC", 0x59: "MSIZE",
    0x5A: "GAS", 0x5B: "JUMPDEST", 0x5F: "PUSH0",
    0xA0: "LOG0", 0xA1: "LOG1", 0xA2: "LOG2", 0xA3: "LOG3", 0xA4: "LOG4",
    0xF0: "CREATE", 0xF1: "CALL", 0xF2: "CALLCODE", 0xF3: "RETURN",
    0xF4: "DELEGATECALL", 0xF5: "CREATE2", 0xFA: "STATICCALL", 0xFD: "REVERT",
    0xFE: "INVALID", 0xFF: "SELFDESTRUCT",
}
for _n in range(1, 33):
    OPCODES[0x5F + _n] = f"PUSH{_n}"
for _n in range(1, 17):
    OPCODES[0x7F + _n] = f"DUP{_n}"
    OPCODES[0x8F + _n] = f"SWAP{_n}"

MNEMONICS: Dict[str, int] = {name: code for code, name in OPCODES.items()}

TERMINATORS = frozenset({"STOP", "RETURN", "REVERT", "INVALID"})

_HEX_DIGITS = frozenset(string.hexdigits)


class HexDecodeError(ValueError):
    """Malformed bytecode hex; `position` indexes the original string."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


@dataclass(frozen=True)
class Instruction:
    offset: int
    opcode: int
    mnemonic: str
    immediate: Optional[bytes] = None
    invalid: bool = False

    @property
    def width(self) -> int:
        return 1 + (len(self.immediate) if self.immediate is not None else 0)

    @property
    def is_push(self) -> bool:
        return 0x60 <= self.opcode <= 0x7F


@dataclass(frozen=True)
class OpcodeEvidence:
    mnemonic: str
    offsets: Tuple[int, ...]
    reachable_guess: bool


def decode_hex(bytecode: str) -> bytes:
    """Validate and decode hex text, allowing a 0x prefix and outer whitespace.

    Raises:
        HexDecodeError: On a non-hex digit or odd digit count.
    """
    stripped = bytecode.strip()
    base = len(bytecode) - len(bytecode.lstrip())
    if stripped[:2] in ("0x", "0X"):
        stripped = stripped[2:]
        base += 2
    for index, char in enumerate(stripped):
        if char not in _HEX_DIGITS:
            raise HexDecodeError(f"non-hex character {char!r}", base + index)
    if len(stripped) % 2:
        raise HexDecodeError("odd number of hex digits", base + len(stripped) - 1)
    return bytes.fromhex(stripped)


def disassemble(bytecode: str) -> List[Instruction]:
    """Decode bytecode hex into an instruction stream.

    Args:
        bytecode: Hex string, optionally 0x-prefixed.

    Returns:
        Instructions in offset order. A PUSH whose immediate runs past the end
        of the code is the last instruction, flagged invalid, carrying the
        partial immediate.
    """
    code = decode_hex(bytecode)
    instructions: List[Instruction] = []
    offset = 0
    while offset < len(code):
        opcode = code[offset]
        mnemonic = OPCODES.get(opcode)
        if mnemonic is None:
            instructions.append(Instruction(offset, opcode, f"INVALID_0x{opcode:02x}", None, True))
            offset += 1
            continue
        if 0x60 <= opcode <= 0x7F:
            size = opcode - 0x5F
            immediate = code[offset + 1:offset + 1 + size]
            truncated = len(immediate) < size
            instructions.append(Instruction(offset, opcode, mnemonic, immediate, truncated))
            offset += 1 + len(immediate)
            continue
        instructions.append(Instruction(offset, opcode, mnemonic))
        offset += 1

    logger.debug(f"Disassembled {len(code)} bytes into {len(instructions)} instructions")
    return instructions


def find_opcodes(instructions: List[Instruction], wanted: Iterable[str]) -> List[OpcodeEvidence]:
    """Locate wanted mnemonics and guess whether each is reachable.

    The guess is a linear scan: code after STOP/RETURN/REVERT/INVALID (or an
    undefined opcode) is dead until the next JUMPDEST.

    Returns:
        One evidence entry per wanted mnemonic that occurs, sorted by mnemonic.
    """
    wanted_set = set(wanted)
    offsets: Dict[str, List[int]] = {}
    live: Dict[str, bool] = {}
    dead = False
    for instruction in instructions:
        if instruction.mnemonic == "JUMPDEST":
            dead = False
        if instruction.mnemonic in wanted_set:
            offsets.setdefault(instruction.mnemonic, []).append(instruction.offset)
            live[instruction.mnemonic] = live.get(instruction.mnemonic, False) or not dead
        if instruction.mnemonic in TERMINATORS or instruction.mnemonic.startswith("INVALID_"):
            dead = True

    return [
        OpcodeEvidence(mnemonic, tuple(offsets[mnemonic]), live[mnemonic])
        for mnemonic in sorted(offsets)
    ]


def assemble(instructions: List[Instruction]) -> str:
    """Re-encode instructions as lowercase hex without prefix."""
    out = bytearray()
    for instruction in instructions:
        out.append(instruction.opcode)
        if instruction.immediate is not None:
            out.extend(instruction.immediate)
    return out.hex()


def naive_byte_count(bytecode: str, value: int) -> int:
    """Count raw occurrences of a byte value, ignoring instruction boundaries."""
    return decode_hex(bytecode).count(value)


def format_listing(instructions: List[Instruction]) -> str:
    """Render `OFFSET(hex)  MNEMONIC  [immediate-hex]`, one instruction per line."""
    lines = []
    for instruction in instructions:
        line = f"{instruction.offset:04x}  {instruction.mnemonic}"
        if instruction.immediate:
            line += f"  {instruction.immediate.hex()}"
        if instruction.invalid and instruction.is_push:
            line += "  (truncated)"
        lines.append(line)
    return "\n".join(lines)
