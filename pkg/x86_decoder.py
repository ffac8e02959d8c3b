"""
x86-64 Instruction Decoder
==========================
Table-driven instruction-length decoder for 64-bit mode. Splits raw machine
code into its encoding fields (legacy prefixes, REX, opcode, ModR/M, SIB,
displacement, immediate) without lifting anything to mnemonics.

Usage:
    from x86_decoder import decode_instruction, decode_linear

    instr = decode_instruction(b'\\x48\\x89\\xe5', 0)
    instrs = decode_linear(function_bytes, 0, len(function_bytes))
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple, Union

logger = logging.getLogger(__name__)

ByteSource = Union[bytes, bytearray, memoryview]

MAX_INSTRUCTION_LENGTH = 15


class BranchKind(Enum):
    """Control-flow effect of an instruction"""
    NONE = 'none'
    JUMP_UNCONDITIONAL = 'jump_unconditional'
    JUMP_CONDITIONAL = 'jump_conditional'
    CALL = 'call'
    RET = 'ret'
    INDIRECT = 'indirect'


class Encoding(Enum):
    """Opcode encoding space"""
    LEGACY = 'legacy'
    VEX = 'vex'
    EVEX = 'evex'


class DecodeError(Exception):
    """Base exception for instruction decoding errors"""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset 0x{offset:x}")
        self.offset = offset


class UnknownOpcode(DecodeError):
    """Byte sequence has no entry in the opcode tables"""
    pass


class TruncatedInstruction(DecodeError):
    """Instruction extends past the end of the available bytes"""
    pass


@dataclass(frozen=True)
class DecodedInstruction:
    """Field boundaries of one machine instruction"""
    offset: int
    legacy_prefixes: bytes = b''
    rex: Optional[int] = None
    opcode: bytes = b''
    modrm: Optional[int] = None
    sib: Optional[int] = None
    disp_len: int = 0
    imm_len: int = 0
    total_len: int = 0
    branch_kind: BranchKind = BranchKind.NONE
    rel_target: Optional[int] = None
    vex: bytes = b''
    encoding: Encoding = Encoding.LEGACY
    invalid: bool = False

    @property
    def is_branch(self) -> bool:
        return self.branch_kind is not BranchKind.NONE

    @property
    def end(self) -> int:
        return self.offset + self.total_len

    @property
    def rex_w(self) -> bool:
        return self.rex is not None and bool(self.rex & 0x08)


# Immediate operand kinds
IMM_NONE = 0
IMM_B = 1          # 1 byte
IMM_W = 2          # 2 bytes
IMM_Z = 3          # 2 with 0x66, else 4
IMM_V = 4          # 8 with REX.W, 2 with 0x66, else 4
IMM_ENTER = 5      # iw + ib
IMM_MOFFS = 6      # address-sized: 8, or 4 with 0x67
IMM_REL32 = 7      # near branch displacement, always 4 in 64-bit mode
IMM_GROUP3_B = 8   # F6: ib only for /0 and /1
IMM_GROUP3_Z = 9   # F7: iz only for /0 and /1

LEGACY_PREFIXES = frozenset([0xF0, 0xF2, 0xF3, 0x2E, 0x36, 0x3E, 0x26, 0x64, 0x65, 0x66, 0x67])

OpcodeAttrs = Tuple[bool, int]


def _build_one_byte_map() -> List[Optional[OpcodeAttrs]]:
    table: List[Optional[OpcodeAttrs]] = [None] * 256

    # ALU block: op Eb,Gb / Ev,Gv / Gb,Eb / Gv,Ev / AL,Ib / eAX,Iz
    for base in range(0x00, 0x40, 0x08):
        for i in range(4):
            table[base + i] = (True, IMM_NONE)
        table[base + 4] = (False, IMM_B)
        table[base + 5] = (False, IMM_Z)

    for op in range(0x50, 0x60):
        table[op] = (False, IMM_NONE)
    table[0x63] = (True, IMM_NONE)
    table[0x68] = (False, IMM_Z)
    table[0x69] = (True, IMM_Z)
    table[0x6A] = (False, IMM_B)
    table[0x6B] = (True, IMM_B)
    for op in range(0x6C, 0x70):
        table[op] = (False, IMM_NONE)
    for op in range(0x70, 0x80):
        table[op] = (False, IMM_B)

    table[0x80] = (True, IMM_B)
    table[0x81] = (True, IMM_Z)
    table[0x83] = (True, IMM_B)
    for op in range(0x84, 0x90):
        table[op] = (True, IMM_NONE)

    for op in range(0x90, 0xA0):
        if op != 0x9A:
            table[op] = (False, IMM_NONE)
    for op in range(0xA0, 0xA4):
        table[op] = (False, IMM_MOFFS)
    for op in range(0xA4, 0xB0):
        table[op] = (False, IMM_NONE)
    table[0xA8] = (False, IMM_B)
    table[0xA9] = (False, IMM_Z)
    for op in range(0xB0, 0xB8):
        table[op] = (False, IMM_B)
    for op in range(0xB8, 0xC0):
        table[op] = (False, IMM_V)

    table[0xC0] = (True, IMM_B)
    table[0xC1] = (True, IMM_B)
    table[0xC2] = (False, IMM_W)
    table[0xC3] = (False, IMM_NONE)
    table[0xC6] = (True, IMM_B)
    table[0xC7] = (True, IMM_Z)
    table[0xC8] = (False, IMM_ENTER)
    table[0xC9] = (False, IMM_NONE)
    table[0xCA] = (False, IMM_W)
    table[0xCB] = (False, IMM_NONE)
    table[0xCC] = (False, IMM_NONE)
    table[0xCD] = (False, IMM_B)
    table[0xCF] = (False, IMM_NONE)

    for op in range(0xD0, 0xD4):
        table[op] = (True, IMM_NONE)
    table[0xD7] = (False, IMM_NONE)
    for op in range(0xD8, 0xE0):
        table[op] = (True, IMM_NONE)

    for op in range(0xE0, 0xE8):
        table[op] = (False, IMM_B)
    table[0xE8] = (False, IMM_REL32)
    table[0xE9] = (False, IMM_REL32)
    table[0xEB] = (False, IMM_B)
    for op in range(0xEC, 0xF0):
        table[op] = (False, IMM_NONE)

    for op in (0xF1, 0xF4, 0xF5, 0xF8, 0xF9, 0xFA, 0xFB, 0xFC, 0xFD):
        table[op] = (False, IMM_NONE)
    table[0xF6] = (True, IMM_GROUP3_B)
    table[0xF7] = (True, IMM_GROUP3_Z)
    table[0xFE] = (True, IMM_NONE)
    table[0xFF] = (True, IMM_NONE)
    return table


def _build_two_byte_map() -> List[Optional[OpcodeAttrs]]:
    table: List[Optional[OpcodeAttrs]] = [None] * 256

    modrm_ops = (
        list(range(0x00, 0x04)) + [0x0D] + list(range(0x10, 0x24)) + list(range(0x28, 0x30))
        + list(range(0x40, 0x70)) + [0x74, 0x75, 0x76, 0x78, 0x79] + list(range(0x7C, 0x80))
        + list(range(0x90, 0xA0)) + [0xA3, 0xA5, 0xAB, 0xAD, 0xAE, 0xAF]
        + list(range(0xB0, 0xBA)) + list(range(0xBB, 0xC0))
        + [0xC0, 0xC1, 0xC3, 0xC7] + list(range(0xD0, 0x100))
    )
    for op in modrm_ops:
        table[op] = (True, IMM_NONE)

    for op in (0x0F, 0x70, 0x71, 0x72, 0x73, 0xA4, 0xAC, 0xBA, 0xC2, 0xC4, 0xC5, 0xC6):
        table[op] = (True, IMM_B)

    no_modrm_ops = [0x05, 0x06, 0x07, 0x08, 0x09, 0x0B, 0x0E, 0x30, 0x31, 0x32, 0x33,
                    0x34, 0x35, 0x37, 0x77, 0xA0, 0xA1, 0xA2, 0xA8, 0xA9, 0xAA]
    no_modrm_ops += list(range(0xC8, 0xD0))
    for op in no_modrm_ops:
        table[op] = (False, IMM_NONE)

    for op in range(0x80, 0x90):
        table[op] = (False, IMM_REL32)
    return table


ONE_BYTE_MAP = _build_one_byte_map()
TWO_BYTE_MAP = _build_two_byte_map()

# VEX/EVEX map-1 opcodes carrying an imm8
VEX_MAP1_IMM8 = frozenset([0x70, 0x71, 0x72, 0x73, 0xC2, 0xC4, 0xC5, 0xC6])


def _modrm_tail(modrm: int) -> Tuple[bool, int]:
    """Return (needs_sib, displacement length implied by ModR/M alone)"""
    mod = modrm >> 6
    rm = modrm & 0x07
    if mod == 3:
        return False, 0
    needs_sib = rm == 4
    if mod == 1:
        return needs_sib, 1
    if mod == 2:
        return needs_sib, 4
    # mod == 0: rm=5 is RIP-relative disp32
    return needs_sib, 4 if rm == 5 else 0


def _immediate_length(kind: int, modrm: Optional[int], opsize16: bool,
                      rex_w: bool, addr32: bool) -> int:
    if kind == IMM_NONE:
        return 0
    if kind == IMM_B:
        return 1
    if kind == IMM_W:
        return 2
    if kind == IMM_Z:
        return 2 if opsize16 and not rex_w else 4
    if kind == IMM_V:
        if rex_w:
            return 8
        return 2 if opsize16 else 4
    if kind == IMM_ENTER:
        return 3
    if kind == IMM_MOFFS:
        return 4 if addr32 else 8
    if kind == IMM_REL32:
        return 4
    if kind in (IMM_GROUP3_B, IMM_GROUP3_Z):
        reg = (modrm >> 3) & 0x07 if modrm is not None else 0
        if reg not in (0, 1):
            return 0
        if kind == IMM_GROUP3_B:
            return 1
        return 2 if opsize16 and not rex_w else 4
    raise ValueError(f"Unknown immediate kind: {kind}")


def _classify_branch(opcode: bytes, modrm: Optional[int],
                     encoding: Encoding) -> Tuple[BranchKind, bool]:
    """Return (branch kind, whether the immediate is a relative target)"""
    if encoding is not Encoding.LEGACY:
        return BranchKind.NONE, False

    op = opcode[0]
    if len(opcode) == 1:
        if 0x70 <= op <= 0x7F or 0xE0 <= op <= 0xE3:
            return BranchKind.JUMP_CONDITIONAL, True
        if op in (0xE9, 0xEB):
            return BranchKind.JUMP_UNCONDITIONAL, True
        if op == 0xE8:
            return BranchKind.CALL, True
        if op in (0xC2, 0xC3, 0xCA, 0xCB, 0xCF):
            return BranchKind.RET, False
        if op == 0xFF and modrm is not None:
            reg = (modrm >> 3) & 0x07
            if reg in (2, 3):
                return BranchKind.CALL, False
            if reg in (4, 5):
                return BranchKind.INDIRECT, False
        return BranchKind.NONE, False

    if len(opcode) == 2 and op == 0x0F and 0x80 <= opcode[1] <= 0x8F:
        return BranchKind.JUMP_CONDITIONAL, True
    return BranchKind.NONE, False


def decode_instruction(data: ByteSource, offset: int) -> DecodedInstruction:
    """
    Decode the instruction starting at ``offset``

    Args:
        data: Raw machine code; its length bounds the decode
        offset: Index of the first byte of the instruction

    Returns:
        DecodedInstruction with every field boundary resolved

    Raises:
        UnknownOpcode: Byte sequence is not in the opcode tables
        TruncatedInstruction: Instruction runs past the end of ``data``
    """
    limit = len(data)
    if offset < 0 or offset >= limit:
        raise TruncatedInstruction("No bytes available", offset)

    pos = offset

    def need(count: int) -> None:
        if pos + count > limit:
            raise TruncatedInstruction("Instruction extends past end of bytes", offset)
        if pos + count - offset > MAX_INSTRUCTION_LENGTH:
            raise UnknownOpcode("Instruction exceeds 15 bytes", offset)

    prefixes = bytearray()
    rex: Optional[int] = None
    while True:
        need(1)
        byte = data[pos]
        if byte in LEGACY_PREFIXES:
            # A REX followed by another prefix is ignored by the CPU
            if rex is not None:
                prefixes.append(rex)
                rex = None
            prefixes.append(byte)
            pos += 1
        elif 0x40 <= byte <= 0x4F:
            if rex is not None:
                prefixes.append(rex)
            rex = byte
            pos += 1
        else:
            break

    opsize16 = 0x66 in prefixes
    addr32 = 0x67 in prefixes
    rex_w = rex is not None and bool(rex & 0x08)

    vex = b''
    encoding = Encoding.LEGACY
    first = data[pos]

    if first in (0xC4, 0xC5, 0x62):
        vex_len = {0xC5: 2, 0xC4: 3, 0x62: 4}[first]
        need(vex_len + 1)
        vex = bytes(data[pos:pos + vex_len])
        if first == 0xC5:
            opcode_map = 1
        elif first == 0xC4:
            opcode_map = vex[1] & 0x1F
        else:
            opcode_map = vex[1] & 0x07
        encoding = Encoding.EVEX if first == 0x62 else Encoding.VEX
        if opcode_map not in (1, 2, 3, 5, 6):
            raise UnknownOpcode(f"Unsupported VEX opcode map {opcode_map}", offset)
        pos += vex_len
        opcode = bytes([data[pos]])
        pos += 1
        has_modrm = not (opcode_map == 1 and opcode[0] == 0x77)
        if opcode_map == 3:
            imm_kind = IMM_B
        elif opcode_map == 1 and opcode[0] in VEX_MAP1_IMM8:
            imm_kind = IMM_B
        else:
            imm_kind = IMM_NONE
        attrs: Optional[OpcodeAttrs] = (has_modrm, imm_kind)
    elif first == 0x0F:
        need(2)
        second = data[pos + 1]
        if second in (0x38, 0x3A):
            need(3)
            opcode = bytes(data[pos:pos + 3])
            attrs = (True, IMM_B if second == 0x3A else IMM_NONE)
        else:
            opcode = bytes(data[pos:pos + 2])
            attrs = TWO_BYTE_MAP[second]
        pos += len(opcode)
    else:
        opcode = bytes([first])
        attrs = ONE_BYTE_MAP[first]
        pos += 1

    if attrs is None:
        raise UnknownOpcode(f"No opcode table entry for {opcode.hex().upper()}", offset)

    has_modrm, imm_kind = attrs
    modrm: Optional[int] = None
    sib: Optional[int] = None
    disp_len = 0

    if has_modrm:
        need(1)
        modrm = data[pos]
        pos += 1
        needs_sib, disp_len = _modrm_tail(modrm)
        if needs_sib:
            need(1)
            sib = data[pos]
            pos += 1
            if (modrm >> 6) == 0 and (sib & 0x07) == 5:
                disp_len = 4

    imm_len = _immediate_length(imm_kind, modrm, opsize16, rex_w, addr32)
    need(disp_len + imm_len)
    imm_start = pos + disp_len
    pos += disp_len + imm_len
    total_len = pos - offset

    branch_kind, relative = _classify_branch(opcode, modrm, encoding)
    rel_target: Optional[int] = None
    if relative and imm_len:
        displacement = int.from_bytes(bytes(data[imm_start:imm_start + imm_len]), 'little', signed=True)
        rel_target = offset + total_len + displacement

    return DecodedInstruction(
        offset=offset,
        legacy_prefixes=bytes(prefixes),
        rex=rex,
        opcode=opcode,
        modrm=modrm,
        sib=sib,
        disp_len=disp_len,
        imm_len=imm_len,
        total_len=total_len,
        branch_kind=branch_kind,
        rel_target=rel_target,
        vex=vex,
        encoding=encoding,
    )


def invalid_instruction(data: ByteSource, offset: int) -> DecodedInstruction:
    """INVALID pseudo-instruction covering a single undecodable byte"""
    return DecodedInstruction(
        offset=offset,
        opcode=bytes([data[offset]]),
        total_len=1,
        invalid=True,
    )


def decode_linear(data: ByteSource, start: int, end: int) -> List[DecodedInstruction]:
    """
    Linear sweep over ``data[start:end]``

    Undecodable or truncated bytes become INVALID pseudo-instructions of
    length 1, so the result always tiles the range.

    Args:
        data: Raw machine code
        start: First byte offset of the range
        end: One past the last byte offset of the range

    Returns:
        Offset-contiguous list of DecodedInstruction
    """
    if not 0 <= start <= end <= len(data):
        raise ValueError(f"Invalid decode range [{start}, {end}) for {len(data)} bytes")

    view = memoryview(data)[:end]
    instructions: List[DecodedInstruction] = []
    invalid_count = 0
    pos = start

    while pos < end:
        try:
            instr = decode_instruction(view, pos)
        except DecodeError as e:
            logger.debug(f"Recovering from decode error: {e}")
            instr = invalid_instruction(view, pos)
            invalid_count += 1
        instructions.append(instr)
        pos += instr.total_len

    if invalid_count:
        logger.warning(f"{invalid_count} undecodable byte(s) in range [0x{start:x}, 0x{end:x})")
    return instructions


def format_instruction(instr: DecodedInstruction) -> str:
    """Field-grouped hex dump of one instruction (operand bytes shown as lengths)"""
    if instr.invalid:
        return f"INVALID {instr.opcode.hex().upper()}"

    parts = []
    if instr.legacy_prefixes:
        parts.append(f"pfx={instr.legacy_prefixes.hex().upper()}")
    if instr.rex is not None:
        parts.append(f"rex={instr.rex:02X}")
    if instr.vex:
        parts.append(f"{instr.encoding.value}={instr.vex.hex().upper()}")
    parts.append(f"op={instr.opcode.hex().upper()}")
    if instr.modrm is not None:
        parts.append(f"modrm={instr.modrm:02X}")
    if instr.sib is not None:
        parts.append(f"sib={instr.sib:02X}")
    if instr.disp_len:
        parts.append(f"disp{instr.disp_len}")
    if instr.imm_len:
        parts.append(f"imm{instr.imm_len}")
    if instr.is_branch:
        target = f"->0x{instr.rel_target:x}" if instr.rel_target is not None else ''
        parts.append(f"{instr.branch_kind.value}{target}")
    return ' '.join(parts)
