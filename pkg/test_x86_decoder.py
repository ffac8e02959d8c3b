"""
Instruction Decoder Test Suite
==============================
Field boundaries and branch classification of the x86-64 length decoder
"""

import logging
import random

import pytest

from x86_decoder import (BranchKind, Encoding, TruncatedInstruction, UnknownOpcode,
                         decode_instruction, decode_linear, format_instruction)


def test_single_byte_nop():
    """Test: 90 decodes as a one-byte non-branch"""
    instr = decode_instruction(b'\x90', 0)
    assert instr.opcode == b'\x90'
    assert instr.modrm is None
    assert instr.total_len == 1
    assert not instr.is_branch


def test_rex_modrm_move():
    """Test: mov rbp, rsp keeps REX, opcode and ModR/M apart"""
    instr = decode_instruction(b'\x48\x89\xe5', 0)
    assert instr.rex == 0x48
    assert instr.rex_w
    assert instr.opcode == b'\x89'
    assert instr.modrm == 0xE5
    assert instr.total_len == 3


def test_relative_call_target():
    instr = decode_instruction(b'\xe8\xd3\x00\x00\x00', 0)
    assert instr.opcode == b'\xe8'
    assert instr.imm_len == 4
    assert instr.total_len == 5
    assert instr.branch_kind is BranchKind.CALL
    assert instr.rel_target == 0xD8


def test_near_conditional_jump():
    instr = decode_instruction(b'\x0f\x84\x10\x00\x00\x00', 0)
    assert instr.opcode == b'\x0f\x84'
    assert instr.total_len == 6
    assert instr.branch_kind is BranchKind.JUMP_CONDITIONAL
    assert instr.rel_target == 0x16


def test_short_jump_backwards():
    instr = decode_instruction(b'\x90\x90\xeb\xfc', 2)
    assert instr.branch_kind is BranchKind.JUMP_UNCONDITIONAL
    assert instr.rel_target == 0


@pytest.mark.parametrize('code, length', [
    (b'\x48\xb8' + b'\x11' * 8, 10),              # mov rax, imm64
    (b'\x66\xb8\x34\x12', 4),                      # mov ax, imm16
    (b'\xb8\x01\x00\x00\x00', 5),                  # mov eax, imm32
    (b'\x8b\x44\x24\x08', 4),                      # mov eax, [rsp+8]
    (b'\x48\x8d\x05\x00\x10\x00\x00', 7),          # lea rax, [rip+0x1000]
    (b'\x8b\x04\x25\x00\x00\x00\x00', 7),          # mov eax, [disp32] via SIB base 5
    (b'\x48\x83\xec\x10', 4),                      # sub rsp, 16
    (b'\x48\x81\xec\x00\x01\x00\x00', 7),          # sub rsp, 256
    (b'\xf6\xc0\x01', 3),                          # test al, 1
    (b'\xf6\xd8', 2),                              # neg al
    (b'\xf7\xc0\x01\x00\x00\x00', 6),              # test eax, 1
    (b'\xf3\x0f\x1e\xfa', 4),                      # endbr64
    (b'\x0f\x1f\x44\x00\x00', 5),                  # nopl 0(%rax,%rax,1)
    (b'\x66\x0f\x1f\x84\x00\x00\x00\x00\x00', 9),  # nopw 0(%rax,%rax,1)
    (b'\x0f\xaf\xc1', 3),                          # imul eax, ecx
    (b'\x66\x0f\x3a\x0f\xc1\x08', 6),              # palignr xmm0, xmm1, 8
    (b'\xc8\x10\x00\x00', 4),                      # enter 16, 0
    (b'\xc2\x08\x00', 3),                          # ret 8
])
def test_instruction_lengths(code, length):
    assert decode_instruction(code, 0).total_len == length


def test_vex_instructions():
    vzeroupper = decode_instruction(b'\xc5\xf8\x77', 0)
    assert vzeroupper.encoding is Encoding.VEX
    assert vzeroupper.modrm is None
    assert vzeroupper.total_len == 3

    vmovdqa = decode_instruction(b'\xc5\xf9\x6f\xc1', 0)
    assert vmovdqa.encoding is Encoding.VEX
    assert vmovdqa.vex == b'\xc5\xf9'
    assert vmovdqa.modrm == 0xC1
    assert vmovdqa.total_len == 4


def test_branch_kinds():
    assert decode_instruction(b'\xc3', 0).branch_kind is BranchKind.RET
    assert decode_instruction(b'\xff\xe0', 0).branch_kind is BranchKind.INDIRECT
    indirect_call = decode_instruction(b'\xff\xd0', 0)
    assert indirect_call.branch_kind is BranchKind.CALL
    assert indirect_call.rel_target is None
    assert decode_instruction(b'\xff\xc0', 0).branch_kind is BranchKind.NONE  # inc eax


def test_decode_errors():
    with pytest.raises(TruncatedInstruction):
        decode_instruction(b'\xe8\x00\x00', 0)
    with pytest.raises(UnknownOpcode):
        decode_instruction(b'\x06', 0)
    with pytest.raises(TruncatedInstruction):
        decode_instruction(b'', 0)


def test_linear_sweep_offsets():
    """Test: linear sweep returns contiguous offsets"""
    assert [i.offset for i in decode_linear(b'\x90\x90\xc3', 0, 3)] == [0, 1, 2]
    assert decode_linear(b'', 0, 0) == []
    assert [i.offset for i in decode_linear(b'\x48\x89\xe5\xc3', 0, 4)] == [0, 3]


def test_linear_sweep_subrange():
    data = b'\xcc\xcc\x48\x89\xe5\xc3\xcc'
    instrs = decode_linear(data, 2, 6)
    assert [i.offset for i in instrs] == [2, 5]


def test_linear_sweep_recovers_with_invalid(caplog):
    """Test: undecodable bytes become length-1 INVALID entries"""
    with caplog.at_level(logging.WARNING, logger='x86_decoder'):
        instrs = decode_linear(b'\x06\x90\xe8\x00', 0, 4)

    assert [(i.offset, i.invalid) for i in instrs] == [(0, True), (1, False), (2, True), (3, True)]
    assert all(i.total_len == 1 for i in instrs if i.invalid)
    assert 'undecodable' in caplog.text


def test_linear_sweep_does_not_read_past_end():
    # E8 needs five bytes but the range stops after three
    instrs = decode_linear(b'\xe8\x00\x00\x00\x00', 0, 3)
    assert sum(i.total_len for i in instrs) == 3
    assert instrs[0].invalid


def test_linear_sweep_tiles_random_bytes():
    rng = random.Random(1234)
    for _ in range(20):
        data = bytes(rng.randrange(256) for _ in range(300))
        instrs = decode_linear(data, 0, len(data))
        position = 0
        for instr in instrs:
            assert instr.offset == position
            assert 1 <= instr.total_len <= 15
            position = instr.end
        assert position == len(data)


def test_linear_sweep_rejects_bad_range():
    with pytest.raises(ValueError):
        decode_linear(b'\x90', 0, 2)
    with pytest.raises(ValueError):
        decode_linear(b'\x90\x90', 2, 1)


def test_format_instruction():
    text = format_instruction(decode_instruction(b'\x48\x89\xe5', 0))
    assert 'rex=48' in text and 'op=89' in text and 'modrm=E5' in text
    assert 'call->0xd8' in format_instruction(decode_instruction(b'\xe8\xd3\x00\x00\x00', 0))
    assert format_instruction(decode_linear(b'\x06', 0, 1)[0]) == 'INVALID 06'


if __name__ == '__main__':
    raise SystemExit(pytest.main([__file__, '-v']))
