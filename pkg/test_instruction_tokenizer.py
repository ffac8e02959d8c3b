"""
Instruction Tokenizer Test Suite
================================
Operand-free tokens, vocabulary construction and id encoding
"""

import random

import pytest

from instruction_tokenizer import (INVALID_ID, PAD_ID, UNK_ID, Token, TokenFamily, Vocabulary,
                                   build_vocabulary, canonical_prefixes, encode, encode_function,
                                   tokenize)
from x86_decoder import decode_instruction, decode_linear

# (fixed opcode bytes, operand byte count)
OPERAND_TEMPLATES = [
    (b'\x48\x8b\x45', 1),              # mov rax, [rbp+d8]
    (b'\x48\x8d\x05', 4),              # lea rax, [rip+d32]
    (b'\xb8', 4),                      # mov eax, imm32
    (b'\x48\xb8', 8),                  # mov rax, imm64
    (b'\xe8', 4),                      # call rel32
    (b'\x0f\x84', 4),                  # jz rel32
    (b'\x74', 1),                      # jz rel8
    (b'\x81\xc1', 4),                  # add ecx, imm32
    (b'\xc7\x44\x24', 5),              # mov dword [rsp+d8], imm32
    (b'\x66\x41\xc7\x40', 3),          # mov word [r8+d8], imm16
    (b'\x48\x69\x84\x24', 8),          # imul rax, [rsp+d32], imm32
]


def token_of(code: bytes) -> Token:
    return tokenize(decode_instruction(code, 0))


def test_operand_bytes_are_dropped():
    """Test: tokens keep prefix/REX/opcode/ModR/M/SIB only"""
    assert token_of(b'\x48\x89\xe5').text == '4889E5'
    assert token_of(b'\xe8\xd3\x00\x00\x00').text == 'E8'
    assert token_of(b'\x90').text == '90'
    assert token_of(b'\x8b\x44\x24\x08').text == '8B4424'
    assert token_of(b'\x66\xb8\x34\x12').text == '66B8'


def test_operand_invariance_randomized():
    """Test: mutating displacement/immediate bytes never changes the token"""
    rng = random.Random(7)
    for _ in range(1000):
        fixed, operand_len = rng.choice(OPERAND_TEMPLATES)
        first = fixed + bytes(rng.randrange(256) for _ in range(operand_len))
        second = fixed + bytes(rng.randrange(256) for _ in range(operand_len))
        a, b = decode_instruction(first, 0), decode_instruction(second, 0)
        assert a.total_len == b.total_len == len(first)
        assert tokenize(a) == tokenize(b)


def test_prefix_canonicalization():
    assert canonical_prefixes(b'\xf3\xf3\x66') == b'\xf3\x66'
    assert canonical_prefixes(b'\x2e\x64\x67') == b'\x2e\x67'
    assert token_of(b'\xf3\xf3\x90').text == token_of(b'\xf3\x90').text


def test_vex_and_invalid_families():
    vex = token_of(b'\xc5\xf9\x6f\xc1')
    assert vex.family is TokenFamily.VEX
    assert vex.text == 'VEX'

    invalid = tokenize(decode_linear(b'\x06', 0, 1)[0])
    assert invalid.family is TokenFamily.INVALID
    assert invalid.text == 'INVALID'


def test_build_vocabulary_first_seen():
    vocab = build_vocabulary(['90', '90', 'C3'])
    assert vocab.token_to_id == {'90': 3, 'C3': 4}
    assert len(vocab) == 5


def test_empty_vocabulary():
    assert len(build_vocabulary([])) == 3


def test_encode_rules():
    vocab = build_vocabulary([Token(b'\x90'), Token(b'\xc3')])
    assert encode(Token(b'\x90'), vocab) == 3
    assert encode(Token(b'\xcc'), vocab) == UNK_ID
    assert encode(Token(b'', TokenFamily.INVALID), vocab) == INVALID_ID
    assert PAD_ID not in vocab.token_to_id.values()


def test_invalid_never_enters_vocabulary():
    vocab = build_vocabulary(['INVALID', '90'])
    assert 'INVALID' not in vocab
    assert vocab.token_to_id == {'90': 3}


def test_encode_function_keeps_order():
    instrs = decode_linear(b'\x55\x48\x89\xe5\x90\xc3', 0, 6)
    vocab = build_vocabulary(tokenize(i) for i in instrs)
    assert encode_function(instrs, vocab) == [3, 4, 5, 6]


def test_vocabulary_file_roundtrip(tmp_path):
    vocab = build_vocabulary(['4889E5', 'E8', 'C3'])
    path = tmp_path / 'vocab.tsv'
    vocab.save(path)

    assert path.read_text().splitlines()[0] == '4889E5\t3'
    loaded = Vocabulary.load(path)
    assert loaded.token_to_id == vocab.token_to_id
    assert loaded.tokens_in_id_order() == ['4889E5', 'E8', 'C3']


def test_vocabulary_file_rejects_gaps(tmp_path):
    path = tmp_path / 'vocab.tsv'
    path.write_text('90\t3\nC3\t5\n')
    with pytest.raises(ValueError):
        Vocabulary.load(path)

    path.write_text('90\t1\n')
    with pytest.raises(ValueError):
        Vocabulary.load(path)


if __name__ == '__main__':
    raise SystemExit(pytest.main([__file__, '-v']))
