"""
ELF Loader Test Suite
=====================
Binary validation and function extraction
"""

import struct

import pytest

from elf_loader import (BinaryImage, CodeSection, MalformedElf, NotElf, StrippedBinary, Symbol,
                        WrongArchitecture, extract_functions, is_scaffolding, load_binary)

EM_AARCH64 = 183


def elf_header(elf_class: int = 2, machine: int = EM_AARCH64) -> bytes:
    """Minimal ELF header with no sections, zero-padded"""
    ident = b'\x7fELF' + bytes([elf_class, 1, 1, 0]) + b'\x00' * 8
    if elf_class == 2:
        body = struct.pack('<HHIQQQIHHHHHH', 2, machine, 1, 0, 0, 0, 0, 64, 56, 0, 64, 0, 0)
    else:
        body = struct.pack('<HHIIIIIHHHHHH', 2, machine, 1, 0, 0, 0, 0, 52, 32, 0, 40, 0, 0)
    return ident + body + b'\x00' * 4096


def test_hello_world_image(hello_binary):
    """Test: a compiled hello-world has .text and a FUNC symbol main"""
    image = load_binary(hello_binary)

    assert image.machine == 'EM_X86_64'
    assert '.text' in [s.name for s in image.code_sections]
    assert any(s.name == 'main' and s.kind == 'STT_FUNC' for s in image.symbols)


def test_extract_functions_hello(hello_binary):
    functions = extract_functions(load_binary(hello_binary))
    names = [f.name for f in functions]

    assert 'main' in names
    assert '_start' not in names
    assert 'frame_dummy' not in names

    addresses = [f.address for f in functions]
    assert addresses == sorted(addresses)
    for prev, nxt in zip(functions, functions[1:]):
        assert prev.address + prev.size <= nxt.address

    image = load_binary(hello_binary)
    main_symbol = next(s for s in image.symbols if s.name == 'main' and s.kind == 'STT_FUNC')
    main = next(f for f in functions if f.name == 'main')
    assert main.size == main_symbol.size


def test_text_file_is_not_elf(tmp_path):
    path = tmp_path / 'notes.txt'
    path.write_text('definitely not a binary\n')
    with pytest.raises(NotElf):
        load_binary(path)


def test_arm_elf_is_wrong_architecture(tmp_path):
    path = tmp_path / 'arm.elf'
    path.write_bytes(elf_header(2, EM_AARCH64))
    with pytest.raises(WrongArchitecture):
        load_binary(path)


def test_elf32_is_wrong_architecture(tmp_path):
    path = tmp_path / 'x86.elf'
    path.write_bytes(elf_header(1, 3))
    with pytest.raises(WrongArchitecture):
        load_binary(path)


def test_truncated_elf_is_malformed(tmp_path):
    path = tmp_path / 'short.elf'
    path.write_bytes(b'\x7fELF\x02\x01\x01' + b'\x00' * 9)
    with pytest.raises(MalformedElf):
        load_binary(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_binary(tmp_path / 'absent')


def test_stripped_binary(stripped_binary):
    with pytest.raises(StrippedBinary):
        extract_functions(load_binary(stripped_binary))


def synthetic_image(symbols):
    text = CodeSection(name='.text', address=0x1000, data=bytes(range(64)))
    return BinaryImage(path='synthetic', code_sections=[text], symbols=symbols)


def test_zero_size_symbol_excluded():
    image = synthetic_image([
        Symbol('empty', 0x1000, 0, 'STT_FUNC'),
        Symbol('body', 0x1004, 8, 'STT_FUNC'),
    ])
    functions = extract_functions(image)
    assert [f.name for f in functions] == ['body']
    assert functions[0].data == bytes(range(4, 12))


def test_aliases_overlaps_and_foreign_symbols():
    image = synthetic_image([
        Symbol('first', 0x1000, 16, 'STT_FUNC'),
        Symbol('first_alias', 0x1000, 16, 'STT_FUNC'),
        Symbol('overlapping', 0x1008, 16, 'STT_FUNC'),
        Symbol('second', 0x1010, 8, 'STT_FUNC'),
        Symbol('outside', 0x5000, 8, 'STT_FUNC'),
        Symbol('data_object', 0x1020, 8, 'STT_OBJECT'),
    ])
    assert [f.name for f in extract_functions(image)] == ['first', 'second']


def test_only_data_symbols_means_stripped():
    image = synthetic_image([Symbol('table', 0x1000, 8, 'STT_OBJECT')])
    with pytest.raises(StrippedBinary):
        extract_functions(image)


def test_scaffolding_names():
    assert is_scaffolding('_start')
    assert is_scaffolding('puts@plt')
    assert is_scaffolding('anything', '.plt.sec')
    assert not is_scaffolding('main', '.text')


if __name__ == '__main__':
    raise SystemExit(pytest.main([__file__, '-v']))
