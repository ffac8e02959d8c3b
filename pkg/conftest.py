"""
Shared pytest fixtures
======================
Compiler / reference-disassembler availability checks, compiled sample
binaries, and small synthetic instruction lists.
"""

import os
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from x86_decoder import BranchKind, DecodedInstruction  # noqa: E402

HELLO_C = r"""
#include <stdio.h>

int main(void) {
    printf("hello\n");
    return 0;
}
"""

DIAMOND_C = r"""
#include <stdio.h>

int pick(int x) {
    int y;
    if (x > 3)
        y = x * 2;
    else
        y = x - 7;
    return y;
}

int main(int argc, char **argv) {
    printf("%d\n", pick(argc));
    return 0;
}
"""

LOOP_C = r"""
int total(int n) {
    int s = 0;
    for (int i = 0; i < n; i++)
        s += i;
    return s;
}

int main(int argc, char **argv) {
    return total(argc);
}
"""


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: compiles corpora or trains models (deselect with -m "not slow")')


def compiler_path():
    return shutil.which(os.getenv('BINVULN_CC') or 'gcc')


def compile_c(source: str, output: Path, flag: str = '-O0', extra=()) -> Path:
    src = output.with_suffix('.c')
    src.write_text(source)
    subprocess.run([compiler_path(), flag, '-w', *extra, '-o', str(output), str(src)],
                   check=True, capture_output=True)
    return output


@pytest.fixture(scope='session')
def cc():
    path = compiler_path()
    if path is None:
        pytest.skip('C compiler not available')
    return path


@pytest.fixture(scope='session')
def build_dir(tmp_path_factory):
    return tmp_path_factory.mktemp('binaries')


@pytest.fixture(scope='session')
def hello_binary(cc, build_dir):
    return compile_c(HELLO_C, build_dir / 'hello')


@pytest.fixture(scope='session')
def diamond_binary(cc, build_dir):
    return compile_c(DIAMOND_C, build_dir / 'diamond')


@pytest.fixture(scope='session')
def loop_binary(cc, build_dir):
    return compile_c(LOOP_C, build_dir / 'loop')


@pytest.fixture(scope='session')
def stripped_binary(cc, build_dir):
    return compile_c(HELLO_C, build_dir / 'hello_stripped', extra=('-s',))


def instr(offset, length, kind=BranchKind.NONE, target=None, opcode=b'\x90'):
    """Synthetic DecodedInstruction for CFG tests"""
    return DecodedInstruction(
        offset=offset,
        opcode=opcode,
        total_len=length,
        imm_len=length - 1 if target is not None else 0,
        branch_kind=kind,
        rel_target=target,
    )


@pytest.fixture
def diamond_instrs():
    """
    0: jz 6        (2 bytes)
    2: nop
    3: nop
    4: jmp 7       (2 bytes)
    6: nop
    7: ret
    """
    return [
        instr(0, 2, BranchKind.JUMP_CONDITIONAL, 6, b'\x74'),
        instr(2, 1),
        instr(3, 1),
        instr(4, 2, BranchKind.JUMP_UNCONDITIONAL, 7, b'\xeb'),
        instr(6, 1),
        instr(7, 1, BranchKind.RET, opcode=b'\xc3'),
    ]
