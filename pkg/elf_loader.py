"""
ELF Loader
==========
Loads 64-bit little-endian x86-64 ELF binaries, locates their executable
sections and enumerates function bodies from the symbol table.

Usage:
    from elf_loader import load_binary, extract_functions

    image = load_binary('build/hello')
    for func in extract_functions(image):
        print(func.name, hex(func.address), len(func.data))
"""

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

from elftools.common.exceptions import ELFError, ELFParseError
from elftools.elf.constants import SH_FLAGS
from elftools.elf.elffile import ELFFile
from elftools.elf.sections import SymbolTableSection

logger = logging.getLogger(__name__)

ELF_MAGIC = b'\x7fELF'

# Compiler-runtime scaffolding shared by every sample
SCAFFOLDING_FUNCTIONS = frozenset([
    '_start',
    '_init',
    '_fini',
    'deregister_tm_clones',
    'register_tm_clones',
    '__do_global_dtors_aux',
    'frame_dummy',
    '__libc_csu_init',
    '__libc_csu_fini',
    '_dl_relocate_static_pie',
])


class ELFLoadError(Exception):
    """Base exception for ELF loading errors"""
    pass


class NotElf(ELFLoadError):
    """File does not start with the ELF magic number"""
    pass


class WrongArchitecture(ELFLoadError):
    """ELF is not a 64-bit little-endian x86-64 image"""
    pass


class MalformedElf(ELFLoadError):
    """ELF headers or tables could not be parsed"""
    pass


class StrippedBinary(ELFLoadError):
    """No FUNC symbols are available to delimit functions"""
    pass


@dataclass(frozen=True)
class CodeSection:
    """Executable section contents"""
    name: str
    address: int
    data: bytes

    @property
    def end(self) -> int:
        return self.address + len(self.data)

    def contains(self, address: int, size: int) -> bool:
        return self.address <= address and address + size <= self.end


@dataclass(frozen=True)
class Symbol:
    """Symbol table entry"""
    name: str
    address: int
    size: int
    kind: str


@dataclass
class BinaryImage:
    """Loaded ELF image: executable sections plus the full symbol table"""
    path: str
    code_sections: List[CodeSection] = field(default_factory=list)
    symbols: List[Symbol] = field(default_factory=list)
    entry: int = 0
    machine: str = 'EM_X86_64'
    is_pie: bool = False

    def section_for(self, address: int, size: int) -> Optional[CodeSection]:
        for section in self.code_sections:
            if section.contains(address, size):
                return section
        return None


@dataclass(frozen=True)
class FunctionBytes:
    """One function body"""
    name: str
    address: int
    data: bytes
    section: str = '.text'

    @property
    def size(self) -> int:
        return len(self.data)


def is_scaffolding(name: str, section_name: str = '') -> bool:
    """True for compiler-runtime stubs and PLT thunks"""
    if name in SCAFFOLDING_FUNCTIONS:
        return True
    if name.endswith('@plt') or section_name.startswith('.plt'):
        return True
    return False


def load_binary(path: Union[str, Path]) -> BinaryImage:
    """
    Load an ELF binary

    Args:
        path: Path to a 64-bit little-endian x86-64 ELF file

    Returns:
        BinaryImage with executable sections and all symbols

    Raises:
        FileNotFoundError: Path does not exist
        NotElf: Magic number mismatch
        WrongArchitecture: Not ELF64 / little-endian / x86-64
        MalformedElf: Header or table parsing failed
    """
    path = Path(path)
    raw = path.read_bytes()

    if raw[:4] != ELF_MAGIC:
        raise NotElf(f"Not an ELF file: {path}")

    try:
        elf = ELFFile(io.BytesIO(raw))

        if elf.elfclass != 64 or not elf.little_endian:
            raise WrongArchitecture(
                f"{path}: expected ELF64 little-endian, got ELF{elf.elfclass} "
                f"{'little' if elf.little_endian else 'big'}-endian"
            )
        machine = elf['e_machine']
        if machine != 'EM_X86_64':
            raise WrongArchitecture(f"{path}: expected EM_X86_64, got {machine}")

        image = BinaryImage(
            path=str(path),
            entry=elf['e_entry'],
            machine=machine,
            is_pie=elf['e_type'] == 'ET_DYN',
        )

        for section in elf.iter_sections():
            if not section['sh_flags'] & SH_FLAGS.SHF_EXECINSTR:
                continue
            if section['sh_type'] == 'SHT_NOBITS' or section['sh_size'] == 0:
                continue
            image.code_sections.append(CodeSection(
                name=section.name,
                address=section['sh_addr'],
                data=section.data(),
            ))

        for section in elf.iter_sections():
            if not isinstance(section, SymbolTableSection) or section['sh_entsize'] == 0:
                continue
            for symbol in section.iter_symbols():
                # imports resolved by the dynamic linker have no body here
                if symbol['st_shndx'] == 'SHN_UNDEF':
                    continue
                image.symbols.append(Symbol(
                    name=symbol.name,
                    address=symbol['st_value'],
                    size=symbol['st_size'],
                    kind=symbol['st_info']['type'],
                ))

    except (ELFError, ELFParseError) as e:
        raise MalformedElf(f"Failed to parse {path}: {e}") from e
    except (ValueError, KeyError, IndexError) as e:
        # pyelftools surfaces corrupt tables as generic errors too
        raise MalformedElf(f"Failed to parse {path}: {e}") from e

    image.code_sections.sort(key=lambda s: s.address)
    logger.debug(
        f"Loaded {path}: {len(image.code_sections)} code section(s), "
        f"{len(image.symbols)} symbol(s)"
    )
    return image


def extract_functions(image: BinaryImage) -> List[FunctionBytes]:
    """
    Enumerate function bodies from FUNC symbols

    Args:
        image: Loaded BinaryImage

    Returns:
        Disjoint FunctionBytes sorted by address, runtime scaffolding removed

    Raises:
        StrippedBinary: The symbol table holds no FUNC symbols
    """
    func_symbols = [s for s in image.symbols if s.kind == 'STT_FUNC']
    if not func_symbols:
        raise StrippedBinary(f"No FUNC symbols in {image.path}")

    candidates = sorted(
        (s for s in func_symbols if s.size > 0),
        key=lambda s: s.address,
    )

    functions: List[FunctionBytes] = []
    seen_addresses = set()
    last_end = -1

    for symbol in candidates:
        section = image.section_for(symbol.address, symbol.size)
        if section is None:
            logger.debug(f"Skipping {symbol.name}: outside executable sections")
            continue
        if is_scaffolding(symbol.name, section.name):
            continue
        if symbol.address in seen_addresses:
            # alias of an already-kept function
            continue
        if symbol.address < last_end:
            logger.warning(f"Skipping {symbol.name}: overlaps previous function")
            continue

        start = symbol.address - section.address
        functions.append(FunctionBytes(
            name=symbol.name,
            address=symbol.address,
            data=section.data[start:start + symbol.size],
            section=section.name,
        ))
        seen_addresses.add(symbol.address)
        last_end = symbol.address + symbol.size

    logger.info(f"Extracted {len(functions)} function(s) from {Path(image.path).name}")
    return functions
