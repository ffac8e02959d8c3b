"""
Instruction Tokenizer
=====================
Reduces decoded instructions to operand-free tokens (prefix, REX, opcode,
ModR/M and SIB bytes; displacement and immediate dropped) and maps them to
integer ids through a vocabulary built from the training split.

Vocabulary file format (one entry per line, reserved ids implicit):
    <HEX-TOKEN>\\t<ID>
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

from x86_decoder import DecodedInstruction, Encoding

logger = logging.getLogger(__name__)

PAD_ID = 0
UNK_ID = 1
INVALID_ID = 2
RESERVED_COUNT = 3

VEX_TOKEN_TEXT = 'VEX'
INVALID_TOKEN_TEXT = 'INVALID'

# Legacy prefix groups: lock/rep, segment, operand size, address size
PREFIX_GROUPS = {
    0xF0: 1, 0xF2: 1, 0xF3: 1,
    0x2E: 2, 0x36: 2, 0x3E: 2, 0x26: 2, 0x64: 2, 0x65: 2,
    0x66: 3,
    0x67: 4,
}


class TokenFamily(Enum):
    """Token space an instruction falls into"""
    LEGACY = 'legacy'
    VEX = 'vex'
    INVALID = 'invalid'


@dataclass(frozen=True)
class Token:
    """Operand-free instruction token"""
    data: bytes
    family: TokenFamily = TokenFamily.LEGACY

    @property
    def text(self) -> str:
        if self.family is TokenFamily.VEX:
            return VEX_TOKEN_TEXT
        if self.family is TokenFamily.INVALID:
            return INVALID_TOKEN_TEXT
        return self.data.hex().upper()

    def __str__(self) -> str:
        return self.text


INVALID_TOKEN = Token(b'', TokenFamily.INVALID)


def canonical_prefixes(prefixes: bytes) -> bytes:
    """Keep the first prefix of each group, in encoding order"""
    seen_groups = set()
    kept = bytearray()
    for byte in prefixes:
        group = PREFIX_GROUPS.get(byte)
        if group is None or group in seen_groups:
            continue
        seen_groups.add(group)
        kept.append(byte)
    return bytes(kept)


def tokenize(instr: DecodedInstruction) -> Token:
    """
    Build the operand-free token of an instruction

    The token holds the retained fields in encoding order:
    prefixes ++ REX ++ opcode ++ ModR/M ++ SIB.
    """
    if instr.invalid:
        return INVALID_TOKEN

    data = bytearray(canonical_prefixes(instr.legacy_prefixes))
    if instr.rex is not None:
        data.append(instr.rex)
    data += instr.vex
    data += instr.opcode
    if instr.modrm is not None:
        data.append(instr.modrm)
    if instr.sib is not None:
        data.append(instr.sib)

    family = TokenFamily.LEGACY if instr.encoding is Encoding.LEGACY else TokenFamily.VEX
    return Token(bytes(data), family)


class Vocabulary:
    """Token text to id mapping with reserved PAD/UNK/INVALID ids"""

    def __init__(self):
        self.token_to_id: Dict[str, int] = {}

    def __len__(self) -> int:
        return RESERVED_COUNT + len(self.token_to_id)

    def __contains__(self, token: Union[Token, str]) -> bool:
        return str(token) in self.token_to_id

    @property
    def size(self) -> int:
        return len(self)

    def add(self, token: Union[Token, str]) -> int:
        text = str(token)
        if text == INVALID_TOKEN_TEXT:
            return INVALID_ID
        if text not in self.token_to_id:
            self.token_to_id[text] = len(self)
        return self.token_to_id[text]

    def tokens_in_id_order(self) -> List[str]:
        """Non-reserved token texts, index i holding id i + 3"""
        return sorted(self.token_to_id, key=self.token_to_id.__getitem__)

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> 'Vocabulary':
        vocab = cls()
        for text in tokens:
            vocab.add(text)
        return vocab

    def save(self, path: Union[str, Path]):
        """Write the vocabulary as '<hex-token>\\t<id>' lines"""
        path = Path(path)
        with open(path, 'w') as f:
            for text in self.tokens_in_id_order():
                f.write(f"{text}\t{self.token_to_id[text]}\n")
        logger.info(f"Saved vocabulary of size {len(self)} to {path}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'Vocabulary':
        path = Path(path)
        vocab = cls()
        with open(path, 'r') as f:
            for line_no, line in enumerate(f, 1):
                line = line.rstrip('\n')
                if not line:
                    continue
                try:
                    text, raw_id = line.split('\t')
                    token_id = int(raw_id)
                except ValueError:
                    raise ValueError(f"{path}:{line_no}: expected '<token>\\t<id>', got {line!r}")
                if token_id < RESERVED_COUNT or text in vocab.token_to_id:
                    raise ValueError(f"{path}:{line_no}: invalid vocabulary entry {line!r}")
                vocab.token_to_id[text] = token_id

        ids = sorted(vocab.token_to_id.values())
        if ids != list(range(RESERVED_COUNT, RESERVED_COUNT + len(ids))):
            raise ValueError(f"{path}: vocabulary ids are not contiguous from {RESERVED_COUNT}")
        logger.info(f"Loaded vocabulary of size {len(vocab)} from {path}")
        return vocab


def build_vocabulary(tokens: Iterable[Union[Token, str]]) -> Vocabulary:
    """
    Assign ids in first-seen order starting at 3

    Args:
        tokens: Token stream drawn from the training split only

    Returns:
        Vocabulary (size 3 for an empty stream)
    """
    vocab = Vocabulary()
    for token in tokens:
        vocab.add(token)
    logger.debug(f"Built vocabulary with {len(vocab)} entries")
    return vocab


def encode(token: Union[Token, str], vocab: Vocabulary) -> int:
    """Token id, UNK for unseen tokens and INVALID for the pseudo-instruction"""
    text = str(token)
    if text == INVALID_TOKEN_TEXT:
        return INVALID_ID
    return vocab.token_to_id.get(text, UNK_ID)


def encode_instruction(instr: DecodedInstruction, vocab: Vocabulary) -> int:
    return encode(tokenize(instr), vocab)


def encode_function(instrs: Sequence[DecodedInstruction], vocab: Vocabulary) -> List[int]:
    return [encode_instruction(instr, vocab) for instr in instrs]
