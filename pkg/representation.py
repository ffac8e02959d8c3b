"""
Program Representations
=======================
Turns a binary into fixed-shape integer tensors for the two classifiers:

    SeqTensor    n_seq x m_seq token-id matrix, column j = function j
    GraphTensor  p pairs (F_i, A_i) of n_blk x n_blk matrices, F column b =
                 block b's token ids, A = directed block adjacency

Usage:
    from representation import RepresentationConfig, analyze_binary, encode_functions

    analyses = analyze_binary('build/sample_O2')
    ids = encode_functions(analyses, vocab)
    seq = build_sequential(ids, RepresentationConfig())
"""

import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from cfg_builder import FunctionCFG, adjacency_matrix, build_cfg
from elf_loader import FunctionBytes, extract_functions, load_binary
from instruction_tokenizer import PAD_ID, Token, Vocabulary, encode, tokenize
from x86_decoder import DecodedInstruction, decode_linear

logger = logging.getLogger(__name__)


@dataclass
class RepresentationConfig:
    """Padding / truncation budgets for both representations"""
    n_seq: int = 256    # instructions per function (sequential)
    m_seq: int = 16     # functions per program (sequential)
    n_blk: int = 16     # instructions per block == blocks per function (graph)
    p: int = 16         # functions per program (graph)

    def validate(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ValueError(f"RepresentationConfig.{f.name} must be an integer >= 1, got {value!r}")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> 'RepresentationConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown RepresentationConfig keys: {sorted(unknown)}")
        config = cls(**data)
        config.validate()
        return config


@dataclass
class FunctionAnalysis:
    """Decoded, tokenized and CFG-partitioned function"""
    name: str
    address: int
    instructions: List[DecodedInstruction]
    tokens: List[Token]
    cfg: FunctionCFG

    @property
    def size(self) -> int:
        return sum(instr.total_len for instr in self.instructions)


@dataclass
class SeqTensor:
    """Sequential program representation"""
    matrix: np.ndarray  # (n_seq, m_seq) int32

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    def function_mask(self) -> np.ndarray:
        """True for columns holding at least one non-PAD id"""
        return (self.matrix != PAD_ID).any(axis=0)


@dataclass
class GraphTensor:
    """Graph program representation"""
    features: np.ndarray   # (p, n_blk, n_blk) int32, F_i[:, b] = block b
    adjacency: np.ndarray  # (p, n_blk, n_blk) int32, binary

    @property
    def p(self) -> int:
        return self.features.shape[0]

    def function_mask(self) -> np.ndarray:
        return (self.features != PAD_ID).any(axis=(1, 2))


def analyze_function(func: FunctionBytes) -> FunctionAnalysis:
    instructions = decode_linear(func.data, 0, len(func.data))
    tokens = [tokenize(instr) for instr in instructions]
    cfg = build_cfg(instructions) if instructions else FunctionCFG()
    return FunctionAnalysis(
        name=func.name,
        address=func.address,
        instructions=instructions,
        tokens=tokens,
        cfg=cfg,
    )


def analyze_binary(path: Union[str, Path]) -> List[FunctionAnalysis]:
    """
    Load, decode, tokenize and build CFGs for every user function

    Args:
        path: ELF binary

    Returns:
        FunctionAnalysis list in ascending address order
    """
    image = load_binary(path)
    analyses = [analyze_function(func) for func in extract_functions(image)]
    logger.debug(
        f"Analyzed {len(analyses)} function(s) from {Path(path).name}: "
        f"{sum(len(a.instructions) for a in analyses)} instructions, "
        f"{sum(len(a.cfg.blocks) for a in analyses)} blocks"
    )
    return analyses


def encode_functions(analyses: Sequence[FunctionAnalysis], vocab: Vocabulary) -> List[List[int]]:
    """Token ids per function, instruction order preserved"""
    return [[encode(token, vocab) for token in analysis.tokens] for analysis in analyses]


def _pad_column(ids: Sequence[int], length: int) -> np.ndarray:
    column = np.full(length, PAD_ID, dtype=np.int32)
    head = list(ids[:length])
    column[:len(head)] = head
    return column


def build_sequential(functions: Sequence[Sequence[int]], config: RepresentationConfig) -> SeqTensor:
    """
    Build P_seq

    Column j holds the first n_seq ids of function j, PAD-filled; functions
    past m_seq are dropped and missing columns stay all-PAD.
    """
    matrix = np.full((config.n_seq, config.m_seq), PAD_ID, dtype=np.int32)
    for j, ids in enumerate(functions[:config.m_seq]):
        matrix[:, j] = _pad_column(ids, config.n_seq)
    return SeqTensor(matrix=matrix)


def _block_id_slices(cfg: FunctionCFG, ids: Sequence[int]) -> List[Sequence[int]]:
    """Split a function's id list along its block boundaries"""
    slices = []
    start = 0
    for block in cfg.blocks:
        stop = start + len(block.instructions)
        slices.append(ids[start:stop])
        start = stop
    if start != len(ids):
        raise ValueError(f"CFG covers {start} instructions but {len(ids)} token ids were given")
    return slices


def build_graph(functions: Sequence[Tuple[FunctionCFG, Sequence[int]]],
                config: RepresentationConfig) -> GraphTensor:
    """
    Build P_graph

    For each of the first p functions, column b of F_i holds block b's first
    n_blk token ids and A_i is the block adjacency restricted to the first
    n_blk blocks. Missing functions are all-PAD with zero adjacency.
    """
    n = config.n_blk
    features = np.full((config.p, n, n), PAD_ID, dtype=np.int32)
    adjacency = np.zeros((config.p, n, n), dtype=np.int32)

    for i, (cfg, ids) in enumerate(functions[:config.p]):
        for b, block_ids in enumerate(_block_id_slices(cfg, ids)[:n]):
            features[i, :, b] = _pad_column(block_ids, n)
        adjacency[i] = adjacency_matrix(cfg, n)

    return GraphTensor(features=features, adjacency=adjacency)


def represent_binary(path: Union[str, Path], vocab: Vocabulary, kind: str,
                     config: RepresentationConfig) -> Union[SeqTensor, GraphTensor]:
    """Analyze a binary and build the representation for one model kind"""
    analyses = analyze_binary(path)
    ids = encode_functions(analyses, vocab)
    if kind == 'sequential':
        return build_sequential(ids, config)
    if kind == 'graph':
        return build_graph([(a.cfg, fid) for a, fid in zip(analyses, ids)], config)
    raise ValueError(f"Unknown representation kind: {kind}")
