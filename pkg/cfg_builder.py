"""
Control Flow Graph Builder
==========================
Partitions a function's decoded instructions into basic blocks with the
classical leaders algorithm and connects them with intra-function edges.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from x86_decoder import BranchKind, DecodedInstruction

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


@dataclass
class BasicBlock:
    """Maximal straight-line run of instructions"""
    index: int
    instructions: List[DecodedInstruction]

    @property
    def start_offset(self) -> int:
        return self.instructions[0].offset

    @property
    def end_offset(self) -> int:
        return self.instructions[-1].end

    @property
    def terminator(self) -> DecodedInstruction:
        return self.instructions[-1]


@dataclass
class FunctionCFG:
    """Basic blocks plus directed intra-function edges"""
    blocks: List[BasicBlock] = field(default_factory=list)
    edges: Set[Edge] = field(default_factory=set)

    @property
    def instructions(self) -> List[DecodedInstruction]:
        return [instr for block in self.blocks for instr in block.instructions]

    def successors(self, index: int) -> List[int]:
        return sorted(target for source, target in self.edges if source == index)

    def out_degree(self, index: int) -> int:
        return sum(1 for source, _ in self.edges if source == index)


def _function_range(instrs: Sequence[DecodedInstruction]) -> Tuple[int, int]:
    return instrs[0].offset, instrs[-1].end


def find_leaders(instrs: Sequence[DecodedInstruction]) -> Set[int]:
    """
    Offsets that begin a basic block

    Leaders are the entry offset, every resolved branch target that lands on
    an instruction boundary inside the function, and the offset following
    every branch, call and return.
    """
    if not instrs:
        raise ValueError("find_leaders requires at least one instruction")

    start, end = _function_range(instrs)
    boundaries = {instr.offset for instr in instrs}
    leaders = {start}

    for instr in instrs:
        if not instr.is_branch:
            continue
        target = instr.rel_target
        if target is not None and start <= target < end:
            if target in boundaries:
                leaders.add(target)
            else:
                logger.debug(f"Branch at 0x{instr.offset:x} targets mid-instruction 0x{target:x}")
        if instr.end < end:
            leaders.add(instr.end)

    return leaders


def build_cfg(instrs: Sequence[DecodedInstruction]) -> FunctionCFG:
    """
    Split instructions at leaders and connect the resulting blocks

    Edge rules by block terminator:
        conditional jump   -> target block and fall-through block
        unconditional jump -> target block
        call / non-branch  -> fall-through block
        ret / indirect     -> no outgoing edge
    """
    leaders = find_leaders(instrs)

    blocks: List[BasicBlock] = []
    current: List[DecodedInstruction] = []
    for instr in instrs:
        if instr.offset in leaders and current:
            blocks.append(BasicBlock(index=len(blocks), instructions=current))
            current = []
        current.append(instr)
    if current:
        blocks.append(BasicBlock(index=len(blocks), instructions=current))

    block_at: Dict[int, int] = {block.start_offset: block.index for block in blocks}
    edges: Set[Edge] = set()

    for block in blocks:
        last = block.terminator
        kind = last.branch_kind
        fall_through = block_at.get(last.end)
        target = block_at.get(last.rel_target) if last.rel_target is not None else None

        if kind is BranchKind.JUMP_CONDITIONAL:
            if target is not None:
                edges.add((block.index, target))
            if fall_through is not None:
                edges.add((block.index, fall_through))
        elif kind is BranchKind.JUMP_UNCONDITIONAL:
            if target is not None:
                edges.add((block.index, target))
        elif kind in (BranchKind.RET, BranchKind.INDIRECT):
            pass
        elif fall_through is not None:
            edges.add((block.index, fall_through))

    return FunctionCFG(blocks=blocks, edges=edges)


def adjacency_matrix(cfg: FunctionCFG, m: int) -> np.ndarray:
    """
    Binary m x m matrix of edges between the first m blocks

    The diagonal stays zero even for a block that jumps to itself; the GCN
    adds every self-loop through A + I.
    """
    if m < 1:
        raise ValueError(f"Block budget must be >= 1, got {m}")

    matrix = np.zeros((m, m), dtype=np.int32)
    for source, target in cfg.edges:
        if source < m and target < m and source != target:
            matrix[source, target] = 1
    return matrix


def check_cfg_invariants(cfg: FunctionCFG, instrs: Sequence[DecodedInstruction]) -> List[str]:
    """Names of violated CFG invariants (empty when the CFG is well formed)"""
    violations = []

    if cfg.instructions != list(instrs):
        violations.append("partition: blocks do not reproduce the instruction list")

    leaders = find_leaders(instrs) if instrs else set()
    for _, target in cfg.edges:
        if not 0 <= target < len(cfg.blocks):
            violations.append(f"edge target {target} is not a block index")
        elif cfg.blocks[target].start_offset not in leaders:
            violations.append(f"edge target block {target} does not start at a leader")

    for block in cfg.blocks:
        for instr in block.instructions[:-1]:
            if instr.is_branch:
                violations.append(f"block {block.index} has a branch before its terminator")
                break
        for prev, nxt in zip(block.instructions, block.instructions[1:]):
            if prev.end != nxt.offset:
                violations.append(f"block {block.index} is not offset-contiguous")
                break

        kind = block.terminator.branch_kind
        degree = cfg.out_degree(block.index)
        if kind is BranchKind.JUMP_CONDITIONAL and degree > 2:
            violations.append(f"conditional block {block.index} has out-degree {degree}")
        elif kind is not BranchKind.JUMP_CONDITIONAL and degree > 1:
            violations.append(f"block {block.index} has out-degree {degree}")

    return violations


def cfg_to_networkx(cfg: FunctionCFG, name: str = 'function') -> nx.DiGraph:
    graph = nx.DiGraph(name=name)
    for block in cfg.blocks:
        graph.add_node(
            block.index,
            label=f'"B{block.index} [0x{block.start_offset:x}, 0x{block.end_offset:x}) n={len(block.instructions)}"',
            shape='box',
        )
    for source, target in sorted(cfg.edges):
        style = 'dashed' if target <= source else 'solid'
        graph.add_edge(source, target, style=style)
    return graph


def cfg_to_dot(cfg: FunctionCFG, name: str = 'function') -> str:
    """Render the CFG as DOT text for visual inspection"""
    return nx.nx_pydot.to_pydot(cfg_to_networkx(cfg, name)).to_string()
