"""
Vulnerability Classifiers
=========================
The two program classifiers over instruction tokens:

    sequential  embed -> 1-D CNN per function -> attention over functions
                -> mean -> x_prog -> FFN -> sigmoid
    graph       embed -> 1-D CNN per basic block -> GCN x L -> top-K block
                pooling -> function embedding -> attention over functions
                -> mean -> x_prog -> FFN -> sigmoid

Inputs use the representation layout: sequential ids are (B, n_seq, m_seq)
with one function per column; graph inputs are F (B, p, n, n) with one block
per column and A (B, p, n, n).

Usage:
    from vuln_models import ModelConfig, build_model, forward_graph

    model = build_model(ModelConfig(kind='graph', vocab_size=len(vocab)))
    prob = forward_graph(model, features, adjacency)
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from instruction_tokenizer import PAD_ID, Vocabulary
from representation import RepresentationConfig

logger = logging.getLogger(__name__)

MODEL_KINDS = ('sequential', 'graph')
CHECKPOINT_META_KEY = '__meta__'
CHECKPOINT_FORMAT_VERSION = 1


class ModelError(Exception):
    """Base exception for model errors"""
    pass


class IdOutOfRange(ModelError):
    """Token id outside the embedding table"""
    pass


class CheckpointError(ModelError):
    """Checkpoint file missing, malformed or inconsistent"""
    pass


@dataclass
class ModelConfig:
    """Architecture hyperparameters for both classifiers"""
    kind: str = 'graph'
    vocab_size: int = 3
    embed_dim: int = 512
    func_dim: int = 512
    block_dim: int = 512
    prog_dim: int = 256
    heads: int = 8
    seq_kernel_sizes: Tuple[int, ...] = (7,)
    seq_filters: Optional[int] = None
    graph_kernel_size: int = 3
    gcn_layers: int = 2
    gcn_hidden: int = 512
    topk_ratio: float = 0.1
    temperature: float = 0.1
    scorer_hidden: int = 128
    dropout: float = 0.3
    ffn_hidden: Tuple[int, ...] = (256, 128, 64)
    bn_momentum: float = 0.1

    def __post_init__(self):
        self.seq_kernel_sizes = tuple(self.seq_kernel_sizes)
        self.ffn_hidden = tuple(self.ffn_hidden)

    @property
    def seq_filter_count(self) -> int:
        """Filters per CNN branch: 768 for one kernel size, 256 per branch otherwise"""
        if self.seq_filters is not None:
            return self.seq_filters
        return 768 if len(self.seq_kernel_sizes) == 1 else 256

    def validate(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        if self.vocab_size < 3:
            raise ValueError(f"vocab_size must include the 3 reserved ids, got {self.vocab_size}")
        for name in ('embed_dim', 'func_dim', 'block_dim', 'prog_dim', 'heads',
                     'graph_kernel_size', 'gcn_hidden', 'scorer_hidden'):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.func_dim % self.heads:
            raise ValueError(f"func_dim {self.func_dim} is not divisible by heads {self.heads}")
        if not self.seq_kernel_sizes or any(k < 1 for k in self.seq_kernel_sizes):
            raise ValueError(f"seq_kernel_sizes must be non-empty and positive, got {self.seq_kernel_sizes}")
        if self.seq_filter_count < 1:
            raise ValueError(f"seq_filters must be positive, got {self.seq_filters}")
        if not 1 <= self.gcn_layers <= 4:
            raise ValueError(f"gcn_layers must be in 1..4, got {self.gcn_layers}")
        if not 0 < self.topk_ratio <= 1:
            raise ValueError(f"topk_ratio must be in (0, 1], got {self.topk_ratio}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if not 0 <= self.dropout < 1:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if any(h < 1 for h in self.ffn_hidden):
            raise ValueError(f"ffn_hidden sizes must be positive, got {self.ffn_hidden}")

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['seq_kernel_sizes'] = list(self.seq_kernel_sizes)
        data['ffn_hidden'] = list(self.ffn_hidden)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'ModelConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown ModelConfig keys: {sorted(unknown)}")
        config = cls(**data)
        config.validate()
        return config

    @classmethod
    def toy(cls, kind: str, vocab_size: int, **overrides) -> 'ModelConfig':
        """Small dimensions for gradient checks and smoke runs"""
        params = dict(
            kind=kind, vocab_size=vocab_size, embed_dim=8, func_dim=8, block_dim=8,
            prog_dim=8, heads=2, seq_filters=4, gcn_hidden=8, scorer_hidden=4,
            ffn_hidden=(8, 8, 4),
        )
        params.update(overrides)
        return cls(**params)


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

class TokenEmbedding(nn.Module):
    """Embedding table with an explicit id range check"""

    def __init__(self, vocab_size: int, embed_dim: int):
        super().__init__()
        self.table = nn.Embedding(vocab_size, embed_dim)
        bound = 1.0 / math.sqrt(embed_dim)
        nn.init.uniform_(self.table.weight, -bound, bound)

    @property
    def vocab_size(self) -> int:
        return self.table.num_embeddings

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.numel():
            low, high = int(ids.min()), int(ids.max())
            if low < 0 or high >= self.vocab_size:
                raise IdOutOfRange(
                    f"Token ids must lie in [0, {self.vocab_size}), got range [{low}, {high}]"
                )
        return self.table(ids)


class ConvBlock(nn.Module):
    """Conv1d -> BatchNorm -> ReLU -> Dropout -> global average pooling"""

    def __init__(self, in_dim: int, filters: int, kernel_size: int,
                 dropout: float, bn_momentum: float = 0.1):
        super().__init__()
        self.kernel_size = kernel_size
        self.conv = nn.Conv1d(in_dim, filters, kernel_size)
        self.norm = nn.BatchNorm1d(filters, momentum=bn_momentum)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x: (N, length, in_dim) -> (N, filters)"""
        x = x.transpose(1, 2)
        short = self.kernel_size - x.shape[-1]
        if short > 0:
            x = F.pad(x, (0, short))
        x = self.conv(x)
        x = self.dropout(F.relu(self.norm(x)))
        return x.mean(dim=-1)


def normalize_adjacency(adjacency: torch.Tensor) -> torch.Tensor:
    """
    D^-1/2 (A_sym + I) D^-1/2 for a batch of (n, n) adjacency matrices

    A_sym = max(A, A^T). Every node has degree >= 1 through its self-loop.
    """
    if not adjacency.is_floating_point():
        adjacency = adjacency.float()
    sym = torch.maximum(adjacency, adjacency.transpose(-1, -2))
    eye = torch.eye(sym.shape[-1], dtype=sym.dtype, device=sym.device)
    a_tilde = sym + eye
    inv_sqrt = a_tilde.sum(dim=-1).pow(-0.5)
    return inv_sqrt.unsqueeze(-1) * a_tilde * inv_sqrt.unsqueeze(-2)


def gcn_layer(h: torch.Tensor, adjacency: torch.Tensor, weight: torch.Tensor) -> torch.Tensor:
    """ReLU(D^-1/2 A~ D^-1/2 H W)"""
    return F.relu(normalize_adjacency(adjacency) @ h @ weight)


class GCNLayer(nn.Module):
    """Bias-free graph convolution over a pre-normalized adjacency"""

    def __init__(self, in_features: int, out_features: int):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(in_features, out_features))
        bound = 1.0 / math.sqrt(in_features)
        nn.init.uniform_(self.weight, -bound, bound)

    def forward(self, h: torch.Tensor, norm_adjacency: torch.Tensor) -> torch.Tensor:
        return F.relu(norm_adjacency @ h @ self.weight)


def topk_slots(node_count: int, ratio: float) -> int:
    return max(1, math.ceil(ratio * node_count))


def masked_softmax(scores: torch.Tensor, mask: Optional[torch.Tensor], dim: int = -1) -> torch.Tensor:
    """Softmax restricted to mask; rows with nothing unmasked fall back to all positions"""
    if mask is None:
        return torch.softmax(scores, dim=dim)
    mask = mask | ~mask.any(dim=dim, keepdim=True)
    return torch.softmax(scores.masked_fill(~mask, float('-inf')), dim=dim)


def topk_pool(h: torch.Tensor, scores: torch.Tensor, ratio: float, temperature: float,
              mask: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """
    Keep the top ceil(K*n) nodes by alpha = softmax(s / t)

    Args:
        h: (N, n, d) node features
        scores: (N, n) raw scorer outputs
        ratio: K
        temperature: t
        mask: (N, n) True for real nodes

    Returns:
        (selected (N, slots, d) rows scaled by alpha, alpha (N, n), indices (N, slots))
    """
    alpha = masked_softmax(scores / temperature, mask)
    slots = topk_slots(h.shape[-2], ratio)
    order = torch.sort(alpha, dim=-1, descending=True, stable=True).indices[..., :slots]
    picked = torch.gather(h, -2, order.unsqueeze(-1).expand(*order.shape, h.shape[-1]))
    weights = torch.gather(alpha, -1, order).unsqueeze(-1)
    return picked * weights, alpha, order


class TopKPooling(nn.Module):
    """Feed-forward node scorer (one hidden layer, one output) plus top-K selection"""

    def __init__(self, in_dim: int, hidden: int, ratio: float, temperature: float):
        super().__init__()
        self.ratio = ratio
        self.temperature = temperature
        self.scorer = nn.Sequential(
            nn.Linear(in_dim, hidden),
            nn.ReLU(),
            nn.Linear(hidden, 1),
        )

    def forward(self, h: torch.Tensor, mask: Optional[torch.Tensor] = None):
        scores = self.scorer(h).squeeze(-1)
        return topk_pool(h, scores, self.ratio, self.temperature, mask)


class FunctionAttention(nn.Module):
    """Multi-head self-attention over function embeddings with key padding mask"""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads:
            raise ValueError(f"dim {dim} is not divisible by heads {heads}")
        self.heads = heads
        self.head_dim = dim // heads
        self.query = nn.Linear(dim, dim)
        self.key = nn.Linear(dim, dim)
        self.value = nn.Linear(dim, dim)
        self.output = nn.Linear(dim, dim)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        batch, length, _ = x.shape
        return x.view(batch, length, self.heads, self.head_dim).transpose(1, 2)

    def forward(self, x: torch.Tensor, mask: Optional[torch.Tensor] = None):
        """
        Args:
            x: (B, m, dim) function embeddings
            mask: (B, m) True for real functions

        Returns:
            (attended (B, m, dim), S (B, m, m) averaged over heads)
        """
        batch, length, dim = x.shape
        q, k, v = self._split(self.query(x)), self._split(self.key(x)), self._split(self.value(x))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)

        key_mask = None
        if mask is not None:
            key_mask = mask[:, None, None, :].expand_as(scores)
        weights = masked_softmax(scores, key_mask)

        context = (weights @ v).transpose(1, 2).reshape(batch, length, dim)
        return self.output(context), weights.mean(dim=1)


def function_attention(x: torch.Tensor, attention: FunctionAttention,
                       mask: Optional[torch.Tensor] = None):
    return attention(x, mask)


def masked_mean(x: torch.Tensor, mask: Optional[torch.Tensor]) -> torch.Tensor:
    """Mean over dim 1 restricted to mask (all positions if none are real)"""
    if mask is None:
        return x.mean(dim=1)
    mask = mask | ~mask.any(dim=1, keepdim=True)
    weights = mask.to(x.dtype).unsqueeze(-1)
    return (x * weights).sum(dim=1) / weights.sum(dim=1)


class ProgramHead(nn.Module):
    """Function attention -> masked mean -> x_prog -> FFN logit"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.attention = FunctionAttention(config.func_dim, config.heads)
        self.project = nn.Linear(config.func_dim, config.prog_dim)
        layers: List[nn.Module] = []
        width = config.prog_dim
        for hidden in config.ffn_hidden:
            layers += [nn.Linear(width, hidden), nn.ReLU()]
            width = hidden
        layers.append(nn.Linear(width, 1))
        self.ffn = nn.Sequential(*layers)

    def aggregate(self, attended: torch.Tensor, mask: Optional[torch.Tensor]) -> torch.Tensor:
        return self.project(masked_mean(attended, mask))

    def forward(self, functions: torch.Tensor, mask: torch.Tensor):
        attended, scores = self.attention(functions, mask)
        x_prog = self.aggregate(attended, mask)
        return self.ffn(x_prog).squeeze(-1), scores


# ---------------------------------------------------------------------------
# Architectures
# ---------------------------------------------------------------------------

class SequentialVulnModel(nn.Module):
    """Instruction sequence per function, CNN branches, attention over functions"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        config.validate()
        self.config = config
        self.embedding = TokenEmbedding(config.vocab_size, config.embed_dim)
        self.branches = nn.ModuleList([
            ConvBlock(config.embed_dim, config.seq_filter_count, k, config.dropout, config.bn_momentum)
            for k in config.seq_kernel_sizes
        ])
        self.function_projection = nn.Linear(
            config.seq_filter_count * len(config.seq_kernel_sizes), config.func_dim
        )
        self.head = ProgramHead(config)

    def encode_functions(self, ids: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """ids (B, n_seq, m_seq) -> (function embeddings (B, m, func_dim), mask (B, m))"""
        batch, n_seq, m_seq = ids.shape
        per_function = ids.transpose(1, 2).reshape(batch * m_seq, n_seq)
        mask = (per_function != PAD_ID).any(dim=-1).view(batch, m_seq)

        embedded = self.embedding(per_function)
        features = torch.cat([branch(embedded) for branch in self.branches], dim=-1)
        functions = self.function_projection(features).view(batch, m_seq, -1)
        return functions, mask

    def forward_with_attention(self, ids: torch.Tensor):
        functions, mask = self.encode_functions(ids)
        logits, scores = self.head(functions, mask)
        return logits, scores, mask

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        return self.forward_with_attention(ids)[0]


class GraphVulnModel(nn.Module):
    """Per-block CNN, GCN over the block graph, top-K pooling, attention over functions"""

    def __init__(self, config: ModelConfig, n_blk: int):
        super().__init__()
        config.validate()
        self.config = config
        self.n_blk = n_blk
        self.slots = topk_slots(n_blk, config.topk_ratio)
        self.embedding = TokenEmbedding(config.vocab_size, config.embed_dim)
        self.block_encoder = ConvBlock(
            config.embed_dim, config.block_dim, config.graph_kernel_size,
            config.dropout, config.bn_momentum,
        )
        dims = [config.block_dim] + [config.gcn_hidden] * config.gcn_layers
        self.gcn = nn.ModuleList([GCNLayer(i, o) for i, o in zip(dims[:-1], dims[1:])])
        self.pool = TopKPooling(config.gcn_hidden, config.scorer_hidden, config.topk_ratio, config.temperature)
        self.function_projection = nn.Linear(self.slots * config.gcn_hidden, config.func_dim)
        self.head = ProgramHead(config)

    def encode_functions(self, features: torch.Tensor, adjacency: torch.Tensor):
        """
        Args:
            features: (B, p, n, n) token ids, column b = block b
            adjacency: (B, p, n, n)

        Returns:
            (function embeddings (B, p, func_dim), function mask (B, p), alpha (B, p, n))
        """
        batch, p, n_instr, n_blocks = features.shape
        if n_blocks != self.n_blk:
            raise ModelError(f"Model was built for {self.n_blk} blocks per function, input has {n_blocks}")
        blocks = features.transpose(-1, -2).reshape(batch * p * n_blocks, n_instr)
        block_mask = (blocks != PAD_ID).any(dim=-1).view(batch * p, n_blocks)
        function_mask = block_mask.view(batch, p, n_blocks).any(dim=-1)

        h = self.block_encoder(self.embedding(blocks)).view(batch * p, n_blocks, -1)
        norm_adjacency = normalize_adjacency(adjacency.reshape(batch * p, n_blocks, n_blocks).to(h.dtype))
        for layer in self.gcn:
            h = layer(h, norm_adjacency)

        selected, alpha, _ = self.pool(h, block_mask)
        functions = self.function_projection(selected.flatten(start_dim=1)).view(batch, p, -1)
        return functions, function_mask, alpha.view(batch, p, n_blocks)

    def forward_with_attention(self, features: torch.Tensor, adjacency: torch.Tensor):
        functions, mask, _ = self.encode_functions(features, adjacency)
        logits, scores = self.head(functions, mask)
        return logits, scores, mask

    def forward(self, features: torch.Tensor, adjacency: torch.Tensor) -> torch.Tensor:
        return self.forward_with_attention(features, adjacency)[0]


Model = Union[SequentialVulnModel, GraphVulnModel]


def build_model(config: ModelConfig, representation: Optional[RepresentationConfig] = None) -> Model:
    """Instantiate the architecture named by config.kind"""
    config.validate()
    if config.kind == 'sequential':
        model = SequentialVulnModel(config)
    else:
        representation = representation or RepresentationConfig()
        model = GraphVulnModel(config, representation.n_blk)
    param_count = sum(p.numel() for p in model.parameters())
    logger.info(f"Built {config.kind} model with {param_count:,} parameters")
    return model


# ---------------------------------------------------------------------------
# Functional entry points
# ---------------------------------------------------------------------------

def embed(ids: torch.Tensor, embedding: TokenEmbedding) -> torch.Tensor:
    return embedding(ids)


def conv_block(x: torch.Tensor, block: ConvBlock) -> torch.Tensor:
    return block(x)


def aggregate_program(attended: torch.Tensor, head: ProgramHead,
                      mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    return head.aggregate(attended, mask)


def probability(logits: torch.Tensor) -> torch.Tensor:
    """
    Sigmoid kept strictly inside (0, 1)

    float32 sigmoid rounds to exactly 1.0 above a logit of about 17, so the
    result is clamped one machine epsilon away from both ends.
    """
    eps = torch.finfo(logits.dtype).eps
    return torch.sigmoid(logits).clamp(eps, 1.0 - eps)


def classify(x_prog: torch.Tensor, head: ProgramHead) -> torch.Tensor:
    """Probability in (0, 1) from a program embedding"""
    return probability(head.ffn(x_prog).squeeze(-1))


def _batched(tensor: torch.Tensor, dims: int) -> Tuple[torch.Tensor, bool]:
    if tensor.dim() == dims - 1:
        return tensor.unsqueeze(0), True
    return tensor, False


def forward_sequential(model: SequentialVulnModel, ids: torch.Tensor,
                       return_attention: bool = False):
    """
    P_seq -> probability

    Accepts a single (n_seq, m_seq) matrix or a (B, n_seq, m_seq) batch.
    With return_attention the function attention matrix S is returned too.
    """
    ids, single = _batched(torch.as_tensor(ids).long(), 3)
    logits, scores, _ = model.forward_with_attention(ids)
    prob = probability(logits)
    if single:
        prob, scores = prob[0], scores[0]
    return (prob, scores) if return_attention else prob


def forward_graph(model: GraphVulnModel, features: torch.Tensor, adjacency: torch.Tensor,
                  return_attention: bool = False):
    """P_graph -> probability (single program or batch)"""
    features, single = _batched(torch.as_tensor(features).long(), 4)
    adjacency, _ = _batched(torch.as_tensor(adjacency), 4)
    dtype = next(model.parameters()).dtype
    logits, scores, _ = model.forward_with_attention(features, adjacency.to(dtype))
    prob = probability(logits)
    if single:
        prob, scores = prob[0], scores[0]
    return (prob, scores) if return_attention else prob


def model_inputs(model: Model, batch_inputs) -> Tuple[torch.Tensor, ...]:
    """Normalize a DataLoader input batch into forward() arguments"""
    dtype = next(model.parameters()).dtype
    if isinstance(model, GraphVulnModel):
        features, adjacency = batch_inputs
        return features.long(), adjacency.to(dtype)
    return (batch_inputs.long(),)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path: Union[str, Path], model: Model, representation: RepresentationConfig,
                    vocab: Vocabulary, extra: Optional[Dict] = None):
    """
    Write named little-endian float32 arrays plus a JSON metadata entry

    The metadata holds the model and representation configs and the
    vocabulary tokens in id order, so a checkpoint is self-contained.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    arrays = {
        name: tensor.detach().cpu().numpy().astype('<f4')
        for name, tensor in model.state_dict().items()
    }
    meta = {
        'format_version': CHECKPOINT_FORMAT_VERSION,
        'model_config': model.config.to_dict(),
        'representation_config': representation.to_dict(),
        'vocab_tokens': vocab.tokens_in_id_order(),
        'extra': extra or {},
    }
    with open(path, 'wb') as f:
        np.savez(f, **arrays, **{CHECKPOINT_META_KEY: np.array(json.dumps(meta))})
    logger.info(f"Saved {model.config.kind} checkpoint ({len(arrays)} arrays) to {path}")


def load_checkpoint(path: Union[str, Path]) -> Tuple[Model, RepresentationConfig, Vocabulary, Dict]:
    """
    Rebuild a model from a checkpoint

    Returns:
        (model in eval mode, representation config, vocabulary, extra metadata)

    Raises:
        CheckpointError: Missing file, bad metadata or mismatched arrays
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint not found: {path}")

    try:
        with np.load(path, allow_pickle=False) as archive:
            if CHECKPOINT_META_KEY not in archive.files:
                raise CheckpointError(f"{path}: missing {CHECKPOINT_META_KEY} entry")
            meta = json.loads(str(archive[CHECKPOINT_META_KEY]))
            arrays = {name: archive[name] for name in archive.files if name != CHECKPOINT_META_KEY}
    except (OSError, ValueError) as e:
        raise CheckpointError(f"Failed to read checkpoint {path}: {e}") from e

    if meta.get('format_version') != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {meta.get('format_version')}")

    try:
        model_config = ModelConfig.from_dict(meta['model_config'])
        representation = RepresentationConfig.from_dict(meta['representation_config'])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: invalid config metadata: {e}") from e

    vocab = Vocabulary.from_tokens(meta.get('vocab_tokens', []))
    if len(vocab) != model_config.vocab_size:
        raise CheckpointError(
            f"{path}: vocabulary has {len(vocab)} entries, model expects {model_config.vocab_size}"
        )

    model = build_model(model_config, representation)
    expected = set(model.state_dict())
    if set(arrays) != expected:
        missing = sorted(expected - set(arrays))
        unexpected = sorted(set(arrays) - expected)
        raise CheckpointError(f"{path}: parameter mismatch (missing={missing}, unexpected={unexpected})")

    try:
        model.load_state_dict({name: torch.from_numpy(np.asarray(a)) for name, a in arrays.items()})
    except RuntimeError as e:
        raise CheckpointError(f"{path}: {e}") from e

    model.eval()
    logger.info(f"Loaded {model_config.kind} checkpoint from {path}")
    return model, representation, vocab, meta.get('extra', {})
