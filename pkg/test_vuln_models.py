"""
Vulnerability Model Test Suite
==============================
Building blocks, both architectures and checkpoints
"""

import math
import random

import numpy as np
import pytest
import torch

from instruction_tokenizer import build_vocabulary
from representation import RepresentationConfig
from vuln_models import (CheckpointError, ConvBlock, FunctionAttention, GCNLayer, IdOutOfRange,
                         ModelConfig, ModelError, ProgramHead, TokenEmbedding, aggregate_program,
                         build_model, classify, conv_block, embed, forward_graph, forward_sequential,
                         function_attention, gcn_layer, load_checkpoint, masked_mean,
                         normalize_adjacency, probability, save_checkpoint, topk_pool, topk_slots)

VOCAB_SIZE = 20
TOY_REPRESENTATION = RepresentationConfig(n_seq=8, m_seq=3, n_blk=4, p=3)


def seq_input(seed=0, real_functions=2):
    g = torch.Generator().manual_seed(seed)
    ids = torch.randint(3, VOCAB_SIZE, (8, 3), generator=g)
    ids[:, real_functions:] = 0
    return ids


def graph_input(seed=0):
    g = torch.Generator().manual_seed(seed)
    features = torch.randint(3, VOCAB_SIZE, (3, 4, 4), generator=g)
    features[2] = 0
    adjacency = (torch.rand(3, 4, 4, generator=g) > 0.6).float()
    adjacency[2] = 0
    return features, adjacency


def test_embedding_lookup():
    embedding = TokenEmbedding(VOCAB_SIZE, 6)
    out = embed(torch.tensor([[0, 5, 5]]), embedding)
    assert torch.equal(out[0, 0], embedding.table.weight[0])
    assert torch.equal(out[0, 1], out[0, 2])
    assert out.abs().max() <= 1 / math.sqrt(6)

    with pytest.raises(IdOutOfRange):
        embedding(torch.tensor([VOCAB_SIZE]))


def test_embedding_gradient_is_one_hot():
    """Test: only the rows of looked-up ids receive gradient, once per occurrence"""
    embedding = TokenEmbedding(VOCAB_SIZE, 4)
    embed(torch.tensor([[3, 3, 7]]), embedding).sum().backward()
    grad = embedding.table.weight.grad
    assert torch.equal(grad[3], torch.full((4,), 2.0))
    assert torch.equal(grad[7], torch.ones(4))
    untouched = [i for i in range(VOCAB_SIZE) if i not in (3, 7)]
    assert torch.all(grad[untouched] == 0)


def test_conv_block_linearity_and_constant_input():
    block = ConvBlock(in_dim=3, filters=5, kernel_size=3, dropout=0.0)
    torch.nn.init.zeros_(block.conv.bias)
    zeros = torch.zeros(2, 10, 3)
    assert torch.equal(block.conv(zeros.transpose(1, 2)), torch.zeros(2, 5, 8))

    constant = torch.full((1, 10, 3), 0.7)
    conv_out = block.conv(constant.transpose(1, 2))
    assert torch.allclose(conv_out, conv_out[..., :1].expand_as(conv_out))

    block.eval()
    pooled = conv_block(constant, block)
    expected = torch.relu(block.norm(conv_out))[..., 0]
    assert torch.allclose(pooled, expected, atol=1e-6)


def test_conv_block_pads_short_sequences():
    block = ConvBlock(in_dim=4, filters=6, kernel_size=7, dropout=0.0).eval()
    assert conv_block(torch.randn(3, 2, 4), block).shape == (3, 6)


def test_gcn_single_node():
    h = torch.tensor([[2.0]])
    w = torch.tensor([[3.0]])
    assert gcn_layer(h, torch.zeros(1, 1), w).tolist() == [[6.0]]
    assert gcn_layer(h, torch.zeros(1, 1), -w).tolist() == [[0.0]]


def test_gcn_two_nodes_one_edge():
    """Test: one edge normalizes to a uniform 2x2 matrix"""
    adjacency = torch.tensor([[0.0, 1.0], [0.0, 0.0]])
    assert torch.allclose(normalize_adjacency(adjacency), torch.full((2, 2), 0.5))
    out = gcn_layer(torch.tensor([[1.0], [3.0]]), adjacency, torch.tensor([[1.0]]))
    assert torch.allclose(out, torch.tensor([[2.0], [2.0]]))


def test_normalized_adjacency_symmetric():
    g = torch.Generator().manual_seed(3)
    adjacency = (torch.rand(10, 16, 16, generator=g) > 0.8).double()
    norm = normalize_adjacency(adjacency)
    assert (norm - norm.transpose(-1, -2)).abs().max() < 1e-12

    layer = GCNLayer(4, 5)
    assert layer(torch.randn(10, 16, 4, dtype=torch.float32), norm.float()).shape == (10, 16, 5)


def test_topk_uniform_scores_prefer_low_indices():
    h = torch.arange(8, dtype=torch.float32).view(1, 4, 2)
    selected, alpha, order = topk_pool(h, torch.zeros(1, 4), ratio=0.5, temperature=0.1)
    assert torch.allclose(alpha, torch.full((1, 4), 0.25))
    assert order.tolist() == [[0, 1]]
    assert torch.allclose(selected, h[:, :2] * 0.25)


def test_topk_temperature_sharpening():
    h = torch.ones(1, 2, 1)
    _, alpha, _ = topk_pool(h, torch.tensor([[1.0, 0.0]]), ratio=0.5, temperature=0.1)
    assert alpha[0, 0].item() == pytest.approx(0.9999546, abs=1e-6)
    assert alpha[0, 1].item() == pytest.approx(4.54e-5, rel=1e-2)


def test_topk_cardinality():
    assert topk_slots(16, 0.1) == 2
    rng = random.Random(11)
    for _ in range(100):
        m = rng.randint(1, 64)
        ratio = rng.uniform(0.01, 1.0)
        scores = torch.randn(2, m)
        selected, alpha, order = topk_pool(torch.randn(2, m, 3), scores, ratio, 0.1)
        assert selected.shape[1] == order.shape[1] == max(1, math.ceil(ratio * m))
        assert torch.allclose(alpha.sum(dim=-1), torch.ones(2), atol=1e-6)


def test_topk_ignores_masked_nodes():
    scores = torch.tensor([[0.0, 5.0, 1.0]])
    mask = torch.tensor([[True, False, True]])
    _, alpha, order = topk_pool(torch.randn(1, 3, 2), scores, 0.3, 1.0, mask)
    assert alpha[0, 1] == 0
    assert order.tolist() == [[2]]


def test_attention_single_function():
    """Test: one function attends only to itself"""
    attention = FunctionAttention(dim=8, heads=2)
    x = torch.randn(1, 1, 8)
    attended, scores = function_attention(x, attention)
    assert scores.tolist() == [[[1.0]]]
    assert torch.allclose(attended, attention.output(attention.value(x)), atol=1e-6)


def test_attention_rows_normalized_with_mask():
    attention = FunctionAttention(dim=8, heads=2)
    mask = torch.tensor([[True, True, False, False]])
    _, scores = attention(torch.randn(1, 4, 8), mask)
    assert torch.allclose(scores.sum(dim=-1), torch.ones(1, 4), atol=1e-6)
    assert torch.all(scores[..., 2:] == 0)


def test_attention_permutation_equivariant():
    """Test: permuting the functions permutes the attended rows and both axes of S"""
    torch.manual_seed(4)
    attention = FunctionAttention(dim=8, heads=2).eval()
    x = torch.randn(1, 5, 8)
    mask = torch.tensor([[True, True, True, False, True]])
    perm = torch.tensor([4, 2, 0, 3, 1])

    attended, scores = attention(x, mask)
    attended_p, scores_p = attention(x[:, perm], mask[:, perm])

    assert torch.allclose(attended_p, attended[:, perm], atol=1e-6)
    assert torch.allclose(scores_p, scores[:, perm][:, :, perm], atol=1e-6)


def test_masked_mean_and_aggregation():
    row = torch.randn(5)
    same = row.expand(1, 3, 5)
    assert torch.allclose(masked_mean(same, None)[0], row)

    x = torch.stack([row, torch.randn(5), torch.randn(5)]).unsqueeze(0)
    mask = torch.tensor([[True, False, False]])
    assert torch.allclose(masked_mean(x, mask)[0], row)

    head = ProgramHead(ModelConfig.toy('graph', VOCAB_SIZE, func_dim=5, heads=1, prog_dim=4))
    assert torch.allclose(aggregate_program(x, head, mask), head.project(row.unsqueeze(0)))


def test_classify_zero_logit():
    head = ProgramHead(ModelConfig.toy('graph', VOCAB_SIZE))
    last = head.ffn[-1]
    torch.nn.init.zeros_(last.weight)
    torch.nn.init.zeros_(last.bias)
    assert classify(torch.randn(3, head.project.out_features), head).tolist() == [0.5, 0.5, 0.5]


def test_probability_never_reaches_bounds():
    """Test: float32 logits far past sigmoid saturation still give values strictly inside (0, 1)"""
    prob = probability(torch.tensor([1e4, 40.0, 17.5, 0.0, -40.0, -1e4]))
    assert prob.dtype == torch.float32
    assert torch.all(prob > 0) and torch.all(prob < 1)
    assert prob[3].item() == 0.5

    head = ProgramHead(ModelConfig.toy('graph', VOCAB_SIZE))
    torch.nn.init.constant_(head.ffn[-1].bias, 1e4)
    assert torch.all(classify(torch.randn(3, head.project.out_features), head) < 1)


@pytest.mark.parametrize('kind', ['sequential', 'graph'])
def test_forward_outputs_finite_inside_unit_interval(kind):
    torch.manual_seed(1)
    model = build_model(ModelConfig.toy(kind, VOCAB_SIZE), TOY_REPRESENTATION).eval()
    for seed in range(10):
        if kind == 'sequential':
            prob = forward_sequential(model, seq_input(seed, real_functions=1 + seed % 3))
        else:
            prob = forward_graph(model, *graph_input(seed))
        assert torch.isfinite(prob).all()
        assert 0 < prob.item() < 1


def test_config_rules():
    assert ModelConfig().seq_filter_count == 768
    assert ModelConfig(seq_kernel_sizes=(3, 5, 7)).seq_filter_count == 256
    with pytest.raises(ValueError):
        ModelConfig(gcn_layers=5).validate()
    with pytest.raises(ValueError):
        ModelConfig(func_dim=10, heads=4).validate()
    with pytest.raises(ValueError):
        ModelConfig.from_dict({'hidden': 3})


def test_sequential_forward():
    torch.manual_seed(0)
    model = build_model(ModelConfig.toy('sequential', VOCAB_SIZE)).eval()
    prob, scores = forward_sequential(model, seq_input(), return_attention=True)
    assert prob.dim() == 0 and 0 < prob.item() < 1
    assert scores.shape == (3, 3)
    assert torch.allclose(scores.sum(dim=-1), torch.ones(3), atol=1e-6)

    batch = torch.stack([seq_input(0), seq_input(1)])
    assert forward_sequential(model, batch).shape == (2,)


def test_sequential_multi_kernel():
    torch.manual_seed(0)
    model = build_model(ModelConfig.toy('sequential', VOCAB_SIZE, seq_kernel_sizes=(3, 5, 7))).eval()
    assert len(model.branches) == 3
    assert 0 < forward_sequential(model, seq_input()).item() < 1


@pytest.mark.parametrize('layers', [1, 2, 3, 4])
def test_graph_forward(layers):
    torch.manual_seed(0)
    config = ModelConfig.toy('graph', VOCAB_SIZE, gcn_layers=layers)
    model = build_model(config, TOY_REPRESENTATION).eval()
    assert len(model.gcn) == layers

    features, adjacency = graph_input()
    prob, scores = forward_graph(model, features, adjacency, return_attention=True)
    assert 0 < prob.item() < 1
    assert scores.shape == (3, 3)
    assert torch.all(scores[:, 2] == 0)


def test_graph_rejects_other_block_budget():
    model = build_model(ModelConfig.toy('graph', VOCAB_SIZE), TOY_REPRESENTATION).eval()
    with pytest.raises(ModelError):
        forward_graph(model, torch.ones(3, 5, 5, dtype=torch.long), torch.zeros(3, 5, 5))


def test_checkpoint_roundtrip(tmp_path):
    torch.manual_seed(0)
    vocab = build_vocabulary([f"{i:02X}" for i in range(VOCAB_SIZE - 3)])
    model = build_model(ModelConfig.toy('graph', len(vocab)), TOY_REPRESENTATION).eval()
    features, adjacency = graph_input()
    expected = forward_graph(model, features, adjacency)

    path = tmp_path / 'model.npz'
    save_checkpoint(path, model, TOY_REPRESENTATION, vocab, extra={'vuln_class': 'null_deref'})
    loaded, representation, loaded_vocab, extra = load_checkpoint(path)

    assert representation == TOY_REPRESENTATION
    assert loaded_vocab.tokens_in_id_order() == vocab.tokens_in_id_order()
    assert extra == {'vuln_class': 'null_deref'}
    assert not loaded.training
    assert torch.allclose(forward_graph(loaded, features, adjacency), expected, atol=1e-6)


def test_checkpoint_errors(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / 'missing.npz')

    no_meta = tmp_path / 'no_meta.npz'
    np.savez(no_meta, weight=np.zeros(3, dtype='<f4'))
    with pytest.raises(CheckpointError):
        load_checkpoint(no_meta)

    garbage = tmp_path / 'garbage.npz'
    garbage.write_bytes(b'not a zip archive')
    with pytest.raises(CheckpointError):
        load_checkpoint(garbage)


if __name__ == '__main__':
    raise SystemExit(pytest.main([__file__, '-v']))
