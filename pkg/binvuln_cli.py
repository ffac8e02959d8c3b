#!/usr/bin/env python3
"""
binvuln CLI
===========
Command-line interface for the binary vulnerability detection pipeline

Usage:
    python binvuln_cli.py decode <binary>                         # Dump functions, tokens, CFGs
    python binvuln_cli.py generate-corpus <dir>                   # Write a labeled C corpus
    python binvuln_cli.py build-dataset <manifest> <dir>          # Compile + encode a dataset
    python binvuln_cli.py train <dataset> <out> --kind graph      # Train a classifier
    python binvuln_cli.py eval <checkpoint>... <dataset>          # Test-split metrics
    python binvuln_cli.py inspect-attention <checkpoint> <binary> # Per-function attention
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from dotenv import load_dotenv
from tabulate import tabulate
from torch.utils.data import Subset

import desk_corpus
from cfg_builder import cfg_to_dot
from dataset_pipeline import (VULN_CLASSES, DatasetError, build_dataset, load_vocabulary)
from elf_loader import ELFLoadError
from representation import analyze_binary, represent_binary
from run_config import ConfigError, RunConfig, resolve_run_config, write_run_record
from sample_store import SampleDataset, SampleReader, SampleStoreError
from training import MetricsReport, evaluate, format_results_table, seed_everything, train
from vuln_models import (CheckpointError, GraphVulnModel, ModelConfig, build_model,
                         forward_graph, forward_sequential, load_checkpoint, save_checkpoint)
from x86_decoder import format_instruction

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT_ERROR = 2

INPUT_ERRORS = (ELFLoadError, ConfigError, DatasetError, CheckpointError,
                SampleStoreError, FileNotFoundError)


def variant_name(config: ModelConfig) -> str:
    """Result-table row label of a model configuration"""
    if config.kind == 'graph':
        return f"GCN {config.gcn_layers}-layer"
    sizes = config.seq_kernel_sizes
    if len(sizes) == 1:
        return f"Sequential k={sizes[0]}"
    return f"Sequential hybrid k={'/'.join(str(k) for k in sizes)}"


def _banner(title: str):
    print(f"\n{'='*80}")
    print(title)
    print(f"{'='*80}\n")


def _class_subset(reader: SampleReader, kind: str, vuln_class: Optional[str]):
    dataset = SampleDataset(reader, kind)
    if vuln_class is None:
        return dataset
    indices = [i for i, r in enumerate(reader.records) if r.vuln_class == vuln_class]
    return Subset(dataset, indices)


def evaluate_checkpoint(checkpoint: Path, dataset_dir: Path, split: str = 'test', threshold: float = 0.5,
                        vuln_class: Optional[str] = None) -> Tuple[ModelConfig, Dict[str, MetricsReport]]:
    """
    Metrics of one checkpoint on one split of a dataset, per vulnerability class

    Without an explicit class, a checkpoint trained on a single class is
    evaluated on that class and any other checkpoint on every class present.
    """
    model, representation, vocab, extra = load_checkpoint(checkpoint)
    dataset_vocab = load_vocabulary(dataset_dir)
    if dataset_vocab.tokens_in_id_order() != vocab.tokens_in_id_order():
        raise ConfigError(f"Vocabulary of {dataset_dir} does not match the checkpoint's")

    reader = SampleReader(dataset_dir / split)
    if reader.config is not None and reader.config != representation:
        raise ConfigError(
            f"Dataset representation {reader.config.to_dict()} differs from "
            f"checkpoint {representation.to_dict()}"
        )

    vuln_class = vuln_class or extra.get('vuln_class')
    classes = [vuln_class] if vuln_class else sorted({r.vuln_class for r in reader.records})
    reports = {}
    for name in classes:
        subset = _class_subset(reader, model.config.kind, name)
        if len(subset):
            reports[name] = evaluate(model, subset, threshold)

    if not reports:
        raise DatasetError(f"No samples to evaluate in {dataset_dir / split}")
    return model.config, reports


class BinVulnCLI:
    """CLI interface for the binvuln pipeline"""

    def __init__(self, argv: Optional[Sequence[str]] = None):
        self.argv = list(argv) if argv is not None else sys.argv[1:]

    def decode(self, binary: Path, as_json: bool = False, dot_dir: Optional[Path] = None):
        """Dump functions, instruction fields, tokens and CFG edges of one binary"""
        analyses = analyze_binary(binary)

        if dot_dir:
            dot_dir.mkdir(parents=True, exist_ok=True)
            for analysis in analyses:
                (dot_dir / f"{analysis.name}.dot").write_text(cfg_to_dot(analysis.cfg, analysis.name))
            run = resolve_run_config('decode', inputs={'binary': str(binary)}, output_dir=dot_dir)
            write_run_record(run, dot_dir, self.argv)

        if as_json:
            payload = {
                'binary': str(binary),
                'functions': [
                    {
                        'name': a.name,
                        'address': a.address,
                        'size': a.size,
                        'instructions': [
                            {
                                'offset': instr.offset,
                                'length': instr.total_len,
                                'fields': format_instruction(instr),
                                'token': token.text,
                                'branch_kind': instr.branch_kind.value,
                                'rel_target': instr.rel_target,
                            }
                            for instr, token in zip(a.instructions, a.tokens)
                        ],
                        'blocks': [
                            {
                                'index': block.index,
                                'start': block.start_offset,
                                'end': block.end_offset,
                                'instructions': len(block.instructions),
                            }
                            for block in a.cfg.blocks
                        ],
                        'edges': sorted([list(edge) for edge in a.cfg.edges]),
                    }
                    for a in analyses
                ],
            }
            print(json.dumps(payload, indent=2))
            return

        _banner(f"binvuln - Decode {binary}")
        for a in analyses:
            print(f"{a.name} @ 0x{a.address:x}  ({a.size} bytes, {len(a.instructions)} instructions, "
                  f"{len(a.cfg.blocks)} basic blocks)")
            block_of = {instr.offset: block.index for block in a.cfg.blocks for instr in block.instructions}
            table_data = [
                [f"0x{instr.offset:04x}", block_of.get(instr.offset, '-'), instr.total_len,
                 format_instruction(instr), token.text]
                for instr, token in zip(a.instructions, a.tokens)
            ]
            headers = ['Offset', 'Block', 'Len', 'Fields', 'Token']
            print(tabulate(table_data, headers=headers, tablefmt='grid'))
            edges = ' '.join(f"({s},{t})" for s, t in sorted(a.cfg.edges)) or 'none'
            print(f"CFG edges: {edges}\n")

        print(f"Total functions: {len(analyses)}")

    def generate_corpus(self, output_dir: Path, per_class: int, classes: List[str], seed: int):
        """Write a labeled desk-scale C corpus"""
        _banner("binvuln - Generate Corpus")
        manifest = desk_corpus.generate_corpus(output_dir, per_class, classes, seed)
        print(f"✓ Generated {per_class * len(classes)} programs")
        print(f"  Manifest: {manifest}")

    def build_dataset(self, run: RunConfig, manifest: Path, classes: List[str], times_compiled: str,
                      balance: bool, workers: Optional[int], compiler: Optional[str]):
        """Split, compile and encode a labeled source corpus"""
        _banner("binvuln - Build Dataset")
        output_dir = Path(run.output_dir)
        summary = build_dataset(
            manifest, output_dir,
            classes=classes,
            times_compiled=times_compiled,
            representation=run.representation,
            compiler=compiler,
            seed=run.seed,
            workers=workers,
            balance_classes=balance,
        )
        write_run_record(run, output_dir, self.argv, extra={'dataset': summary.to_dict()})

        table_data = [
            [c, summary.sources.get(c, 0), summary.times_compiled.get(c, '-'), summary.binaries.get(c, 0)]
            for c in summary.classes
        ]
        print(tabulate(table_data, headers=['Class', 'Sources', 'x Compiled', 'Binaries'], tablefmt='grid'))
        print(f"\nSamples: {summary.samples}")
        print(f"Vocabulary size: {summary.vocab_size}")
        if summary.dropped_sources:
            print(f"⚠ Dropped sources (compile failures): {len(summary.dropped_sources)}")
        if summary.skipped_binaries:
            print(f"⚠ Skipped binaries (unreadable ELF): {len(summary.skipped_binaries)}")
        print(f"\n✓ Dataset written to {output_dir}")

    def train(self, run: RunConfig, dataset_dir: Path, vuln_class: Optional[str]) -> List[Path]:
        """
        Train one classifier per vulnerability class on a built dataset

        With several classes in the dataset and no --class, each class gets
        its own run directory under the output directory.
        """
        train_reader = SampleReader(dataset_dir / 'train')
        val_reader = SampleReader(dataset_dir / 'val')
        if train_reader.config is None:
            raise DatasetError(f"Training split in {dataset_dir} is empty")
        run.representation = train_reader.config
        vocab = load_vocabulary(dataset_dir)
        run.model.vocab_size = len(vocab)

        classes = [vuln_class] if vuln_class else sorted({r.vuln_class for r in train_reader.records})
        output_dir = Path(run.output_dir)
        checkpoints = []
        for name in classes:
            class_dir = output_dir if len(classes) == 1 else output_dir / name
            checkpoints.append(self._train_class(run, train_reader, val_reader, vocab, name, class_dir))

        if len(checkpoints) > 1:
            print(f"\n✓ Trained {len(checkpoints)} classifiers: " + ', '.join(str(c) for c in checkpoints))
        return checkpoints

    def _train_class(self, run: RunConfig, train_reader: SampleReader, val_reader: SampleReader,
                     vocab, vuln_class: str, output_dir: Path) -> Path:
        _banner(f"binvuln - Train {run.model.kind} model on {vuln_class}")
        kind = run.model.kind
        train_set = _class_subset(train_reader, kind, vuln_class)
        val_set = _class_subset(val_reader, kind, vuln_class)
        if len(train_set) == 0 or len(val_set) == 0:
            raise DatasetError(f"No samples for class {vuln_class!r} in train/val splits")

        seed_everything(run.seed)
        model = build_model(run.model, run.representation)
        model, history = train(model, train_set, val_set, run.train)

        checkpoint = output_dir / 'checkpoint.npz'
        save_checkpoint(checkpoint, model, run.representation, vocab,
                        extra={'vuln_class': vuln_class, 'best_epoch': history.best_epoch})
        history.save(output_dir / 'history.json')
        write_run_record(run, output_dir, self.argv, extra={'vuln_class': vuln_class})

        frame = history.to_frame()
        if not frame.empty:
            print(tabulate(frame, headers='keys', tablefmt='grid', showindex=False, floatfmt='.5f'))
        print(f"\nBest epoch: {history.best_epoch} (val loss {history.best_val_loss:.5f})")
        print(f"✓ Checkpoint saved to {checkpoint}")
        return checkpoint

    def evaluate(self, checkpoints: Sequence[Path], dataset_dir: Path, split: str, threshold: float,
                 output_dir: Optional[Path], vuln_class: Optional[str]) -> Dict[str, Dict[str, MetricsReport]]:
        """
        Metrics per model variant and vulnerability class on a held-out split

        Every checkpoint gets a metrics.json beside it (or in --output when
        there is only one); results.json holds the whole variant x class grid.
        """
        _banner("binvuln - Evaluate")
        results: Dict[str, Dict[str, MetricsReport]] = {}
        configs = []
        for checkpoint in checkpoints:
            config, reports = evaluate_checkpoint(checkpoint, dataset_dir, split, threshold, vuln_class)
            variant = variant_name(config)
            configs.append(config)
            for name, report in reports.items():
                if name in results.get(variant, {}):
                    logger.warning(f"{variant} on {name} evaluated twice; keeping {checkpoint}")
                results.setdefault(variant, {})[name] = report
                logger.info(f"{variant} {name}: accuracy {report.accuracy:.4f}, F1 {report.f1:.4f}")

            metrics_dir = output_dir if output_dir and len(checkpoints) == 1 else checkpoint.parent
            metrics_dir.mkdir(parents=True, exist_ok=True)
            metrics = {
                'checkpoint': str(checkpoint),
                'split': split,
                'threshold': threshold,
                'variant': variant,
                'classes': {name: r.to_dict() for name, r in reports.items()},
            }
            with open(metrics_dir / 'metrics.json', 'w') as f:
                json.dump(metrics, f, indent=2)

        print(format_results_table(results))
        table_data = [[variant, name, r.tp, r.fp, r.fn, r.tn, f"{r.precision:.4f}", f"{r.recall:.4f}"]
                      for variant, per_class in results.items() for name, r in per_class.items()]
        print(tabulate(table_data, headers=['Model', 'Class', 'TP', 'FP', 'FN', 'TN', 'Precision', 'Recall'],
                       tablefmt='grid'))

        record_dir = output_dir or checkpoints[0].parent
        record_dir.mkdir(parents=True, exist_ok=True)
        with open(record_dir / 'results.json', 'w') as f:
            json.dump({
                'dataset': str(dataset_dir),
                'split': split,
                'threshold': threshold,
                'checkpoints': [str(c) for c in checkpoints],
                'variants': {v: {name: r.to_dict() for name, r in per_class.items()}
                             for v, per_class in results.items()},
            }, f, indent=2)
        run = resolve_run_config('eval', inputs={'checkpoint': str(checkpoints[0]), 'dataset': str(dataset_dir)},
                                 output_dir=record_dir, base_model=configs[0].to_dict())
        run.train.threshold = threshold
        write_run_record(run, record_dir, self.argv,
                         extra={'split': split, 'checkpoints': [str(c) for c in checkpoints]})
        print(f"\n✓ Results saved to {record_dir / 'results.json'}")
        return results

    def inspect_attention(self, checkpoint: Path, binary: Path, as_json: bool = False):
        """Rank a binary's functions by the attention they receive"""
        scores = attention_scores(checkpoint, binary)

        if as_json:
            print(json.dumps([{'function': name, 'score': score} for name, score in scores], indent=2))
            return

        _banner(f"binvuln - Attention over functions of {binary}")
        print(tabulate([[i + 1, name, f"{score:.6f}"] for i, (name, score) in enumerate(scores)],
                       headers=['Rank', 'Function', 'Score'], tablefmt='grid'))


def attention_scores(checkpoint: Path, binary: Path) -> List:
    """
    Per-function attention scores of one binary, highest first

    A function's score is the mean attention it receives over all real
    query functions, so the scores of a program sum to 1.
    """
    model, representation, vocab, _ = load_checkpoint(checkpoint)
    analyses = analyze_binary(binary)
    tensor = represent_binary(binary, vocab, model.config.kind, representation)

    with torch.no_grad():
        if isinstance(model, GraphVulnModel):
            _, S = forward_graph(model, torch.from_numpy(tensor.features),
                                 torch.from_numpy(tensor.adjacency), return_attention=True)
        else:
            _, S = forward_sequential(model, torch.from_numpy(tensor.matrix), return_attention=True)

    mask = tensor.function_mask()
    real = np.flatnonzero(mask)
    if real.size == 0:
        return []
    S = S.double().numpy()
    column_scores = S[real].mean(axis=0)

    names = [a.name for a in analyses]
    ranked = [(names[j] if j < len(names) else f"<function {j}>", float(column_scores[j])) for j in real]
    ranked.sort(key=lambda item: item[1], reverse=True)
    return ranked


def _representation_overrides(args) -> Dict:
    return {'n_seq': args.n_seq, 'm_seq': args.m_seq, 'n_blk': args.n_blk, 'p': args.p}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='JSON config file')
    common.add_argument('--seed', type=int, help='Random seed (default: 0)')
    common.add_argument('-v', '--verbose', action='store_true', help='Debug logging')

    parser = argparse.ArgumentParser(
        description='Binary vulnerability detection over x86-64 instruction tokens',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Dump the decoded functions and CFGs of a binary
  %(prog)s decode build/hello
  %(prog)s decode build/hello --json
  %(prog)s decode build/hello --dot cfgs/

  # Generate a corpus, build a dataset, train and evaluate
  %(prog)s generate-corpus corpus/ --classes null_deref --per-class 400
  %(prog)s build-dataset corpus/manifest.jsonl data/ --classes null_deref --times-compiled 2
  %(prog)s train data/ runs/gcn2 --kind graph --gcn-layers 2
  %(prog)s train data/ runs/seq7 --kind sequential --kernel-sizes 7
  %(prog)s eval runs/gcn2/checkpoint.npz runs/seq7/checkpoint.npz data/ --output results/

  # Which functions drive a prediction
  %(prog)s inspect-attention runs/gcn2/checkpoint.npz build/sample

Environment Variables:
  BINVULN_CC          C compiler for build-dataset (default: gcc)
  BINVULN_LOG_LEVEL   Logging level (default: INFO)
  BINVULN_WORKERS     Parallel compile jobs (default: 4)
        """
    )

    subparsers = parser.add_subparsers(dest='command', help='Command to execute')

    # Decode command
    decode_parser = subparsers.add_parser('decode', parents=[common], help='Dump functions, tokens and CFGs')
    decode_parser.add_argument('binary', type=Path, help='x86-64 ELF binary')
    decode_parser.add_argument('--json', action='store_true', help='Machine-readable output')
    decode_parser.add_argument('--dot', type=Path, metavar='DIR', help='Write one DOT file per function')

    # Generate-corpus command
    corpus_parser = subparsers.add_parser('generate-corpus', parents=[common], help='Write a labeled C corpus')
    corpus_parser.add_argument('output_dir', type=Path, help='Output directory')
    corpus_parser.add_argument('--per-class', type=int, default=400, help='Programs per class (default: 400)')
    corpus_parser.add_argument('--classes', nargs='+', choices=VULN_CLASSES, default=list(VULN_CLASSES))

    # Build-dataset command
    build_parser_ = subparsers.add_parser('build-dataset', parents=[common], help='Compile and encode a corpus')
    build_parser_.add_argument('manifest', type=Path, help='Source manifest (JSONL)')
    build_parser_.add_argument('output_dir', type=Path, help='Dataset output directory')
    build_parser_.add_argument('--classes', nargs='+', choices=VULN_CLASSES, default=list(VULN_CLASSES))
    build_parser_.add_argument('--times-compiled', default='auto',
                               help="Builds per source, 1-6, or 'auto' to equalize classes (default: auto)")
    build_parser_.add_argument('--downsample', action='store_true', help='Equalize class sizes after compiling')
    build_parser_.add_argument('--workers', type=int, help='Parallel compile jobs (default: BINVULN_WORKERS or 4)')
    build_parser_.add_argument('--compiler', help='C compiler (default: BINVULN_CC or gcc)')
    build_parser_.add_argument('--n-seq', type=int, help='Instructions per function, sequential (default: 256)')
    build_parser_.add_argument('--m-seq', type=int, help='Functions per program, sequential (default: 16)')
    build_parser_.add_argument('--n-blk', type=int, help='Instructions per block = blocks per function (default: 16)')
    build_parser_.add_argument('--p', type=int, help='Functions per program, graph (default: 16)')

    # Train command
    train_parser = subparsers.add_parser('train', parents=[common], help='Train a classifier')
    train_parser.add_argument('dataset_dir', type=Path, help='Dataset directory from build-dataset')
    train_parser.add_argument('output_dir', type=Path, help='Run output directory')
    train_parser.add_argument('--kind', choices=['sequential', 'graph'], help='Architecture (default: graph)')
    train_parser.add_argument('--class', dest='vuln_class', choices=VULN_CLASSES, help='Train on one class only')
    train_parser.add_argument('--kernel-sizes', type=int, nargs='+', help='Sequential CNN filter sizes (default: 7)')
    train_parser.add_argument('--gcn-layers', type=int, choices=[1, 2, 3, 4], help='GCN depth (default: 2)')
    train_parser.add_argument('--max-epochs', type=int, help='Epoch budget (default: 50)')
    train_parser.add_argument('--batch-size', type=int, help='Batch size (default: 32 sequential / 8 graph)')
    train_parser.add_argument('--lr', type=float, help='Learning rate (default: 5e-5)')
    train_parser.add_argument('--toy', action='store_true', help='Small model dimensions for smoke runs')

    # Eval command
    eval_parser = subparsers.add_parser('eval', parents=[common], help='Evaluate one or more checkpoints')
    eval_parser.add_argument('checkpoints', type=Path, nargs='+', help='Checkpoints from train')
    eval_parser.add_argument('dataset_dir', type=Path, help='Dataset directory')
    eval_parser.add_argument('--split', choices=['train', 'val', 'test'], default='test')
    eval_parser.add_argument('--class', dest='vuln_class', choices=VULN_CLASSES, help='Evaluate one class only')
    eval_parser.add_argument('--threshold', type=float, default=0.5, help='Decision threshold (default: 0.5)')
    eval_parser.add_argument('--output', type=Path, help='Directory for results.json (default: first checkpoint dir)')

    # Inspect-attention command
    inspect_parser = subparsers.add_parser('inspect-attention', parents=[common],
                                           help='Per-function attention scores')
    inspect_parser.add_argument('checkpoint', type=Path, help='Checkpoint from train')
    inspect_parser.add_argument('binary', type=Path, help='x86-64 ELF binary')
    inspect_parser.add_argument('--json', action='store_true', help='Machine-readable output')

    return parser


def run_command(args, cli: BinVulnCLI):
    if args.command == 'decode':
        if not args.binary.exists():
            raise FileNotFoundError(f"File not found: {args.binary}")
        cli.decode(args.binary, args.json, args.dot)

    elif args.command == 'generate-corpus':
        run = resolve_run_config('generate-corpus', args.config, seed=args.seed, output_dir=args.output_dir)
        cli.generate_corpus(args.output_dir, args.per_class, args.classes, run.seed)
        write_run_record(run, args.output_dir, cli.argv)

    elif args.command == 'build-dataset':
        if args.times_compiled != 'auto':
            try:
                times = int(args.times_compiled)
            except ValueError:
                raise ConfigError(f"--times-compiled must be 1-6 or 'auto', got {args.times_compiled!r}")
            if not 1 <= times <= 6:
                raise ConfigError(f"--times-compiled must be 1-6, got {times}")
        run = resolve_run_config(
            'build-dataset', args.config,
            overrides={'representation': _representation_overrides(args)},
            seed=args.seed, inputs={'manifest': args.manifest}, output_dir=args.output_dir,
        )
        cli.build_dataset(run, args.manifest, args.classes, args.times_compiled,
                          args.downsample, args.workers, args.compiler)

    elif args.command == 'train':
        kind = args.kind
        base_model = None
        if args.toy:
            base_model = ModelConfig.toy(kind or 'graph', 3).to_dict()
            base_model.pop('kind')
            base_model.pop('vocab_size')
        overrides = {
            'model': {
                'kind': kind,
                'seq_kernel_sizes': tuple(args.kernel_sizes) if args.kernel_sizes else None,
                'gcn_layers': args.gcn_layers,
            },
            'train': {
                'max_epochs': args.max_epochs,
                'batch_size': args.batch_size,
                'learning_rate': args.lr,
            },
        }
        run = resolve_run_config(
            'train', args.config, overrides=overrides, seed=args.seed,
            inputs={'dataset': args.dataset_dir}, output_dir=args.output_dir,
            verbose=args.verbose, base_model=base_model,
        )
        cli.train(run, args.dataset_dir, args.vuln_class)

    elif args.command == 'eval':
        for path in (*args.checkpoints, args.dataset_dir):
            if not path.exists():
                raise FileNotFoundError(f"File not found: {path}")
        if not 0 < args.threshold < 1:
            raise ConfigError(f"--threshold must be in (0, 1), got {args.threshold}")
        cli.evaluate(args.checkpoints, args.dataset_dir, args.split, args.threshold,
                     args.output, args.vuln_class)

    elif args.command == 'inspect-attention':
        for path in (args.checkpoint, args.binary):
            if not path.exists():
                raise FileNotFoundError(f"File not found: {path}")
        cli.inspect_attention(args.checkpoint, args.binary, args.json)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point; returns the process exit code"""
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_INPUT_ERROR

    level = 'DEBUG' if args.verbose else os.environ.get('BINVULN_LOG_LEVEL', 'INFO')
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - [%(levelname)s] - %(message)s'
    )

    cli = BinVulnCLI(argv)
    try:
        run_command(args, cli)
    except INPUT_ERRORS as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except Exception as e:
        logger.debug("Unhandled failure", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
