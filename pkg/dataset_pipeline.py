"""
Dataset Pipeline
================
Builds labeled binary datasets from labeled C sources:

    1. group verifier violations into the three vulnerability classes
    2. balance labels 50/50 and split 80/10/10 per class (before compiling);
       a clean source shared by several classes keeps one split in all of them
    3. compile every source under randomly drawn optimization flags
    4. optionally downsample classes to equal size at source granularity
    5. analyze binaries, build the train-split vocabulary, write sample stores

Source manifest rows (JSONL):
    {"source_id": "nd_0001", "path": "src/nd_0001.c", "violations": ["dereference failure: NULL pointer"]}

An empty violation list marks a source that verified clean.
"""

import json
import logging
import math
import os
import random
import re
import shlex
import shutil
import subprocess
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import pandas as pd
from tqdm import tqdm

from elf_loader import ELFLoadError
from instruction_tokenizer import Vocabulary, build_vocabulary
from representation import (RepresentationConfig, analyze_binary, build_graph,
                            build_sequential, encode_functions)
from sample_store import SampleWriter

logger = logging.getLogger(__name__)

VULN_CLASSES = ('null_deref', 'array_bound', 'int_overflow')
OPT_FLAGS = ('-O0', '-O1', '-O2', '-O3', '-Os', '-Ofast')
SPLITS = ('train', 'val', 'test')
SPLIT_FRACTIONS = (0.8, 0.1, 0.1)
VULNERABLE = 'vulnerable'
SAFE = 'safe'

DEFAULT_COMPILER = 'gcc'
COMPILE_TIMEOUT = 120

# Verifier message patterns per class, checked in order
VIOLATION_PATTERNS = [
    ('array_bound', re.compile(r'array bounds?|(upper|lower) bound|out[- ]of[- ]bounds?', re.IGNORECASE)),
    ('int_overflow', re.compile(r'arithmetic overflow on (add|sub|mul)\b', re.IGNORECASE)),
    ('null_deref', re.compile(r'null[- ]pointer|null[- ]deref', re.IGNORECASE)),
]


class DatasetError(Exception):
    """Base exception for dataset pipeline errors"""
    pass


class CompilerNotFound(DatasetError):
    """Configured C compiler is not on PATH"""
    pass


class CompileFailed(DatasetError):
    """One source failed to compile under one flag"""

    def __init__(self, source_id: str, command: str, stderr: str):
        self.source_id = source_id
        self.command = command
        self.stderr = stderr
        super().__init__(f"Compilation of {source_id} failed: {command}\n{stderr.strip()[:500]}")


class ViolationRejected(DatasetError):
    """Verifier message outside the three vulnerability classes"""

    def __init__(self, raw: str, reason: str):
        self.raw = raw
        self.reason = reason
        super().__init__(f"Rejected violation {raw!r}: {reason}")


class DataLeakage(DatasetError):
    """A source's binaries appear in more than one split"""
    pass


@dataclass
class GroupedViolations:
    classes: List[str] = field(default_factory=list)
    rejected: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def primary(self) -> Optional[str]:
        return self.classes[0] if self.classes else None


@dataclass
class LabeledSource:
    source_id: str
    path: str
    label: str


@dataclass
class SourceEntry:
    """One row of a SourceManifest"""
    source_id: str
    path: str
    vuln_class: str
    label: str
    split: str


@dataclass
class BinaryEntry:
    """One row of a BinaryManifest"""
    binary_path: str
    source_id: str
    opt_flag: str
    vuln_class: str
    label: str
    split: str
    command: str

    @property
    def sample_id(self) -> str:
        return f"{self.vuln_class}__{self.source_id}__{self.opt_flag.lstrip('-')}"


@dataclass
class CompileReport:
    binaries: List[BinaryEntry] = field(default_factory=list)
    failures: List[CompileFailed] = field(default_factory=list)

    @property
    def dropped_sources(self) -> List[str]:
        return sorted({f.source_id for f in self.failures})


# ---------------------------------------------------------------------------
# Labels
# ---------------------------------------------------------------------------

def group_violation(raw: str) -> str:
    """
    Map one verifier message to its vulnerability class

    Upper/lower bound variants collapse into array_bound and overflows on
    ADD/SUB/MUL into int_overflow.

    Raises:
        ViolationRejected: Message belongs to none of the classes
    """
    for vuln_class, pattern in VIOLATION_PATTERNS:
        if pattern.search(raw):
            return vuln_class
    if re.search(r'overflow', raw, re.IGNORECASE):
        raise ViolationRejected(raw, 'overflow on an operation other than ADD/SUB/MUL')
    raise ViolationRejected(raw, 'not one of ' + ', '.join(VULN_CLASSES))


def group_violations(raw_labels: Iterable[str]) -> GroupedViolations:
    """Group a source's messages; classes in first-seen order, rejects kept with reasons"""
    grouped = GroupedViolations()
    for raw in raw_labels:
        try:
            vuln_class = group_violation(raw)
        except ViolationRejected as e:
            grouped.rejected.append((e.raw, e.reason))
            continue
        if vuln_class not in grouped.classes:
            grouped.classes.append(vuln_class)
    return grouped


def label_sources(rows: Sequence[Dict], vuln_class: str) -> List[LabeledSource]:
    """
    Class subset of a raw source manifest

    Sources with a violation of vuln_class are vulnerable; sources with no
    violations at all are safe; anything else is left out of this class.
    A vuln_class column restricts a row to that class subset, and rows that
    also carry a label are taken as-is.
    """
    labeled = []
    for row in rows:
        if row.get('vuln_class') and row['vuln_class'] != vuln_class:
            continue
        if row.get('label') in (VULNERABLE, SAFE):
            labeled.append(LabeledSource(row['source_id'], row['path'], row['label']))
            continue

        violations = row.get('violations') or []
        if not violations:
            labeled.append(LabeledSource(row['source_id'], row['path'], SAFE))
        elif vuln_class in group_violations(violations).classes:
            labeled.append(LabeledSource(row['source_id'], row['path'], VULNERABLE))
    return labeled


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

def split_sizes(count: int) -> Tuple[int, int, int]:
    train = round(count * SPLIT_FRACTIONS[0])
    val = round(count * SPLIT_FRACTIONS[1])
    return train, val, count - train - val


def make_splits(sources: Sequence[LabeledSource], vuln_class: str, seed: int = 0,
                assigned: Optional[Dict[str, str]] = None) -> List[SourceEntry]:
    """
    Balance labels 50/50 by downsampling the majority, then split 80/10/10

    Args:
        sources: Labeled sources of one class subset
        vuln_class: Class name recorded on each entry
        seed: Shuffle seed
        assigned: source_id -> split fixed by earlier class subsets; sources
            found here keep their split and the rest fill what is left of
            each split's quota. Updated in place with this subset's choices.

    Returns:
        SourceManifest entries
    """
    seen = Counter(s.source_id for s in sources)
    duplicates = [sid for sid, n in seen.items() if n > 1]
    if duplicates:
        raise DatasetError(f"Duplicate source ids in {vuln_class} subset: {duplicates[:5]}")
    if assigned is None:
        assigned = {}

    rng = random.Random(seed)
    vulnerable = sorted((s for s in sources if s.label == VULNERABLE), key=lambda s: s.source_id)
    safe = sorted((s for s in sources if s.label == SAFE), key=lambda s: s.source_id)
    keep = min(len(vulnerable), len(safe))
    if len(vulnerable) > keep:
        vulnerable = rng.sample(vulnerable, keep)
    if len(safe) > keep:
        safe = rng.sample(safe, keep)

    retained = vulnerable + safe
    rng.shuffle(retained)
    quota = dict(zip(SPLITS, split_sizes(len(retained))))
    fixed = 0
    for source in retained:
        if source.source_id in assigned:
            quota[assigned[source.source_id]] -= 1
            fixed += 1

    entries = []
    for source in retained:
        split = assigned.get(source.source_id)
        if split is None:
            split = next((name for name in SPLITS if quota[name] > 0), None) or max(SPLITS, key=quota.get)
            quota[split] -= 1
            assigned[source.source_id] = split
        entries.append(SourceEntry(source.source_id, source.path, vuln_class, source.label, split))

    sizes = Counter(e.split for e in entries)
    logger.info(
        f"{vuln_class}: kept {len(retained)} of {len(sources)} sources ({keep} per label), "
        f"splits {sizes['train']}/{sizes['val']}/{sizes['test']}"
        + (f", {fixed} split(s) inherited from other classes" if fixed else "")
    )
    return entries


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------

def resolve_compiler(compiler: Optional[str] = None) -> str:
    """Compiler path from the argument, BINVULN_CC, or gcc"""
    name = compiler or os.getenv('BINVULN_CC') or DEFAULT_COMPILER
    resolved = shutil.which(name)
    if resolved is None:
        raise CompilerNotFound(f"C compiler not found: {name} (set BINVULN_CC to override)")
    return resolved


def draw_flags(source_id: str, times_compiled: int, seed: int) -> List[str]:
    """Distinct flags drawn without replacement, reproducible per source"""
    if not 1 <= times_compiled <= len(OPT_FLAGS):
        raise ValueError(f"times_compiled must be in 1..{len(OPT_FLAGS)}, got {times_compiled}")
    return random.Random(f"{seed}:{source_id}").sample(OPT_FLAGS, times_compiled)


def compile_factors(class_counts: Dict[str, int], pool_size: int = len(OPT_FLAGS)) -> Dict[str, int]:
    """
    times_compiled per class so every class reaches smallest-class x pool_size

    e.g. {100436, 25068, 39996} sources -> x2, x6, x4
    """
    populated = {c: n for c, n in class_counts.items() if n > 0}
    if not populated:
        return {c: 1 for c in class_counts}
    target = min(populated.values()) * pool_size
    return {
        c: min(pool_size, max(1, math.ceil(target / n))) if n else 1
        for c, n in class_counts.items()
    }


def compile_source(compiler: str, source: Union[str, Path], flag: str,
                   output: Union[str, Path], source_id: Optional[str] = None) -> str:
    """
    Compile one source; returns the command line

    Raises:
        CompileFailed: Non-zero exit, timeout or OS error
    """
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    argv = [compiler, flag, '-w', '-o', str(output), str(source)]
    command = ' '.join(shlex.quote(a) for a in argv)
    source_id = source_id or Path(source).stem

    try:
        result = subprocess.run(argv, capture_output=True, text=True, timeout=COMPILE_TIMEOUT)
    except subprocess.TimeoutExpired as e:
        raise CompileFailed(source_id, command, f"timed out after {COMPILE_TIMEOUT}s") from e
    except OSError as e:
        raise CompileFailed(source_id, command, str(e)) from e

    if result.returncode != 0:
        raise CompileFailed(source_id, command, result.stderr)
    return command


def compile_corpus(manifest: Sequence[SourceEntry], times_compiled: Union[int, Dict[str, int]],
                   output_dir: Union[str, Path], compiler: Optional[str] = None,
                   seed: int = 0, workers: Optional[int] = None,
                   show_progress: bool = True) -> CompileReport:
    """
    Compile every source times_compiled times with distinct random flags

    Args:
        manifest: SourceManifest entries
        times_compiled: 1..6, or a per-class mapping
        output_dir: Binary output directory
        compiler: Compiler name/path (BINVULN_CC or gcc when None)
        seed: Flag-draw seed
        workers: Pool size (BINVULN_WORKERS or 4 when None)

    Returns:
        CompileReport; a source with any failed build is dropped entirely

    Raises:
        CompilerNotFound: Compiler not on PATH
    """
    compiler = resolve_compiler(compiler)
    workers = workers or int(os.getenv('BINVULN_WORKERS', '4'))
    output_dir = Path(output_dir)

    jobs = []
    for entry in manifest:
        count = times_compiled[entry.vuln_class] if isinstance(times_compiled, dict) else times_compiled
        for flag in draw_flags(entry.source_id, count, seed):
            binary = output_dir / entry.vuln_class / f"{entry.source_id}_{flag.lstrip('-')}"
            jobs.append((entry, flag, binary))

    logger.info(f"Compiling {len(manifest)} sources into {len(jobs)} binaries with {workers} workers ({compiler})")

    built: Dict[Tuple[str, str, str], BinaryEntry] = {}
    failed = set()
    report = CompileReport()

    with ThreadPoolExecutor(max_workers=workers) as executor:
        future_to_job = {
            executor.submit(compile_source, compiler, entry.path, flag, binary, entry.source_id):
                (entry, flag, binary)
            for entry, flag, binary in jobs
        }
        for future in tqdm(as_completed(future_to_job), total=len(jobs), desc='compile',
                           unit='bin', disable=not show_progress):
            entry, flag, binary = future_to_job[future]
            try:
                command = future.result()
            except CompileFailed as e:
                logger.warning(f"✗ {entry.source_id} {flag}: compile failed")
                report.failures.append(e)
                failed.add((entry.vuln_class, entry.source_id))
                continue
            built[(entry.vuln_class, entry.source_id, flag)] = BinaryEntry(
                binary_path=str(binary),
                source_id=entry.source_id,
                opt_flag=flag,
                vuln_class=entry.vuln_class,
                label=entry.label,
                split=entry.split,
                command=command,
            )

    # manifest order follows job order, independent of completion order
    for entry, flag, _ in jobs:
        if (entry.vuln_class, entry.source_id) not in failed:
            report.binaries.append(built[(entry.vuln_class, entry.source_id, flag)])

    if failed:
        logger.warning(f"Dropped {len(failed)} source(s) with compile failures from all splits")
    logger.info(f"Built {len(report.binaries)} binaries")
    return report


# ---------------------------------------------------------------------------
# Balancing and integrity
# ---------------------------------------------------------------------------

def _downsample_class(rows: List[BinaryEntry], target: int, rng: random.Random) -> List[BinaryEntry]:
    by_source: Dict[str, List[BinaryEntry]] = defaultdict(list)
    for row in rows:
        by_source[row.source_id].append(row)

    source_ids = sorted(by_source)
    rng.shuffle(source_ids)
    kept: List[BinaryEntry] = []
    for source_id in source_ids:
        group = by_source[source_id]
        if len(kept) + len(group) <= target:
            kept.extend(group)
        if len(kept) == target:
            break
    return kept


def downsample(manifests: Dict[str, List[BinaryEntry]], target: Optional[int] = None,
               seed: int = 0) -> Dict[str, List[BinaryEntry]]:
    """
    Reduce every class to the same binary count, keeping or dropping whole sources

    Args:
        manifests: Binary rows per class
        target: Per-class size (smallest class when None)
        seed: Source shuffle seed

    Returns:
        Per-class rows with equal counts
    """
    if not manifests:
        return {}
    target = min(len(rows) for rows in manifests.values()) if target is None else target

    result = {c: list(rows) for c, rows in manifests.items()}
    for _ in range(len(OPT_FLAGS) + 1):
        result = {
            c: _downsample_class(rows, target, random.Random(f"{seed}:{c}")) if len(rows) > target else rows
            for c, rows in result.items()
        }
        achieved = min(len(rows) for rows in result.values())
        if all(len(rows) == achieved for rows in result.values()):
            break
        target = achieved

    for c, rows in result.items():
        logger.info(f"{c}: {len(manifests[c])} -> {len(rows)} binaries after downsampling")
    return result


def assert_no_leakage(binaries: Iterable[BinaryEntry]):
    """
    Raise DataLeakage if any source's binaries carry more than one split tag

    Keyed on source id alone, across every class subset.
    """
    splits: Dict[str, set] = defaultdict(set)
    for row in binaries:
        splits[row.source_id].add(row.split)
    leaking = sorted(source_id for source_id, tags in splits.items() if len(tags) > 1)
    if leaking:
        raise DataLeakage(f"{len(leaking)} source(s) straddle splits, e.g. {leaking[0]} in {sorted(splits[leaking[0]])}")


# ---------------------------------------------------------------------------
# Manifest I/O
# ---------------------------------------------------------------------------

def write_manifest(entries: Sequence, path: Union[str, Path]):
    """Write dataclass rows as JSONL"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([asdict(e) for e in entries])
    if frame.empty:
        path.write_text('')
    else:
        frame.to_json(path, orient='records', lines=True)
    logger.info(f"Wrote {len(entries)} row(s) to {path}")


def read_rows(path: Union[str, Path]) -> List[Dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Manifest not found: {path}")
    if not path.read_text().strip():
        return []
    frame = pd.read_json(path, lines=True, dtype=False)
    return frame.to_dict(orient='records')


def read_source_rows(path: Union[str, Path]) -> List[Dict]:
    """Raw source manifest rows with paths resolved against the manifest directory"""
    path = Path(path)
    rows = read_rows(path)
    for row in rows:
        missing = {'source_id', 'path'} - set(row)
        if missing:
            raise DatasetError(f"{path}: row missing {sorted(missing)}: {row}")
        row['source_id'] = str(row['source_id'])
        source = Path(row['path'])
        row['path'] = str(source if source.is_absolute() else path.parent / source)
    return rows


def read_binary_manifest(path: Union[str, Path]) -> List[BinaryEntry]:
    return [BinaryEntry(**{k: str(v) for k, v in row.items()}) for row in read_rows(path)]


# ---------------------------------------------------------------------------
# End-to-end build
# ---------------------------------------------------------------------------

@dataclass
class DatasetSummary:
    output_dir: str
    classes: List[str]
    times_compiled: Dict[str, int]
    sources: Dict[str, int]
    binaries: Dict[str, int]
    samples: Dict[str, int]
    vocab_size: int
    dropped_sources: List[str]
    skipped_binaries: List[str]
    representation: Dict

    def to_dict(self) -> Dict:
        return asdict(self)


def build_dataset(source_manifest: Union[str, Path], output_dir: Union[str, Path],
                  classes: Sequence[str] = VULN_CLASSES,
                  times_compiled: Union[int, str] = 'auto',
                  representation: Optional[RepresentationConfig] = None,
                  compiler: Optional[str] = None, seed: int = 0,
                  workers: Optional[int] = None, balance_classes: bool = False,
                  show_progress: bool = True) -> DatasetSummary:
    """
    Source manifest -> compiled binaries -> sample stores

    Output layout is documented in SAMPLE_FORMAT.md.
    """
    representation = representation or RepresentationConfig()
    representation.validate()
    output_dir = Path(output_dir)
    rows = read_source_rows(source_manifest)

    source_manifest_rows: List[SourceEntry] = []
    assigned: Dict[str, str] = {}
    for vuln_class in classes:
        if vuln_class not in VULN_CLASSES:
            raise DatasetError(f"Unknown vulnerability class: {vuln_class}")
        labeled = label_sources(rows, vuln_class)
        if labeled:
            source_manifest_rows.extend(make_splits(labeled, vuln_class, seed, assigned))
    if not source_manifest_rows:
        raise DatasetError(f"No labeled sources for classes {list(classes)} in {source_manifest}")
    write_manifest(source_manifest_rows, output_dir / 'sources.jsonl')

    counts = Counter(e.vuln_class for e in source_manifest_rows)
    if times_compiled == 'auto':
        factors = compile_factors({c: counts.get(c, 0) for c in classes})
    else:
        factors = {c: int(times_compiled) for c in classes}

    report = compile_corpus(source_manifest_rows, factors, output_dir / 'bin', compiler,
                            seed, workers, show_progress)

    per_class: Dict[str, List[BinaryEntry]] = defaultdict(list)
    for row in report.binaries:
        per_class[row.vuln_class].append(row)
    if balance_classes and len(per_class) > 1:
        per_class = downsample(dict(per_class), seed=seed)
    binaries = [row for c in classes for row in per_class.get(c, [])]
    assert_no_leakage(binaries)
    write_manifest(binaries, output_dir / 'binaries.jsonl')

    analyzed: Dict[str, list] = {split: [] for split in SPLITS}
    skipped = []
    for row in tqdm(binaries, desc='analyze', unit='bin', disable=not show_progress):
        try:
            analyzed[row.split].append((row, analyze_binary(row.binary_path)))
        except ELFLoadError as e:
            logger.warning(f"Skipping {row.binary_path}: {e}")
            skipped.append(row.binary_path)

    vocab = build_vocabulary(
        token
        for _, analyses in analyzed['train']
        for analysis in analyses
        for token in analysis.tokens
    )
    vocab.save(output_dir / 'vocab.tsv')

    samples = {}
    for split in SPLITS:
        with SampleWriter(output_dir / split, representation) as writer:
            for row, analyses in analyzed[split]:
                ids = encode_functions(analyses, vocab)
                writer.write(
                    row.sample_id,
                    label=int(row.label == VULNERABLE),
                    vuln_class=row.vuln_class,
                    seq=build_sequential(ids, representation),
                    graph=build_graph([(a.cfg, f) for a, f in zip(analyses, ids)], representation),
                    source_id=row.source_id,
                    opt_flag=row.opt_flag,
                    binary=row.binary_path,
                )
            samples[split] = writer.count

    summary = DatasetSummary(
        output_dir=str(output_dir),
        classes=list(classes),
        times_compiled=factors,
        sources=dict(counts),
        binaries=dict(Counter(row.vuln_class for row in binaries)),
        samples=samples,
        vocab_size=len(vocab),
        dropped_sources=report.dropped_sources,
        skipped_binaries=skipped,
        representation=representation.to_dict(),
    )
    with open(output_dir / 'dataset.json', 'w') as f:
        json.dump(summary.to_dict(), f, indent=2)
    logger.info(f"Dataset ready in {output_dir}: {samples} samples, vocabulary {len(vocab)}")
    return summary


def load_vocabulary(dataset_dir: Union[str, Path]) -> Vocabulary:
    return Vocabulary.load(Path(dataset_dir) / 'vocab.tsv')
