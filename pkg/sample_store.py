"""
Sample Store
============
On-disk storage for encoded programs. Each split directory holds

    samples.jsonl   one JSON record per program
    samples.bin     little-endian int32 arrays referenced by byte offset

See SAMPLE_FORMAT.md for the exact layout.
"""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import torch
from torch.utils.data import Dataset

from representation import GraphTensor, RepresentationConfig, SeqTensor

logger = logging.getLogger(__name__)

RECORDS_FILE = 'samples.jsonl'
ARRAYS_FILE = 'samples.bin'
ARRAY_DTYPE = np.dtype('<i4')


class SampleStoreError(Exception):
    """Sample store is missing, inconsistent or truncated"""
    pass


@dataclass
class SampleRecord:
    """Metadata of one stored program"""
    id: str
    label: int
    vuln_class: str
    config: Dict
    offset: int
    source_id: str = ''
    opt_flag: str = ''
    binary: str = ''

    def to_json(self) -> Dict:
        data = asdict(self)
        data['class'] = data.pop('vuln_class')
        return data

    @classmethod
    def from_json(cls, data: Dict) -> 'SampleRecord':
        data = dict(data)
        data['vuln_class'] = data.pop('class')
        return cls(**data)


def array_shapes(config: RepresentationConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """Arrays stored per record, in file order"""
    return [
        ('seq', (config.n_seq, config.m_seq)),
        ('graph_features', (config.p, config.n_blk, config.n_blk)),
        ('graph_adjacency', (config.p, config.n_blk, config.n_blk)),
    ]


def record_nbytes(config: RepresentationConfig) -> int:
    return sum(int(np.prod(shape)) for _, shape in array_shapes(config)) * ARRAY_DTYPE.itemsize


class SampleWriter:
    """Append-only writer for one split"""

    def __init__(self, directory: Union[str, Path], config: RepresentationConfig):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.count = 0
        self._offset = 0
        self._records = open(self.directory / RECORDS_FILE, 'w')
        self._arrays = open(self.directory / ARRAYS_FILE, 'wb')
        logger.debug(f"Opened sample store for writing: {self.directory}")

    def write(self, sample_id: str, label: int, vuln_class: str, seq: SeqTensor,
              graph: GraphTensor, **extra) -> SampleRecord:
        record = SampleRecord(
            id=sample_id,
            label=int(label),
            vuln_class=vuln_class,
            config=self.config.to_dict(),
            offset=self._offset,
            **extra,
        )

        arrays = [seq.matrix, graph.features, graph.adjacency]
        for (name, shape), array in zip(array_shapes(self.config), arrays):
            if array.shape != shape:
                raise SampleStoreError(f"{sample_id}: {name} has shape {array.shape}, expected {shape}")
            data = np.ascontiguousarray(array, dtype=ARRAY_DTYPE).tobytes()
            self._arrays.write(data)
            self._offset += len(data)

        self._records.write(json.dumps(record.to_json()) + '\n')
        self.count += 1
        return record

    def close(self):
        self._records.close()
        self._arrays.close()
        logger.info(f"Wrote {self.count} sample(s) to {self.directory}")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()


class SampleReader:
    """Random-access reader for one split"""

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)
        records_path = self.directory / RECORDS_FILE
        arrays_path = self.directory / ARRAYS_FILE
        if not records_path.exists() or not arrays_path.exists():
            raise SampleStoreError(f"No sample store at {self.directory}")

        with open(records_path, 'r') as f:
            self.records = [SampleRecord.from_json(json.loads(line)) for line in f if line.strip()]

        size = arrays_path.stat().st_size
        self._arrays = np.memmap(arrays_path, dtype=np.uint8, mode='r') if size else np.zeros(0, np.uint8)

        for record in self.records:
            config = RepresentationConfig.from_dict(record.config)
            if record.offset + record_nbytes(config) > size:
                raise SampleStoreError(f"{self.directory}: record {record.id} runs past end of {ARRAYS_FILE}")

        logger.debug(f"Opened sample store {self.directory} with {len(self.records)} record(s)")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def config(self) -> Optional[RepresentationConfig]:
        if not self.records:
            return None
        return RepresentationConfig.from_dict(self.records[0].config)

    def read(self, index: int) -> Tuple[SampleRecord, SeqTensor, GraphTensor]:
        record = self.records[index]
        config = RepresentationConfig.from_dict(record.config)

        arrays = {}
        position = record.offset
        for name, shape in array_shapes(config):
            nbytes = int(np.prod(shape)) * ARRAY_DTYPE.itemsize
            raw = self._arrays[position:position + nbytes]
            arrays[name] = np.frombuffer(raw.tobytes(), dtype=ARRAY_DTYPE).reshape(shape).astype(np.int32)
            position += nbytes

        return (
            record,
            SeqTensor(matrix=arrays['seq']),
            GraphTensor(features=arrays['graph_features'], adjacency=arrays['graph_adjacency']),
        )

    def __iter__(self) -> Iterator[Tuple[SampleRecord, SeqTensor, GraphTensor]]:
        for index in range(len(self)):
            yield self.read(index)

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)


class SampleDataset(Dataset):
    """
    torch view of a split for one model kind

    Items are (inputs, label) where inputs is the (n_seq, m_seq) id matrix
    for 'sequential' and an (F, A) pair for 'graph'.
    """

    def __init__(self, reader: SampleReader, kind: str):
        if kind not in ('sequential', 'graph'):
            raise ValueError(f"Unknown model kind: {kind}")
        self.reader = reader
        self.kind = kind

    def __len__(self) -> int:
        return len(self.reader)

    def __getitem__(self, index: int):
        record, seq, graph = self.reader.read(index)
        label = torch.tensor(float(record.label))
        if self.kind == 'sequential':
            return torch.from_numpy(seq.matrix).long(), label
        return (
            torch.from_numpy(graph.features).long(),
            torch.from_numpy(graph.adjacency).float(),
        ), label


def tensors_to_dataset(samples: List[Tuple[Union[SeqTensor, GraphTensor], int]], kind: str) -> List:
    """In-memory equivalent of SampleDataset for already-built tensors"""
    items = []
    for tensor, label in samples:
        target = torch.tensor(float(label))
        if kind == 'sequential':
            items.append((torch.from_numpy(tensor.matrix).long(), target))
        else:
            items.append(((
                torch.from_numpy(tensor.features).long(),
                torch.from_numpy(tensor.adjacency).float(),
            ), target))
    return items
