"""
Run Configuration
=================
Resolves the configs of one CLI run and writes its reproducibility record.

Precedence, highest first:
    1. command-line flags
    2. --config <file.json>
    3. dataclass defaults

Config file layout:
    {
      "seed": 1,
      "representation": {"n_seq": 256, "m_seq": 16, "n_blk": 16, "p": 16},
      "model": {"kind": "graph", "gcn_layers": 2},
      "train": {"max_epochs": 30}
    }
"""

import json
import logging
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

from representation import RepresentationConfig
from training import TrainConfig
from vuln_models import ModelConfig

logger = logging.getLogger(__name__)

PACKAGE_NAME = 'binvuln'
PACKAGE_VERSION = '0.1.0'
RUN_RECORD_FILE = 'run_record.json'
CONFIG_SECTIONS = ('representation', 'model', 'train')


class ConfigError(Exception):
    """Invalid configuration or unusable paths"""
    pass


@dataclass
class RunConfig:
    """Everything one CLI subcommand runs with"""
    command: str
    representation: RepresentationConfig = field(default_factory=RepresentationConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    inputs: Dict[str, str] = field(default_factory=dict)
    output_dir: Optional[str] = None
    seed: int = 0
    verbose: bool = False

    def validate(self):
        for name, path in self.inputs.items():
            if path and not Path(path).exists():
                raise ConfigError(f"Input {name} does not exist: {path}")

        if self.output_dir:
            out = Path(self.output_dir)
            try:
                out.mkdir(parents=True, exist_ok=True)
            except OSError as e:
                raise ConfigError(f"Cannot create output directory {out}: {e}") from e
            if not os.access(out, os.W_OK):
                raise ConfigError(f"Output directory is not writable: {out}")

        try:
            self.representation.validate()
            self.model.validate()
            self.train.validate()
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def to_dict(self) -> Dict:
        return {
            'command': self.command,
            'seed': self.seed,
            'inputs': dict(self.inputs),
            'output_dir': self.output_dir,
            'representation': self.representation.to_dict(),
            'model': self.model.to_dict(),
            'train': self.train.to_dict(),
        }


def load_config_file(path: Union[str, Path]) -> Dict:
    """Read a JSON config file"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {path}: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(data) - set(CONFIG_SECTIONS) - {'seed'}
    if unknown:
        raise ConfigError(f"{path}: unknown config sections {sorted(unknown)}")
    return data


def _merge(*layers: Optional[Dict]) -> Dict:
    merged: Dict = {}
    for layer in layers:
        for key, value in (layer or {}).items():
            if value is not None:
                merged[key] = value
    return merged


def resolve_run_config(command: str, config_file: Optional[Union[str, Path]] = None,
                       overrides: Optional[Dict[str, Dict]] = None,
                       seed: Optional[int] = None,
                       inputs: Optional[Dict[str, str]] = None,
                       output_dir: Optional[Union[str, Path]] = None,
                       verbose: bool = False,
                       base_model: Optional[Dict] = None) -> RunConfig:
    """
    Layer defaults, the config file and CLI overrides into a RunConfig

    Args:
        command: Subcommand name
        config_file: Optional JSON config path
        overrides: {'representation'|'model'|'train': {field: value}}; None values are ignored
        seed: CLI seed (overrides the file's seed)
        inputs: Named input paths that must exist
        output_dir: Output directory to create
        base_model: Model fields applied beneath the file layer (e.g. toy dims)

    Raises:
        ConfigError: Unreadable file, unknown keys, invalid values or paths
    """
    file_data = load_config_file(config_file) if config_file else {}
    overrides = overrides or {}

    try:
        representation = RepresentationConfig.from_dict(
            _merge(file_data.get('representation'), overrides.get('representation'))
        )
        model = ModelConfig.from_dict(
            _merge(base_model, file_data.get('model'), overrides.get('model'))
        )
        train = TrainConfig.from_dict(
            _merge(file_data.get('train'), overrides.get('train'))
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid configuration: {e}") from e

    resolved_seed = seed if seed is not None else int(file_data.get('seed', 0))
    train.seed = resolved_seed

    run = RunConfig(
        command=command,
        representation=representation,
        model=model,
        train=train,
        inputs={k: str(v) for k, v in (inputs or {}).items() if v is not None},
        output_dir=str(output_dir) if output_dir else None,
        seed=resolved_seed,
        verbose=verbose,
    )
    run.validate()
    return run


def write_run_record(run: RunConfig, directory: Union[str, Path],
                     argv: Optional[Sequence[str]] = None, extra: Optional[Dict] = None) -> Path:
    """Write run_record.json (configs, seed, version, timestamp, argv) into directory"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    record = {
        'package': PACKAGE_NAME,
        'version': PACKAGE_VERSION,
        'timestamp': datetime.now(timezone.utc).isoformat(),
        'argv': list(argv if argv is not None else sys.argv),
        **run.to_dict(),
        'extra': extra or {},
    }
    path = directory / RUN_RECORD_FILE
    with open(path, 'w') as f:
        json.dump(record, f, indent=2)
    logger.debug(f"Wrote run record to {path}")
    return path
