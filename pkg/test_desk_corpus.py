"""
Desk Corpus Test Suite
======================
Synthetic labeled C programs
"""

import json
import random
import subprocess

import pytest

from dataset_pipeline import group_violations, label_sources, read_source_rows
from desk_corpus import CLASSES, generate_corpus, generate_program


def test_corpus_layout_and_labels(tmp_path):
    manifest = generate_corpus(tmp_path, per_class=4, seed=1)
    rows = [json.loads(line) for line in manifest.read_text().splitlines()]

    assert len(rows) == 12
    assert {r['vuln_class'] for r in rows} == set(CLASSES)
    for row in rows:
        assert (tmp_path / row['path']).exists()
        if row['violations']:
            assert group_violations(row['violations']).classes == [row['vuln_class']]

    null_rows = [r for r in rows if r['vuln_class'] == 'null_deref']
    assert [bool(r['violations']) for r in null_rows] == [True, False, True, False]


def test_corpus_feeds_labeling(tmp_path):
    manifest = generate_corpus(tmp_path, per_class=6, classes=['array_bound'], seed=2)
    labeled = label_sources(read_source_rows(manifest), 'array_bound')
    assert len(labeled) == 6
    assert sum(s.label == 'vulnerable' for s in labeled) == 3


def test_corpus_is_seeded(tmp_path):
    first = generate_corpus(tmp_path / 'a', per_class=3, seed=5)
    second = generate_corpus(tmp_path / 'b', per_class=3, seed=5)
    assert first.read_text() == second.read_text()
    for src in (tmp_path / 'a' / 'src').iterdir():
        assert src.read_text() == (tmp_path / 'b' / 'src' / src.name).read_text()


def test_unknown_class(tmp_path):
    with pytest.raises(ValueError):
        generate_corpus(tmp_path, per_class=1, classes=['use_after_free'])


@pytest.mark.parametrize('vuln_class', CLASSES)
def test_programs_compile(cc, tmp_path, vuln_class):
    rng = random.Random(0)
    for vulnerable in (True, False):
        for i in range(3):
            source, violation = generate_program(vuln_class, vulnerable, rng)
            assert group_violations([violation]).classes == [vuln_class]
            path = tmp_path / f"{vuln_class}_{vulnerable}_{i}.c"
            path.write_text(source)
            result = subprocess.run([cc, '-O2', '-w', '-o', str(path.with_suffix('')), str(path)],
                                    capture_output=True, text=True)
            assert result.returncode == 0, result.stderr


if __name__ == '__main__':
    raise SystemExit(pytest.main([__file__, '-v']))
