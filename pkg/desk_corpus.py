#!/usr/bin/env python3
"""
Desk Corpus Generator
=====================
Writes a seeded corpus of small C programs with known labels for the three
vulnerability classes. Each program combines a few randomized benign helper
functions with one class kernel in either a vulnerable or a guarded (safe)
variant, plus a source manifest whose `violations` column uses verifier-style
messages.

Usage:
    python desk_corpus.py out/corpus --per-class 400
    python desk_corpus.py out/corpus --classes null_deref --per-class 400 --seed 7
"""

import argparse
import json
import logging
import os
import random
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from string import Template
from typing import Dict, List, Optional, Sequence, Tuple, Union

logger = logging.getLogger(__name__)

CLASSES = ('null_deref', 'array_bound', 'int_overflow')

PROLOGUE = """#include <limits.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
"""

# ---------------------------------------------------------------------------
# Benign helpers: (definition, call statement)
# ---------------------------------------------------------------------------

HELPERS = [
    (Template("""
static unsigned $name(const unsigned char *data, int len) {
    unsigned h = ${seed}u;
    for (int i = 0; i < len; i++) {
        h = (h * 31u) ^ data[i];
    }
    return h;
}
"""), Template("    acc += (int)$name((const unsigned char *)argv[0], (int)strlen(argv[0]));\n")),
    (Template("""
static int $name(const int *v, int n) {
    int best = v[0];
    for (int i = 1; i < n; i++) {
        if (v[i] > best)
            best = v[i];
    }
    return best;
}
"""), Template("    {\n        int tmp[$n];\n        for (int i = 0; i < $n; i++)\n"
               "            tmp[i] = (argc * $k + i) % 97;\n        acc += $name(tmp, $n);\n    }\n")),
    (Template("""
static void $name(char *dst, const char *src, size_t cap) {
    size_t n = strlen(src);
    if (n >= cap)
        n = cap - 1;
    for (size_t i = 0; i < n; i++)
        dst[i] = src[n - 1 - i];
    dst[n] = '\\0';
}
"""), Template("    {\n        char buf[$n];\n        $name(buf, argv[0], sizeof buf);\n"
               "        acc += (int)buf[0];\n    }\n")),
    (Template("""
static long $name(int n) {
    long a = 0, b = 1;
    for (int i = 0; i < n; i++) {
        long t = a + b;
        a = b;
        b = t % ${mod};
    }
    return a;
}
"""), Template("    acc += (int)$name(argc + $k);\n")),
    (Template("""
static int $name(int c) {
    switch (c % 5) {
    case 0: return $k;
    case 1: return c * 2;
    case 2: return c - $seed;
    case 3: return -c;
    default: return 0;
    }
}
"""), Template("    acc += $name(argc + $k);\n")),
    (Template("""
static double $name(const double *xs, int n) {
    double sum = 0.0;
    for (int i = 0; i < n; i++)
        sum += xs[i] * xs[i];
    return n ? sum / n : 0.0;
}
"""), Template("    {\n        double xs[$n];\n        for (int i = 0; i < $n; i++)\n"
               "            xs[i] = (double)(i + argc) / $k;\n        acc += (int)$name(xs, $n);\n    }\n")),
]


@dataclass
class Kernel:
    """Class kernel: vulnerable and safe bodies sharing one call site"""
    vulnerable: Template
    safe: Template
    call: Template
    violation: str
    preamble: Template = field(default_factory=lambda: Template(''))


KERNELS: Dict[str, List[Kernel]] = {
    'null_deref': [
        Kernel(
            vulnerable=Template("""
static int $name(int n) {
    int *p = malloc(sizeof(int) * (size_t)(n + $k));
    p[0] = n;
    int r = p[0] + $k;
    free(p);
    return r;
}
"""),
            safe=Template("""
static int $name(int n) {
    int *p = malloc(sizeof(int) * (size_t)(n + $k));
    if (p == NULL)
        return -1;
    p[0] = n;
    int r = p[0] + $k;
    free(p);
    return r;
}
"""),
            call=Template("    acc += $name(argc);\n"),
            violation='dereference failure: NULL pointer',
        ),
        Kernel(
            preamble=Template("""
struct ${name}_node {
    int value;
    struct ${name}_node *next;
};
"""),
            vulnerable=Template("""
static int $name(struct ${name}_node *head, int steps) {
    struct ${name}_node *cur = head;
    for (int i = 0; i < steps; i++)
        cur = cur->next;
    return cur->value;
}
"""),
            safe=Template("""
static int $name(struct ${name}_node *head, int steps) {
    struct ${name}_node *cur = head;
    for (int i = 0; i < steps && cur != NULL; i++)
        cur = cur->next;
    if (cur == NULL)
        return -1;
    return cur->value;
}
"""),
            call=Template("    {\n        struct ${name}_node b = {$k, NULL};\n"
                          "        struct ${name}_node a = {argc, &b};\n        acc += $name(&a, argc + 1);\n    }\n"),
            violation='dereference failure: NULL pointer',
        ),
        Kernel(
            vulnerable=Template("""
static int $name(void) {
    const char *s = getenv("$env");
    return (int)strlen(s) + $k;
}
"""),
            safe=Template("""
static int $name(void) {
    const char *s = getenv("$env");
    if (!s)
        return $k;
    return (int)strlen(s) + $k;
}
"""),
            call=Template("    acc += $name();\n"),
            violation='dereference failure: NULL pointer',
        ),
    ],
    'array_bound': [
        Kernel(
            vulnerable=Template("""
static int $name(int seed) {
    int buf[$n];
    for (int i = 0; i <= $n; i++)
        buf[i] = seed * $k + i;
    return buf[$n - 1];
}
"""),
            safe=Template("""
static int $name(int seed) {
    int buf[$n];
    for (int i = 0; i < $n; i++)
        buf[i] = seed * $k + i;
    return buf[$n - 1];
}
"""),
            call=Template("    acc += $name(argc);\n"),
            violation="array bounds violated: array `buf' upper bound",
        ),
        Kernel(
            vulnerable=Template("""
static int $name(int idx) {
    static const int table[$n] = {$values};
    return table[idx];
}
"""),
            safe=Template("""
static int $name(int idx) {
    static const int table[$n] = {$values};
    if (idx < 0 || idx >= $n)
        return -1;
    return table[idx];
}
"""),
            call=Template("    acc += $name(argc * $k - $n);\n"),
            violation="array bounds violated: array `table' lower bound",
        ),
        Kernel(
            vulnerable=Template("""
static int $name(const char *src) {
    char dst[$n];
    strcpy(dst, src);
    return (int)dst[0] + $k;
}
"""),
            safe=Template("""
static int $name(const char *src) {
    char dst[$n];
    strncpy(dst, src, sizeof dst - 1);
    dst[sizeof dst - 1] = '\\0';
    return (int)dst[0] + $k;
}
"""),
            call=Template("    acc += $name(argv[argc - 1]);\n"),
            violation="array bounds violated: array `dst' upper bound",
        ),
    ],
    'int_overflow': [
        Kernel(
            vulnerable=Template("""
static int $name(int a, int b) {
    return a * b + $k;
}
"""),
            safe=Template("""
static int $name(int a, int b) {
    long long r = (long long)a * b + $k;
    if (r > INT_MAX || r < INT_MIN)
        return 0;
    return (int)r;
}
"""),
            call=Template("    acc += $name(argc * $big, $big);\n"),
            violation='arithmetic overflow on mul',
        ),
        Kernel(
            vulnerable=Template("""
static int $name(const int *values, int n) {
    int total = 0;
    for (int i = 0; i < n; i++)
        total += values[i];
    return total;
}
"""),
            safe=Template("""
static int $name(const int *values, int n) {
    int total = 0;
    for (int i = 0; i < n; i++) {
        if (values[i] > 0 && total > INT_MAX - values[i])
            return INT_MAX;
        if (values[i] < 0 && total < INT_MIN - values[i])
            return INT_MIN;
        total += values[i];
    }
    return total;
}
"""),
            call=Template("    {\n        int vals[$n];\n        for (int i = 0; i < $n; i++)\n"
                          "            vals[i] = INT_MAX / $k + argc;\n        acc += $name(vals, $n);\n    }\n"),
            violation='arithmetic overflow on add',
        ),
        Kernel(
            vulnerable=Template("""
static int $name(int a, int b) {
    return a - b;
}
"""),
            safe=Template("""
static int $name(int a, int b) {
    if ((b > 0 && a < INT_MIN + b) || (b < 0 && a > INT_MAX + b))
        return 0;
    return a - b;
}
"""),
            call=Template("    acc += $name(INT_MIN + argc, $big);\n"),
            violation='arithmetic overflow on sub',
        ),
    ],
}

WORDS = [
    'parse', 'scan', 'load', 'merge', 'probe', 'fold', 'apply', 'render', 'pack',
    'split', 'index', 'route', 'queue', 'track', 'score', 'cache', 'flush', 'sync',
]
NOUNS = [
    'header', 'record', 'buffer', 'packet', 'entry', 'frame', 'token', 'block',
    'field', 'chunk', 'table', 'slot', 'node', 'page', 'segment', 'item',
]


@dataclass
class CorpusRow:
    """Source manifest row"""
    source_id: str
    path: str
    vuln_class: str
    violations: List[str]


def _identifier(rng: random.Random, used: set) -> str:
    while True:
        name = f"{rng.choice(WORDS)}_{rng.choice(NOUNS)}_{rng.randrange(100)}"
        if name not in used:
            used.add(name)
            return name


def _params(rng: random.Random, name: str) -> Dict[str, Union[str, int]]:
    n = rng.randrange(4, 33)
    return {
        'name': name,
        'seed': rng.randrange(1, 1 << 16),
        'k': rng.randrange(2, 50),
        'n': n,
        'mod': rng.choice([97, 1009, 65521, 1000003]),
        'big': rng.randrange(1 << 20, 1 << 30),
        'env': f"DESK_{rng.randrange(1000)}",
        'values': ', '.join(str(rng.randrange(-500, 500)) for _ in range(n)),
    }


def generate_program(vuln_class: str, vulnerable: bool, rng: random.Random) -> Tuple[str, str]:
    """
    One C translation unit with helpers and a class kernel

    Returns:
        (source text, verifier message the kernel would trigger)
    """
    used: set = set()
    kernel = rng.choice(KERNELS[vuln_class])

    parts: List[str] = [PROLOGUE]
    calls: List[str] = []

    helper_count = rng.randint(1, 4)
    for definition, call in rng.sample(HELPERS, helper_count):
        params = _params(rng, _identifier(rng, used))
        parts.append(definition.substitute(params))
        calls.append(call.substitute(params))

    params = _params(rng, _identifier(rng, used))
    parts.append(kernel.preamble.substitute(params))
    parts.append((kernel.vulnerable if vulnerable else kernel.safe).substitute(params))
    kernel_call = kernel.call.substitute(params)
    calls.insert(rng.randrange(len(calls) + 1), kernel_call)

    main = ["\nint main(int argc, char **argv) {\n", "    int acc = 0;\n"]
    main += calls
    main += ['    printf("%d\\n", acc);\n', "    return 0;\n", "}\n"]
    parts.append(''.join(main))
    return ''.join(parts), kernel.violation


def generate_corpus(output_dir: Union[str, Path], per_class: int = 400,
                    classes: Sequence[str] = CLASSES, seed: int = 0) -> Path:
    """
    Write sources and manifest.jsonl

    Labels alternate so each class is split 50/50 between vulnerable and safe.

    Returns:
        Path of the written source manifest
    """
    output_dir = Path(output_dir)
    src_dir = output_dir / 'src'
    src_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)

    rows: List[CorpusRow] = []
    for vuln_class in classes:
        if vuln_class not in KERNELS:
            raise ValueError(f"Unknown vulnerability class: {vuln_class}")
        prefix = ''.join(word[0] for word in vuln_class.split('_'))
        for i in range(per_class):
            vulnerable = i % 2 == 0
            kernel_rng = random.Random(rng.random())
            program, violation = generate_program(vuln_class, vulnerable, kernel_rng)
            source_id = f"{prefix}_{i:05d}"
            (src_dir / f"{source_id}.c").write_text(program)
            violations = [violation] if vulnerable else []
            rows.append(CorpusRow(source_id, f"src/{source_id}.c", vuln_class, violations))

    manifest = output_dir / 'manifest.jsonl'
    with open(manifest, 'w') as f:
        for row in rows:
            f.write(json.dumps(asdict(row)) + '\n')

    logger.info(f"Generated {len(rows)} programs ({per_class} per class) in {output_dir}")
    return manifest


def main(argv: Optional[Sequence[str]] = None):
    """Command-line entry point"""
    parser = argparse.ArgumentParser(description='Generate a labeled desk-scale C corpus')
    parser.add_argument('output_dir', type=Path, help='Output directory')
    parser.add_argument('--per-class', type=int, default=400, help='Programs per class (default: 400)')
    parser.add_argument('--classes', nargs='+', choices=CLASSES, default=list(CLASSES),
                        help='Vulnerability classes (default: all)')
    parser.add_argument('--seed', type=int, default=0, help='Random seed (default: 0)')
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=os.environ.get('BINVULN_LOG_LEVEL', 'INFO'),
        format='%(asctime)s - %(name)s - [%(levelname)s] - %(message)s'
    )

    manifest = generate_corpus(args.output_dir, args.per_class, args.classes, args.seed)
    print(f"✓ Generated {args.per_class * len(args.classes)} programs")
    print(f"  Manifest: {manifest}")


if __name__ == '__main__':
    sys.exit(main())
