"""
Pipeline closure check: gen-bench -> build-dataset -> train -> eval on a tiny budget

Runs the CLI chain twice into two directories and compares the dataset
manifests and checkpoints byte for byte.

    python scripts/pipeline_closure_check.py [work_dir]
"""

import filecmp
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from master_pipeline_engine import main  # noqa: E402

CHAIN = ('gen-bench', 'build-dataset', 'train', 'eval')
TINY = ['--robot-min', '1.34', '--human-min', '1.34', '--iterations', '50', '--episodes', '1',
        '--seed', '3', '--quiet']
COMPARED = ('dataset/manifest.json', 'checkpoints/policy.json', 'checkpoints/policy.f64',
            'results/train_trace.csv')


def run_chain(out_dir: str) -> int:
    for command in CHAIN:
        code = main([command, '--out', out_dir, *TINY])
        if code != 0:
            print(f"❌ {command} exited with {code}")
            return code
    return 0


def check(work_dir: str) -> int:
    runs = [os.path.join(work_dir, name) for name in ('run_a', 'run_b')]
    for run in runs:
        if run_chain(run) != 0:
            return 1
    for rel in COMPARED:
        a, b = (os.path.join(run, rel) for run in runs)
        if not filecmp.cmp(a, b, shallow=False):
            print(f"❌ {rel} differs between identical runs")
            return 1
        print(f"✓ {rel} reproducible")
    print("Pipeline closure check passed")
    return 0


if __name__ == "__main__":
    if len(sys.argv) > 1:
        sys.exit(check(sys.argv[1]))
    with tempfile.TemporaryDirectory() as tmp:
        sys.exit(check(tmp))
