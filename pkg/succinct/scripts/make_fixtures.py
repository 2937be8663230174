import os
import sys

# Configuration
FIXTURE_SEED = 2024
FIXTURE_QUBITS = 3
FIXTURES = [
    ('yes', None),
    ('no', 'fastpath'),
    ('no', 'perturbed'),
    ('no', 'nonground'),
    ('spectrum', None),
    ('stationarity', None),
    ('circuit', None),
]


def fixture_dir(data_dir, kind, variant):
    return os.path.join(data_dir, f"{kind}_{variant}" if variant else kind)


def main():
    parent_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    if parent_dir not in sys.path:
        sys.path.insert(0, parent_dir)

    from algorithms.errors import SuccinctError
    from algorithms.files import DATA_DIR
    from algorithms.pipeline import make_fixture

    seed = int(sys.argv[1]) if len(sys.argv) > 1 else FIXTURE_SEED
    print(f"Writing fixtures with seed {seed} into {os.path.abspath(DATA_DIR)}")

    total = 0
    for kind, variant in FIXTURES:
        out_dir = fixture_dir(DATA_DIR, kind, variant)
        try:
            written = make_fixture(kind, out_dir, n=FIXTURE_QUBITS, seed=seed, variant=variant)
        except SuccinctError as e:
            print(f"Error writing {kind} fixture: {e}")
            return 2
        total += len(written)
        print(f"  - {os.path.basename(out_dir)}: {', '.join(os.path.basename(p) for p in written)}")

    print(f"\nFixture generation complete: {total} files")
    print("Run a family with: python app.py run data/<fixture>/manifest.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
