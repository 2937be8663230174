import os
import sys

# Add parent directory to path to import algorithms
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from algorithms.errors import SuccinctError
from algorithms.files import DATA_DIR, load_ham, load_state
from algorithms.oracle import densify_ham, densify_state, spectrum

data_dir = os.path.abspath(DATA_DIR)
if not os.path.isdir(data_dir):
    print(f"Could not find fixtures at: {data_dir}")
    print("Run scripts/make_fixtures.py first")
    exit(1)

failures = 0
for name in sorted(os.listdir(data_dir)):
    ham_path = os.path.join(data_dir, name, 'ham.json')
    state_path = os.path.join(data_dir, name, 'state.json')
    if not os.path.exists(ham_path):
        continue
    try:
        H, header = load_ham(ham_path)
        dense = densify_ham(H)
        spec = spectrum(dense)
    except SuccinctError as e:
        print(f"{name}: {e}")
        failures += 1
        continue

    print(f"\n{name} ({header['variant']}, {header['qubits']} qubits)")
    print(f"  Hermitian: {dense.is_hermitian()}")
    print(f"  Ground energy: {spec.ground_energy:.6f}  gap: {spec.gap:.6f}")
    if not dense.is_hermitian():
        failures += 1

    if os.path.exists(state_path):
        xi, _ = densify_state(load_state(state_path))
        # <xi|H|xi> for a normalized xi
        energy = xi.inner(dense.apply(xi))
        print(f"  <xi|H|xi>: {energy}")

print(f"\nFixtures with problems: {failures}")
exit(1 if failures else 0)
