"""Transfer matrices, Dirichlet determinants and zero counting.

The rescaled transfer matrix ``M^a_N`` has polynomial entries that are
themselves Dirichlet determinants ``f^a`` of shifted windows.  Its
determinant factorizes over the off-diagonal sampling function, and the
zeros of ``f^a_N(x, .)`` in ``E`` are the eigenvalues of the window.  This
script checks all three on a random trigonometric model.
"""
import numpy as np

from qpjacobi import GOLDEN, eigenvalues
from qpjacobi.identities import det_identity_defect, entry_identity_defect, zero_count_defect
from qpjacobi.models import random_model
from qpjacobi.transfer import count_zeros_disk, energy_slice

rng = np.random.default_rng(3)
pair = random_model(rng, K=3, b_shift=1.5)
x = 0.37

print("N     entry identity   determinant identity   (relative log-magnitude defects)")
for N in (1, 4, 16, 64, 256):
    E = complex(0.4, 0.2)
    print(f"{N:<5d} {entry_identity_defect(pair, x, GOLDEN, N, E):14.2e}   "
          f"{det_identity_defect(pair, x, GOLDEN, N, E):14.2e}")

N = 40
spec = eigenvalues(pair, x, GOLDEN, 0, N - 1)
f = energy_slice(pair, x, GOLDEN, 0, N - 1)
print(f"\nwindow of size {N}: spectrum in [{spec[0]:.3f}, {spec[-1]:.3f}]")
for center, radius in ((0.0, 0.5), (float(spec[10]), 0.05), (float(np.mean(spec)), 10.0)):
    got = count_zeros_disk(f, center, radius)
    want = int(np.count_nonzero(np.abs(spec - center) < radius))
    print(f"disk |E - {center:+.4f}| < {radius:<5}: argument principle {got:3d}, eigensolver {want:3d}")

defects = [zero_count_defect(pair, x, GOLDEN, N, complex(c, 0.1), 0.3) for c in np.linspace(-3, 3, 25)]
print(f"\n25 more disks: total mismatch {sum(defects)}")
