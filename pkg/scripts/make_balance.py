"""Write data/balance.csv: the balance-scale dataset, rebuilt from its generating rule.

Every combination of left/right weight and distance in 1..5 (625 rows); the
scale tips to the side with the larger weight * distance product.
"""

from itertools import product
from pathlib import Path

out = Path(__file__).resolve().parents[1] / "data" / "balance.csv"
with out.open("w") as fh:
    fh.write("left_weight,left_distance,right_weight,right_distance,class\n")
    for lw, ld, rw, rd in product(range(1, 6), repeat=4):
        left, right = lw * ld, rw * rd
        label = "L" if left > right else "R" if right > left else "B"
        fh.write(f"{lw},{ld},{rw},{rd},{label}\n")
print(f"wrote {out}")
