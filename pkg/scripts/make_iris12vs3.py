"""Write data/iris12vs3.csv: iris classes 1 and 2 merged against class 3 (150 x 4, ratio 2)."""

from pathlib import Path

from sklearn.datasets import load_iris

out = Path(__file__).resolve().parents[1] / "data" / "iris12vs3.csv"
iris = load_iris()
with out.open("w") as fh:
    fh.write("sepal_length,sepal_width,petal_length,petal_width,class\n")
    for row, target in zip(iris.data, iris.target):
        label = "positive" if target == 2 else "negative"
        fh.write(",".join(f"{v:g}" for v in row) + f",{label}\n")
print(f"wrote {out}")
