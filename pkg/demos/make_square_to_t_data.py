"""Write the sample sets used by configs/square_to_t (2000 points each, fixed seeds)."""

from pathlib import Path

from gmmsteer.datasets import letter_t, uniform_box
from gmmsteer.io import write_csv

out = Path(__file__).resolve().parents[1] / "configs" / "square_to_t"
out.mkdir(parents=True, exist_ok=True)
write_csv(out / "initial_samples.csv", ["x0", "x1"], uniform_box(2000, seed=10))
write_csv(out / "desired_samples.csv", ["x0", "x1"], letter_t(2000, seed=11))
print(f"wrote sample sets to {out}")
