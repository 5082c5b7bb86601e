"""Train the composite heat problem for a short budget and print the error trail.

Run: python demos/quick_composite_heat.py [epochs]
"""
import sys

from pecann.alm import default_config, train
from pecann.problems import composite_heat_spec


def main(epochs=300):
    spec = composite_heat_spec(k=2.0)
    print(f"{spec.name}: {spec.network.n_params} parameters")

    def show(row):
        if row["epoch"] % 50 == 0:
            print(f"epoch {row['epoch']:5d}  loss {row['loss']:.3e}  mu {row['mu']:.0f}  "
                  f"rel_l2_u {row['rel_l2_u']:.3e}  rel_l2_sigma {row['rel_l2_sigma']:.3e}")

    rec = train(spec, default_config(spec, epochs=epochs, metrics_every=50), hooks=show)
    print("final:", {k: f"{v:.3e}" for k, v in rec.metrics.items() if k.startswith("rel_l2")})


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 300)
