"""Perturb a trained Poisson network and compare how the noise grows with derivative order."""
import sys

from pecann.alm import MultiplierSet, default_config, train
from pecann.diagnostics import amplification_report, histogram, perturb
from pecann.problems import poisson1d_spec


def main(epochs=200, seed=0, scale=0.05):
    spec = poisson1d_spec()
    rec = train(spec, default_config(spec, epochs=epochs, seed=seed))
    print(f"trained {epochs} epochs, rel_l2_u = {rec.metrics['rel_l2_u']:.3e}")
    theta_t = perturb(rec.theta, spec.network, scale, seed=seed + 1)
    mult = MultiplierSet(dict(rec.multipliers), rec.mu, rec.config["mu_max"])
    rep = amplification_report(spec, rec.theta, theta_t, multipliers=mult)
    s = rep.summary
    for key in ("u", "ux", "uxx"):
        print(f"mean |delta {key:3s}| = {s['mean_delta_' + key]:.3e}")
    print(f"grad inf-norm: clean {s['grad_inf_clean']:.3e}, perturbed {s['grad_inf_perturbed']:.3e}")
    edges, counts = histogram(rep.grad_perturbed, 10)
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        print(f"  [{lo:+.2e}, {hi:+.2e})  {'#' * min(int(c), 60)}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 200)
