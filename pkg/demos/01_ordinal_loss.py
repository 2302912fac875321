"""Shape of the ordinality-weighted loss, sub-class by sub-class.

Sweeps the logit from -6 to 6 and tabulates the instance loss for every
flare sub-class next to plain BCE, at both ends of the recommended
scaling range: alpha=1 aligns the FQ/X curves with BCE, alpha=4 aligns
the C-class curve.  With matplotlib installed the curves are also saved
as a PNG.
"""

import os

import numpy as np

from ordflare import FlareClass, LossConfig, bce, bce_sf_instance, binary_label, sigmoid
from ordflare.loss import ordinal_weight

OUT = os.path.join(os.path.dirname(__file__), "output")


def curves(alpha):
    logits = np.linspace(-6.0, 6.0, 241)
    table = {}
    for c in FlareClass:
        y = binary_label(c)
        cfg = LossConfig(alpha)
        table[c.name] = np.array([bce_sf_instance(z, y, c, cfg) for z in logits])
    # plain BCE against target 0 and 1 for reference
    table["BCE(y=0)"] = np.array([bce(sigmoid(z), 0) for z in logits])
    table["BCE(y=1)"] = np.array([bce(sigmoid(z), 1) for z in logits])
    return logits, table


def main():
    os.makedirs(OUT, exist_ok=True)
    print("effective per-instance multiplier alpha/log10(beta):")
    for alpha in (1.0, 2.0, 4.0):
        row = "  ".join(f"{c.name}={ordinal_weight(c, alpha):.3f}" for c in FlareClass)
        print(f"  alpha={alpha:g}: {row}")
    print()

    for alpha in (1.0, 4.0):
        logits, table = curves(alpha)
        mid = len(logits) // 2
        print(f"instance loss at logit 0 (probability 0.5), alpha={alpha:g}:")
        for name in ("FQ", "A", "B", "C", "M", "X"):
            print(f"  {name:2s}: {table[name][mid]:.6f}")
        print(f"  plain BCE: {table['BCE(y=1)'][mid]:.6f}")
        print()

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not available, skipping the figure")
        return

    fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
    for ax, alpha in zip(axes, (1.0, 4.0)):
        logits, table = curves(alpha)
        for c in FlareClass:
            style = "-" if binary_label(c) else "--"
            ax.plot(logits, table[c.name], style, label=c.name)
        ax.plot(logits, table["BCE(y=1)"], "k:", lw=2, label="BCE (y=1)")
        ax.plot(logits, table["BCE(y=0)"], "k-.", lw=1, label="BCE (y=0)")
        ax.set_title(f"alpha = {alpha:g}")
        ax.set_xlabel("logit")
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("instance loss")
    axes[0].legend(ncol=2, fontsize=8)
    path = os.path.join(OUT, "ordinal_loss_curves.png")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    print(f"figure: {path}")


if __name__ == "__main__":
    main()
