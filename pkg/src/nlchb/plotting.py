"""Report figures. Writes files only; the non-interactive Agg backend is forced."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def figsize(scale=1.0, ratio=0.62):
    w = 5.0 * scale
    return (w, w * ratio)


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_energy(records, path):
    """Energy and dissipation history of one run."""
    t = np.array([r.t for r in records])
    with plt.rc_context(STYLE):
        fig, (ax0, ax1) = plt.subplots(2, 1, sharex=True, figsize=figsize(1.0, 0.9))
        ax0.plot(t, [r.E for r in records], "k-", lw=1.2)
        ax0.set_ylabel("E")
        for key, label in (("grad_mu_sq", r"$\|\nabla\mu\|^2$"), ("visc_diss", r"$\|\sqrt{\nu}\nabla u\|^2$"),
                           ("perm_diss", r"$\|\sqrt{\eta}u\|^2$")):
            vals = np.array([getattr(r, key) for r in records])
            if np.any(vals > 0):
                ax1.semilogy(t[vals > 0], vals[vals > 0], lw=1.0, label=label)
        ax1.set_xlabel("t")
        ax1.set_ylabel("dissipation")
        ax1.legend(frameon=False)
        return _save(fig, path)


def plot_sweep(report, path):
    nu = np.asarray(report.nu_values)
    err = np.asarray(report.errors)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        ax.loglog(nu, err, "ko-", lw=1.2, label="err(ν)")
        ax.loglog(nu, report.constant * nu**report.slope, "--", color="0.5",
                  label=f"fit slope {report.slope:.2f}")
        ax.loglog(nu, err[0] * nu / nu[0], ":", color="C3", label="slope 1")
        ax.set_xlabel("ν")
        ax.set_ylabel(r"$\sup_t\|\phi_\nu-\phi\|_\#^2 + \sum dt\|u_\nu-u\|^2$")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_probe(report, path):
    pairs = [(d, r) for d, r in zip(report.deltas, report.ratios) if r is not None and d > 0]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        if pairs:
            d, r = map(np.asarray, zip(*pairs))
            ax.loglog(d, r, "ko-", lw=1.2)
        ax.set_xlabel("δ")
        ax.set_ylabel("ρ(δ)")
        ax.set_title(f"{report.mode}, {report.shape}", fontsize=9)
        return _save(fig, path)


def plot_field(phi, path, title=None):
    g = phi.grid
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(0.8, 1.0))
        im = ax.imshow(phi.values.T, origin="lower", extent=(0, g.lx, 0, g.ly), cmap="RdBu_r",
                       vmin=-1, vmax=1)
        fig.colorbar(im, ax=ax, shrink=0.8)
        if title:
            ax.set_title(title, fontsize=9)
        return _save(fig, path)
