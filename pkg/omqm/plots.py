import io

import numpy as np


# Fixed ids in the SVG output so identical data renders byte-identical files
SVG_HASH_SALT = 'omqm'


def _pyplot():
    import matplotlib

    matplotlib.use('Agg')
    matplotlib.rcParams.update({
        'svg.hashsalt': SVG_HASH_SALT,
        'svg.fonttype': 'none',
        'axes.unicode_minus': False,
    })
    import matplotlib.pyplot as plt
    return plt


def _render(plt, fig):
    buffer = io.StringIO()
    fig.savefig(buffer, format='svg', metadata={'Date': None})
    plt.close(fig)
    return buffer.getvalue()


def histogram_overlay(empirical, model, title=''):
    """Empirical outcome frequencies as bars with the model probabilities on top."""
    plt = _pyplot()
    empirical = np.asarray(empirical, dtype=np.float64)
    model = np.asarray(model, dtype=np.float64)
    k = np.arange(len(empirical))
    fig, ax = plt.subplots(figsize=(6, 3.6), constrained_layout=True)
    ax.bar(k, empirical, width=0.8, alpha=0.6, label='empirical')
    ax.plot(k, model, marker='o', color='black', label='model')
    ax.set_xlabel('outcome k')
    ax.set_ylabel('probability')
    ax.set_title(title)
    ax.legend(loc='best', fontsize=8)
    return _render(plt, fig)


def modulus_heatmap(values, title=''):
    """log10 |f| over a grid given as a list of rows of complex values."""
    plt = _pyplot()
    modulus = np.log10(np.maximum(np.abs(np.asarray(values, dtype=np.complex128)), 1e-300))
    fig, ax = plt.subplots(figsize=(4.8, 4.2), constrained_layout=True)
    image = ax.imshow(modulus, origin='lower', cmap='viridis')
    fig.colorbar(image, ax=ax, label='log10 |value|')
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    return _render(plt, fig)


def phase_portrait(xs, ys, title=''):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.8, 4.8), constrained_layout=True)
    ax.plot(xs, ys, linewidth=0.4)
    ax.set_xlabel('x')
    ax.set_ylabel('y')
    ax.set_title(title)
    return _render(plt, fig)


def line_with_markers(xs, ys, markers=(), title='', xlabel='', ylabel=''):
    """Line plot with vertical markers, used for Z(t) and its zeros."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.6), constrained_layout=True)
    ax.plot(xs, ys, linewidth=0.8)
    ax.axhline(0.0, color='grey', linewidth=0.5)
    for marker in markers:
        ax.axvline(marker, color='red', linewidth=0.5, linestyle='--')
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return _render(plt, fig)
