"""CSV outputs with fixed, documented headers.

Every file starts with a header row; the parameter columns are named
mu1..mud.  Column order is part of the format and never changes within a
major version.
"""

import csv
from pathlib import Path

import numpy as np


def _mu_cols(d):
    return [f"mu{i + 1}" for i in range(d)]


def _write(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def write_loss_history(path, history):
    rows = [(e, float(v)) for e, v in enumerate(np.asarray(history))]
    return _write(path, ["epoch", "loss"], rows)


def write_online_results(path, mus, deltas, epochs, times):
    mus = np.atleast_2d(np.asarray(mus, dtype=np.float64))
    header = _mu_cols(mus.shape[1]) + ["delta", "epochs", "t_online_s"]
    rows = [
        list(mu) + [float(d), int(e), float(t)]
        for mu, d, e, t in zip(mus, deltas, epochs, times)
    ]
    return _write(path, header, rows)


def write_chosen_params(path, model):
    d = len(model.mus[0])
    header = ["round"] + _mu_cols(d) + ["max_indicator", "t_full_train_s", "t_scan_s"]
    rows = [
        [i + 1] + list(rnd.chosen_mu) + [float(rnd.max_indicator),
                                         float(rnd.train_time), float(rnd.scan_time)]
        for i, rnd in enumerate(model.history)
    ]
    return _write(path, header, rows)


def write_indicator_scans(outdir, model):
    """One indicator_scan_round_<n>.csv per round with a scan table."""
    outdir = Path(outdir)
    written = []
    for rnd in model.history:
        if rnd.scan_deltas is None:
            continue
        d = model.xi.shape[1]
        header = _mu_cols(d) + ["delta"]
        rows = [list(mu) + [float(v)] for mu, v in zip(model.xi, rnd.scan_deltas)]
        written.append(_write(outdir / f"indicator_scan_round_{rnd.n_neurons}.csv",
                              header, rows))
    return written


def write_test_errors(path, report):
    d = len(report.rows[0].mu) if report.rows else 0
    header = _mu_cols(d) + ["rel_l2", "max_abs", "delta", "t_online_s"]
    rows = [
        list(r.mu) + [r.rel_l2, r.max_abs, r.delta, r.t_online]
        for r in report.rows
    ]
    return _write(path, header, rows)


def write_timing(path, curve):
    rows = [
        (int(q), float(f), float(g))
        for q, f, g in zip(curve.queries, curve.full_cum, curve.gpt_cum)
    ]
    return _write(path, ["q", "full_cum_s", "gpt_cum_s"], rows)


def write_svd(path, ratio_label_pairs):
    """Rows (k, sigma_ratio, label) for one or more labelled spectra."""
    rows = []
    for ratios, label in ratio_label_pairs:
        rows.extend((k + 1, float(v), label) for k, v in enumerate(ratios))
    return _write(path, ["k", "sigma_ratio", "label"], rows)


def write_prediction_grid(path, points, values):
    rows = [(float(x), float(t), float(v)) for (x, t), v in zip(points, values)]
    return _write(path, ["x", "t", "value"], rows)


def write_pointwise_error(path, points, abs_error):
    rows = [(float(x), float(t), float(e)) for (x, t), e in zip(points, abs_error)]
    return _write(path, ["x", "t", "abs_error"], rows)


def write_coefficients(path, coeffs):
    rows = [(i + 1, float(c)) for i, c in enumerate(coeffs)]
    return _write(path, ["index", "c"], rows)
