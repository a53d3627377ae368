"""Single-file binary archives for models and network checkpoints.

Layout: 8 magic bytes "GPTPINN1", an 8-byte little-endian length, a UTF-8
JSON metadata document, then the declared arrays concatenated as row-major
little-endian float64.  Floats inside the metadata round-trip exactly
through JSON (shortest-repr serialization), so load(save(x)) is bitwise.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .greedy import GreedyRound
from .pde import CollocationSet
from .reduced import GptModel, PrecomputedBasis, StiffFilter
from .training import FullPINN
from .mlp import MLPParams

MAGIC = b"GPTPINN1"
VERSION = 1

_F8LE = np.dtype("<f8")


class ArchiveError(ValueError):
    pass


class _Writer:
    def __init__(self):
        self.names = []
        self.arrays = []

    def add(self, name, arr):
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        self.names.append({"name": name, "shape": list(arr.shape)})
        self.arrays.append(arr)

    def dump(self, path, meta):
        meta = dict(meta)
        meta["version"] = VERSION
        meta["arrays"] = self.names
        blob = json.dumps(meta).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            for arr in self.arrays:
                fh.write(arr.astype(_F8LE, copy=False).tobytes())


def _read_archive(path):
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:8] != MAGIC:
        raise ArchiveError("not a model archive")
    if len(data) < 16:
        raise ArchiveError("corrupt archive")
    (meta_len,) = struct.unpack("<Q", data[8:16])
    if len(data) < 16 + meta_len:
        raise ArchiveError("corrupt archive")
    try:
        meta = json.loads(data[16:16 + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise ArchiveError("corrupt archive") from err
    if meta.get("version") != VERSION:
        raise ArchiveError("unsupported version")
    offset = 16 + meta_len
    arrays = {}
    for spec in meta["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(data):
            raise ArchiveError("corrupt archive")
        arr = np.frombuffer(data, dtype=_F8LE, count=count, offset=offset)
        arrays[spec["name"]] = arr.astype(np.float64).reshape(shape)
        offset += nbytes
    if offset != len(data):
        raise ArchiveError("corrupt archive")
    return meta, arrays


def _add_colloc(w, prefix, colloc):
    w.add(f"{prefix}/interior", colloc.interior)
    w.add(f"{prefix}/boundary", colloc.boundary)
    w.add(f"{prefix}/initial", colloc.initial)


def _colloc_meta(colloc):
    return {"strategy": colloc.strategy, "seed": int(colloc.seed)}


def _restore_colloc(arrays, prefix, meta):
    return CollocationSet(
        arrays[f"{prefix}/interior"], arrays[f"{prefix}/boundary"],
        arrays[f"{prefix}/initial"],
        strategy=meta["strategy"], seed=meta["seed"],
    )


def _add_pinn_arrays(w, prefix, pinn):
    for k, (wk, bk) in enumerate(zip(pinn.params.weights, pinn.params.biases)):
        w.add(f"{prefix}/w{k}", wk)
        w.add(f"{prefix}/b{k}", bk)
    w.add(f"{prefix}/mu", pinn.mu)
    w.add(f"{prefix}/loss_history", pinn.loss_history)


def _pinn_meta(pinn):
    return {
        "dims": list(pinn.params.dims),
        "activation": pinn.params.activation,
        "terminal_loss": float(pinn.terminal_loss),
        "epochs_run": int(pinn.epochs_run),
        "wall_time": float(pinn.wall_time),
        "seed": int(pinn.seed),
    }


def _restore_pinn(arrays, prefix, meta, colloc):
    dims = tuple(meta["dims"])
    weights = [arrays[f"{prefix}/w{k}"] for k in range(len(dims) - 1)]
    biases = [arrays[f"{prefix}/b{k}"] for k in range(len(dims) - 1)]
    return FullPINN(
        mu=arrays[f"{prefix}/mu"],
        params=MLPParams(dims, weights, biases, meta["activation"]),
        colloc=colloc,
        terminal_loss=meta["terminal_loss"],
        epochs_run=meta["epochs_run"],
        wall_time=meta["wall_time"],
        seed=meta["seed"],
        loss_history=arrays[f"{prefix}/loss_history"],
    )


def save_model(model: GptModel, path):
    """Write a model archive; bitwise-recoverable by :func:`load_model`."""
    w = _Writer()
    meta = {
        "kind": "gpt-model",
        "pde": model.pde.name,
        "colloc_train": _colloc_meta(model.pinns[0].colloc),
        "colloc_r": _colloc_meta(model.colloc_r),
        "pinns": [_pinn_meta(p) for p in model.pinns],
        "neuron_losses": [float(v) for v in model.neuron_losses],
        "stiff_filter": None if model.stiff_filter is None else {
            "threshold": model.stiff_filter.threshold, "mode": model.stiff_filter.mode,
        },
        "has_xi": model.xi is not None,
        "history": [
            {
                "n_neurons": r.n_neurons,
                "chosen_index": int(r.chosen_index),
                "train_time": float(r.train_time),
                "max_indicator": float(r.max_indicator),
                "argmax_index": None if r.argmax_index is None else int(r.argmax_index),
                "scan_time": float(r.scan_time),
                "scan_epochs": int(r.scan_epochs),
                "n_diverged": int(r.n_diverged),
                "has_scan": r.scan_deltas is not None,
            }
            for r in model.history
        ],
    }
    _add_colloc(w, "colloc_train", model.pinns[0].colloc)
    _add_colloc(w, "colloc_r", model.colloc_r)
    for i, pinn in enumerate(model.pinns):
        _add_pinn_arrays(w, f"pinn{i}", pinn)
    for name, mat in sorted(model.basis.interior.items()):
        w.add(f"basis/interior/{name}", mat)
    w.add("basis/boundary_u", model.basis.boundary_u)
    w.add("basis/initial_u", model.basis.initial_u)
    if model.basis.initial_ut is not None:
        w.add("basis/initial_ut", model.basis.initial_ut)
    for name in ("interior", "boundary", "initial"):
        w.add(f"mask/{name}", model.masks[name].astype(np.float64))
        if model.stiff_filter is not None and model._uxx[name]:
            w.add(f"uxx/{name}", np.vstack(model._uxx[name]))
    if model.xi is not None:
        w.add("xi", model.xi)
    for r in model.history:
        if r.scan_deltas is not None:
            w.add(f"hist{r.n_neurons}/deltas", r.scan_deltas)
    w.dump(path, meta)


def load_model(path, pde=None) -> GptModel:
    """Read a model archive back, bitwise."""
    from .pde import get_pde

    meta, arrays = _read_archive(path)
    if meta.get("kind") != "gpt-model":
        raise ArchiveError("not a model archive")
    pde = pde or get_pde(meta["pde"])
    colloc_train = _restore_colloc(arrays, "colloc_train", meta["colloc_train"])
    colloc_r = _restore_colloc(arrays, "colloc_r", meta["colloc_r"])
    sf = meta["stiff_filter"]
    model = GptModel(pde, colloc_r,
                     stiff_filter=None if sf is None else StiffFilter(**sf))
    model.pinns = [
        _restore_pinn(arrays, f"pinn{i}", m, colloc_train)
        for i, m in enumerate(meta["pinns"])
    ]
    model.mus = [p.mu for p in model.pinns]
    from .reduced import _INTERIOR_FIELDS

    model.basis = PrecomputedBasis(
        colloc=colloc_r,
        interior={name: arrays[f"basis/interior/{name}"]
                  for name in _INTERIOR_FIELDS[pde.name]},
        boundary_u=arrays["basis/boundary_u"],
        initial_u=arrays["basis/initial_u"],
        initial_ut=arrays.get("basis/initial_ut"),
    )
    model.masks = {name: arrays[f"mask/{name}"] > 0.5
                   for name in ("interior", "boundary", "initial")}
    if model.stiff_filter is not None:
        model._uxx = {name: list(arrays[f"uxx/{name}"])
                      for name in ("interior", "boundary", "initial")
                      if f"uxx/{name}" in arrays}
    model.neuron_losses = list(meta["neuron_losses"])
    model.xi = arrays.get("xi")
    model.history = [
        GreedyRound(
            n_neurons=r["n_neurons"],
            chosen_mu=model.mus[i],
            chosen_index=r["chosen_index"],
            train_time=r["train_time"],
            scan_deltas=arrays.get(f"hist{r['n_neurons']}/deltas") if r["has_scan"] else None,
            max_indicator=r["max_indicator"],
            argmax_index=r["argmax_index"],
            scan_time=r["scan_time"],
            scan_epochs=r["scan_epochs"],
            n_diverged=r["n_diverged"],
        )
        for i, r in enumerate(meta["history"])
    ]
    return model


def save_pinn(pinn: FullPINN, path):
    """Write a single-network checkpoint in the same container format."""
    w = _Writer()
    meta = {
        "kind": "full-pinn",
        "pinn": _pinn_meta(pinn),
        "colloc": _colloc_meta(pinn.colloc),
    }
    _add_pinn_arrays(w, "pinn", pinn)
    _add_colloc(w, "colloc", pinn.colloc)
    w.dump(path, meta)


def load_pinn(path) -> FullPINN:
    meta, arrays = _read_archive(path)
    if meta.get("kind") != "full-pinn":
        raise ArchiveError("not a network checkpoint")
    colloc = _restore_colloc(arrays, "colloc", meta["colloc"])
    return _restore_pinn(arrays, "pinn", meta["pinn"], colloc)
