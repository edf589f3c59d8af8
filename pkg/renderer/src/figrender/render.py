"""Drawing layer: fig-data JSON in, image bytes out.

The fig-data schema (``"figure/1"``) is produced by the lagbias CLI.
Every number drawn here is taken verbatim from those files; this module
computes no statistics of its own.
"""
import io
import json
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

SCHEMA = "figure/1"

#: Keys every payload must carry, then the extra keys per chart kind.
COMMON_KEYS = ("schema", "id", "kind", "title", "x_label", "y_label")
KIND_KEYS = {
    "grouped_bars": ("categories", "series"),
    "scatter_with_fits": ("groups",),
    "densities": ("grid", "series"),
    "lines": ("x", "series"),
}

#: A density series named "prior" is drawn grey by convention; every
#: other series takes colors from the cycle in file order.
PRIOR_COLOR = "#999999"
COLOR_CYCLE = ("#d95f02", "#1b9e77", "#7570b3", "#e7298a",
               "#66a61e", "#e6ab02")

#: Pinned style so identical inputs give identical bytes: fixed figure
#: geometry, salted SVG ids, and text kept as text instead of paths.
_RC = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "figure.constrained_layout.use": True,
    "font.size": 10,
    "svg.fonttype": "none",
    "svg.hashsalt": "figrender",
    "axes.spines.top": False,
    "axes.spines.right": False,
}

FORMATS = ("svg", "png")


class FigDataError(Exception):
    """A fig-data file is missing, malformed, or not schema-valid."""


def _require(mapping, where: str, keys) -> None:
    for key in keys:
        if key not in mapping:
            raise FigDataError(f"{where}: missing key '{key}'")


def _nonempty(where: str, label: str, values) -> None:
    if len(values) == 0:
        raise FigDataError(f"{where}: empty {label}")


def _same_length(where: str, label: str, values, reference) -> None:
    if len(values) != len(reference):
        raise FigDataError(
            f"{where}: {label} has {len(values)} values, expected "
            f"{len(reference)}"
        )


def validate_payload(payload: dict, name: str = "fig-data") -> None:
    """Check one decoded fig-data payload against the figure/1 schema.

    Parameters
    ----------
    payload : dict
        Decoded JSON object.
    name : str
        Label used in error messages, usually the file name.

    Raises
    ------
    FigDataError
        Naming the first missing key, empty series, or length mismatch.
    """
    _require(payload, name, COMMON_KEYS)
    if payload["schema"] != SCHEMA:
        raise FigDataError(
            f"{name}: unsupported schema {payload['schema']!r}"
        )
    kind = payload["kind"]
    if kind not in KIND_KEYS:
        raise FigDataError(f"{name}: unknown kind {kind!r}")
    _require(payload, name, KIND_KEYS[kind])

    if kind == "grouped_bars":
        _nonempty(name, "categories", payload["categories"])
        _nonempty(name, "series", payload["series"])
        for i, series in enumerate(payload["series"]):
            where = f"{name}: series[{i}]"
            _require(series, where, ("name", "values"))
            _same_length(where, "'values'", series["values"],
                         payload["categories"])
    elif kind == "scatter_with_fits":
        _nonempty(name, "groups", payload["groups"])
        for i, group in enumerate(payload["groups"]):
            where = f"{name}: groups[{i}]"
            _require(group, where, ("group", "observed", "fit"))
            for part in ("observed", "fit"):
                block = group[part]
                _require(block, f"{where}.{part}", ("year", "ratio"))
                _nonempty(f"{where}.{part}", "'year'", block["year"])
                _same_length(f"{where}.{part}", "'ratio'",
                             block["ratio"], block["year"])
    elif kind == "densities":
        _nonempty(name, "grid", payload["grid"])
        _nonempty(name, "series", payload["series"])
        for i, series in enumerate(payload["series"]):
            where = f"{name}: series[{i}]"
            _require(series, where, ("name", "density"))
            _same_length(where, "'density'", series["density"],
                         payload["grid"])
    else:  # lines
        _nonempty(name, "x", payload["x"])
        _nonempty(name, "series", payload["series"])
        for i, series in enumerate(payload["series"]):
            where = f"{name}: series[{i}]"
            _require(series, where, ("name", "values"))
            _same_length(where, "'values'", series["values"], payload["x"])


def load_fig_data(path) -> dict:
    """Read and validate one fig-data JSON file.

    Returns
    -------
    dict
        The decoded, schema-valid payload.

    Raises
    ------
    FigDataError
        For a missing file, invalid JSON, or schema violation.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FigDataError(f"{path.name}: file not found") from None
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FigDataError(f"{path.name}: invalid JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise FigDataError(f"{path.name}: expected a JSON object")
    validate_payload(payload, path.name)
    return payload


def _decorate(ax, payload) -> None:
    ax.set_title(payload["title"])
    ax.set_xlabel(payload["x_label"])
    ax.set_ylabel(payload["y_label"])


def _build_grouped_bars(payload):
    fig, ax = plt.subplots()
    categories = payload["categories"]
    series = payload["series"]
    width = 0.8 / len(series)
    for i, s in enumerate(series):
        offsets = [j + (i - (len(series) - 1) / 2.0) * width
                   for j in range(len(categories))]
        ax.bar(offsets, s["values"], width=width, label=s["name"],
               color=COLOR_CYCLE[i % len(COLOR_CYCLE)])
    ax.set_xticks(range(len(categories)))
    ax.set_xticklabels(categories)
    _decorate(ax, payload)
    ax.legend(frameon=False)
    return fig


def _build_scatter_with_fits(payload):
    fig, ax = plt.subplots()
    for i, group in enumerate(payload["groups"]):
        color = COLOR_CYCLE[i % len(COLOR_CYCLE)]
        obs, fit = group["observed"], group["fit"]
        ax.scatter(obs["year"], obs["ratio"], s=14, color=color,
                   label=group["group"])
        ax.plot(fit["year"], fit["ratio"], color=color, linewidth=1.5)
    _decorate(ax, payload)
    ax.legend(frameon=False)
    return fig


def _build_densities(payload):
    fig, ax = plt.subplots()
    grid = payload["grid"]
    cycle = iter(COLOR_CYCLE)
    for series in payload["series"]:
        if series["name"] == "prior":
            ax.fill_between(grid, series["density"], color=PRIOR_COLOR,
                            alpha=0.35, linewidth=0)
            ax.plot(grid, series["density"], color=PRIOR_COLOR,
                    linewidth=2.0, label="prior")
        else:
            ax.plot(grid, series["density"], color=next(cycle),
                    linewidth=1.5, label=series["name"])
    ax.set_ylim(bottom=0)
    _decorate(ax, payload)
    ax.legend(frameon=False)
    return fig


def _build_lines(payload):
    fig, ax = plt.subplots()
    for i, series in enumerate(payload["series"]):
        ax.plot(payload["x"], series["values"], marker="o", markersize=3,
                color=COLOR_CYCLE[i % len(COLOR_CYCLE)],
                label=series["name"])
    _decorate(ax, payload)
    ax.legend(frameon=False)
    return fig


_BUILDERS = {
    "grouped_bars": _build_grouped_bars,
    "scatter_with_fits": _build_scatter_with_fits,
    "densities": _build_densities,
    "lines": _build_lines,
}


def render_payload(payload: dict, fmt: str = "svg") -> bytes:
    """Render one schema-valid payload; returns the encoded image bytes.

    Parameters
    ----------
    payload : dict
        A payload accepted by :func:`validate_payload`.
    fmt : {"svg", "png"}
        Output image format.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unsupported format {fmt!r}")
    with matplotlib.rc_context(_RC):
        fig = _BUILDERS[payload["kind"]](payload)
        buf = io.BytesIO()
        try:
            # An explicit null date keeps SVG output free of timestamps.
            metadata = {"Date": None} if fmt == "svg" else None
            fig.savefig(buf, format=fmt, metadata=metadata)
        finally:
            plt.close(fig)
    return buf.getvalue()


def _write_atomic(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_directory(fig_data_dir, out_dir, fmt: str = "svg") -> list[Path]:
    """Render every fig*.json under ``fig_data_dir`` into ``out_dir``.

    All inputs are validated before any image is written, so a schema
    error in one file leaves the output directory untouched.

    Returns
    -------
    list of Path
        The written image paths, one per input file, in name order.
    """
    fig_data_dir, out_dir = Path(fig_data_dir), Path(out_dir)
    paths = sorted(fig_data_dir.glob("fig*.json"))
    if not paths:
        raise FigDataError(f"no fig*.json files in {fig_data_dir}")
    payloads = [load_fig_data(p) for p in paths]
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for path, payload in zip(paths, payloads):
        target = out_dir / f"{path.stem}.{fmt}"
        _write_atomic(target, render_payload(payload, fmt))
        written.append(target)
    return written
