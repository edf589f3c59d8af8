"""Shared fixtures: synthetic fig-data payloads and a real pipeline run."""
import json
import shutil
import subprocess

import pytest


@pytest.fixture
def bars_payload():
    return {
        "schema": "figure/1",
        "id": "fig1",
        "kind": "grouped_bars",
        "title": "laureates by field",
        "x_label": "field",
        "y_label": "laureates",
        "categories": ["alpha", "beta"],
        "series": [
            {"name": "male", "values": [30, 20]},
            {"name": "female", "values": [3, 1]},
        ],
    }


@pytest.fixture
def scatter_payload():
    return {
        "schema": "figure/1",
        "id": "fig2",
        "kind": "scatter_with_fits",
        "title": "share by group",
        "x_label": "year",
        "y_label": "share",
        "groups": [
            {
                "group": "physical",
                "observed": {"year": [1990, 2000, 2010],
                             "ratio": [0.05, 0.08, 0.12]},
                "fit": {"year": [1985, 1995, 2005, 2015],
                        "ratio": [0.04, 0.06, 0.1, 0.14]},
            },
            {
                "group": "life",
                "observed": {"year": [1990, 2000], "ratio": [0.1, 0.2]},
                "fit": {"year": [1985, 2005], "ratio": [0.08, 0.22]},
            },
        ],
    }


@pytest.fixture
def densities_payload():
    return {
        "schema": "figure/1",
        "id": "fig3",
        "kind": "densities",
        "title": "bias factor",
        "x_label": "bias factor",
        "y_label": "density",
        "delta": 10,
        "grid": [0.0, 0.5, 1.0, 1.5, 2.0],
        "series": [
            {"name": "prior", "density": [0.1, 0.7, 1.0, 0.4, 0.1]},
            {"name": "chemistry", "density": [0.2, 1.2, 0.5, 0.1, 0.0]},
            {"name": "physics", "density": [0.5, 1.5, 0.2, 0.05, 0.0]},
        ],
    }


@pytest.fixture
def lines_payload():
    return {
        "schema": "figure/1",
        "id": "fig4",
        "kind": "lines",
        "title": "probability by lag",
        "x_label": "lag",
        "y_label": "probability",
        "x": [0, 1, 2],
        "series": [
            {"name": "chemistry", "values": [0.01, 0.02, 0.03]},
            {"name": "physics", "values": [0.02, 0.01, 0.02]},
        ],
    }


@pytest.fixture
def all_payloads(bars_payload, scatter_payload, densities_payload,
                 lines_payload):
    return {"fig1": bars_payload, "fig2": scatter_payload,
            "fig3": densities_payload, "fig4": lines_payload}


@pytest.fixture
def make_figdir(tmp_path):
    """Write a dict of stem -> payload as fig-data files; returns the dir."""
    def _write(payloads):
        fig_dir = tmp_path / "figdata"
        fig_dir.mkdir(exist_ok=True)
        for stem, payload in payloads.items():
            path = fig_dir / f"{stem}.json"
            path.write_text(json.dumps(payload), encoding="utf-8")
        return fig_dir
    return _write


@pytest.fixture(scope="session")
def headline_figdata(tmp_path_factory):
    """Fig-data files produced by an actual (reduced) analysis run."""
    exe = shutil.which("lagbias")
    if exe is None:
        pytest.skip("lagbias CLI not on PATH")
    out = tmp_path_factory.mktemp("figdata-real")
    common = ["--seed", "5", "--chains", "2", "--warmup", "200",
              "--draws", "300", "--out", str(out)]
    for command in (
        [exe, "sample", "--delta", "10", *common],
        [exe, "sweep", "--delta-min", "9", "--delta-max", "10", *common],
        [exe, "figures", "--out", str(out)],
    ):
        subprocess.run(command, check=True, capture_output=True)
    return out
