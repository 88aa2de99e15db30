"""Shared fixtures: shipped scenario configs and assembled systems."""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
import pytest

import abclab as ab

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def load(name: str) -> ab.ScenarioConfig:
    return ab.load_config(CONFIG_DIR / f"{name}.json")


def wave_system(n_cells=32, c=1.0, rho="1", m="1", d="0", k="0",
                b1_mode="zero", b3_zero=False):
    text_cfg = ab.parse_config("{}")
    cfg = dataclasses.replace(
        text_cfg,
        geometry={"kind": "interval", "n_cells": n_cells, "length": 1.0},
        coefficients={"c": c, "rho": rho, "m": m, "d": d, "k": k},
        flags={**text_cfg.flags, "b1_mode": b1_mode, "b3_zero": b3_zero},
    )
    return ab.build_system(cfg)


@pytest.fixture(scope="session")
def abc1d_cfg():
    return load("abc-1d")


@pytest.fixture(scope="session")
def abc1d(abc1d_cfg):
    return ab.build_system(abc1d_cfg)


@pytest.fixture(scope="session")
def special_cfg():
    return load("special-case")


@pytest.fixture(scope="session")
def special(special_cfg):
    return ab.build_system(special_cfg)


@pytest.fixture(scope="session")
def neutral_cfg():
    return load("timoshenko-strip")


@pytest.fixture(scope="session")
def neutral_strip(neutral_cfg):
    return ab.build_system(neutral_cfg)


@pytest.fixture(scope="session")
def biharmonic_sys():
    mesh = ab.build_interval_mesh(32, 1.0)
    coeffs = ab.CoefficientSet(
        c=1.0, rho=np.ones(2), m=np.ones(2), d=np.zeros(2), k=np.zeros(2),
        r=np.array([1.0, 1.0]), s=np.array([0.5, 0.5]),
        p=np.array([-1.0, -1.0]), q=np.array([-0.5, -0.5]))
    ops = ab.assemble_biharmonic_operator(mesh, coeffs)
    return mesh, ab.assemble_block_generator(ops)
