"""File formats: datasets, model tables, sample streams, experiment configs.

All numeric text uses 17 significant digits so a written file reproduces the
exact float64 values on read, and every artifact carries a header with the
hash of the generating config for provenance.
"""

from __future__ import annotations

import configparser
import hashlib
import io as _io
from pathlib import Path
from typing import Optional

import numpy as np

from .types import Dataset, ModelIndicator, PosteriorTable


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_dataset(path, data: Dataset, sigma: float):
    """Header 'n p sigma', then row-major X with y as the final column.

    Planted truth, when present, goes to a '<path>.truth' sidecar.
    """
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"{data.n} {data.p} {_fmt(sigma)}\n")
        for i in range(data.n):
            row = [_fmt(v) for v in data.X[i]] + [_fmt(data.y[i])]
            fh.write(" ".join(row) + "\n")
    if data.has_truth:
        with Path(str(path) + ".truth").open("w") as fh:
            fh.write(" ".join(_fmt(v) for v in data.beta_star) + "\n")
            fh.write(data.z_star.to01() + "\n")


def read_dataset(path) -> tuple[Dataset, float]:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline().split()
        if len(first) != 3:
            raise ConfigError(f"{path}: expected header 'n p sigma'")
        n, p, sigma = int(first[0]), int(first[1]), float(first[2])
        body = np.loadtxt(fh, ndmin=2)
    if body.shape != (n, p + 1):
        raise ConfigError(f"{path}: body shape {body.shape} does not match header")
    beta_star = z_star = None
    sidecar = Path(str(path) + ".truth")
    if sidecar.exists():
        lines = sidecar.read_text().splitlines()
        beta_star = np.array([float(v) for v in lines[0].split()])
        z_star = ModelIndicator(np.frombuffer(lines[1].strip().encode(), dtype=np.uint8) - ord("0"))
    return (
        Dataset(X=body[:, :p], y=body[:, p], beta_star=beta_star, z_star=z_star),
        sigma,
    )


def write_table(path, table: PosteriorTable, header: Optional[dict] = None):
    with Path(path).open("w") as fh:
        for key, val in (header or {}).items():
            fh.write(f"# {key}={val}\n")
        fh.write(f"# log_norm={_fmt(table.log_norm)}\n")
        for z, pr in sorted(table.items(), key=lambda kv: kv[0].to01()):
            fh.write(f"{z.to01()},{_fmt(pr)}\n")


def read_table(path) -> PosteriorTable:
    entries = {}
    log_norm = 0.0
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "log_norm=" in line:
                    log_norm = float(line.split("log_norm=")[1])
                continue
            bits, pr = line.split(",")
            entries[ModelIndicator(np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0"))] = (
                float(pr)
            )
    return PosteriorTable(entries, log_norm)


def write_samples(path, sweeps, z_bits, beta, log_joint=None, omega=None,
                  header: Optional[dict] = None):
    """CSV stream: sweep index, z as a 0/1 string, beta columns, log joint,
    optional omega block."""
    z_bits = np.asarray(z_bits)
    beta = np.asarray(beta)
    p = beta.shape[1]
    with Path(path).open("w") as fh:
        for key, val in (header or {}).items():
            fh.write(f"# {key}={val}\n")
        cols = ["sweep", "z"] + [f"beta_{j}" for j in range(p)]
        if log_joint is not None:
            cols.append("log_joint")
        if omega is not None:
            cols += [f"omega_{i}" for i in range(np.asarray(omega).shape[1])]
        fh.write(",".join(cols) + "\n")
        for idx in range(beta.shape[0]):
            row = [str(int(sweeps[idx])), "".join(str(int(b)) for b in z_bits[idx])]
            row += [_fmt(v) for v in beta[idx]]
            if log_joint is not None:
                row.append(_fmt(log_joint[idx]))
            if omega is not None:
                row += [_fmt(v) for v in omega[idx]]
            fh.write(",".join(row) + "\n")


def read_samples(path) -> dict:
    sweeps, zrows, betas, ljs = [], [], [], []
    with Path(path).open() as fh:
        cols = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if cols is None:
                cols = line.split(",")
                n_beta = sum(1 for c in cols if c.startswith("beta_"))
                has_lj = "log_joint" in cols
                continue
            parts = line.split(",")
            sweeps.append(int(parts[0]))
            zrows.append([int(ch) for ch in parts[1]])
            betas.append([float(v) for v in parts[2 : 2 + n_beta]])
            if has_lj:
                ljs.append(float(parts[2 + n_beta]))
    return {
        "sweeps": np.array(sweeps, dtype=np.int64),
        "z_bits": np.array(zrows, dtype=np.uint8),
        "beta": np.array(betas),
        "log_joint": np.array(ljs) if ljs else None,
    }


def write_matrix_csv(path, matrix, header: Optional[dict] = None, col_prefix="col"):
    matrix = np.atleast_2d(matrix)
    with Path(path).open("w") as fh:
        for key, val in (header or {}).items():
            fh.write(f"# {key}={val}\n")
        fh.write(",".join(f"{col_prefix}_{j}" for j in range(matrix.shape[1])) + "\n")
        for row in matrix:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def load_config(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path} not found or empty")
    return parser


def config_hash(parser: configparser.ConfigParser, extra: Optional[dict] = None) -> str:
    """Stable short hash of the flattened key=value content."""
    buf = _io.StringIO()
    for section in sorted(parser.sections()):
        for key in sorted(parser[section]):
            buf.write(f"{section}.{key}={parser[section][key]}\n")
    for key in sorted(extra or {}):
        buf.write(f"{key}={extra[key]}\n")
    return hashlib.sha256(buf.getvalue().encode()).hexdigest()[:16]
