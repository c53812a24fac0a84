"""Monte-Carlo link simulation of OSTBC-coded downlink beamforming.

Every user m sends a block X(s_m) of K slots through its N x K beamformer
W_m.  Receiver i observes y_i = sum_m X(s_m) W_m^H h_i + n_i, flips the sign
of slots 2..K and equalises with the real virtual channel g_i = W_i^H h_i.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erfc

from . import ostbc
from .scenario import Scenario, lin2db

CSV_FIELDS = ("user", "blocks", "empirical_sinr_db", "theoretical_sinr_db",
              "power_analytic", "power_empirical", "ser")


def qpsk(shape, rng: np.random.Generator) -> np.ndarray:
    """Unit-energy 4-QAM symbols."""
    bits = rng.integers(0, 2, size=shape + (2,))
    return ((2 * bits[..., 0] - 1) + 1j * (2 * bits[..., 1] - 1)) / np.sqrt(2.0)


def qpsk_detect(z):
    return (np.sign(z.real) + 1j * np.sign(z.imag)) / np.sqrt(2.0)


def qpsk_ser(sinr):
    """Symbol error rate of 4-QAM with Gaussian disturbance at the given SINR."""
    p = 0.5 * erfc(np.sqrt(np.asarray(sinr, dtype=float) / 2.0))
    return 2 * p - p * p


def complex_noise(shape, noise_power, rng: np.random.Generator):
    scale = np.sqrt(noise_power / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _code_dim(W_list):
    K = {W.shape[1] for W in W_list}
    if len(K) != 1:
        raise ValueError("all beamformers must have the same number of columns")
    return K.pop()


def virtual_channels(W_list, h):
    """g_m = W_m^H h for every user m."""
    return [W.conj().T @ h for W in W_list]


def transmit_block(W_list, symbols, h_i, noise_i) -> np.ndarray:
    """Received K-vector y_i = sum_m X(s_m) W_m^H h_i + n_i.

    ``symbols`` has shape (M, K) or (B, M, K) for a batch of B blocks;
    ``noise_i`` has shape (K,) or (B, K).
    """
    symbols = np.asarray(symbols)
    K = _code_dim(W_list)
    M = len(W_list)
    if symbols.shape[-2:] != (M, K):
        raise ValueError(f"symbols must have trailing shape {(M, K)}, got {symbols.shape}")
    if W_list[0].shape[0] != np.shape(h_i)[0]:
        raise ValueError("channel length does not match beamformers")
    code = ostbc.build_code(K)
    y = np.array(noise_i, dtype=complex, copy=True)
    for m, g in enumerate(virtual_channels(W_list, h_i)):
        y = y + np.einsum("...kl,l->...k", ostbc.encode(code, symbols[..., m, :]), g)
    return y


def theoretical_sinr(W_list, h_i, noise_power, i: int) -> float:
    """Per-symbol post-detection SINR |g_i|^2 / (sum_{m != i} |g_m|^2 + sigma^2)."""
    g = virtual_channels(W_list, h_i)
    signal = float(np.vdot(g[i], g[i]).real)
    interference = sum(float(np.vdot(gm, gm).real) for m, gm in enumerate(g) if m != i)
    denom = interference + noise_power
    if denom == 0.0:
        return np.inf
    return signal / denom


def per_slot_power(W_i) -> float:
    """Analytic transmitted power of one user in any slot, Tr(W_i W_i^H)."""
    return float(np.vdot(W_i, W_i).real)


def slot_power_samples(W_i, symbols) -> np.ndarray:
    """Per-block, per-slot transmitted power |W_i X(s)^H e_k|^2, shape (B, K)."""
    code = ostbc.build_code(W_i.shape[1])
    blocks = ostbc.encode(code, symbols)
    tx = np.einsum("nl,bkl->bkn", W_i, blocks.conj())
    return np.sum(np.abs(tx) ** 2, axis=-1)


@dataclass(frozen=True)
class RunConfig:
    blocks: int = 100_000
    seed: int = 0
    chunk: int = 10_000
    constellation: str = "qpsk"

    def __post_init__(self):
        if self.blocks < 1 or self.chunk < 1:
            raise ValueError("blocks and chunk must be positive")
        if self.constellation != "qpsk":
            raise ValueError(f"unsupported constellation {self.constellation!r}")


@dataclass
class UserRecord:
    user: int
    blocks: int
    empirical_sinr: float
    theoretical_sinr: float
    power_analytic: float
    power_empirical: float
    ser: float
    ser_theory: float
    slot_sinr: np.ndarray = field(repr=False)
    slot_sinr_stderr: np.ndarray = field(repr=False)
    slot_power: np.ndarray = field(repr=False)
    slot_power_stderr: np.ndarray = field(repr=False)
    interference_diag: np.ndarray = field(repr=False)
    interference_theory: float = 0.0
    noise_cov: np.ndarray = field(repr=False, default=None)
    noise_theory: float = 0.0
    no_interference: bool = False

    @property
    def empirical_sinr_db(self):
        return float(lin2db(self.empirical_sinr)) if self.empirical_sinr > 0 else -np.inf

    @property
    def theoretical_sinr_db(self):
        return float(lin2db(self.theoretical_sinr)) if self.theoretical_sinr > 0 else -np.inf

    def csv_row(self):
        return dict(user=self.user, blocks=self.blocks,
                    empirical_sinr_db=self.empirical_sinr_db,
                    theoretical_sinr_db=self.theoretical_sinr_db,
                    power_analytic=self.power_analytic, power_empirical=self.power_empirical,
                    ser=self.ser)


@dataclass
class LinkRun:
    blocks: int
    constellation: str
    seed: int
    records: list

    def write_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            writer.writeheader()
            for rec in self.records:
                writer.writerow(rec.csv_row())
        return path


class _Moments:
    """Running sums for per-slot means and standard errors."""

    def __init__(self, K):
        self.n = 0
        self.s1 = np.zeros(K)
        self.s2 = np.zeros(K)

    def add(self, x):
        self.n += x.shape[0]
        self.s1 += x.sum(axis=0)
        self.s2 += (x ** 2).sum(axis=0)

    def mean(self):
        return self.s1 / self.n

    def stderr(self):
        var = np.maximum(self.s2 / self.n - self.mean() ** 2, 0.0)
        return np.sqrt(var / max(self.n - 1, 1))


def empirical_sinr(config: RunConfig, W_list, scenario: Scenario) -> LinkRun:
    """Simulate ``config.blocks`` blocks for every user and collect statistics.

    Signal, interference and noise contributions are equalised separately so
    their covariances can be compared to the closed forms; the total is what a
    receiver would see.
    """
    K = _code_dim(W_list)
    M = len(W_list)
    code = ostbc.build_code(K)
    sign = ostbc.receive_sign_pattern(K)
    rng = np.random.default_rng(config.seed)
    channels = scenario.channels

    err = [_Moments(K) for _ in range(M)]
    powm = [_Moments(K) for _ in range(M)]
    icov = [np.zeros((K, K), dtype=complex) for _ in range(M)]
    ncov = [np.zeros((K, K), dtype=complex) for _ in range(M)]
    errors = np.zeros(M)
    gs = [virtual_channels(W_list, channels[i]) for i in range(M)]

    done = 0
    while done < config.blocks:
        B = min(config.chunk, config.blocks - done)
        s = qpsk((B, M, K), rng)
        for i in range(M):
            user = scenario.users[i]
            g = gs[i]
            gi = g[i]
            if np.linalg.norm(gi) == 0:
                continue
            noise = complex_noise((B, K), user.noise_power, rng)
            interf = np.zeros((B, K), dtype=complex)
            for m in range(M):
                if m != i:
                    interf += np.einsum("bkl,l->bk", ostbc.encode(code, s[:, m]), g[m])
            desired = np.einsum("bkl,l->bk", ostbc.encode(code, s[:, i]), g[i])
            y = desired + interf + noise
            s_hat = ostbc.equalize(code, gi, y * sign)
            i_hat = ostbc.equalize(code, gi, interf * sign)
            n_hat = ostbc.equalize(code, gi, noise * sign)
            e = s_hat - s[:, i]
            err[i].add(np.abs(e) ** 2)
            icov[i] += i_hat.T @ i_hat.conj()
            ncov[i] += n_hat.T @ n_hat.conj()
            errors[i] += np.count_nonzero(np.abs(qpsk_detect(s_hat) - s[:, i]) > 1e-9)
            powm[i].add(slot_power_samples(W_list[i], s[:, i]))
        done += B

    records = []
    n = config.blocks
    for i in range(M):
        user = scenario.users[i]
        g = gs[i]
        gi2 = float(np.vdot(g[i], g[i]).real)
        theory = theoretical_sinr(W_list, channels[i], user.noise_power, i)
        interference_power = sum(float(np.vdot(g[m], g[m]).real) for m in range(M) if m != i)
        if gi2 == 0:
            records.append(UserRecord(i, n, 0.0, 0.0, per_slot_power(W_list[i]), 0.0, 1.0, 1.0,
                                      np.zeros(K), np.zeros(K), np.zeros(K), np.zeros(K), np.zeros(K)))
            continue
        mse = err[i].mean()
        slot_sinr = 1.0 / mse
        # delta method: se(1/x) = se(x)/x^2
        slot_se = err[i].stderr() / mse ** 2
        emp = 1.0 / float(np.mean(mse))
        records.append(UserRecord(
            user=i, blocks=n,
            empirical_sinr=emp, theoretical_sinr=theory,
            power_analytic=per_slot_power(W_list[i]),
            power_empirical=float(np.mean(powm[i].mean())),
            ser=float(errors[i] / (n * K)), ser_theory=float(qpsk_ser(theory)),
            slot_sinr=slot_sinr, slot_sinr_stderr=slot_se,
            slot_power=powm[i].mean(), slot_power_stderr=powm[i].stderr(),
            interference_diag=np.real(np.diag(icov[i])) / n,
            interference_theory=interference_power / gi2,
            noise_cov=ncov[i] / n, noise_theory=user.noise_power / gi2,
            no_interference=interference_power == 0.0,
        ))
    return LinkRun(config.blocks, config.constellation, config.seed, records)
