"""Independent reference computations used by the tests: dense-grid sampling
with a DFT, brute-force convolution and exhaustive lattice enumeration."""
from __future__ import annotations

import itertools
import math

import numpy as np


def grid(n: int, points: int = 64) -> np.ndarray:
    """Uniform torus grid as (points**n, n), ij ordering."""
    axes = [2 * np.pi * np.arange(points) / points] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def evaluate(modes, coeffs, x) -> np.ndarray:
    """Plain sum over modes of c_k exp(i k.x); returns (P, *coeff_shape)."""
    modes = np.asarray(modes, dtype=float)
    coeffs = np.asarray(coeffs)
    out = np.zeros((len(x),) + coeffs.shape[1:], dtype=complex)
    for k, c in zip(modes, coeffs):
        out += np.exp(1j * (x @ k)).reshape((-1,) + (1,) * (coeffs.ndim - 1)) * c
    return out


def dft_coefficients(values: np.ndarray, n: int, points: int = 64) -> np.ndarray:
    """Fourier coefficients of grid samples (P**n, d): array (points,)*n + (d,), indexed k mod points."""
    d = values.shape[1]
    shaped = values.reshape((points,) * n + (d,))
    return np.fft.fftn(shaped, axes=tuple(range(n))) / points ** n


def coefficient_grid(modes, coeffs, n: int, points: int = 64) -> np.ndarray:
    """Place sparse coefficients into a DFT array, folding indices mod points."""
    coeffs = np.asarray(coeffs)
    out = np.zeros((points,) * n + coeffs.shape[1:], dtype=complex)
    for k, c in zip(np.asarray(modes, dtype=np.int64), coeffs):
        out[tuple(int(v) % points for v in k)] += c
    return out


def convolve(a: dict, b: dict) -> dict:
    """Product of two scalar series given as {mode tuple: coefficient}."""
    out: dict = {}
    for ka, ca in a.items():
        for kb, cb in b.items():
            k = tuple(x + y for x, y in zip(ka, kb))
            out[k] = out.get(k, 0) + ca * cb
    return out


def appendix_sup(brackets, eta: float, mu: float, N: float) -> float:
    """Exhaustive signed enumeration of sum_j <j>^eta |k_j| < N maximizing prod(1 + <j>^mu |k_j|^mu)."""
    weights = [float(b) ** eta for b in brackets]
    best = 1.0

    def walk(j, budget, prod):
        nonlocal best
        if j == len(weights):
            best = max(best, prod)
            return
        kmax = 0
        while (kmax + 1) * weights[j] < budget:
            kmax += 1
        for k in range(-kmax, kmax + 1):
            walk(j + 1, budget - abs(k) * weights[j],
                 prod * (1.0 + float(brackets[j]) ** mu * float(abs(k)) ** mu))

    walk(0, float(N), 1.0)
    return best


def small_divisors(omega, K: int):
    """All 0 < |k|_sup <= K with |k.omega|, by itertools."""
    n = len(omega)
    out = []
    for k in itertools.product(range(-K, K + 1), repeat=n):
        if any(k):
            out.append((k, abs(sum(a * b for a, b in zip(k, omega)))))
    return out


def geometric_inverse_1d(c: float, J: int = 80) -> dict:
    """(1 + c e^{ix})^{-1} = sum (-c)^j e^{ijx}."""
    return {(j,): (-c) ** j for j in range(J) if abs(c) ** j > 1e-300}


def factorial_tail(x: float, J: int) -> float:
    return x ** J / math.factorial(J)
