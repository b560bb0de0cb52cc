"""Classic online portfolio-selection baselines.

Each update op implements one published rule; the Strategy wrappers drive
them day by day for the backtest harness, falling back to uniform weights
until their history windows fill.

References: Cover's universal portfolios line of work for CRP, Helmbold et
al. for EG, Li & Hoi for OLMAR/PAMR/RMR, Borodin et al. correlation-driven
selection for CORN.
"""

from __future__ import annotations

import numpy as np

from .errors import InsufficientHistory
from .metrics import check_weights, uniform_weights
from .solver import simplex_repair


def crp_weights(n_assets: int) -> np.ndarray:
    """Constant rebalanced portfolio: uniform weights every day."""
    return uniform_weights(n_assets)


def eg_update(weights, relatives, eta: float = 0.05) -> np.ndarray:
    """Exponentiated-gradient step w_i * exp(eta * x_i / (w.x)), renormalised."""
    w = check_weights(weights)
    x = np.asarray(relatives, dtype=np.float64)
    if eta < 0:
        raise ValueError(f"eta {eta} must be non-negative")
    growth = float(w @ x)
    if growth <= 0:
        raise ValueError("portfolio growth must be positive")
    b = w * np.exp(eta * x / growth)
    return b / b.sum()


def _reversion_step(weights, x_hat, epsilon: float) -> np.ndarray:
    """Mean-reversion step shared by OLMAR and RMR: move toward the
    predicted relatives until the expected growth clears epsilon, then
    project back onto the simplex."""
    w = check_weights(weights)
    x = np.asarray(x_hat, dtype=np.float64)
    x_bar = float(x.mean())
    denom = float(np.sum((x - x_bar) ** 2))
    if denom <= 1e-18:
        return w.copy()
    lam = max(0.0, (epsilon - float(w @ x)) / denom)
    return simplex_repair(w + lam * (x - x_bar))


def olmar_predict(price_window) -> np.ndarray:
    """Moving-average reversion prediction (1/w) * sum_j p_{t-j} / p_t."""
    p = np.asarray(price_window, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 1:
        raise InsufficientHistory("need a (w, N) price window")
    return p.mean(axis=0) / p[-1]


def olmar_update(weights, price_window, epsilon: float = 10.0) -> np.ndarray:
    """On-line moving-average reversion update."""
    return _reversion_step(weights, olmar_predict(price_window), epsilon)


def pamr_update(weights, relatives, epsilon: float = 0.5) -> np.ndarray:
    """Passive-aggressive mean reversion: step away from today's relatives
    when the realised growth exceeds epsilon."""
    w = check_weights(weights)
    x = np.asarray(relatives, dtype=np.float64)
    loss = max(0.0, float(w @ x) - epsilon)
    if loss == 0.0:
        return w.copy()
    x_bar = float(x.mean())
    denom = float(np.sum((x - x_bar) ** 2))
    if denom <= 1e-18:
        return w.copy()
    tau = loss / denom
    return simplex_repair(w - tau * (x - x_bar))


def l1_median(points, max_iter: int = 200, tol: float = 1e-9) -> np.ndarray:
    """Geometric (L1) median by Weiszfeld iteration, capped at max_iter."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise InsufficientHistory("need a (w, N) point set")
    y = pts.mean(axis=0)
    for _ in range(max_iter):
        d = np.linalg.norm(pts - y, axis=1)
        if np.any(d < tol):
            return pts[int(np.argmin(d))].copy()
        inv = 1.0 / d
        y_new = (pts * inv[:, None]).sum(axis=0) / inv.sum()
        if np.linalg.norm(y_new - y) < tol:
            return y_new
        y = y_new
    return y


def rmr_update(
    weights, price_window, epsilon: float = 5.0, max_iter: int = 200
) -> np.ndarray:
    """Robust median reversion: predict relatives from the L1 median of the
    price window, then take the shared reversion step."""
    p = np.asarray(price_window, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 2:
        raise InsufficientHistory("need a (w, N) price window with w >= 2")
    x_hat = l1_median(p, max_iter=max_iter) / p[-1]
    return _reversion_step(weights, x_hat, epsilon)


def log_wealth_weights(relatives_set, iterations: int = 500, step: float = 0.1) -> np.ndarray:
    """Maximise sum log(b.x) over the simplex by projected gradient ascent."""
    x = np.asarray(relatives_set, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise InsufficientHistory("need a (m, N) set of relatives")
    b = uniform_weights(x.shape[1])
    for _ in range(iterations):
        growth = x @ b
        grad = (x / growth[:, None]).sum(axis=0) / x.shape[0]
        b = simplex_repair(b + step * grad)
    return b


def corn_weights(relatives_history, window: int = 5, rho: float = 0.1) -> np.ndarray:
    """Correlation-driven selection: find past windows correlated with the
    current one (>= rho), then bet the log-optimal portfolio over the days
    that followed them. Uniform when nothing matches."""
    x = np.asarray(relatives_history, dtype=np.float64)
    t, n = x.shape
    if t < 2 * window + 1:
        raise InsufficientHistory(f"need at least {2 * window + 1} days, got {t}")
    current = x[-window:].ravel()
    matches = []
    for end in range(window, t - window + 1):
        past = x[end - window : end].ravel()
        sd_p, sd_c = past.std(), current.std()
        if sd_p < 1e-12 or sd_c < 1e-12:
            continue
        corr = float(np.corrcoef(past, current)[0, 1])
        if corr >= rho:
            matches.append(x[end])  # the day that followed the matched window
    if not matches:
        return uniform_weights(n)
    return log_wealth_weights(np.stack(matches))


# -- strategy drivers ---------------------------------------------------------


class Strategy:
    """Stateful day-by-day driver: feed today's relatives, get tomorrow's
    weights."""

    name = "base"

    def reset(self, n_assets: int):
        self.n = n_assets
        self.weights = uniform_weights(n_assets)

    def step(self, relatives: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Crp(Strategy):
    name = "crp"

    def step(self, relatives):
        return crp_weights(self.n)


class Eg(Strategy):
    name = "eg"

    def __init__(self, eta: float = 0.05):
        self.eta = eta

    def step(self, relatives):
        self.weights = eg_update(self.weights, relatives, eta=self.eta)
        return self.weights


class Olmar(Strategy):
    name = "olmar"

    def __init__(self, window: int = 5, epsilon: float = 10.0):
        self.window = window
        self.epsilon = epsilon

    def reset(self, n_assets):
        super().reset(n_assets)
        self.prices = [np.ones(n_assets)]

    def step(self, relatives):
        self.prices.append(self.prices[-1] * relatives)
        if len(self.prices) < self.window:
            return self.weights
        window = np.stack(self.prices[-self.window :])
        self.weights = olmar_update(self.weights, window, epsilon=self.epsilon)
        return self.weights


class Pamr(Strategy):
    name = "pamr"

    def __init__(self, epsilon: float = 0.5):
        self.epsilon = epsilon

    def step(self, relatives):
        self.weights = pamr_update(self.weights, relatives, epsilon=self.epsilon)
        return self.weights


class Rmr(Strategy):
    name = "rmr"

    def __init__(self, window: int = 5, epsilon: float = 5.0):
        self.window = window
        self.epsilon = epsilon

    def reset(self, n_assets):
        super().reset(n_assets)
        self.prices = [np.ones(n_assets)]

    def step(self, relatives):
        self.prices.append(self.prices[-1] * relatives)
        if len(self.prices) < self.window:
            return self.weights
        window = np.stack(self.prices[-self.window :])
        self.weights = rmr_update(self.weights, window, epsilon=self.epsilon)
        return self.weights


class Corn(Strategy):
    name = "corn"

    def __init__(self, window: int = 5, rho: float = 0.1):
        self.window = window
        self.rho = rho

    def reset(self, n_assets):
        super().reset(n_assets)
        self.history: list[np.ndarray] = []

    def step(self, relatives):
        self.history.append(np.asarray(relatives, dtype=np.float64))
        if len(self.history) < 2 * self.window + 1:
            return uniform_weights(self.n)
        self.weights = corn_weights(
            np.stack(self.history), window=self.window, rho=self.rho
        )
        return self.weights


REGISTRY = {
    "crp": Crp,
    "eg": Eg,
    "olmar": Olmar,
    "pamr": Pamr,
    "rmr": Rmr,
    "corn": Corn,
}


def make_strategy(name: str, **params) -> Strategy:
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown baseline {name!r}; known: {sorted(REGISTRY)}"
        ) from None
    return cls(**params)
