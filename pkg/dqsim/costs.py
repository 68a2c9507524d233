"""
Leading-order quantum communication costs of d-PF, d-TS and d-QSP for the general, k-local and
1D nearest-neighbour models. Constants are set to one; the formula column states what is evaluated.
"""
import math
from typing import Dict, Iterable, List, Tuple

import pandas as pd

from dqsim.dpf import commutator_norm_for_order
from dqsim.errors import ConfigError, DomainError
from dqsim.pauli import ClusteredHamiltonian, flatten, induced_one_norm

MODELS = ("general", "klocal", "nn")
PROTOCOLS = ("dpf", "dts", "dqsp")
REQUIRED = {
    "general": ("gamma", "edges", "alpha", "alpha_comm", "t", "epsilon", "p"),
    "klocal": ("gamma", "n", "k", "induced_norm", "alpha", "t", "epsilon", "p"),
    "nn": ("gamma", "alpha", "t", "epsilon", "p"),
}
COLUMNS = ["model", "protocol", "predicted_cost", "formula", "driver", "doubling_ratio"]
TAYLOR = "log(alpha t/eps) / log log(alpha t/eps)"


def taylor_factor(x: float) -> float:
    """log x / log log x, clamped at its minimum x = e^e"""
    x = max(x, math.e**math.e)
    return math.log(x) / math.log(math.log(x))


def _check(model: str, params: Dict[str, float]):
    if model not in MODELS:
        raise ConfigError(f"Unknown cost model '{model}', use one of {MODELS}")
    missing = [name for name in REQUIRED[model] if params.get(name) is None]
    if missing:
        raise ConfigError(f"Cost model '{model}' needs parameters {missing}")
    if params["epsilon"] <= 0 or params["gamma"] < 1 or params["p"] < 1:
        raise DomainError(f"Cost parameters out of range: {params}")


def _general(gamma, edges, alpha, alpha_comm, t, epsilon, p, **_) -> List[Tuple]:
    log_net = math.log2(edges + gamma)
    at = alpha * t
    ratio = 2 * math.log2(edges + 2 * gamma) / log_net if log_net > 0 else math.nan
    return [
        (
            "dpf",
            gamma * alpha_comm ** (1 / p) * edges * t ** (1 + 1 / p) / epsilon ** (1 / p),
            "Gamma alpha_comm^(1/p) |E| t^(1+1/p) / eps^(1/p)",
            "t",
            2 ** (1 + 1 / p),
        ),
        (
            "dts",
            log_net * gamma * at * taylor_factor(at / epsilon),
            f"log2(|E| + Gamma) Gamma alpha t {TAYLOR}",
            "gamma",
            ratio,
        ),
        (
            "dqsp",
            log_net * gamma * (at + math.log(1 / epsilon)),
            "log2(|E| + Gamma) Gamma (alpha t + log(1/eps))",
            "gamma",
            ratio,
        ),
    ]


def _klocal(gamma, n, k, induced_norm, alpha, t, epsilon, p, **_) -> List[Tuple]:
    size = gamma * n
    at = alpha * t
    log_size = math.log2(size)
    ratio = 2 * math.log2(2 * size) / log_size if log_size > 0 else math.nan
    return [
        (
            "dpf",
            min(k, gamma) * size**k * induced_norm * alpha ** (1 / p) * t ** (1 + 1 / p) / epsilon ** (1 / p),
            "min(k, Gamma) (Gamma n)^k |||H|||_1 alpha^(1/p) t^(1+1/p) / eps^(1/p)",
            "t",
            2 ** (1 + 1 / p),
        ),
        (
            "dts",
            k * log_size * gamma * at * taylor_factor(at / epsilon),
            f"k log2(Gamma n) Gamma alpha t {TAYLOR}",
            "gamma",
            ratio,
        ),
        (
            "dqsp",
            k * log_size * gamma * (at + math.log(1 / epsilon)),
            "k log2(Gamma n) Gamma (alpha t + log(1/eps))",
            "gamma",
            ratio,
        ),
    ]


def _nn(gamma, alpha, t, epsilon, p, **_) -> List[Tuple]:
    at = alpha * t
    log_gamma = math.log2(gamma)
    ratio = 2 * math.log2(2 * gamma) / log_gamma if log_gamma > 0 else math.nan
    return [
        (
            "dpf",
            gamma ** (1 + 1 / p) * t ** (1 + 1 / p) / epsilon ** (1 / p),
            "Gamma^(1+1/p) t^(1+1/p) / eps^(1/p)",
            "gamma",
            2 ** (1 + 1 / p),
        ),
        (
            "dts",
            log_gamma * gamma * at * taylor_factor(at / epsilon),
            f"log2(Gamma) Gamma alpha t {TAYLOR}",
            "gamma",
            ratio,
        ),
        (
            "dqsp",
            log_gamma * gamma * (at + math.log(1 / epsilon)),
            "log2(Gamma) Gamma (alpha t + log(1/eps))",
            "gamma",
            ratio,
        ),
    ]


def cost_table(model: str, params: Dict[str, float]) -> pd.DataFrame:
    """
    Predicted cost of all three protocols under one model. `driver` names the parameter whose doubling
    multiplies the prediction by `doubling_ratio`. A single node never communicates.
    """
    _check(model, params)
    rows = {"general": _general, "klocal": _klocal, "nn": _nn}[model](**params)
    table = pd.DataFrame([(model,) + row for row in rows], columns=COLUMNS)
    if params["gamma"] == 1:
        table["predicted_cost"] = 0.0
    return table


def params_from_hamiltonian(ch: ClusteredHamiltonian, t: float, epsilon: float, p: int = 1) -> Dict[str, float]:
    """Every model parameter measured on a clustered Hamiltonian"""
    h = flatten(ch)
    k = max((len(s.support) for _, s in h.terms), default=1)
    return {
        "gamma": ch.gamma,
        "edges": ch.num_edges,
        "alpha": ch.alpha,
        "alpha_comm": commutator_norm_for_order(ch, p),
        "n": ch.qubit_count / ch.gamma,
        "k": k,
        "induced_norm": induced_one_norm(h, k),
        "t": t,
        "epsilon": epsilon,
        "p": p,
    }


def cost_tables(models: Iterable[str], params: Dict[str, float]) -> pd.DataFrame:
    return pd.concat([cost_table(m, params) for m in models], ignore_index=True)
